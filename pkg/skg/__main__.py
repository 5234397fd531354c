import sys

from skg.cli import main

sys.exit(main())
