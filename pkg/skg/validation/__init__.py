"""Cross-solver validation suite"""
