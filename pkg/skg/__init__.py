"""
SKG - Stochastic Klein-Gordon Lattice Toolkit
Spectral kernels, Duhamel/Picard solver, perturbative series with tree diagrams
and Euler-Maruyama simulation of the damped stochastic Klein-Gordon equation
on a periodic lattice.
"""

__version__ = "1.0.0"
