"""Lattice geometry, Fourier transforms and the retarded kernels"""
