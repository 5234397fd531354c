"""Euler-Maruyama simulation of the lattice SPDE"""
