"""Typed rooted trees for the perturbative orders"""
