"""Duhamel/Picard solver and the perturbative series"""
