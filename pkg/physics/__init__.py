"""Lattice geometry, Hamiltonian model and the dense state-vector oracle."""
