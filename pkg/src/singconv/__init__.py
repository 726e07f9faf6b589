"""Singular elliptic problems with convection term: constructions, solvers, verifiers."""
