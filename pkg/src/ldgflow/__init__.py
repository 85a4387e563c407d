"""Local discontinuous Galerkin solver for steady p-Stokes and
p-Navier-Stokes systems with power-law (p, delta)-structure rheology."""

__version__ = "0.1.0"
