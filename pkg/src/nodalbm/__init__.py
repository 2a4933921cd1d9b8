"""Brownian-motion and heat-diffusion tools for nodal domains of Laplace eigenfunctions."""

__version__ = "0.1.0"
