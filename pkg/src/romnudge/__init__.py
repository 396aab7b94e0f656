"""Reduced-order modeling of viscous Burgers flow with learned nudging corrections."""

__version__ = "0.1.0"
