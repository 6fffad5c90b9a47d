"""Numerical laboratory for anisotropic norms, thresholds and length spectra of Anosov maps and flows."""

__version__ = "0.1.0"
