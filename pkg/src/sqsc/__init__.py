"""Spectral clustering with sparsified, quantized and binarized kernels."""
from .nonlin import HermiteCoefficients, Nonlinearity, coefficients, parse_spec
from .rmt import SpectrumModel

__all__ = ["HermiteCoefficients", "Nonlinearity", "SpectrumModel", "coefficients", "parse_spec"]
__version__ = "0.1.0"
