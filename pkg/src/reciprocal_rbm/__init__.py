"""Binary restricted Boltzmann machines analyzed in reciprocal (SVD) space."""
from .rbm import RbmParams
from .spectral import ReciprocalFrame, decompose

__all__ = ["RbmParams", "ReciprocalFrame", "decompose"]
