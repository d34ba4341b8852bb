"""Numerical verification of harmonic-analysis estimates for biharmonic maps.

Submodules
----------
specfun
    Gamma, Gegenbauer, Bessel and Lambert W functions with the constant ledger.
harmonics
    Spherical harmonics on ``S^{d-1}`` and tensor-product sphere quadrature.
annulus
    Truncated harmonic expansions on annuli, exact energies and comparison lemmas.
lorentz
    Simple functions, decreasing rearrangements and Lorentz norms.
poisson
    Radial-mode Dirichlet solver on the unit ball and dyadic Wente estimates.
calculus
    Sampled jets, inversion, cutoffs and the Whitney extension.
stability
    Second variation, Pohozaev flux and Hardy-Rellich Rayleigh quotients.
harness
    Named suites and the ``verify`` command.
"""
from .checks import LemmaCheck, PreconditionError, RegistryError

__version__ = "0.1.0"

__all__ = ["LemmaCheck", "PreconditionError", "RegistryError", "__version__"]
