"""Discrete Wigner machinery for odd-prime qudits.

Phase-space arithmetic over Z_p, Heisenberg-Weyl and phase-point operators,
Wigner transforms and negativity, stabilizer-state geometry with LP hull
membership, a classical hidden-variable sampler for Clifford circuits with a
dense Born-rule oracle, and a distillation positivity check.
"""

from .fields import (
    CliffordElement,
    apply_affine,
    inv2,
    is_symplectic,
    require_odd_prime,
    symplectic_form,
)

__version__ = "0.1.0"

FORMAT_VERSION = 1
