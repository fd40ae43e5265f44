"""Wigner transforms, phase-space Born rule, negativity, positivity tests.

W_rho(u) = (1/d) Tr(A_u rho) for states; W_E(u) = Tr(A_u E) for effects
(no 1/d).  Values are stored flat in phase-point index order.  Transforms
contract one qudit at a time, so no p^{2n} operator stack is ever built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import require_odd_prime
from .weyl import weyl_table

__all__ = [
    "WignerFunction",
    "Povm",
    "validate_state",
    "wigner_of_state",
    "wigner_of_effect",
    "state_from_wigner",
    "born_probability",
    "negativity_F",
    "is_positively_represented",
]


@dataclass(frozen=True)
class WignerFunction:
    """Real quasi-probability values over the p^{2n} grid, flat in index order."""

    values: np.ndarray
    p: int
    n: int
    kind: str  # "state" | "effect"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.p ** (2 * self.n):
            raise ValueError(f"expected {self.p ** (2 * self.n)} values, got {v.size}")
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        """Shape (p^2,)*n, one axis per qudit, block index a1*p + a2."""
        return self.values.reshape((self.p**2,) * self.n)


@dataclass(frozen=True)
class Povm:
    """Named effects; complete (sum to identity) and PSD up to tolerance."""

    labels: tuple
    effects: tuple  # matching tuple of dense matrices

    def __post_init__(self):
        if len(self.labels) != len(self.effects) or not self.effects:
            raise ValueError("labels and effects must align and be nonempty")
        dim = self.effects[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for label, E in zip(self.labels, self.effects):
            if E.shape != (dim, dim):
                raise ValueError(f"effect {label} has shape {E.shape}")
            if np.max(np.abs(E - E.conj().T)) > 1e-9:
                raise ValueError(f"effect {label} is not Hermitian")
            if np.linalg.eigvalsh(E).min() < -1e-9:
                raise ValueError(f"effect {label} is not PSD")
            total += E
        if np.max(np.abs(total - np.eye(dim))) > 1e-9:
            raise ValueError("effects do not sum to the identity")

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]


def _dims(M: np.ndarray, p: int) -> int:
    d = M.shape[0]
    n = int(round(np.log(d) / np.log(p)))
    if p**n != d or M.shape != (d, d):
        raise ValueError(f"matrix shape {M.shape} is not p^n x p^n for p={p}")
    return n


def validate_state(rho: np.ndarray, p: int) -> None:
    """Hermitian to 1e-12, unit trace to 1e-10, min eigenvalue >= -1e-9."""
    require_odd_prime(p)
    _dims(rho, p)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ValueError(f"state trace {np.trace(rho).real} != 1")
    low = np.linalg.eigvalsh(rho).min()
    if low < -1e-9:
        raise ValueError(f"state has negative eigenvalue {low}")


def _contract(M: np.ndarray, p: int, n: int) -> np.ndarray:
    """Tr(A_u M) for all u, as a flat real array in point-index order."""
    singles = weyl_table(p, 1).single_A  # (p^2, p, p), A[u, row, col]
    out = M.reshape((p,) * (2 * n))
    for j in range(n):
        # contract row axis 0 and matching col axis (n - j) of the remainder
        out = np.tensordot(out, singles, axes=([0, n - j], [2, 1]))
    return np.real(out.reshape(-1))


def wigner_of_state(rho: np.ndarray, p: int) -> WignerFunction:
    """W_rho(u) = (1/d) Tr(A_u rho); sums to 1 for a valid state."""
    validate_state(rho, p)
    n = _dims(rho, p)
    return WignerFunction(_contract(rho, p, n) / p**n, p, n, "state")


def wigner_of_effect(E: np.ndarray, p: int) -> WignerFunction:
    """W_E(u) = Tr(A_u E); all-ones for E = I."""
    require_odd_prime(p)
    n = _dims(E, p)
    if np.max(np.abs(E - E.conj().T)) > 1e-9:
        raise ValueError("effect is not Hermitian")
    return WignerFunction(_contract(E, p, n), p, n, "effect")


def state_from_wigner(W, p: int, n: int) -> np.ndarray:
    """Sum_u W(u) A_u; Hermitian with trace = sum(W), not necessarily PSD."""
    require_odd_prime(p)
    values = W.values if isinstance(W, WignerFunction) else np.asarray(W, dtype=float).ravel()
    if values.size != p ** (2 * n):
        raise ValueError(f"expected {p ** (2 * n)} values, got {values.size}")
    singles = weyl_table(p, 1).single_A
    out = values.reshape((p**2,) * n)
    for _ in range(n):
        out = np.tensordot(out, singles, axes=([0], [0]))
    # axes are now (r1, c1, r2, c2, ...); interleave back to (rows..., cols...)
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return np.transpose(out, perm).reshape(p**n, p**n)


def born_probability(W_state: WignerFunction, W_effect: WignerFunction) -> float:
    """Pr = sum_u W_rho(u) W_E(u); equals Tr(rho E) even for negative W."""
    if (W_state.p, W_state.n) != (W_effect.p, W_effect.n):
        raise ValueError("phase spaces do not match")
    return float(np.dot(W_state.values, W_effect.values))


def negativity_F(rho: np.ndarray, p: int) -> float:
    """F(rho) = min_u Tr(A_u rho) = d * min_u W_rho(u); >= 0 iff positively represented."""
    W = wigner_of_state(rho, p)
    return float(p**W.n * W.values.min())


def is_positively_represented(M: np.ndarray, p: int, kind: str = "state", tol: float = 1e-10) -> bool:
    """True iff every Wigner value is >= -tol."""
    if kind == "state":
        W = wigner_of_state(M, p)
    elif kind == "effect":
        W = wigner_of_effect(M, p)
    else:
        raise ValueError(f"kind must be state or effect, got {kind!r}")
    return bool(W.values.min() >= -tol)
