"""Quadratic energies ``V(x) = x^T A x / 2`` and spectral classification of ``A``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POSITIVE_DEFINITE = "positive-definite"
PSD_RANK_DEFICIENT = "psd-rank-deficient"
INDEFINITE = "indefinite"

DEFAULT_EIG_TOL = 1e-9
ZERO_ENTRY_TOL = 1e-9


def _norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def classify(A, tol: float = DEFAULT_EIG_TOL) -> tuple[str, np.ndarray]:
    """Classify a symmetric matrix and return ``(label, kernel_basis)``.

    ``kernel_basis`` has one orthonormal vector per row, spanning the
    eigenspaces whose eigenvalues are within ``tol * ||A||`` of zero; it is
    empty for positive definite and indefinite matrices.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    scale = _norm(A)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    A = (A + A.T) / 2
    n = A.shape[0]
    evals, evecs = np.linalg.eigh(A)
    thr = tol * scale
    if np.all(evals > thr):
        return POSITIVE_DEFINITE, np.zeros((0, n))
    if np.all(evals >= -thr):
        return PSD_RANK_DEFICIENT, evecs[:, np.abs(evals) <= thr].T.copy()
    return INDEFINITE, np.zeros((0, n))


@dataclass(frozen=True, eq=False)
class QuadraticEnergy:
    A: np.ndarray
    classification: str
    kernel_basis: np.ndarray

    @classmethod
    def from_matrix(cls, A, tol: float = DEFAULT_EIG_TOL) -> "QuadraticEnergy":
        A = np.asarray(A, dtype=float)
        label, kernel = classify(A, tol)
        A = (A + A.T) / 2
        A.setflags(write=False)
        kernel.setflags(write=False)
        return cls(A, label, kernel)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def norm(self) -> float:
        return _norm(self.A)

    def value(self, x) -> float:
        x = _as_vector(x, self.n)
        return 0.5 * float(x @ self.A @ x)

    def gradient(self, x) -> np.ndarray:
        return self.A @ _as_vector(x, self.n)

    def values(self, states: np.ndarray) -> np.ndarray:
        """Energy of every row of ``states``."""
        states = np.asarray(states, dtype=float)
        return 0.5 * np.einsum("ki,ij,kj->k", states, self.A, states)

    def kernel_is_zero_free(self) -> bool:
        """True iff no nonzero kernel vector has a zero entry.

        That needs ``dim ker A <= 1``: with two independent kernel vectors some
        combination of them vanishes in any chosen coordinate.
        """
        if self.classification == INDEFINITE:
            raise ValueError("zero-free kernel test is only meaningful for PSD matrices")
        k = self.kernel_basis.shape[0]
        if k == 0:
            return True
        if k > 1:
            return False
        v = self.kernel_basis[0]
        return bool(np.all(np.abs(v) > ZERO_ENTRY_TOL * np.linalg.norm(v)))

    def kernel_distance(self, point) -> float:
        """Euclidean distance from ``point`` to ``ker A``."""
        x = _as_vector(point, self.n)
        B = self.kernel_basis
        return float(np.linalg.norm(x - B.T @ (B @ x)))


def value(E: QuadraticEnergy, x) -> float:
    return E.value(x)


def gradient(E: QuadraticEnergy, x) -> np.ndarray:
    return E.gradient(x)


def kernel_is_zero_free(E: QuadraticEnergy) -> bool:
    return E.kernel_is_zero_free()


def disagreement(L, x) -> float:
    """``x^T L x``, i.e. the weighted sum of squared differences across edges."""
    L = np.asarray(L, dtype=float)
    x = _as_vector(x, L.shape[0])
    return float(x @ L @ x)
