"""Orthonormal su(d) generators and Bloch-coordinate conversions.

Every state, observable and POVM effect in this package is expressed in the
frame ``A = a0 * I + sum_mu a_mu * lam_mu`` where the ``lam_mu`` are the
generalized Gell-Mann matrices rescaled so that ``Tr(lam_mu lam_nu) = delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

HERMITIAN_RTOL = 1e-10
PSD_ATOL = 1e-10


class InvalidDimensionError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Ordered traceless Hermitian generators with ``Tr(lam_mu lam_nu) = delta``.

    ``generators`` has shape ``(d*d - 1, d, d)``. Ordering: symmetric
    off-diagonal pairs (row-major), antisymmetric pairs, then diagonals.
    """

    dim: int
    generators: np.ndarray

    @property
    def size(self) -> int:
        return self.dim * self.dim - 1

    def gram(self) -> np.ndarray:
        return np.einsum("mij,nji->mn", self.generators, self.generators)


@lru_cache(maxsize=None)
def _cached_basis(d: int) -> GeneratorBasis:
    gens = []
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1.0
        gens.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        gens.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        gens.append(np.sqrt(2.0 / (l * (l + 1))) * np.diag(diag).astype(complex))
    arr = np.array(gens) / np.sqrt(2.0)
    arr.setflags(write=False)
    return GeneratorBasis(dim=d, generators=arr)


def build_su_basis(d: int) -> GeneratorBasis:
    """Return the normalized generalized Gell-Mann basis of su(d).

    Raises
    ------
    InvalidDimensionError
        If ``d < 2``.
    """
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {d!r}")
    return _cached_basis(int(d))


def hermiticity_residual(h: np.ndarray) -> float:
    norm = np.linalg.norm(h)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(h - h.conj().T) / norm)


def _check_square(h: np.ndarray, d: int, what: str = "matrix") -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (d, d):
        raise ValueError(f"{what} has shape {h.shape}, expected {(d, d)}")
    return h


def decompose_hermitian(h: np.ndarray, basis: GeneratorBasis) -> tuple[float, np.ndarray]:
    """Split a Hermitian matrix into ``(x0, x)`` with ``h = x0 I + x . lam``."""
    h = _check_square(h, basis.dim)
    if hermiticity_residual(h) > HERMITIAN_RTOL:
        raise NotHermitianError("matrix is not Hermitian")
    x0 = float(np.trace(h).real) / basis.dim
    x = np.einsum("ij,mji->m", h, basis.generators).real
    return x0, x


def reconstruct(x0: float, x: np.ndarray, basis: GeneratorBasis) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.size,):
        raise ValueError(f"coordinate vector has length {x.shape}, expected {basis.size}")
    return x0 * np.eye(basis.dim, dtype=complex) + np.tensordot(x, basis.generators, axes=1)


def min_eigenvalue(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])


def state_from_coords(theta: np.ndarray, basis: GeneratorBasis):
    """Density matrix ``I/d + theta . lam``; raises if it is not PSD."""
    from .quantum_core import DensityMatrix

    rho = reconstruct(1.0 / basis.dim, theta, basis)
    lo = min_eigenvalue(rho)
    if lo < -PSD_ATOL:
        raise InvalidStateError(f"coordinates do not give a PSD matrix (min eigenvalue {lo:.3e})")
    return DensityMatrix(rho)


def coords_from_state(rho, basis: GeneratorBasis) -> np.ndarray:
    mat = getattr(rho, "matrix", rho)
    mat = _check_square(mat, basis.dim, "state")
    return np.einsum("ij,mji->m", mat, basis.generators).real
