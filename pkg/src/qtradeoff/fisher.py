"""Classical, SLD and RLD Fisher information on Bloch coordinates.

Quadratic forms ``x^T J^{-1} x`` are evaluated with the Moore-Penrose
pseudoinverse on the support of ``J`` and are ``math.inf`` when ``x`` has a
component outside it. ``math.inf`` is the package-wide INFINITE value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quantum_core import (
    DensityMatrix,
    DimensionMismatchError,
    KrausMeasurement,
    Povm,
    outcome_distribution,
)
from .su_basis import GeneratorBasis, build_su_basis

INFINITE = math.inf

PROB_CUTOFF = 1e-12
SLD_DIVISOR_CUTOFF = 1e-12
OFF_SUPPORT_ATOL = 1e-10
SUPPORT_RTOL = 1e-10
# Fisher eigenvalues below this are round-off even when J is tiny overall.
SUPPORT_ATOL = 1e-14
SUPPORT_MEMBERSHIP_RTOL = 1e-9
NEGATIVE_CLAMP = 1e-9


class RankDeficientStateError(ValueError):
    pass


def ext_mul(a: float, b: float) -> float:
    """Product on ``[0, inf]`` where INFINITE absorbs, including ``0 * inf``."""
    if math.isinf(a) or math.isinf(b):
        return INFINITE
    return a * b


def clamp_nonnegative(value: float, slack: float = NEGATIVE_CLAMP) -> float:
    if math.isinf(value):
        return value
    if value < 0 and value >= -slack:
        return 0.0
    return value


def _support_from_matrix(matrix: np.ndarray, restrict: np.ndarray | None = None):
    """Eigenvectors/values spanning the numerical range of a PSD matrix.

    ``restrict`` is an orthonormal column basis; the range is taken of the
    compression of ``matrix`` onto it.
    """
    if restrict is not None:
        p = restrict @ restrict.conj().T
        matrix = p @ matrix @ p
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    top = evals[-1] if evals.size else 0.0
    cutoff = max(SUPPORT_RTOL * top, SUPPORT_ATOL)
    keep = evals > cutoff
    return evecs[:, keep], evals[keep]


def _support_from_factor(factor: np.ndarray, restrict: np.ndarray | None = None):
    """Same as ``_support_from_matrix`` for ``J = B^T B``, read off the SVD of ``B``.

    Working with the factor halves the loss of relative precision on small
    eigenvalues compared with diagonalizing ``J`` itself.
    """
    b = factor if restrict is None else factor @ restrict
    if b.size == 0:
        return np.zeros((factor.shape[1], 0)), np.zeros(0)
    _, s, vh = np.linalg.svd(b, full_matrices=False)
    vals = s * s
    cutoff = max(SUPPORT_RTOL * vals[0], SUPPORT_ATOL)
    keep = vals > cutoff
    vecs = vh[keep].T
    if restrict is not None:
        vecs = restrict @ vecs
    return vecs, vals[keep]


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Fisher information with an explicit support subspace.

    ``support`` has orthonormal columns; ``support_values`` are the matching
    eigenvalues used by the pseudoinverse.
    """

    matrix: np.ndarray
    kind: str
    support: np.ndarray = field(default=None)
    support_values: np.ndarray = field(default=None)
    flagged: np.ndarray | None = None
    factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.support is None:
            if self.factor is not None:
                vecs, vals = _support_from_factor(self.factor)
            else:
                vecs, vals = _support_from_matrix(self.matrix)
            object.__setattr__(self, "support", vecs)
            object.__setattr__(self, "support_values", vals)

    @property
    def rank(self) -> int:
        return self.support.shape[1]

    def pinv(self) -> np.ndarray:
        u, s = self.support, self.support_values
        return (u / s) @ u.conj().T

    def in_support(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        nx = np.linalg.norm(x)
        if nx == 0:
            return True
        resid = x - self.support @ (self.support.conj().T @ x)
        return bool(np.linalg.norm(resid) <= SUPPORT_MEMBERSHIP_RTOL * nx)


@dataclass(frozen=True, eq=False)
class StateFamily:
    """Base state and its derivatives ``D_mu`` along each Bloch coordinate."""

    rho: np.ndarray
    derivatives: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def num_params(self) -> int:
        return self.derivatives.shape[0]


def identity_family(rho: DensityMatrix) -> StateFamily:
    basis = build_su_basis(rho.dim)
    return StateFamily(rho.matrix, np.array(basis.generators))


def pushforward_family(rho: DensityMatrix, m: KrausMeasurement) -> StateFamily:
    """Image family ``Lambda(rho(theta))``; derivatives are ``Lambda(lam_mu)``."""
    if m.d_in != rho.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} vs measurement input {m.d_in}")
    basis = build_su_basis(rho.dim)
    derivs = np.array([m.apply(g) for g in basis.generators])
    return StateFamily(m.apply(rho.matrix), derivs)


def _check_povm_state(rho: DensityMatrix, povm: Povm):
    if rho.dim != povm.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} vs POVM dim {povm.dim}")


def classical_fisher(rho: DensityMatrix, povm: Povm) -> FisherMatrix:
    """``J = sum_i v_i v_i^T / p_i`` over outcomes with ``p_i > 1e-12``."""
    _check_povm_state(rho, povm)
    p = outcome_distribution(rho, povm)
    keep = p > PROB_CUTOFF
    b = povm.v[keep] / np.sqrt(p[keep, None])
    return FisherMatrix(b.T @ b, "classical", factor=b)


def family_classical_fisher(family: StateFamily, effects: np.ndarray) -> FisherMatrix:
    """Classical Fisher of measuring ``effects`` on every member of ``family``."""
    effects = np.asarray(effects)
    if effects.shape[1] != family.dim:
        raise DimensionMismatchError("effects do not act on the family's space")
    p = np.einsum("ij,kji->k", family.rho, effects).real
    dp = np.einsum("mij,kji->km", family.derivatives, effects).real
    keep = p > PROB_CUTOFF
    b = dp[keep] / np.sqrt(p[keep, None])
    return FisherMatrix(b.T @ b, "classical", factor=b)


@dataclass(frozen=True)
class SldResult:
    operators: np.ndarray
    out_of_support: np.ndarray
    allowed: np.ndarray


def sld_operators(family: StateFamily) -> SldResult:
    """Solve ``D_mu = (rho L_mu + L_mu rho) / 2`` in the eigenbasis of rho.

    Directions whose derivative has weight on the kernel of rho are flagged
    in ``out_of_support``; ``allowed`` spans the coordinate directions whose
    combined derivative stays on the support.
    """
    evals, u = np.linalg.eigh(0.5 * (family.rho + family.rho.conj().T))
    evals = np.clip(evals, 0.0, None)
    denom = evals[:, None] + evals[None, :]
    ok = denom > SLD_DIVISOR_CUTOFF
    dt = np.einsum("ji,mjk,kl->mil", u.conj(), family.derivatives, u)
    lt = np.where(ok, 2.0 * dt / np.where(ok, denom, 1.0), 0.0)
    ops = np.einsum("ij,mjk,lk->mil", u, lt, u.conj())
    ops = 0.5 * (ops + ops.conj().transpose(0, 2, 1))

    bad = dt[:, ~ok]
    flagged = np.abs(bad).max(axis=1) > OFF_SUPPORT_ATOL if bad.size else np.zeros(family.num_params, bool)
    n = family.num_params
    if flagged.any():
        # null space of theta -> kernel block of sum theta_mu D_mu
        b = np.concatenate([bad.real, bad.imag], axis=1).T
        _, s, vh = np.linalg.svd(b)
        rank = int(np.sum(s > OFF_SUPPORT_ATOL))
        allowed = vh[rank:].T
    else:
        allowed = np.eye(n)
    return SldResult(ops, flagged, allowed)


def sld_residual(family: StateFamily, ops: np.ndarray) -> np.ndarray:
    rho = family.rho
    anti = 0.5 * (np.einsum("ij,mjk->mik", rho, ops) + np.einsum("mij,jk->mik", ops, rho))
    return np.linalg.norm(family.derivatives - anti, axis=(1, 2))


def sld_fisher(family: StateFamily) -> FisherMatrix:
    """``[J_S]_{mu nu} = Re Tr(rho L_mu L_nu)`` with out-of-support directions excluded."""
    res = sld_operators(family)
    ops = res.operators
    j = np.einsum("ij,mjk,nki->mn", family.rho, ops, ops).real
    j = 0.5 * (j + j.T)
    # J_S = B^T B with columns of B the real/imag parts of vec(L_mu rho^{1/2})
    evals, u = np.linalg.eigh(0.5 * (family.rho + family.rho.conj().T))
    root = (u * np.sqrt(np.clip(evals, 0.0, None))) @ u.conj().T
    cols = np.einsum("mij,jk->mik", ops, root).reshape(family.num_params, -1)
    b = np.concatenate([cols.real, cols.imag], axis=1).T
    restrict = None if not res.out_of_support.any() else res.allowed
    vecs, vals = _support_from_factor(b, restrict)
    return FisherMatrix(j, "sld", vecs, vals, flagged=res.out_of_support, factor=b)


def rld_fisher(family: StateFamily) -> FisherMatrix:
    """``[J_R]_{mu nu} = Tr(rho L'_nu L'_mu)`` with ``L'_mu = rho^{-1} D_mu``."""
    evals = np.linalg.eigvalsh(family.rho)
    if evals[0] <= 1e-10:
        raise RankDeficientStateError(f"RLD needs a full-rank state (min eigenvalue {evals[0]:.3e})")
    rinv = np.linalg.inv(family.rho)
    lp = np.einsum("ij,mjk->mik", rinv, family.derivatives)
    j = np.einsum("ij,njk,mki->mn", family.rho, lp, lp)
    return FisherMatrix(0.5 * (j + j.conj().T), "rld")


def inverse_correlation_matrices(rho: DensityMatrix, basis: GeneratorBasis | None = None):
    """Symmetrized (real) and plain (complex) covariance matrices of the generators."""
    basis = basis or build_su_basis(rho.dim)
    if basis.dim != rho.dim:
        raise DimensionMismatchError("basis and state dimensions differ")
    g = basis.generators
    mean = np.einsum("ij,mji->m", rho.matrix, g)
    second = np.einsum("ij,mjk,nki->mn", rho.matrix, g, g)
    c = second - np.outer(mean, mean)
    return c.real.copy(), c


def quadform_pinv(j: FisherMatrix, x: np.ndarray) -> float:
    """``x^T J^+ x`` if ``x`` lies in the support of ``J``, otherwise INFINITE."""
    x = np.asarray(x, dtype=float)
    if x.shape != (j.matrix.shape[0],):
        raise DimensionMismatchError(f"vector length {x.shape} vs Fisher size {j.matrix.shape[0]}")
    if not j.in_support(x):
        return INFINITE
    coeffs = j.support.conj().T @ x
    value = float(np.sum(np.abs(coeffs) ** 2 / j.support_values))
    return clamp_nonnegative(value)


def psd_leq(a, b) -> bool:
    """True iff ``a <= b`` in the positive-semidefinite order (with slack)."""
    a = getattr(a, "matrix", a)
    b = getattr(b, "matrix", b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    diff = b - a
    lo = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))[0]
    return bool(lo >= -1e-8 * max(1.0, np.linalg.norm(b, 2)))
