"""Measurement error, disturbance and the two lower bounds on their product."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fisher import (
    INFINITE,
    classical_fisher,
    clamp_nonnegative,
    ext_mul,
    pushforward_family,
    quadform_pinv,
    sld_fisher,
)
from .quantum_core import (
    DensityMatrix,
    DimensionMismatchError,
    KrausMeasurement,
    Observable,
    conditional_state,
    outcome_distribution,
    povm_from_kraus,
)

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-8
SUBSPACE_PROB_CUTOFF = 1e-12
COMMUTANT_TOL = 1e-9
EIGEN_SPLIT_TOL = 1e-7
DEFAULT_SUBSPACE_SEED = 20110617


def _check(rho: DensityMatrix, *obs: Observable):
    for o in obs:
        if o.dim != rho.dim:
            raise DimensionMismatchError(f"observable dim {o.dim} vs state dim {rho.dim}")


def variance(rho: DensityMatrix, x: Observable) -> float:
    _check(rho, x)
    m = rho.expect(x.matrix).real
    v = rho.expect(x.matrix @ x.matrix).real - m * m
    return 0.0 if v < 0 and v >= -1e-10 else float(v)


def symmetrized_covariance(rho: DensityMatrix, x: Observable, y: Observable) -> float:
    anti = x.matrix @ y.matrix + y.matrix @ x.matrix
    return float(0.5 * rho.expect(anti).real - rho.expect(x.matrix).real * rho.expect(y.matrix).real)


def covariance(rho: DensityMatrix, x: Observable, y: Observable) -> complex:
    return rho.expect(x.matrix @ y.matrix) - rho.expect(x.matrix) * rho.expect(y.matrix)


def measurement_error(rho: DensityMatrix, x: Observable, m: KrausMeasurement) -> float:
    """``x^T J(M)^{-1} x - (Delta X)^2``, INFINITE when ``x`` is unidentifiable."""
    _check(rho, x)
    if m.d_in != rho.dim:
        raise DimensionMismatchError("measurement input does not match the state")
    j = classical_fisher(rho, povm_from_kraus(m))
    return clamp_nonnegative(quadform_pinv(j, x.x) - variance(rho, x))


def disturbance(rho: DensityMatrix, y: Observable, m: KrausMeasurement) -> float:
    """``y^T J_S'^{-1} y - (Delta Y)^2`` for the post-measurement family.

    ``y`` stays on the input space; only the SLD Fisher information is taken
    on the output space of ``m``.
    """
    _check(rho, y)
    j = sld_fisher(pushforward_family(rho, m))
    return clamp_nonnegative(quadform_pinv(j, y.x) - variance(rho, y))


def heisenberg_bound(rho: DensityMatrix, x: Observable, y: Observable) -> float:
    _check(rho, x, y)
    comm = x.matrix @ y.matrix - y.matrix @ x.matrix
    return 0.25 * abs(rho.expect(comm)) ** 2


@dataclass(frozen=True, eq=False)
class SubspaceDecomposition:
    """Projectors onto simultaneous irreducible invariant subspaces of X and Y."""

    projectors: tuple
    seed: int

    def check(self, x: Observable, y: Observable) -> float:
        """Largest violation among orthogonality, completeness and invariance."""
        d = x.dim
        worst = np.linalg.norm(sum(self.projectors) - np.eye(d))
        for k, p in enumerate(self.projectors):
            worst = max(worst, np.linalg.norm(p @ p - p))
            worst = max(worst, np.linalg.norm(x.matrix @ p - p @ x.matrix))
            worst = max(worst, np.linalg.norm(y.matrix @ p - p @ y.matrix))
            for q in self.projectors[k + 1 :]:
                worst = max(worst, np.linalg.norm(p @ q))
        return float(worst)

    def weights(self, rho: DensityMatrix) -> np.ndarray:
        return np.array([rho.expect(p).real for p in self.projectors])

    def conditional_states(self, rho: DensityMatrix) -> list:
        out = []
        for p, w in zip(self.projectors, self.weights(rho)):
            out.append(None if w <= SUBSPACE_PROB_CUTOFF else DensityMatrix(p @ rho.matrix @ p / w))
        return out


def commutant_basis(mats: list[np.ndarray], tol: float = COMMUTANT_TOL) -> np.ndarray:
    """Orthonormal basis (as ``(k, n, n)``) of matrices commuting with all ``mats``."""
    n = mats[0].shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A C - C A) = (A kron I - I kron A^T) vec(C)
    rows = [np.kron(a, eye) - np.kron(eye, a.T) for a in mats]
    big = np.vstack(rows)
    _, s, vh = np.linalg.svd(big)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().reshape(-1, n, n)


def _split(
    xs: np.ndarray, ys: np.ndarray, frame: np.ndarray, rng: np.random.Generator, attempts: int = 8
) -> list[np.ndarray]:
    """Recursively split the span of ``frame`` columns into irreducible pieces."""
    comm = commutant_basis([xs, ys])
    if comm.shape[0] <= 1 or attempts == 0:
        return [frame]
    coeffs = rng.normal(size=comm.shape[0]) + 1j * rng.normal(size=comm.shape[0])
    c = np.tensordot(coeffs, comm, axes=1)
    c = 0.5 * (c + c.conj().T)
    evals, evecs = np.linalg.eigh(c)
    scale = max(1.0, np.abs(evals).max())
    groups: list[list[int]] = [[0]]
    for k in range(1, len(evals)):
        if evals[k] - evals[groups[-1][-1]] <= EIGEN_SPLIT_TOL * scale:
            groups[-1].append(k)
        else:
            groups.append([k])
    if len(groups) == 1:
        # unlucky draw; the commutant is nontrivial so try again
        return _split(xs, ys, frame, rng, attempts - 1)
    pieces = []
    for g in groups:
        v = evecs[:, g]
        pieces.extend(_split(v.conj().T @ xs @ v, v.conj().T @ ys @ v, frame @ v, rng))
    return pieces


def invariant_subspaces(x: Observable, y: Observable, seed: int = DEFAULT_SUBSPACE_SEED) -> SubspaceDecomposition:
    """Minimal subspaces invariant under both ``x`` and ``y``.

    A random Hermitian element of the commutant of {X, Y} (which is also the
    commutant of the algebra they generate) is diagonalized; its eigenspaces
    are refined until each piece has a trivial commutant.
    """
    if x.dim != y.dim:
        raise DimensionMismatchError("X and Y act on different spaces")
    rng = np.random.default_rng(seed)
    frames = _split(x.matrix, y.matrix, np.eye(x.dim, dtype=complex), rng)
    # order subspaces by their smallest basis index for reproducible output
    frames.sort(key=lambda f: int(np.argmax(np.abs(f).sum(axis=1) > 1e-8)))
    return SubspaceDecomposition(tuple(f @ f.conj().T for f in frames), seed)


def delta_q_corr_q(
    rho: DensityMatrix, x: Observable, y: Observable, decomposition: SubspaceDecomposition
) -> tuple[float, float, float]:
    """Within-subspace variances of X and Y and their symmetrized covariance."""
    _check(rho, x, y)
    dx2 = dy2 = cq = 0.0
    for w, sub in zip(decomposition.weights(rho), decomposition.conditional_states(rho)):
        if sub is None:
            continue
        dx2 += w * variance(sub, x)
        dy2 += w * variance(sub, y)
        cq += w * symmetrized_covariance(sub, x, y)
    return dx2, dy2, cq


def quantum_gram(rho: DensityMatrix, observables: list[Observable], decomposition: SubspaceDecomposition) -> np.ndarray:
    """Matrix of ``C_Q(Z_k, Z_l)``; diagonal entries are ``(Delta_Q Z_k)^2``."""
    n = len(observables)
    k = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            _, _, c = delta_q_corr_q(rho, observables[a], observables[b], decomposition)
            k[a, b] = k[b, a] = c
    return k


def attainable_bound(
    rho: DensityMatrix,
    x: Observable,
    y: Observable,
    decomposition: SubspaceDecomposition | None = None,
    check_seed: int | None = None,
) -> float:
    """``(Delta_Q X)^2 (Delta_Q Y)^2 - C_Q(X, Y)^2``, clamped at zero.

    With ``check_seed`` the decomposition is recomputed from a second seed
    and a warning is logged if the bound moves by more than 1e-6.
    """
    dec = decomposition or invariant_subspaces(x, y)
    dx2, dy2, cq = delta_q_corr_q(rho, x, y, dec)
    bound = max(dx2 * dy2 - cq * cq, 0.0)
    if check_seed is not None:
        other = attainable_bound(rho, x, y, invariant_subspaces(x, y, seed=check_seed))
        if abs(other - bound) > 1e-6:
            log.warning("attainable bound depends on decomposition seed: %.3e vs %.3e", bound, other)
    return bound


@dataclass(frozen=True)
class TradeoffReport:
    error: float
    disturbance: float
    heisenberg_bound: float
    attainable_bound: float
    product: float
    heisenberg_satisfied: bool
    attainable_satisfied: bool
    subspace_seed: int

    def as_dict(self) -> dict:
        return {
            "error": self.error,
            "disturbance": self.disturbance,
            "product": self.product,
            "heisenberg_bound": self.heisenberg_bound,
            "attainable_bound": self.attainable_bound,
            "heisenberg_satisfied": self.heisenberg_satisfied,
            "attainable_satisfied": self.attainable_satisfied,
            "subspace_seed": self.subspace_seed,
        }


def tradeoff_report(
    rho: DensityMatrix,
    x: Observable,
    y: Observable,
    m: KrausMeasurement,
    seed: int = DEFAULT_SUBSPACE_SEED,
    slack: float = BOUND_SLACK,
) -> TradeoffReport:
    eps = measurement_error(rho, x, m)
    eta = disturbance(rho, y, m)
    product = ext_mul(eps, eta)
    hb = heisenberg_bound(rho, x, y)
    ab = attainable_bound(rho, x, y, invariant_subspaces(x, y, seed=seed))
    return TradeoffReport(
        error=eps,
        disturbance=eta,
        heisenberg_bound=hb,
        attainable_bound=ab,
        product=product,
        heisenberg_satisfied=bool(product >= hb - slack),
        attainable_satisfied=bool(product >= ab - slack),
        subspace_seed=seed,
    )


def equality_conditions(rho: DensityMatrix, m: KrausMeasurement, tol: float = 1e-8) -> tuple[bool, bool]:
    """Whether every effect has rank one and the conditional states are mutually orthogonal."""
    effects = povm_from_kraus(m).effects
    rank_one = True
    for e in effects:
        s = np.linalg.eigvalsh(e)
        if np.sum(s > tol * max(1.0, s[-1])) > 1:
            rank_one = False
    p = outcome_distribution(rho, povm_from_kraus(m))
    states = [conditional_state(rho, m, i).matrix for i in range(m.num_outcomes) if p[i] > SUBSPACE_PROB_CUTOFF]
    orthogonal = all(
        abs(np.trace(a @ b)) <= tol for k, a in enumerate(states) for b in states[k + 1 :]
    )
    return rank_one, orthogonal


def is_infinite(value: float) -> bool:
    return math.isinf(value)


__all__ = [
    "INFINITE",
    "SubspaceDecomposition",
    "TradeoffReport",
    "attainable_bound",
    "commutant_basis",
    "covariance",
    "delta_q_corr_q",
    "disturbance",
    "equality_conditions",
    "heisenberg_bound",
    "invariant_subspaces",
    "is_infinite",
    "measurement_error",
    "quantum_gram",
    "symmetrized_covariance",
    "tradeoff_report",
    "variance",
]
