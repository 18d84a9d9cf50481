"""Optimal retrieval measurement and the error-disturbance optimal scheme.

The optimal scheme performs, with probability ``w1``, a rank-one measurement
in the eigenbasis of ``Z1`` and otherwise one in the eigenbasis of ``Z2``,
writing the outcome into orthogonal states of a ``2d``-dimensional output.
``Z1`` and ``Z2`` are linear combinations of ``X`` and ``Y`` chosen so that

    a^T D K D b = 0,   D = diag(w2, -w1),

where ``X = a1 Z1 + a2 Z2``, ``Y = b1 Z1 + b2 Z2`` and ``K`` is the matrix of
within-subspace covariances of ``(Z1, Z2)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensembles import random_observable, random_rank1_measurement, random_state
from .errdist import (
    SubspaceDecomposition,
    attainable_bound,
    disturbance,
    heisenberg_bound,
    invariant_subspaces,
    measurement_error,
    quantum_gram,
)
from .fisher import (
    INFINITE,
    StateFamily,
    ext_mul,
    sld_fisher,
    sld_operators,
)
from .quantum_core import (
    DensityMatrix,
    DimensionMismatchError,
    KrausMeasurement,
    Observable,
    projective_measurement,
)

log = logging.getLogger(__name__)

SCAN_POINTS = 720
ANGLE_TOL = 1e-10
VIOLATION_SLACK = 1e-7


class NoRetrievalError(ValueError):
    pass


class ConstructionFailedError(RuntimeError):
    def __init__(self, message: str, residual_curve: np.ndarray | None = None):
        super().__init__(message)
        self.residual_curve = residual_curve


def optimal_retrieval(family: StateFamily, y: np.ndarray) -> KrausMeasurement:
    """Projective measurement of the SLD operator ``sum_mu (J_S^+ y)_mu L_mu``.

    Its classical Fisher information reproduces ``y^T J_S^+ y`` for the family.
    """
    y = np.asarray(y, dtype=float)
    d = family.dim
    if not np.any(y):
        return KrausMeasurement([[np.eye(d)]])
    j = sld_fisher(family)
    proj = j.support @ (j.support.T @ y)
    if np.linalg.norm(proj) <= 1e-9 * np.linalg.norm(y):
        raise NoRetrievalError("the direction carries no information in this family")
    dual = j.pinv() @ proj
    ops = sld_operators(family).operators
    ly = np.tensordot(dual, ops, axes=1)
    ly = 0.5 * (ly + ly.conj().T)
    if d == 1:
        return KrausMeasurement([[np.eye(1)]])
    return projective_measurement(Observable(ly))


@dataclass(frozen=True, eq=False)
class OptimalSchemeParams:
    z1: Observable
    z2: Observable
    w1: float
    w2: float
    a: np.ndarray
    b: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    gram: np.ndarray
    residual: float
    family: str
    angle: float
    decomposition: SubspaceDecomposition = field(repr=False)

    def reconstruction_error(self, x: Observable, y: Observable) -> float:
        ex = np.linalg.norm(self.a[0] * self.z1.matrix + self.a[1] * self.z2.matrix - x.matrix)
        ey = np.linalg.norm(self.b[0] * self.z1.matrix + self.b[1] * self.z2.matrix - y.matrix)
        return float(max(ex, ey))


def _phase_fixed(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = int(np.argmax(np.abs(col) > 1e-12))
        out[:, k] = col * (abs(col[idx]) / col[idx])
    return out


def block_eigenbasis(z: Observable, decomposition: SubspaceDecomposition) -> np.ndarray:
    """Eigenvectors of ``z`` taken inside each invariant subspace, ascending eigenvalue."""
    vals, vecs = [], []
    for p in decomposition.projectors:
        pe, pv = np.linalg.eigh(p)
        frame = pv[:, pe > 0.5]
        ev, ew = np.linalg.eigh(frame.conj().T @ z.matrix @ frame)
        vals.extend(ev)
        vecs.append(frame @ ew)
    vecs = np.hstack(vecs)
    order = np.argsort(np.asarray(vals), kind="stable")
    return _phase_fixed(vecs[:, order])


def _coefficients(family: str, angle: float) -> np.ndarray:
    """Rows give ``Z1`` and ``Z2`` as combinations of ``(X, Y)``."""
    c, s = math.cos(angle), math.sin(angle)
    if family == "fix-z1":
        return np.array([[1.0, 0.0], [c, s]])
    return np.array([[c, s], [0.0, 1.0]])


def _constraint(t: np.ndarray, gram_xy: np.ndarray, w1: float) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    inv = np.linalg.inv(t)
    a, b = inv[0], inv[1]
    k = t @ gram_xy @ t.T
    dmat = np.diag([1.0 - w1, -w1])
    return float(a @ dmat @ k @ dmat @ b), a, b, k


def _roots(family: str, gram_xy: np.ndarray, w1: float) -> tuple[list[float], np.ndarray]:
    grid = np.linspace(0.0, math.pi, SCAN_POINTS + 1)[1:-1]
    f = np.array([_constraint(_coefficients(family, g), gram_xy, w1)[0] for g in grid])
    scale = max(1.0, float(np.max(np.abs(gram_xy))))
    roots = [float(g) for g, v in zip(grid, f) if abs(v) <= 1e-14 * scale]
    for k in range(len(grid) - 1):
        if f[k] * f[k + 1] < 0:
            lo, hi, flo = grid[k], grid[k + 1], f[k]
            while hi - lo > ANGLE_TOL:
                mid = 0.5 * (lo + hi)
                fm = _constraint(_coefficients(family, mid), gram_xy, w1)[0]
                if fm == 0:
                    lo = hi = mid
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    return roots, np.column_stack([grid, f])


def _assemble(z1: Observable, z2: Observable, w1: float, dec: SubspaceDecomposition):
    d = z1.dim
    psi = block_eigenbasis(z1, dec)
    psi_p = block_eigenbasis(z2, dec)
    ops = []
    for i in range(d):
        m = np.zeros((2 * d, d), dtype=complex)
        m[i] = math.sqrt(w1) * psi[:, i].conj()
        ops.append([m])
    for i in range(d):
        m = np.zeros((2 * d, d), dtype=complex)
        m[d + i] = math.sqrt(1.0 - w1) * psi_p[:, i].conj()
        ops.append([m])
    return KrausMeasurement(ops), psi, psi_p


def build_optimal_scheme(
    rho: DensityMatrix,
    x: Observable,
    y: Observable,
    w1: float,
    decomposition: SubspaceDecomposition | None = None,
) -> tuple[KrausMeasurement, OptimalSchemeParams]:
    """Construct the ``d -> 2d`` scheme mixing ``Z1`` and ``Z2`` eigenbasis readouts.

    Two one-angle parameterizations are scanned (``Z1 = X`` with ``Z2`` rotating
    in span{X, Y}, and ``Z2 = Y`` with ``Z1`` rotating); every sign change of the
    constraint is bisected and the root giving the smallest error-disturbance
    product is kept.
    """
    if not 0.0 < w1 < 1.0:
        raise ValueError(f"w1 must lie in (0, 1), got {w1!r}")
    if x.dim != y.dim or x.dim != rho.dim:
        raise DimensionMismatchError("state, X and Y must share a dimension")
    nx, ny = np.linalg.norm(x.x), np.linalg.norm(y.x)
    if nx == 0 or ny == 0 or np.linalg.matrix_rank(np.vstack([x.x / nx, y.x / ny]), tol=1e-9) < 2:
        raise ValueError("X and Y must have linearly independent traceless parts")

    dec = decomposition or invariant_subspaces(x, y)
    gram_xy = quantum_gram(rho, [x, y], dec)
    best = None
    curves = {}
    for family in ("fix-z1", "fix-z2"):
        roots, curve = _roots(family, gram_xy, w1)
        curves[family] = curve
        for angle in roots:
            t = _coefficients(family, angle)
            resid, a, b, k = _constraint(t, gram_xy, w1)
            z1 = Observable(t[0, 0] * x.matrix + t[0, 1] * y.matrix)
            z2 = Observable(t[1, 0] * x.matrix + t[1, 1] * y.matrix)
            meas, psi, psi_p = _assemble(z1, z2, w1, dec)
            prod = ext_mul(measurement_error(rho, x, meas), disturbance(rho, y, meas))
            if best is None or prod < best[0]:
                params = OptimalSchemeParams(
                    z1, z2, w1, 1.0 - w1, a, b, psi, psi_p, k, resid, family, angle, dec
                )
                best = (prod, meas, params)
    if best is None:
        raise ConstructionFailedError(
            "constraint has no root in either parameterization", np.vstack(list(curves.values()))
        )
    return best[1], best[2]


@dataclass(frozen=True)
class SweepRow:
    w1: float
    error: float
    disturbance: float
    product: float
    bound: float
    gap: float
    failure: str | None = None


@dataclass(frozen=True)
class AttainabilityResult:
    rows: list
    bound: float
    heisenberg: float

    @property
    def min_gap(self) -> float:
        gaps = [abs(r.gap) for r in self.rows if r.failure is None]
        return min(gaps) if gaps else INFINITE

    @property
    def min_relative_gap(self) -> float:
        if self.bound == 0:
            return self.min_gap
        return self.min_gap / self.bound


def attainability_sweep(rho: DensityMatrix, x: Observable, y: Observable, grid) -> AttainabilityResult:
    dec = invariant_subspaces(x, y)
    bound = attainable_bound(rho, x, y, dec)
    rows = []
    for w1 in grid:
        w1 = float(w1)
        try:
            meas, _ = build_optimal_scheme(rho, x, y, w1, dec)
        except (ConstructionFailedError, ValueError) as exc:
            rows.append(SweepRow(w1, math.nan, math.nan, math.nan, bound, math.nan, str(exc)))
            continue
        eps = measurement_error(rho, x, meas)
        eta = disturbance(rho, y, meas)
        prod = ext_mul(eps, eta)
        rows.append(SweepRow(w1, eps, eta, prod, bound, prod - bound))
    return AttainabilityResult(rows, bound, heisenberg_bound(rho, x, y))


@dataclass(frozen=True)
class VindicationSample:
    index: int
    error: float
    disturbance: float
    product: float
    heisenberg_bound: float
    attainable_bound: float


@dataclass(frozen=True)
class VindicationReport:
    dim: int
    seed: int
    samples: list

    def _count(self, pred) -> int:
        return sum(1 for s in self.samples if pred(s))

    @property
    def heisenberg_violations(self) -> int:
        return self._count(lambda s: s.product < s.heisenberg_bound - VIOLATION_SLACK)

    @property
    def attainable_violations(self) -> int:
        return self._count(lambda s: s.product < s.attainable_bound - VIOLATION_SLACK)

    @property
    def schrodinger_violations(self) -> int:
        return self._count(lambda s: s.attainable_bound < s.heisenberg_bound - 1e-9)

    @property
    def infinite_products(self) -> int:
        return self._count(lambda s: math.isinf(s.product))

    def summary(self) -> dict:
        return {
            "dim": self.dim,
            "seed": self.seed,
            "samples": len(self.samples),
            "heisenberg_violations": self.heisenberg_violations,
            "attainable_violations": self.attainable_violations,
            "schrodinger_violations": self.schrodinger_violations,
            "infinite_products": self.infinite_products,
        }


def _vindication_sample(d: int, seed: int, index: int) -> VindicationSample:
    rng = np.random.default_rng([seed, index])
    rho = random_state(d, rng)
    x = random_observable(d, rng)
    y = random_observable(d, rng)
    meas = random_rank1_measurement(d, rng)
    eps = measurement_error(rho, x, meas)
    eta = disturbance(rho, y, meas)
    return VindicationSample(
        index,
        eps,
        eta,
        ext_mul(eps, eta),
        heisenberg_bound(rho, x, y),
        attainable_bound(rho, x, y),
    )


def random_vindication_sweep(d: int, samples: int, seed: int, threads: int = 1) -> VindicationReport:
    """Check both product bounds on random states, observables and rank-one measurements."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if samples < 0:
        raise ValueError("samples must be non-negative")
    work = lambda i: _vindication_sample(d, seed, i)  # noqa: E731
    if threads > 1 and samples > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(samples)))
    else:
        rows = [work(i) for i in range(samples)]
    return VindicationReport(d, seed, rows)
