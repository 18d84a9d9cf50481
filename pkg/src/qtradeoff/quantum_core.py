"""States, observables, Kraus measurements and POVMs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .su_basis import (
    HERMITIAN_RTOL,
    PSD_ATOL,
    InvalidStateError,
    NotHermitianError,
    build_su_basis,
    coords_from_state,
    decompose_hermitian,
    hermiticity_residual,
    min_eigenvalue,
)

COMPLETENESS_ATOL = 1e-10
PROB_FLOOR = 1e-12
EIGEN_MERGE_TOL = 1e-8


class IncompleteMeasurementError(ValueError):
    pass


class UndefinedConditionalError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class NotUnitaryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"state must be square, got shape {m.shape}")
        if hermiticity_residual(m) > HERMITIAN_RTOL:
            raise NotHermitianError("state is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-10:
            raise InvalidStateError(f"state trace is {tr!r}, expected 1")
        lo = min_eigenvalue(m)
        if lo < -PSD_ATOL:
            raise InvalidStateError(f"state is not PSD (min eigenvalue {lo:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return coords_from_state(self.matrix, build_su_basis(self.dim))

    def expect(self, op: np.ndarray) -> complex:
        op = getattr(op, "matrix", op)
        return complex(np.trace(self.matrix @ op))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian observable with its ``(x0, x)`` coordinates cached."""

    matrix: np.ndarray
    x0: float = field(init=False)
    x: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"observable must be square, got shape {m.shape}")
        x0, x = decompose_hermitian(m, build_su_basis(m.shape[0]))
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x", x)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _as_outcomes(outcomes) -> tuple[np.ndarray, ...]:
    result = []
    for ops in outcomes:
        arr = np.asarray(ops, dtype=complex)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise DimensionMismatchError("each outcome must be a list of matrices")
        arr = arr.copy()
        arr.setflags(write=False)
        result.append(arr)
    return tuple(result)


@dataclass(frozen=True, eq=False)
class KrausMeasurement:
    """Measurement operators ``M[i][a]`` of shape ``(d_out, d_in)``.

    ``labels`` names each outcome (pairs after sequential composition) and
    ``values`` carries eigenvalues for projective measurements.
    """

    outcomes: tuple
    labels: tuple | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        outs = _as_outcomes(self.outcomes)
        if not outs:
            raise IncompleteMeasurementError("measurement has no outcomes")
        shape = outs[0].shape[1:]
        for ops in outs:
            if ops.shape[1:] != shape:
                raise DimensionMismatchError("Kraus operators have inconsistent shapes")
        object.__setattr__(self, "outcomes", outs)
        labels = tuple(range(len(outs))) if self.labels is None else tuple(self.labels)
        if len(labels) != len(outs):
            raise ValueError("labels length does not match number of outcomes")
        object.__setattr__(self, "labels", labels)
        res = self.completeness_residual()
        if res > COMPLETENESS_ATOL:
            raise IncompleteMeasurementError(f"sum M^dag M deviates from identity by {res:.3e}")

    @property
    def d_in(self) -> int:
        return self.outcomes[0].shape[2]

    @property
    def d_out(self) -> int:
        return self.outcomes[0].shape[1]

    @property
    def num_outcomes(self) -> int:
        return len(self.outcomes)

    def effects(self) -> np.ndarray:
        return np.array([np.einsum("aki,akj->ij", ops.conj(), ops) for ops in self.outcomes])

    def completeness_residual(self) -> float:
        total = self.effects().sum(axis=0)
        return float(np.linalg.norm(total - np.eye(self.d_in)))

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Unconditional channel ``sum M a M^dag`` on an arbitrary matrix."""
        return sum(np.einsum("aij,jk,alk->il", ops, a, ops.conj()) for ops in self.outcomes)


@dataclass(frozen=True, eq=False)
class Povm:
    effects: np.ndarray
    r: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        eff = np.array(self.effects, dtype=complex)
        if eff.ndim != 3 or eff.shape[1] != eff.shape[2]:
            raise DimensionMismatchError(f"effects must have shape (k, d, d), got {eff.shape}")
        d = eff.shape[1]
        for k, e in enumerate(eff):
            if hermiticity_residual(e) > HERMITIAN_RTOL:
                raise NotHermitianError(f"effect {k} is not Hermitian")
            lo = min_eigenvalue(e)
            if lo < -PSD_ATOL:
                raise InvalidStateError(f"effect {k} is not PSD (min eigenvalue {lo:.3e})")
        res = np.linalg.norm(eff.sum(axis=0) - np.eye(d))
        if res > COMPLETENESS_ATOL:
            raise IncompleteMeasurementError(f"effects sum to identity only within {res:.3e}")
        eff = 0.5 * (eff + eff.conj().transpose(0, 2, 1))
        basis = build_su_basis(d)
        r = np.trace(eff, axis1=1, axis2=2).real / d
        v = np.einsum("kij,mji->km", eff, basis.generators).real
        for a in (eff, r, v):
            a.setflags(write=False)
        object.__setattr__(self, "effects", eff)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def __len__(self) -> int:
        return self.effects.shape[0]


def _check_dims(d_expected: int, d_actual: int, what: str):
    if d_expected != d_actual:
        raise DimensionMismatchError(f"{what}: dimension {d_actual} does not match {d_expected}")


def povm_from_kraus(m: KrausMeasurement) -> Povm:
    return Povm(m.effects())


def outcome_distribution(rho: DensityMatrix, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``Tr(rho E_i)``, tiny negatives clamped to 0."""
    _check_dims(povm.dim, rho.dim, "state vs POVM")
    p = np.einsum("ij,kji->k", rho.matrix, povm.effects).real
    p[(p < 0) & (p >= -PROB_FLOOR)] = 0.0
    return p


def outcome_distribution_affine(theta: np.ndarray, povm: Povm) -> np.ndarray:
    """Same distribution through the affine form ``r_i + v_i . theta``."""
    return povm.r + povm.v @ np.asarray(theta, dtype=float)


def post_measurement_state(rho: DensityMatrix, m: KrausMeasurement) -> DensityMatrix:
    _check_dims(m.d_in, rho.dim, "state vs measurement input")
    return DensityMatrix(m.apply(rho.matrix))


def conditional_state(rho: DensityMatrix, m: KrausMeasurement, i: int) -> DensityMatrix:
    _check_dims(m.d_in, rho.dim, "state vs measurement input")
    ops = m.outcomes[i]
    unnorm = np.einsum("aij,jk,alk->il", ops, rho.matrix, ops.conj())
    p = np.trace(unnorm).real
    if p <= PROB_FLOOR:
        raise UndefinedConditionalError(f"outcome {i} has probability {p:.3e}")
    return DensityMatrix(unnorm / p)


def compose_sequential(m: KrausMeasurement, n: KrausMeasurement) -> KrausMeasurement:
    """Measurement equivalent to ``m`` followed by ``n``; outcomes are pairs ``(i, j)``."""
    _check_dims(m.d_out, n.d_in, "first output vs second input")
    outcomes, labels = [], []
    for li, mi in zip(m.labels, m.outcomes):
        for lj, nj in zip(n.labels, n.outcomes):
            outcomes.append(np.einsum("bij,ajk->baik", nj, mi).reshape(-1, n.d_out, m.d_in))
            labels.append((li, lj))
    return KrausMeasurement(outcomes, labels=labels)


def joint_distribution(rho: DensityMatrix, m: KrausMeasurement, n: KrausMeasurement) -> np.ndarray:
    """Matrix ``r[i, j]`` of the sequential measurement."""
    a = compose_sequential(m, n)
    p = outcome_distribution(rho, povm_from_kraus(a))
    return p.reshape(m.num_outcomes, n.num_outcomes)


def projective_measurement(x: Observable | np.ndarray, tol: float = EIGEN_MERGE_TOL) -> KrausMeasurement:
    """Spectral projectors of ``x``, ascending eigenvalues, near-degenerate merged."""
    mat = x.matrix if isinstance(x, Observable) else Observable(x).matrix
    evals, evecs = np.linalg.eigh(mat)
    groups: list[list[int]] = [[0]]
    for k in range(1, len(evals)):
        if evals[k] - evals[groups[-1][0]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    projectors, values = [], []
    for g in groups:
        vecs = evecs[:, g]
        projectors.append(vecs @ vecs.conj().T)
        values.append(float(np.mean(evals[g])))
    return KrausMeasurement([[p] for p in projectors], values=np.array(values))


def _check_unitary(u: np.ndarray, what: str = "U"):
    err = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if u.shape[0] != u.shape[1] or err > 1e-10:
        raise NotUnitaryError(f"{what} is not unitary (residual {err:.3e})")


def apply_unitary_left(m: KrausMeasurement, u) -> KrausMeasurement:
    """Left-multiply Kraus operators by a global unitary or per-operator ``u[i][a]``."""
    u_arr = np.asarray(u, dtype=complex) if not isinstance(u, (list, tuple)) else None
    new = []
    if u_arr is not None and u_arr.ndim == 2:
        _check_unitary(u_arr)
        _check_dims(m.d_out, u_arr.shape[0], "unitary vs measurement output")
        for ops in m.outcomes:
            new.append(np.einsum("ij,ajk->aik", u_arr, ops))
    else:
        if len(u) != m.num_outcomes:
            raise DimensionMismatchError("need one list of unitaries per outcome")
        for i, (ops, us) in enumerate(zip(m.outcomes, u)):
            if len(us) != len(ops):
                raise DimensionMismatchError(f"outcome {i}: need one unitary per Kraus operator")
            row = []
            for a, (op, ua) in enumerate(zip(ops, us)):
                ua = np.asarray(ua, dtype=complex)
                _check_unitary(ua, f"U[{i}][{a}]")
                row.append(ua @ op)
            new.append(row)
    return KrausMeasurement(new, labels=m.labels, values=m.values)


def unitary_measurement(u: np.ndarray) -> KrausMeasurement:
    """Single-outcome measurement applying ``u``."""
    u = np.asarray(u, dtype=complex)
    _check_unitary(u)
    return KrausMeasurement([[u]])


def replacement_channel(d_in: int, phi: np.ndarray) -> KrausMeasurement:
    """Single-outcome channel preparing ``|phi>`` whatever the input."""
    phi = np.asarray(phi, dtype=complex).reshape(-1, 1)
    phi = phi / np.linalg.norm(phi)
    ops = [phi @ np.eye(d_in)[k : k + 1] for k in range(d_in)]
    return KrausMeasurement([ops])


def mix_measurements(parts: Sequence[KrausMeasurement], weights: Sequence[float]) -> KrausMeasurement:
    """Perform ``parts[k]`` with probability ``weights[k]``; outcome labels are ``(k, i)``."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise ValueError("weights must be a probability vector")
    outcomes, labels = [], []
    for k, (part, w) in enumerate(zip(parts, weights)):
        for lab, ops in zip(part.labels, part.outcomes):
            outcomes.append(np.sqrt(w) * ops)
            labels.append((k, lab))
    return KrausMeasurement(outcomes, labels=labels)
