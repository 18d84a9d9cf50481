"""Random states, observables and measurements for randomized checks."""

from __future__ import annotations

import numpy as np

from .quantum_core import DensityMatrix, KrausMeasurement, Observable


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, _ = np.linalg.qr(z)
    return q


def random_state(d: int, rng: np.random.Generator, rank: int | None = None, floor: float = 0.0) -> DensityMatrix:
    """Ginibre-distributed state, optionally mixed with ``floor * I/d``."""
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    rho = (1 - floor) * rho + floor * np.eye(d) / d
    return DensityMatrix(rho)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (z + z.conj().T)


def random_observable(d: int, rng: np.random.Generator) -> Observable:
    return Observable(random_hermitian(d, rng))


def random_rank1_measurement(
    d: int, rng: np.random.Generator, outcomes: int | None = None, d_out: int | None = None
) -> KrausMeasurement:
    """Rank-one Kraus operators ``|chi_i><phi_i|`` with random output vectors."""
    k = outcomes if outcomes is not None else int(rng.integers(d, 2 * d * d + 1))
    d_out = d if d_out is None else d_out
    w = random_isometry(k, d, rng)
    ops = []
    for i in range(k):
        chi = rng.normal(size=(d_out, 1)) + 1j * rng.normal(size=(d_out, 1))
        chi /= np.linalg.norm(chi)
        ops.append([chi @ w[i : i + 1, :]])
    return KrausMeasurement(ops)


def random_kraus_measurement(
    d: int, rng: np.random.Generator, outcomes: int = 3, kraus_per_outcome: int = 2, d_out: int | None = None
) -> KrausMeasurement:
    """Generic measurement cut from a random Stinespring isometry."""
    d_out = d if d_out is None else d_out
    blocks = outcomes * kraus_per_outcome
    v = random_isometry(blocks * d_out, d, rng).reshape(outcomes, kraus_per_outcome, d_out, d)
    return KrausMeasurement(list(v))


def random_rank1_povm_measurement(d: int, rng: np.random.Generator, outcomes: int) -> KrausMeasurement:
    """Rank-one measurement whose Kraus operators are ``|i><phi_i|``; effects are rank one."""
    w = random_isometry(outcomes, d, rng)
    return KrausMeasurement([[w[i : i + 1, :]] for i in range(outcomes)])
