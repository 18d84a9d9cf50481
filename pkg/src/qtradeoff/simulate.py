"""Monte Carlo n-shot measurement and estimation.

Each trial draws its own generator from ``numpy.random.default_rng([seed,
trial])`` (PCG64 seeded through ``SeedSequence``), so results are identical
for the same seed regardless of thread count or trial order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fisher import classical_fisher, family_classical_fisher, pushforward_family, quadform_pinv, sld_fisher
from .quantum_core import (
    DensityMatrix,
    KrausMeasurement,
    Observable,
    Povm,
    compose_sequential,
    outcome_distribution,
    povm_from_kraus,
)
from .su_basis import build_su_basis, reconstruct

NUM_BATCHES = 20
MLE_GRAD_TOL = 1e-9
MLE_MAX_ITER = 10_000


class ExperimentUndefinedError(ValueError):
    pass


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class SampleCounts:
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def sample_outcomes(rho: DensityMatrix, povm: Povm, n: int, seed: int | np.random.Generator) -> SampleCounts:
    if n < 1:
        raise ValueError("need at least one shot")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SampleCounts(_draw(outcome_distribution(rho, povm), n, rng))


def _draw(p: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return rng.multinomial(n, p / p.sum())


def linear_estimate(counts: SampleCounts, alphas) -> float:
    """``sum_i alpha_i n_i / n``."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != counts.counts.shape:
        raise ValueError(f"{alphas.size} coefficients for {counts.counts.size} outcomes")
    return float(alphas @ counts.counts / counts.n)


def linear_coefficients(povm: Povm, x: Observable, tol: float = 1e-9) -> np.ndarray:
    """Coefficients ``c`` with ``sum_i c_i E_i = X`` (minimum norm), for unbiased linear estimation."""
    a = povm.effects.reshape(len(povm), -1).T
    b = x.matrix.reshape(-1)
    c, *_ = np.linalg.lstsq(np.vstack([a.real, a.imag]), np.concatenate([b.real, b.imag]), rcond=None)
    if np.linalg.norm(a @ c - b) > tol * max(1.0, np.linalg.norm(b)):
        raise EstimationError("observable is not a linear combination of the effects")
    return c


def _project_to_states(theta: np.ndarray, basis) -> np.ndarray:
    """Frobenius-nearest density matrix, returned as Bloch coordinates."""
    rho = reconstruct(1.0 / basis.dim, theta, basis)
    evals, u = np.linalg.eigh(rho)
    if evals[0] >= 0:
        return theta
    # Euclidean projection of the spectrum onto the probability simplex
    s = np.sort(evals)[::-1]
    css = np.cumsum(s) - 1.0
    k = np.nonzero(s - css / np.arange(1, s.size + 1) > 0)[0][-1]
    shift = css[k] / (k + 1)
    lam = np.clip(evals - shift, 0.0, None)
    proj = (u * lam) @ u.conj().T
    return np.einsum("ij,mji->m", proj, basis.generators).real


@dataclass(frozen=True)
class MleResult:
    value: float
    theta: np.ndarray
    converged: bool
    iterations: int


def mle_estimate(counts: SampleCounts, povm: Povm, x: Observable, basis=None) -> MleResult:
    """Maximum-likelihood estimate of ``<X>`` by projected gradient ascent on Bloch coordinates.

    Starts from the maximally mixed state so unidentifiable directions stay at
    zero (smallest-norm tie break). Step length is adapted by backtracking.
    """
    basis = basis or build_su_basis(povm.dim)
    n = counts.n
    if n == 0:
        raise EstimationError("no counts")
    f = counts.counts / n
    obs = f > 0
    r, v = povm.r[obs], povm.v[obs]
    f = f[obs]

    def loglik(theta):
        p = r + v @ theta
        if np.any(p <= 0):
            return -math.inf
        return float(f @ np.log(p))

    theta = np.zeros(basis.size)
    ll = loglik(theta)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, MLE_MAX_ITER + 1):
        grad = v.T @ (f / (r + v @ theta))
        while True:
            cand = _project_to_states(theta + step * grad, basis)
            ll_c = loglik(cand)
            move = cand - theta
            if ll_c >= ll + 1e-4 * (grad @ move):
                break
            step *= 0.5
            if step < 1e-16:
                cand, ll_c, move = theta, ll, np.zeros_like(theta)
                break
        pg = np.linalg.norm(move) / step
        theta, ll = cand, ll_c
        step *= 2.0
        if pg <= MLE_GRAD_TOL:
            converged = True
            break
    return MleResult(x.x0 + float(x.x @ theta), theta, converged, it)


@dataclass(frozen=True)
class EstimationRun:
    estimator: str
    estimates: np.ndarray = field(repr=False)
    n: int
    trials: int
    seed: int
    target: float
    bound: float
    converged: bool = True

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def mean_stderr(self) -> float:
        return float(np.std(self.estimates, ddof=1) / math.sqrt(self.trials)) if self.trials > 1 else math.nan

    @property
    def n_var(self) -> float:
        return float(self.n * np.var(self.estimates, ddof=1)) if self.trials > 1 else math.nan

    @property
    def n_var_stderr(self) -> float:
        """Standard error of ``n Var`` from the spread over ``NUM_BATCHES`` batches."""
        batches = np.array_split(self.estimates, min(NUM_BATCHES, self.trials))
        vals = [self.n * np.var(b, ddof=1) for b in batches if b.size > 1]
        if len(vals) < 2:
            return math.nan
        return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))

    def as_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "target": self.target,
            "mean": self.mean,
            "mean_stderr": self.mean_stderr,
            "n_var": self.n_var,
            "n_var_stderr": self.n_var_stderr,
            "bound": self.bound,
            "converged": self.converged,
        }


def _run_trials(p, povm, obs, n, trials, seed, estimator, threads):
    basis = build_su_basis(povm.dim)
    if estimator not in ("linear", "mle"):
        raise ValueError(f"unknown estimator {estimator!r}")
    coeffs = linear_coefficients(povm, obs) if estimator == "linear" else None

    def one(i):
        counts = SampleCounts(_draw(p, n, trial_rng(seed, i)))
        if coeffs is not None:
            return linear_estimate(counts, coeffs), True
        res = mle_estimate(counts, povm, obs, basis)
        return res.value, res.converged

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, range(trials)))
    else:
        out = [one(i) for i in range(trials)]
    return np.array([o[0] for o in out]), all(o[1] for o in out)


def variance_scaling_experiment(
    rho: DensityMatrix,
    m: KrausMeasurement,
    x: Observable,
    n: int = 10_000,
    trials: int = 2000,
    seed: int = 0,
    estimator: str = "linear",
    threads: int = 1,
) -> EstimationRun:
    """Empirical ``n Var[X_est]`` over repeated ``n``-shot runs, with ``x^T J(M)^+ x`` attached."""
    povm = povm_from_kraus(m)
    bound = quadform_pinv(classical_fisher(rho, povm), x.x)
    if math.isinf(bound):
        raise ExperimentUndefinedError("<X> cannot be estimated consistently from this measurement")
    p = outcome_distribution(rho, povm)
    est, ok = _run_trials(p, povm, x, n, trials, seed, estimator, threads)
    return EstimationRun(estimator, est, n, trials, seed, rho.expect(x.matrix).real, bound, ok)


def disturbance_scaling_experiment(
    rho: DensityMatrix,
    m: KrausMeasurement,
    nmeas: KrausMeasurement,
    y: Observable,
    n: int = 10_000,
    trials: int = 2000,
    seed: int = 0,
    estimator: str = "mle",
    threads: int = 1,
) -> EstimationRun:
    """Estimate ``<Y>`` from the outcomes of ``nmeas`` performed after ``m``.

    Shots are drawn from the second-outcome marginal of the composed
    measurement; ``bound`` is ``y^T J_S'^+ y`` of the post-measurement family,
    reached only when ``nmeas`` is an optimal retrieval.
    """
    family = pushforward_family(rho, m)
    bound = quadform_pinv(sld_fisher(family), y.x)
    if math.isinf(bound):
        raise ExperimentUndefinedError("<Y> is not recoverable from the post-measurement state")
    second = povm_from_kraus(nmeas).effects
    if math.isinf(quadform_pinv(family_classical_fisher(family, second), y.x)):
        raise ExperimentUndefinedError("the second measurement carries no information on <Y>")
    joint = compose_sequential(m, nmeas)
    r = outcome_distribution(rho, povm_from_kraus(joint)).reshape(m.num_outcomes, nmeas.num_outcomes)
    q = r.sum(axis=0)
    # effects on the input space whose statistics are q
    eff = povm_from_kraus(joint).effects.reshape(m.num_outcomes, nmeas.num_outcomes, rho.dim, rho.dim).sum(axis=0)
    povm = Povm(eff)
    est, ok = _run_trials(q, povm, y, n, trials, seed, estimator, threads)
    return EstimationRun(estimator, est, n, trials, seed, rho.expect(y.matrix).real, bound, ok)
