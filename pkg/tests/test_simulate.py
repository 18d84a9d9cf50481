import numpy as np
import pytest
from scipy import stats

from qtradeoff.quantum_core import (
    DensityMatrix,
    KrausMeasurement,
    Observable,
    Povm,
    povm_from_kraus,
    projective_measurement,
    replacement_channel,
    unitary_measurement,
)
from qtradeoff.errdist import variance
from qtradeoff.simulate import (
    EstimationError,
    ExperimentUndefinedError,
    SampleCounts,
    _draw,
    disturbance_scaling_experiment,
    linear_coefficients,
    linear_estimate,
    mle_estimate,
    sample_outcomes,
    variance_scaling_experiment,
)

from conftest import SX, SY, SZ, qubit_state

Z_BASIS = Povm(np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]).astype(complex))


def test_degenerate_distribution():
    counts = sample_outcomes(qubit_state((0, 0, 1.0)), Z_BASIS, 100, seed=0)
    assert counts.counts.tolist() == [100, 0]


def test_binomial_counts_within_five_sigma():
    counts = sample_outcomes(qubit_state((0, 0, 0)), Z_BASIS, 10**6, seed=3)
    assert abs(counts.counts[0] - 5e5) <= 5 * np.sqrt(10**6 * 0.25)


def test_sampling_is_reproducible():
    rho = qubit_state((0.1, 0.2, 0.3))
    a = sample_outcomes(rho, Z_BASIS, 1000, seed=42).counts
    b = sample_outcomes(rho, Z_BASIS, 1000, seed=42).counts
    assert a.tolist() == b.tolist()


def test_multinomial_sampler_goodness_of_fit():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    rng = np.random.default_rng(9)
    total = sum(_draw(p, 50, rng) for _ in range(400))
    chi2 = stats.chisquare(total, p * total.sum())
    assert chi2.pvalue > 1e-3


@pytest.mark.parametrize("counts,expected", [((100, 0), 1.0), ((75, 25), 0.5), ((50, 50), 0.0)])
def test_linear_estimate(counts, expected):
    assert linear_estimate(SampleCounts(np.array(counts)), [1, -1]) == pytest.approx(expected)


def test_linear_estimate_length_mismatch():
    with pytest.raises(ValueError):
        linear_estimate(SampleCounts(np.array([1, 2])), [1, 2, 3])


def test_linear_coefficients_reproduce_observable(paulis):
    _, _, z = paulis
    povm = povm_from_kraus(projective_measurement(z))
    assert np.allclose(linear_coefficients(povm, z), [-1, 1])
    x, _, _ = paulis
    with pytest.raises(EstimationError):
        linear_coefficients(povm, x)


def test_mle_binomial(paulis):
    _, _, z = paulis
    res = mle_estimate(SampleCounts(np.array([75, 25])), Z_BASIS, z)
    assert res.converged
    assert res.value == pytest.approx(0.5, abs=1e-8)


def test_mle_recovers_interior_point(paulis):
    x, _, _ = paulis
    rho = qubit_state((0.3, -0.2, 0.1))
    # tetrahedral POVM is informationally complete
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    effects = np.array([0.25 * (np.eye(2) + n[0] * SX + n[1] * SY + n[2] * SZ) for n in dirs])
    povm = Povm(effects)
    p = np.einsum("ij,kji->k", rho.matrix, effects).real
    res = mle_estimate(SampleCounts(p * 1e6), povm, x)
    assert res.value == pytest.approx(0.3, abs=1e-6)


def test_mle_no_information_returns_offset():
    obs = Observable(SZ + 0.7 * np.eye(2))
    res = mle_estimate(SampleCounts(np.array([10])), Povm(np.eye(2)[None].astype(complex)), obs)
    assert res.value == pytest.approx(0.7)


def test_mle_rejects_empty_counts(paulis):
    with pytest.raises(EstimationError):
        mle_estimate(SampleCounts(np.array([0, 0])), Z_BASIS, paulis[2])


def test_variance_scaling_binomial(paulis):
    _, _, z = paulis
    run = variance_scaling_experiment(qubit_state((0, 0, 0.5)), projective_measurement(z), z, n=2000, trials=600, seed=1)
    assert abs(run.n_var - 0.75) <= 3 * run.n_var_stderr
    assert abs(run.mean - 0.5) <= 4 * run.mean_stderr
    assert run.bound == pytest.approx(0.75)


def test_eigenstate_has_zero_variance(paulis):
    _, _, z = paulis
    run = variance_scaling_experiment(qubit_state((0, 0, 1.0)), projective_measurement(z), z, n=100, trials=50, seed=0)
    assert run.n_var == 0.0


def test_mle_and_linear_agree(paulis):
    _, _, z = paulis
    rho, m = qubit_state((0, 0, 0.5)), projective_measurement(z)
    lin = variance_scaling_experiment(rho, m, z, n=1000, trials=300, seed=4)
    mle = variance_scaling_experiment(rho, m, z, n=1000, trials=300, seed=4, estimator="mle")
    # same counts; the estimators coincide on the interior of the simplex
    assert np.allclose(lin.estimates, mle.estimates, atol=1e-7)


def test_threads_do_not_change_results(paulis):
    _, _, z = paulis
    rho, m = qubit_state((0, 0, 0.5)), projective_measurement(z)
    a = variance_scaling_experiment(rho, m, z, n=500, trials=100, seed=8, threads=1)
    b = variance_scaling_experiment(rho, m, z, n=500, trials=100, seed=8, threads=4)
    assert a.estimates.tolist() == b.estimates.tolist()


def test_unestimable_observable(paulis):
    x, _, z = paulis
    with pytest.raises(ExperimentUndefinedError):
        variance_scaling_experiment(qubit_state((0, 0, 0.5)), projective_measurement(z), x, n=10, trials=2)


def test_cramer_rao_floor_on_mixed_scheme(paulis):
    x, _, z = paulis
    from qtradeoff.quantum_core import mix_measurements

    rho = qubit_state((0.2, 0, 0.4))
    m = mix_measurements([projective_measurement(x), projective_measurement(z)], [0.5, 0.5])
    run = variance_scaling_experiment(rho, m, x, n=1000, trials=400, seed=2)
    assert run.n_var >= run.bound - 3 * run.n_var_stderr


def test_disturbance_unitary_then_projective_y(paulis):
    _, y, _ = paulis
    rho = qubit_state((0.1, 0.4, 0.2))
    run = disturbance_scaling_experiment(
        rho, unitary_measurement(np.eye(2)), projective_measurement(y), y, n=1000, trials=400, seed=3
    )
    assert abs(run.n_var - variance(rho, y)) <= 3 * run.n_var_stderr


def test_disturbance_commuting_case(paulis):
    _, _, z = paulis
    rho = qubit_state((0.3, 0, 0.2))
    m = projective_measurement(z)
    run = disturbance_scaling_experiment(rho, m, m, z, n=1000, trials=400, seed=6)
    assert abs(run.n_var - variance(rho, z)) <= 3 * run.n_var_stderr


def test_disturbance_replacement_undefined(paulis):
    _, y, _ = paulis
    with pytest.raises(ExperimentUndefinedError):
        disturbance_scaling_experiment(
            qubit_state((0, 0, 0.2)), replacement_channel(2, np.array([1.0, 0])), projective_measurement(y), y, 10, 2
        )


def test_consistency_improves_with_n(paulis):
    _, _, z = paulis
    rho, m = qubit_state((0, 0, 0.5)), projective_measurement(z)
    errs = [
        abs(variance_scaling_experiment(rho, m, z, n=n, trials=200, seed=11).mean - 0.5) for n in (100, 10_000)
    ]
    assert errs[1] < errs[0]
