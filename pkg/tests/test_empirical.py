# levytype/tests/test_empirical.py
import numpy as np
import pytest
from scipy import stats

from empirical import (
    JumpCounter,
    StepFunction,
    campbell_check,
    cf_agreement,
    compensated_second_moment_check,
    compound_poisson_pmf,
    empirical_cf,
    estimate_intensity,
    exponent_target,
    increment_independence_probe,
    jump_count_additivity,
    jump_measure,
    moment_scaling_check,
    poissonity_check,
    region_independence_check,
    self_similarity_probe,
    stationarity_probe,
    stieltjes_sum,
    total_variation,
)
from errors import EmptyEnsemble, InvalidInput, RegionTouchesOrigin, UnsupportedF
from levy_core import Annulus, SpaceBox, brownian_triplet, exponent_of, measure_of, symmetric_stable_triplet
from samplers import (
    DiscreteJumps,
    Ensemble,
    GaussianJumps,
    LevyEndpointSampler,
    RandomSource,
    compound_poisson_triplet,
    sample_compound_poisson,
    sample_levy_ito,
    sample_poisson_process,
)


@pytest.fixture(scope="module")
def stable_ensemble():
    triplet = symmetric_stable_triplet(1.5)
    return Ensemble.generate(lambda r: sample_levy_ito(triplet, 0.5, 1.0, 1.0, r), 6000, RandomSource(99))


def test_counter_rejects_region_touching_origin() -> None:
    with pytest.raises(RegionTouchesOrigin):
        JumpCounter(Annulus(0.0, 1.0))


def test_jump_measure_reads_ledger(rng) -> None:
    path = sample_poisson_process(4.0, 1.0, rng)
    assert jump_measure(path, JumpCounter(Annulus(0.5, 2.0))) == path.jump_count
    assert jump_measure(path, JumpCounter(Annulus(2.0))) == 0
    half = jump_measure(path, JumpCounter(Annulus(0.5, 2.0), 0.5))
    assert half == int(np.count_nonzero(path.jump_times <= 0.5))


def test_jump_count_additivity(stable_ensemble) -> None:
    for path in stable_ensemble.paths[:50]:
        assert jump_count_additivity(path, Annulus(0.5, 1.0), Annulus(1.0, 3.0))


@pytest.mark.slow
def test_intensity_recovery(stable_ensemble) -> None:
    nu = symmetric_stable_triplet(1.5).nu
    for region in (Annulus(0.5, 1.0), Annulus(1.0, 2.0), SpaceBox([0.6], [1.5])):
        estimate, se = estimate_intensity(stable_ensemble, JumpCounter(region, 1.0))
        assert abs(estimate - measure_of(nu, region)) <= 3 * se


def test_counts_are_poisson(stable_ensemble) -> None:
    report = poissonity_check(stable_ensemble, JumpCounter(Annulus(0.5, 1.0)), tol=0.03)
    assert report.passed


def test_disjoint_regions_are_uncorrelated(stable_ensemble) -> None:
    assert region_independence_check(stable_ensemble, Annulus(0.5, 1.0), Annulus(1.0, 4.0)).passed


def test_total_variation_of_exact_law_is_small(rng) -> None:
    samples = rng.generator().poisson(2.0, 40000)
    support = np.arange(samples.max() + 1)
    assert total_variation(samples, lambda k: stats.poisson.pmf(k, 2.0), support) < 0.01
    assert total_variation(samples, lambda k: stats.poisson.pmf(k, 4.0), support) > 0.2


def test_compound_poisson_pmf_sums_to_one() -> None:
    law = DiscreteJumps(((1.0,), (2.0,)), (0.5, 0.5))
    pmf = compound_poisson_pmf(1.0, 2.0, law, 40)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    assert pmf[0] == pytest.approx(np.exp(-2.0))
    # one jump of size 1
    assert pmf[1] == pytest.approx(np.exp(-2.0) * 2.0 * 0.5)


def test_compound_poisson_pmf_needs_integer_jumps() -> None:
    with pytest.raises(UnsupportedF):
        compound_poisson_pmf(1.0, 1.0, GaussianJumps(), 10)
    with pytest.raises(UnsupportedF):
        compound_poisson_pmf(1.0, 1.0, DiscreteJumps(((0.5,),), (1.0,)), 10)


@pytest.mark.slow
def test_compound_poisson_law_in_total_variation(rng) -> None:
    law = DiscreteJumps(((1.0,), (2.0,)), (0.5, 0.5))
    ends = Ensemble.generate(lambda r: sample_compound_poisson(1.0, law, 2.0, r), 20000, rng).endpoints()[:, 0]
    values = np.rint(ends).astype(int)
    pmf = compound_poisson_pmf(1.0, 2.0, law, int(values.max()))
    assert total_variation(values, pmf, np.arange(values.max() + 1)) < 0.015


def test_empirical_cf_of_brownian_endpoints(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    estimate = empirical_cf(sampler.sample(1.0, 20000, rng), np.linspace(-3.0, 3.0, 25))
    assert estimate.agreement(exponent_target(sampler.exponent)) >= 0.95
    assert cf_agreement(estimate, exponent_target(sampler.exponent)) == estimate.agreement(
        exponent_target(sampler.exponent))
    frame = estimate.to_frame()
    assert list(frame.columns) == ["xi_1", "re", "im", "se"]


def test_empirical_cf_detects_wrong_law(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    estimate = empirical_cf(sampler.sample(1.0, 20000, rng), np.linspace(0.5, 2.0, 10))
    report = estimate.compare(lambda xi: np.exp(-float(xi[0]) ** 2))
    assert not report.passed


def test_empirical_cf_rejects_empty_sample() -> None:
    with pytest.raises(EmptyEnsemble):
        empirical_cf(np.zeros((0, 1)), [1.0])


def test_step_function_evaluation() -> None:
    f = StepFunction((0.0, 0.5, 1.0), (2.0, -1.0))
    np.testing.assert_allclose(f([0.0, 0.25, 0.5, 0.75, 1.0, 1.5]), [0.0, 2.0, 2.0, -1.0, -1.0, 0.0])
    with pytest.raises(UnsupportedF):
        StepFunction((0.0, 1.0), (1.0, 2.0))


def test_stieltjes_sum_of_poisson_path(rng) -> None:
    path = sample_poisson_process(3.0, 1.0, rng)
    f = StepFunction((0.0, 1.0), (2.0,))
    assert stieltjes_sum(path, f) == pytest.approx(2.0 * path.jump_count)


def test_campbell_formula(rng) -> None:
    f = StepFunction((0.0, 0.3, 1.0), (1.5, -0.5))
    assert campbell_check(2.0, GaussianJumps(1.0), f, 20000, rng).passed


def test_campbell_needs_step_function(rng) -> None:
    with pytest.raises(UnsupportedF):
        campbell_check(1.0, GaussianJumps(), lambda t: t, 10, rng)


def test_moment_scaling_for_compound_poisson(rng) -> None:
    ensemble = Ensemble.generate(lambda r: sample_compound_poisson(2.0, GaussianJumps(), 1.0, r), 8000, rng)
    assert moment_scaling_check(ensemble).passed


def test_stable_self_similarity(rng) -> None:
    alpha = 1.5
    sampler = LevyEndpointSampler(symmetric_stable_triplet(alpha), 1e-2)
    report = self_similarity_probe(sampler.sample(0.5, 10000, rng.child(0)), sampler.sample(1.0, 10000, rng.child(1)),
                                   alpha, np.linspace(0.2, 2.0, 10))
    assert report.passed


def test_compensated_second_moment(stable_ensemble) -> None:
    nu = symmetric_stable_triplet(1.5).nu
    report = compensated_second_moment_check(stable_ensemble, JumpCounter(Annulus(0.5, 2.0)), lambda y: y[:, 0],
                                             nu=nu)
    assert report.rhs == pytest.approx(2.0 * (2.0 ** 0.5 - 0.5 ** 0.5) / 0.5, rel=1e-6)
    assert report.passed


def test_increments_are_independent_and_stationary(rng) -> None:
    triplet = compound_poisson_triplet(2.0, GaussianJumps())
    ensemble = Ensemble.generate(lambda r: sample_compound_poisson(2.0, GaussianJumps(), 1.0, r), 6000, rng)
    report = increment_independence_probe(ensemble, (0.5, 1.0), [[1.0], [0.5]], exponent_of(triplet))
    assert report.passed
    assert abs(report.details["theory"] - report.rhs) <= 3 * report.se + 0.01
    assert stationarity_probe(ensemble, (0.0, 0.5), 0.5, np.linspace(0.5, 2.0, 4)).passed


def test_increment_partition_must_increase(stable_ensemble) -> None:
    with pytest.raises(InvalidInput):
        increment_independence_probe(stable_ensemble, (0.5, 0.5), [[1.0], [1.0]])
