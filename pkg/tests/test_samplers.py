# levytype/tests/test_samplers.py
import math

import numpy as np
import pytest
from scipy import stats

from errors import EmptyEnsemble, InvalidInput, InvalidRate, MassOverflow
from levy_core import brownian_triplet, poisson_triplet, symmetric_stable_triplet
from report_utils import mean_and_se
from samplers import (
    DiscreteJumps,
    Ensemble,
    GaussianJumps,
    LevyEndpointSampler,
    RandomSource,
    brownian_midpoint_displacements,
    jump_plan,
    polygonal_gaps,
    sample_brownian_levy,
    sample_compound_poisson,
    sample_levy_ito,
    sample_poisson_process,
    sample_series,
    simulate_exits,
    symmetric_sign,
    uniforms,
)


def test_random_source_is_reproducible_and_streams_differ() -> None:
    a = RandomSource(7, 3).generator().random(4)
    b = RandomSource(7, 3).generator().random(4)
    c = RandomSource(7, 4).generator().random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RandomSource(7, 3).child(2) == RandomSource(7, 5)


def test_random_source_rejects_negative_seed() -> None:
    with pytest.raises(InvalidInput):
        RandomSource(-1)


def test_uniforms_stay_inside_open_interval(rng) -> None:
    u = uniforms(rng.generator(), 10 ** 5)
    assert u.min() > 0.0 and u.max() < 1.0


def test_poisson_path_has_unit_jumps_and_is_right_continuous(rng) -> None:
    path = sample_poisson_process(5.0, 2.0, rng)
    assert np.all(path.jump_sizes == 1.0)
    assert np.all(np.diff(path.jump_times) > 0)
    for t in path.jump_times:
        assert path.value_at(t)[0] - path.left_limit(t)[0] == pytest.approx(1.0)
    assert path.endpoint[0] == path.jump_count


def test_invalid_rate_rejected(rng) -> None:
    with pytest.raises(InvalidRate):
        sample_poisson_process(0.0, 1.0, rng)


def test_poisson_count_law(rng) -> None:
    ensemble = Ensemble.generate(lambda r: sample_poisson_process(2.0, 1.0, r), 4000, rng)
    counts = np.array([p.jump_count for p in ensemble.paths])
    mean, se = mean_and_se(counts)
    assert abs(mean - 2.0) <= 3 * se
    assert counts.var() == pytest.approx(2.0, rel=0.1)


def test_ensemble_is_independent_of_worker_count(rng) -> None:
    one = Ensemble.generate(lambda r: sample_compound_poisson(3.0, GaussianJumps(), 1.0, r), 600, rng, workers=1)
    many = Ensemble.generate(lambda r: sample_compound_poisson(3.0, GaussianJumps(), 1.0, r), 600, rng, workers=4)
    np.testing.assert_array_equal(one.endpoints(), many.endpoints())
    assert one.manifest()["stream_end"] == rng.stream + 599


def test_empty_ensemble_rejected(rng) -> None:
    with pytest.raises(EmptyEnsemble):
        Ensemble.generate(lambda r: sample_poisson_process(1.0, 1.0, r), 0, rng)


def test_compound_poisson_moments(rng) -> None:
    law = DiscreteJumps(((1.0,), (2.0,)), (0.5, 0.5))
    ends = Ensemble.generate(lambda r: sample_compound_poisson(2.0, law, 1.0, r), 8000, rng).endpoints()[:, 0]
    mean, se = mean_and_se(ends)
    assert abs(mean - 3.0) <= 3 * se
    assert np.allclose(ends, np.rint(ends))


def test_brownian_construction_levels_and_variance(rng) -> None:
    path = sample_brownian_levy(10, rng)
    assert path.times.size == 2 ** 10 + 1
    assert path.value_at(0.0)[0] == 0.0
    ends = Ensemble.generate(lambda r: sample_brownian_levy(4, r), 4000, rng).endpoints()[:, 0]
    assert stats.kstest(ends, "norm").pvalue > 0.001


def test_brownian_refinement_keeps_coarser_levels(rng) -> None:
    coarse = sample_brownian_levy(3, rng)
    fine = sample_brownian_levy(6, rng)
    np.testing.assert_allclose(fine.values[::8, 0], coarse.values[:, 0])


def test_midpoint_displacement_variances(rng) -> None:
    pooled = [[] for _ in range(5)]
    for i in range(1000):
        for n, gamma in enumerate(brownian_midpoint_displacements(5, rng.child(i))):
            pooled[n].extend(gamma)
    for n, values in enumerate(pooled):
        assert np.var(values) == pytest.approx(2.0 ** -n / 4.0, rel=0.2)


def test_polygonal_gaps_shrink(rng) -> None:
    gaps = polygonal_gaps(sample_brownian_levy(12, rng))
    assert gaps.size == 12
    assert gaps[-1] < gaps[0]


def test_levy_ito_bookkeeping(rng) -> None:
    path = sample_levy_ito(symmetric_stable_triplet(1.2), 0.05, 1.0, 1e-2, rng)
    assert path.bookkeeping_error() < 1e-12
    assert np.all(np.abs(path.jump_sizes) >= 0.05)
    assert path.meta["truncation_bound"] > 0


def test_levy_ito_truncation_bound_shrinks_with_eps() -> None:
    triplet = symmetric_stable_triplet(1.5)
    coarse = sample_levy_ito(triplet, 0.5, 1.0, 0.1, RandomSource(1)).meta["truncation_bound"]
    fine = sample_levy_ito(triplet, 0.05, 1.0, 0.1, RandomSource(1)).meta["truncation_bound"]
    assert fine < coarse


def test_mass_overflow_for_tiny_eps(rng) -> None:
    with pytest.raises(MassOverflow):
        sample_levy_ito(symmetric_stable_triplet(1.9), 1e-4, 1.0, 0.5, rng)


def test_jump_plan_mass_matches_measure() -> None:
    plan = jump_plan(symmetric_stable_triplet(1.5).nu, 0.5)
    assert plan.total_mass == pytest.approx(2.0 * 0.5 ** -1.5 / 1.5, rel=1e-4)
    atoms = jump_plan(poisson_triplet(2.0).nu, 0.1)
    assert atoms.total_mass == pytest.approx(2.0)


def test_endpoint_sampler_brownian_variance(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(2.0), 1.0)
    x = sampler.sample(0.5, 20000, rng)[:, 0]
    assert x.var() == pytest.approx(1.0, rel=0.05)
    assert sampler.has_gaussian and not sampler.pure_jump


def test_endpoint_sampler_increments_shape(rng) -> None:
    sampler = LevyEndpointSampler(poisson_triplet(1.0), 0.5)
    increments = sampler.sample_increments([0.5, 1.0, 2.0], 100, rng)
    assert increments.shape == (100, 3, 1)
    with pytest.raises(InvalidInput):
        sampler.sample_increments([1.0, 0.5], 10, rng)


def test_brownian_mean_exit_time(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    exits = simulate_exits(sampler, 0.0, 1.0, 4000, rng, dt=1e-3)
    mean, se = mean_and_se(exits.exit_times)
    assert abs(mean - 1.0) <= 3 * se + 0.02
    assert np.all(np.abs(exits.exit_positions[exits.exited]) >= 1.0 - 1e-12)


def test_pure_jump_exits_are_event_driven(rng) -> None:
    sampler = LevyEndpointSampler(poisson_triplet(1.0), 0.5)
    exits = simulate_exits(sampler, 0.0, 2.5, 2000, rng)
    assert exits.event_driven
    # exit happens at the third jump, a Gamma(3, 1) time
    mean, se = mean_and_se(exits.exit_times)
    assert abs(mean - 3.0) <= 3 * se


def test_series_with_zero_terms_is_flat(rng) -> None:
    path = sample_series(lambda g, v: g[:, None] ** -1.0 * v, symmetric_sign(), 0, rng)
    assert np.all(path.values == 0.0)


def test_lepage_series_is_symmetric(rng) -> None:
    alpha = 1.5
    H = lambda gammas, marks: gammas[:, None] ** (-1.0 / alpha) * marks  # noqa: E731
    ends = Ensemble.generate(lambda r: sample_series(H, symmetric_sign(), 200, r, grid_dt=0.5), 3000,
                             rng).endpoints()[:, 0]
    median = float(np.median(ends))
    assert abs(median) < 0.1
    assert math.isfinite(float(np.mean(np.abs(ends))))
