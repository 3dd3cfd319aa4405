# levytype/tests/test_rom_integral.py
import math

import pytest

from errors import NonAdaptedCoefficient, NotSquareIntegrable, OutOfSemiring
from levy_core import SpaceBox, symmetric_stable_triplet
from report_utils import mean_and_se
from rom_integral import (
    Coefficient,
    CompensatedPoisson,
    DeterministicTime,
    DyadicUpper,
    FirstExitTime,
    SimpleFunction,
    SimpleProcess,
    SpaceTimeInterval,
    SpaceTimeWhiteNoise,
    TimeInterval,
    WhiteNoise,
    additivity_check,
    brownian_martingale,
    compensated_poisson_martingale,
    control_integral,
    dyadic_upper,
    integrate_l2,
    integrate_predictable,
    integrate_simple,
    isometry_check,
    isometry_record,
    isometry_suite,
    martingale_increment_check,
    orthogonality_check,
    predictable_samples,
    sample_noise,
    value_at_tau,
    white_noise_divergence,
)


def test_time_interval_rejects_reversed_bounds() -> None:
    with pytest.raises(OutOfSemiring):
        TimeInterval(0.5, 0.5)


def test_simple_function_cannot_mix_index_sets() -> None:
    box = SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([0.5], [1.0]))
    with pytest.raises(OutOfSemiring):
        SimpleFunction(((1.0, TimeInterval(0.0, 1.0)), (1.0, box)))


def test_refinement_preserves_control_integral() -> None:
    f = SimpleFunction(((1.0, TimeInterval(0.0, 0.6)), (2.0, TimeInterval(0.4, 1.0))))
    # (0, 0.4]: 1, (0.4, 0.6]: 3, (0.6, 1]: 2
    expected = 0.4 * 1.0 + 0.2 * 9.0 + 0.4 * 4.0
    assert control_integral(f, WhiteNoise()) == pytest.approx(expected)
    assert len(f.refine().terms) == 3


def test_white_noise_orthogonality(rng) -> None:
    report = orthogonality_check(WhiteNoise(), TimeInterval(0.0, 0.6), TimeInterval(0.4, 1.0), 20000, rng)
    assert report.rhs == pytest.approx(0.2)
    assert report.passed


def test_compensated_poisson_is_additive(rng) -> None:
    N = CompensatedPoisson(symmetric_stable_triplet(1.5).nu, 1.0, 0.5)
    R = SpaceTimeInterval(TimeInterval(0.0, 0.5), SpaceBox([0.5], [1.0]))
    S = SpaceTimeInterval(TimeInterval(0.5, 1.0), SpaceBox([0.5], [1.0]))
    union = SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([0.5], [1.0]))
    report = additivity_check(N, R, S, union, 500, rng)
    assert report.lhs == pytest.approx(0.0, abs=1e-12)


def test_compensated_poisson_rejects_sets_below_cutoff(rng) -> None:
    N = CompensatedPoisson(symmetric_stable_triplet(1.5).nu, 1.0, 0.5)
    with pytest.raises(OutOfSemiring):
        sample_noise(N, SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([0.1], [1.0])), rng)
    with pytest.raises(OutOfSemiring):
        sample_noise(N, TimeInterval(0.0, 1.0), rng)


def test_compensated_poisson_has_mean_zero(rng) -> None:
    N = CompensatedPoisson(symmetric_stable_triplet(1.5).nu, 1.0, 0.5)
    R = SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([0.5], [2.0]))
    draws = N.sample_batch([R], 4000, rng)[:, 0]
    mean, se = mean_and_se(draws)
    assert abs(mean) <= 3 * se


def test_integrate_simple_is_linear(rng) -> None:
    a = SimpleFunction.indicator(TimeInterval(0.0, 0.5), 2.0)
    b = SimpleFunction.indicator(TimeInterval(0.5, 1.0), -1.0)
    noise = WhiteNoise()
    replay = noise.replay(rng)
    total = integrate_simple(a + b, noise, rng, replay)
    assert total == pytest.approx(integrate_simple(a, noise, rng, replay) + integrate_simple(b, noise, rng, replay))


def test_white_noise_replay_is_consistent(rng) -> None:
    replay = WhiteNoise().replay(rng)
    whole = replay.sample(TimeInterval(0.0, 1.0))
    parts = replay.sample(TimeInterval(0.0, 0.3)) + replay.sample(TimeInterval(0.3, 1.0))
    assert whole == pytest.approx(parts)


def test_l2_integral_of_identity(rng) -> None:
    result = integrate_l2(lambda s: s, WhiteNoise(), 6, rng, domain=[TimeInterval(0.0, 1.0)], n=20000)
    assert result.certificate > 0
    mean, se = mean_and_se(result.values ** 2)
    assert abs(mean - 1.0 / 3.0) <= 3 * se + 1e-3


def test_l2_integral_rejects_non_square_integrable(rng) -> None:
    with pytest.raises(NotSquareIntegrable):
        integrate_l2(lambda s: 1.0 / s, WhiteNoise(), 4, rng, domain=[TimeInterval(0.0, 1.0)])


@pytest.mark.slow
def test_isometry_suite_passes() -> None:
    from samplers import RandomSource

    reports = isometry_suite(4000, RandomSource(2024), level=5)
    assert len(reports) == 3
    assert [r.rhs for r in reports] == pytest.approx([1.0 / 3.0, 3.0, 4.0 - 2.0 * math.sqrt(2.0)], rel=1e-5)
    assert all(r.passed for r in reports)
    record = isometry_record(reports[0])
    assert set(record) == {"functional", "mc_moment", "control_integral", "se", "pass"}


def test_space_time_white_noise_isometry(rng) -> None:
    N = SpaceTimeWhiteNoise(SpaceBox([0.0], [1.0]), 1.0, 3)
    R = SpaceTimeInterval(TimeInterval(0.0, 0.5), SpaceBox([0.25], [0.75]))
    report = isometry_check(SimpleFunction.indicator(R, 2.0), N, 4000, rng)
    assert report.rhs == pytest.approx(4.0 * 0.25)
    assert report.passed


def test_space_time_white_noise_needs_grid_sets(rng) -> None:
    N = SpaceTimeWhiteNoise(SpaceBox([0.0], [1.0]), 1.0, 3)
    with pytest.raises(OutOfSemiring):
        sample_noise(N, SpaceTimeInterval(TimeInterval(0.0, 0.3), SpaceBox([0.0], [1.0])), rng)


def test_martingale_increments_are_orthogonal_to_the_past(rng) -> None:
    N = CompensatedPoisson(symmetric_stable_triplet(1.5).nu, 1.0, 0.5)
    assert martingale_increment_check(N, SpaceBox([0.5], [1.0]), 0.4, 1.0, 3000, rng).passed


def test_dyadic_upper_is_strictly_above() -> None:
    assert dyadic_upper(0.5, 2) == pytest.approx(0.75)
    assert dyadic_upper(0.3, 3) == pytest.approx(0.375)


def test_predictable_integral_has_mean_zero(rng) -> None:
    M = brownian_martingale(grid_dt=2.0 ** -6)
    F = SimpleProcess((0.0, 0.5, 1.0), (1.0, value_at_tau()))
    samples = predictable_samples(F, M, 2000, rng)
    mean, se = mean_and_se(samples)
    assert abs(mean) <= 3 * se
    # E (M_1/2 + M_1/2 (M_1 - M_1/2))^2 = 1/2 + 1/4
    second, second_se = mean_and_se(samples ** 2)
    assert abs(second - 0.75) <= 3 * second_se


def test_stopped_martingale_has_mean_zero(rng) -> None:
    M = brownian_martingale(grid_dt=2.0 ** -8)
    tau = DyadicUpper(FirstExitTime(-0.5, 0.5, 0.9, 2.0 ** -8), 6)
    F = SimpleProcess.stopped(tau)
    samples = predictable_samples(F, M, 2000, rng)
    mean, se = mean_and_se(samples)
    assert abs(mean) <= 3 * se


def test_coefficient_reading_the_future_is_rejected(rng) -> None:
    M = brownian_martingale(grid_dt=2.0 ** -6)
    peek = Coefficient(lambda view, tau: view.value_at(tau + 0.25))
    with pytest.raises(NonAdaptedCoefficient):
        integrate_predictable(SimpleProcess((0.0, 0.5, 1.0), (1.0, peek)), M, rng)
    declared = Coefficient(lambda view, tau: 0.0, reads_until=lambda tau: tau + 0.1)
    with pytest.raises(NonAdaptedCoefficient):
        integrate_predictable(SimpleProcess((0.0, 0.5, 1.0), (1.0, declared)), M, rng)


def test_white_noise_is_not_a_signed_measure(rng) -> None:
    frame = white_noise_divergence((10, 100, 1000), n=300, rng=rng)
    assert frame["increasing"].all()
    assert frame["median"].iloc[-1] > 2.0 * frame["median"].iloc[0]
    assert math.isfinite(frame["median"].iloc[-1])


def test_martingale_noise_control_is_the_bracket() -> None:
    M = compensated_poisson_martingale(2.0)
    assert M.control(TimeInterval(0.0, 0.5)) == pytest.approx(1.0)
    with pytest.raises(OutOfSemiring):
        M.control(SpaceTimeInterval(TimeInterval(0.0, 0.5), SpaceBox([0.5], [1.0])))


def test_deterministic_stopping_gives_the_martingale_value(rng) -> None:
    M = brownian_martingale(grid_dt=2.0 ** -6)
    samples = predictable_samples(SimpleProcess.stopped(DeterministicTime(0.5)), M, 2000, rng)
    second, se = mean_and_se(samples ** 2)
    assert abs(second - 0.5) <= 3 * se


def test_isometry_targets_exact_integral_with_approximation_gap(rng) -> None:
    report = isometry_check(lambda s: s, WhiteNoise(), 2000, rng, level=1, domain=[TimeInterval(0.0, 1.0)],
                            exact=1.0 / 3.0)
    # midpoints 1/4 and 3/4 on two halves
    assert report.rhs == pytest.approx(1.0 / 3.0)
    assert report.details["approximation_gap"] == pytest.approx(1.0 / 3.0 - 0.3125)
    assert report.passed
