# levytype/tests/test_semigroup_ops.py
import math

import numpy as np
import pytest

from errors import Censored, InvalidInput, InvalidTestFunction
from levy_core import brownian_triplet, exponent_of, poisson_triplet, stable_closed_triplet
from samplers import GaussianJumps, LevyEndpointSampler, compound_poisson_triplet
from semigroup_ops import (
    TestFunction,
    chapman_kolmogorov_check,
    constant_function,
    contraction_check,
    dissipativity_check,
    dynkin_check,
    exponential_martingale_check,
    gaussian_bump,
    gaussian_family,
    generator_fourier,
    generator_integro,
    generator_limit_check,
    operator_sweep,
    positive_maximum_principle_probe,
    quadratic_function,
    resolvent_apply,
    resolvent_identity_check,
    semigroup_apply,
    strong_continuity_probe,
    sub_markov_check,
    translation_invariance_probe,
)

F = gaussian_family([(1.0, 0.5, 0.0), (0.5, 2.0, 1.0)])


def test_gaussian_family_derivatives_are_consistent() -> None:
    assert F.check_consistency() < 1e-5
    assert F.certificate()["sup"] == pytest.approx(F.at(0.0), rel=1e-2)


def test_inconsistent_derivatives_are_rejected() -> None:
    f = TestFunction(lambda p: np.sin(p[:, 0]), lambda p: np.sin(p), lambda p: -np.sin(p)[:, :, None])
    with pytest.raises(InvalidTestFunction):
        f.check_consistency()


def test_gaussian_family_needs_positive_width() -> None:
    with pytest.raises(InvalidTestFunction):
        gaussian_family([(1.0, 0.0, 0.0)])


def test_brownian_generator_is_half_laplacian() -> None:
    f = gaussian_bump()
    for x in (0.0, 0.7, -1.5):
        expected = 0.5 * (x * x - 1.0) * math.exp(-0.5 * x * x)
        assert generator_integro(brownian_triplet(), f, x) == pytest.approx(expected, abs=1e-12)
        assert generator_fourier(exponent_of(brownian_triplet()), f, x) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("triplet", [
    compound_poisson_triplet(2.0, GaussianJumps(0.5)),
    poisson_triplet(1.5),
    stable_closed_triplet(1.5),
])
def test_fourier_and_integro_generators_agree(triplet) -> None:
    sweep = operator_sweep(triplet, F, [-1.0, 0.0, 0.5, 2.0])
    assert np.all(np.abs(sweep["diff"]) < 1e-4)


def test_fourier_generator_needs_transform() -> None:
    with pytest.raises(InvalidTestFunction):
        generator_fourier(exponent_of(brownian_triplet()), quadratic_function(), 0.0)


def test_semigroup_of_constant_is_constant(rng) -> None:
    sampler = LevyEndpointSampler(stable_closed_triplet(1.2), 0.05)
    mean, se = semigroup_apply(sampler, constant_function(2.0), 0.5, 0.0, 100, rng)
    assert mean == pytest.approx(2.0)
    assert se == 0.0
    assert semigroup_apply(sampler, F, 0.0, 0.3, 10, rng) == (F.at(0.3), 0.0)
    with pytest.raises(InvalidInput):
        semigroup_apply(sampler, F, -1.0, 0.0, 10, rng)


def test_brownian_semigroup_of_gaussian_bump(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    mean, se = semigroup_apply(sampler, gaussian_bump(), 1.0, 0.0, 20000, rng)
    # E exp(-B_1^2 / 2) = 1 / sqrt(2)
    assert abs(mean - 1.0 / math.sqrt(2.0)) <= 3 * se


def test_resolvent_of_constant(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    mean, _ = resolvent_apply(sampler, constant_function(), 2.0, 0.0, 1000, rng)
    assert mean == pytest.approx(0.5, rel=1e-6)
    with pytest.raises(InvalidInput):
        resolvent_apply(sampler, F, 0.0, 0.0, 10, rng)


def test_resolvent_identity(rng) -> None:
    sampler = LevyEndpointSampler(compound_poisson_triplet(1.0, GaussianJumps()), 0.5)
    assert resolvent_identity_check(sampler, F, 1.0, 0.0, 20000, rng).passed


def test_generator_is_the_short_time_limit(rng) -> None:
    sampler = LevyEndpointSampler(poisson_triplet(1.0), 0.5)
    report = generator_limit_check(sampler, gaussian_bump(), 0.0, (0.1, 0.05, 0.025), 20000, rng, rel=0.05)
    assert report.target == pytest.approx(math.exp(-0.5) - 1.0, rel=1e-9)
    assert report.passed
    assert len(report.to_dict()["t_grid"]) == 3


def test_dissipativity() -> None:
    for triplet in (brownian_triplet(), poisson_triplet(1.0)):
        assert dissipativity_check(triplet, F, 1.0, np.linspace(-4.0, 4.0, 81)).passed


def test_positive_maximum_principle() -> None:
    for triplet in (brownian_triplet(), poisson_triplet(2.0), stable_closed_triplet(1.5)):
        assert positive_maximum_principle_probe(triplet, F).passed


def test_translation_invariance() -> None:
    assert translation_invariance_probe(poisson_triplet(1.0), F, 0.2, 0.7).passed
    assert translation_invariance_probe(stable_closed_triplet(1.5), F, 0.2, 0.7, tol=1e-6).passed


def test_sub_markov_and_contraction(rng) -> None:
    sampler = LevyEndpointSampler(stable_closed_triplet(1.5), 0.05)
    xs = [[-1.0], [0.0], [1.0]]
    assert sub_markov_check(sampler, gaussian_bump(), (0.1, 1.0), xs, 2000, rng).passed
    assert contraction_check(sampler, F, (0.1, 1.0), xs, 2000, rng).passed


def test_strong_continuity(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    frame = strong_continuity_probe(sampler, gaussian_bump(), (1.0, 0.1, 0.001), [[0.0], [1.0]], 4000, rng)
    assert frame["sup_diff"].iloc[-1] < frame["sup_diff"].iloc[0]


def test_dynkin_formula_for_brownian_square(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    report = dynkin_check(sampler, quadratic_function(), 0.0, 1.0, 2000, rng, dt=1e-3)
    assert report.passed
    assert report.details["e_sigma"] == pytest.approx(1.0, abs=0.1)


def test_dynkin_reports_censoring(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    with pytest.raises(Censored):
        dynkin_check(sampler, quadratic_function(), 0.0, 5.0, 200, rng, dt=1e-2, t_max=0.5)


def test_exponential_martingale(rng) -> None:
    sampler = LevyEndpointSampler(compound_poisson_triplet(2.0, GaussianJumps()), 0.5)
    reports = exponential_martingale_check(sampler, 1.0, (0.25, 0.5, 1.0), 8000, rng)
    assert len(reports) == 9
    assert sum(not r.passed for r in reports) <= 1


def test_chapman_kolmogorov(rng) -> None:
    sampler = LevyEndpointSampler(brownian_triplet(), 1.0)
    assert chapman_kolmogorov_check(sampler, F, 0.0, 0.5, 0.5, 16000, rng).passed
