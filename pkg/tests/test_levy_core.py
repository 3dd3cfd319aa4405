# levytype/tests/test_levy_core.py
import math

import numpy as np
import pytest

from errors import DimensionMismatch, InvalidAlpha, NoConvergence, NotPositiveSemidefinite, QuadratureDivergence
from levy_core import (
    Annulus,
    CharacteristicExponent,
    ExpPowerDensity,
    FiniteAtomic,
    LevyTriplet,
    PredicateRegion,
    RadialDensity,
    SphericalMeasure,
    ZeroMeasure,
    brownian_triplet,
    cauchy_triplet,
    eval_exponent,
    exponent_of,
    exponent_table,
    gamma_triplet,
    growth_check,
    growth_constant,
    integrability_witness,
    jump_mass,
    measure_of,
    poisson_triplet,
    power_exponent,
    small_jump_second_moment,
    stable_closed_triplet,
    stable_exponent,
    subadditivity_check,
    symmetric_stable_constant,
    symmetric_stable_triplet,
    triplet_from_exponent_probe,
    truncate_triplet,
)
from samplers import GaussianJumps, compound_poisson_triplet

XI = np.linspace(-5.0, 5.0, 21)


def test_brownian_exponent_is_half_xi_squared() -> None:
    for xi in XI:
        assert eval_exponent(brownian_triplet(), xi) == pytest.approx(0.5 * xi * xi, abs=1e-12)


def test_poisson_atom_at_one_is_not_compensated() -> None:
    triplet = poisson_triplet(2.0)
    for xi in XI:
        assert abs(eval_exponent(triplet, xi) - 2.0 * (1.0 - np.exp(1j * xi))) < 1e-12


def test_compound_poisson_with_gaussian_jumps() -> None:
    triplet = compound_poisson_triplet(1.0, GaussianJumps(1.0))
    for xi in XI:
        assert abs(eval_exponent(triplet, xi) - (1.0 - math.exp(-0.5 * xi * xi))) < 1e-6


def test_symmetric_stable_quadrature_matches_closed_form() -> None:
    c = symmetric_stable_constant(1.5)
    for xi in XI:
        assert abs(eval_exponent(symmetric_stable_triplet(1.5), xi) - c * abs(xi) ** 1.5) < 1e-6


def test_gamma_subordinator_exponent() -> None:
    for xi in XI:
        expected = 0.5 * math.log1p(xi * xi) - 1j * math.atan(xi)
        assert abs(eval_exponent(gamma_triplet(), xi) - expected) < 1e-6


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_closed_stable_exponent_is_real_power_for_symmetric_sigma(alpha) -> None:
    triplet = stable_closed_triplet(alpha)
    for xi in (0.3, 1.0, 4.0):
        value = eval_exponent(triplet, xi)
        assert abs(value.imag) < 1e-9
        assert value.real == pytest.approx(abs(xi) ** alpha, rel=1e-9)


def test_cauchy_exponent_is_abs_xi() -> None:
    assert eval_exponent(cauchy_triplet(2.0), -1.5).real == pytest.approx(3.0, rel=1e-9)


def test_exponent_vanishes_at_zero() -> None:
    for triplet in (brownian_triplet(), poisson_triplet(3.0), symmetric_stable_triplet(0.8), gamma_triplet()):
        assert abs(eval_exponent(triplet, 0.0)) < 1e-12


def test_hermitian_symmetry() -> None:
    triplet = gamma_triplet(2.0, 0.5)
    for xi in (0.5, 2.0):
        assert abs(eval_exponent(triplet, -xi) - eval_exponent(triplet, xi).conjugate()) < 1e-9


def test_non_psd_covariance_rejected() -> None:
    with pytest.raises(NotPositiveSemidefinite):
        LevyTriplet((0.0, 0.0), ((1.0, 0.0), (0.0, -0.1)))


def test_dimension_mismatch_rejected() -> None:
    with pytest.raises(DimensionMismatch):
        LevyTriplet((0.0,), ((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(DimensionMismatch):
        eval_exponent(brownian_triplet(np.eye(2)), [1.0, 2.0, 3.0])


def test_alpha_outside_open_interval_rejected() -> None:
    with pytest.raises(InvalidAlpha):
        symmetric_stable_triplet(2.0)
    with pytest.raises(InvalidAlpha):
        stable_closed_triplet(0.0)


def test_witness_above_declared_bound_raises() -> None:
    # int min(1, y^2) nu(dy) = 16/3 for this density
    nu = RadialDensity(ExpPowerDensity(1.0, 2.5), SphericalMeasure.symmetric_1d(1.0), witness_bound=0.1)
    with pytest.raises(QuadratureDivergence):
        eval_exponent(LevyTriplet((0.0,), ((0.0,),), nu), 1.0)


def test_measure_of_stable_annulus() -> None:
    nu = symmetric_stable_triplet(1.5).nu
    expected = 2.0 * (0.5 ** -1.5 - 1.0) / 1.5
    assert measure_of(nu, Annulus(0.5, 1.0)) == pytest.approx(expected, rel=1e-8)
    assert jump_mass(nu, 1.0) == pytest.approx(2.0 / 1.5, rel=1e-8)


def test_truncation_keeps_only_large_jumps() -> None:
    triplet = poisson_triplet(2.0)
    assert isinstance(truncate_triplet(triplet, 2.0).nu, ZeroMeasure)
    assert isinstance(truncate_triplet(triplet, 0.5).nu, FiniteAtomic)


def test_integrability_witness_of_atoms() -> None:
    nu = FiniteAtomic(((0.5,), (3.0,)), (4.0, 1.0))
    assert integrability_witness(nu) == pytest.approx(4.0 * 0.25 + 1.0)


def test_growth_bound_and_subadditivity() -> None:
    psi = exponent_of(symmetric_stable_triplet(1.2))
    assert growth_constant(psi, 9) > 0
    assert growth_check(psi, np.linspace(-20.0, 20.0, 9), 9)
    assert subadditivity_check(psi, 1.3, -2.7)
    assert subadditivity_check(power_exponent(2.0), 1.0, 1.0)


def test_probe_recovers_gaussian_part() -> None:
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    report = triplet_from_exponent_probe(exponent_of(brownian_triplet(Q)))
    assert report.converged
    np.testing.assert_allclose(report.Q_hat, Q, atol=1e-9)


def test_probe_finds_no_gaussian_part_in_stable_law() -> None:
    report = triplet_from_exponent_probe(exponent_of(stable_closed_triplet(1.5)))
    assert abs(report.Q_hat[0, 0]) < 1e-3


def test_probe_reports_no_convergence() -> None:
    psi = CharacteristicExponent.from_callable(lambda xi: float(xi[0]) ** 2 * math.log(1.0 + abs(float(xi[0]))))
    with pytest.raises(NoConvergence):
        triplet_from_exponent_probe(psi)


def test_exponent_table_columns() -> None:
    table = exponent_table(exponent_of(brownian_triplet()), np.linspace(-1.0, 1.0, 5))
    assert list(table.columns) == ["xi_1", "re_psi", "im_psi"]
    assert table["re_psi"].iloc[0] == pytest.approx(0.5)


def test_stable_exponent_branches() -> None:
    sigma = SphericalMeasure.symmetric_1d(0.5)
    assert stable_exponent(1.5, sigma, 0.0, 2.0) == pytest.approx(2.0 ** 1.5)
    assert stable_exponent(1.0, sigma, 0.0, 2.0) == pytest.approx(2.0)
    assert stable_exponent(0.7, sigma, 0.0, 0.0) == 0.0
    one_sided = SphericalMeasure(((1.0,),), (1.0,))
    value = stable_exponent(1.0, one_sided, 0.0, 2.0)
    assert value.imag == pytest.approx(2.0 * (2.0 / math.pi) * math.log(2.0))
    with pytest.raises(InvalidAlpha):
        stable_exponent(2.5, sigma, 0.0, 1.0)


def test_small_jump_second_moment() -> None:
    nu = symmetric_stable_triplet(1.5).nu
    # 2 int_0^eps r^2 r^{-2.5} dr = 4 sqrt(eps)
    assert small_jump_second_moment(nu, 0.25) == pytest.approx(2.0, rel=1e-5)
    assert small_jump_second_moment(FiniteAtomic(((0.5,), (2.0,)), (1.0, 1.0)), 1.0) == pytest.approx(0.25)


def test_predicate_region() -> None:
    nu = FiniteAtomic(((0.5,), (1.5,), (-1.5,)), (1.0, 2.0, 3.0))
    positive = PredicateRegion(lambda y: y[:, 0] > 1.0, 1.0)
    assert positive.exclusion_radius == 1.0
    assert measure_of(nu, positive) == pytest.approx(2.0)
