# levytype/semigroup_ops.py
"""
Operator-side numerics: Monte Carlo semigroup and resolvent, Fourier and
integro-differential generators, Dynkin's formula and martingale checks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize

import config
from errors import Censored, EmptyEnsemble, InvalidInput, InvalidTestFunction
from levy_core import (
    CharacteristicExponent,
    FiniteAtomic,
    LevyTriplet,
    RadialDensity,
    ZeroMeasure,
    as_points,
    as_radial_or_atomic,
    as_vector,
    exponent_of,
    quad,
)
from report_utils import CheckReport, mean_and_se, se_check
from samplers import LevyEndpointSampler, as_generator, exponentials, simulate_exits

logger = logging.getLogger(__name__)

# radius below which the jump kernel is replaced by its second-order Taylor term
TAYLOR_RADIUS = 1e-3


# --- Test functions ---

@dataclass(frozen=True, eq=False)
class TestFunction:
    """
    f: R^d -> R with gradient, Hessian and (optionally) Fourier transform.

    All evaluators take (m, d) points. ``fourier`` returns
    f^(xi) = (2 pi)^{-d} int f(y) e^{-i y.xi} dy, so that f(x) = int f^(xi) e^{i x.xi} dxi.
    """
    __test__ = False

    value: Callable
    gradient: Callable
    hessian: Callable
    dimension: int = 1
    fourier: Optional[Callable] = None
    bounded: bool = True
    label: str = ""

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.value(as_points(points, self.dimension)), dtype=float)

    def at(self, x) -> float:
        return float(self(as_vector(x, self.dimension, name="x")[None, :])[0])

    def grad_at(self, x) -> np.ndarray:
        return np.asarray(self.gradient(as_vector(x, self.dimension, name="x")[None, :]), dtype=float)[0]

    def hess_at(self, x) -> np.ndarray:
        return np.asarray(self.hessian(as_vector(x, self.dimension, name="x")[None, :]), dtype=float)[0]

    def certificate(self, probe_points=None) -> dict:
        """Sup norms of f and of its derivatives up to order two on a probe grid."""
        pts = self._probe(probe_points)
        sup_f = float(np.max(np.abs(self(pts))))
        sup_grad = float(np.max(np.abs(self.gradient(pts))))
        sup_hess = float(np.max(np.abs(self.hessian(pts))))
        out = {"sup": sup_f, "c2_norm": sup_f + sup_grad + sup_hess}
        if not all(math.isfinite(v) for v in out.values()):
            raise InvalidTestFunction(f"{self.label or 'f'} has non-finite certificates")
        return out

    def check_consistency(self, probe_points=None, tol: float = 1e-5) -> float:
        """
        Largest mismatch between the analytic and central finite-difference derivatives.

        :raises InvalidTestFunction: If it exceeds ``tol``.
        """
        pts = self._probe(probe_points)
        h = 1e-4
        worst = 0.0
        for k in range(self.dimension):
            e = np.zeros(self.dimension)
            e[k] = h
            fd_grad = (self(pts + e) - self(pts - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd_grad - self.gradient(pts)[:, k]))))
            fd_hess = (self.gradient(pts + e) - self.gradient(pts - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd_hess - self.hessian(pts)[:, :, k]))))
        if worst > tol:
            raise InvalidTestFunction(f"derivatives of {self.label or 'f'} are inconsistent (error {worst:.3g})")
        return worst

    def _probe(self, probe_points):
        if probe_points is None:
            axis = np.linspace(-4.0, 4.0, 41)
            probe_points = np.concatenate([np.outer(axis, np.eye(self.dimension)[k]) for k in range(self.dimension)])
        return as_points(probe_points, self.dimension)

    def shifted(self, h) -> "TestFunction":
        """y -> f(y + h)."""
        h = as_vector(h, self.dimension, name="h")
        fourier = None
        if self.fourier is not None:
            fourier = lambda xi: self.fourier(xi) * np.exp(1j * (as_points(xi, self.dimension) @ h))
        return TestFunction(lambda p: self.value(p + h), lambda p: self.gradient(p + h),
                            lambda p: self.hessian(p + h), self.dimension, fourier, self.bounded,
                            f"{self.label}(.+h)")


def gaussian_family(terms: Sequence[tuple], dimension: int = 1) -> TestFunction:
    """f(x) = sum_j w_j exp(-a_j |x - m_j|^2) for terms (w_j, a_j, m_j)."""
    parsed = []
    for w, a, m in terms:
        if not a > 0:
            raise InvalidTestFunction(f"Gaussian width parameter must be positive, got {a}")
        parsed.append((float(w), float(a), as_vector(m, dimension, name="center")))
    if not parsed:
        raise InvalidTestFunction("a Gaussian family needs at least one term")

    def value(p):
        return sum(w * np.exp(-a * np.sum((p - m) ** 2, axis=1)) for w, a, m in parsed)

    def gradient(p):
        return sum((w * np.exp(-a * np.sum((p - m) ** 2, axis=1)))[:, None] * (-2.0 * a * (p - m))
                   for w, a, m in parsed)

    def hessian(p):
        eye = np.eye(dimension)
        total = np.zeros((p.shape[0], dimension, dimension))
        for w, a, m in parsed:
            c = p - m
            e = w * np.exp(-a * np.sum(c ** 2, axis=1))
            total += e[:, None, None] * (4.0 * a * a * c[:, :, None] * c[:, None, :] - 2.0 * a * eye)
        return total

    def fourier(xi):
        xi = as_points(xi, dimension)
        norm2 = np.sum(xi ** 2, axis=1)
        return sum(w * (4.0 * math.pi * a) ** (-0.5 * dimension) * np.exp(-norm2 / (4.0 * a) - 1j * (xi @ m))
                   for w, a, m in parsed)

    label = " + ".join(f"{w:g}exp(-{a:g}|x-{m.tolist()}|^2)" for w, a, m in parsed)
    return TestFunction(value, gradient, hessian, dimension, fourier, True, label)


def gaussian_bump(a: float = 0.5, center=0.0, weight: float = 1.0, dimension: int = 1) -> TestFunction:
    """weight * exp(-a |x - center|^2); a = 1/2 gives e^{-x^2/2}."""
    center = np.zeros(dimension) + np.asarray(center, dtype=float)
    return gaussian_family([(weight, a, center)], dimension)


def constant_function(c: float = 1.0, dimension: int = 1) -> TestFunction:
    return TestFunction(lambda p: np.full(p.shape[0], float(c)),
                        lambda p: np.zeros((p.shape[0], dimension)),
                        lambda p: np.zeros((p.shape[0], dimension, dimension)),
                        dimension, None, True, f"const({c:g})")


def quadratic_function(dimension: int = 1) -> TestFunction:
    """|x|^2; unbounded, used with stopping times."""
    eye = np.eye(dimension)
    return TestFunction(lambda p: np.sum(p ** 2, axis=1), lambda p: 2.0 * p,
                        lambda p: np.broadcast_to(2.0 * eye, (p.shape[0], dimension, dimension)),
                        dimension, None, False, "|x|^2")


# --- Semigroup and resolvent ---

def semigroup_apply(sampler: LevyEndpointSampler, f: TestFunction, t: float, x, n: int, rng) -> tuple:
    """(P_t f(x), se) with P_t f(x) = E f(x + X_t)."""
    if t < 0:
        raise InvalidInput(f"t must be non-negative, got {t}")
    if n < 1:
        raise EmptyEnsemble("n must be at least 1")
    x = as_vector(x, sampler.dimension, name="x")
    if t == 0:
        return f.at(x), 0.0
    values = f(x + sampler.sample(t, n, rng))
    mean, se = mean_and_se(values)
    return float(mean), float(se)


def resolvent_apply(sampler: LevyEndpointSampler, f: TestFunction, lam: float, x, n: int, rng,
                    time_cap: Optional[float] = None) -> tuple:
    """
    (R_lambda f(x), se) = E f(x + X_E) / lambda with E ~ Exp(lambda).

    Evaluation times beyond ``time_cap`` contribute 0, an error below e^{-lambda cap} sup|f| / lambda.
    """
    if not lam > 0:
        raise InvalidInput(f"lambda must be positive, got {lam}")
    if n < 1:
        raise EmptyEnsemble("n must be at least 1")
    x = as_vector(x, sampler.dimension, name="x")
    time_cap = time_cap if time_cap is not None else 14.0 / lam
    gen = as_generator(rng)
    times = exponentials(gen, lam, n)
    kept = times <= time_cap
    moves = sampler.draw(gen, np.where(kept, times, 0.0), n)
    values = np.where(kept, f(x + moves), 0.0) / lam
    mean, se = mean_and_se(values)
    return float(mean), float(se)


# --- Generators ---

def generator_fourier(psi: CharacteristicExponent, f: TestFunction, x) -> float:
    """
    Af(x) = -int psi(xi) f^(xi) e^{i x.xi} dxi by quadrature over the Fourier transform of f (d = 1).

    :raises QuadratureDivergence: If the integral does not converge.
    """
    if f.fourier is None:
        raise InvalidTestFunction(f"{f.label or 'f'} has no Fourier transform")
    if psi.dimension != 1:
        raise InvalidInput("the Fourier generator is implemented on R only")
    x = float(as_vector(x, 1, name="x")[0])
    cut = _fourier_cutoff(f)

    def integrand(xi):
        total = 0.0
        for s in (xi, -xi):
            total += (-psi(s) * complex(f.fourier(np.array([s]))[0]) * complex(math.cos(s * x), math.sin(s * x))).real
        return total

    return quad(integrand, 0.0, cut, points=[1.0] if cut > 1.0 else None)


def _fourier_cutoff(f: TestFunction) -> float:
    # first |xi| with |f^(xi)| below 1e-18 of its peak, searched on a doubling grid
    peak = abs(complex(f.fourier(np.zeros((1, f.dimension)))[0])) or 1.0
    cut = 1.0
    while abs(complex(f.fourier(np.array([[cut]]))[0])) > 1e-18 * peak and cut < 1e4:
        cut *= 2.0
    return cut


def _radial_generator(nu: RadialDensity, f: TestFunction, x: np.ndarray, fx: float, grad: np.ndarray,
                      hess: np.ndarray) -> float:
    total = 0.0
    weight = nu.radial_weight
    for z, w in zip(nu.angular.points, nu.angular.masses):
        if w == 0.0:
            continue
        gz = float(grad @ z)
        hz = float(z @ hess @ z)

        def kernel(r, compensate):
            value = f.at(x + r * z) - fx
            if compensate:
                value -= r * gz
            return value * float(weight(r))

        part = 0.0
        lo = nu.r_min
        if lo < 1.0:
            if lo < TAYLOR_RADIUS:
                part += 0.5 * hz * quad(lambda r: r * r * float(weight(r)), lo, TAYLOR_RADIUS)
                lo = TAYLOR_RADIUS
            part += quad(lambda r: kernel(r, True), lo, 1.0)
        part += quad(lambda r: kernel(r, False), max(1.0, nu.r_min), math.inf)
        total += w * part
    return total


def generator_integro(source, f: TestFunction, x) -> float:
    """
    l.grad f + tr(Q hess f) / 2 + int [f(x+y) - f(x) - grad f(x).y 1_{(0,1)}(|y|)] nu(dy) - q(x,0) f(x).

    ``source`` is a LevyTriplet or a StateSymbol with a triplet field.
    """
    if isinstance(source, LevyTriplet):
        triplet, q0 = source, 0.0
    else:
        if getattr(source, "triplet_at", None) is None:
            raise InvalidInput("the integro-differential generator needs a triplet field")
        triplet, q0 = source.triplet_at(as_vector(x, source.dimension, name="x")), float(source.q0_at(x))
    x = as_vector(x, triplet.dimension, name="x")
    fx = f.at(x)
    grad = f.grad_at(x)
    hess = f.hess_at(x)
    value = float(triplet.drift @ grad) + 0.5 * float(np.sum(triplet.covariance * hess)) - q0 * fx
    nu = as_radial_or_atomic(triplet.nu)
    if isinstance(nu, ZeroMeasure):
        return value
    if isinstance(nu, FiniteAtomic):
        pts = nu.points
        small = np.linalg.norm(pts, axis=1) < 1.0
        jumps = f(x + pts) - fx - small * (pts @ grad)
        return value + float(np.sum(nu.weights * jumps))
    return value + _radial_generator(nu, f, x, fx, grad, hess)


def generator_many(triplet: LevyTriplet, f: TestFunction, points) -> np.ndarray:
    """Af at (m, d) points; vectorised except for radial jump integrals."""
    pts = as_points(points, triplet.dimension)
    local = f.gradient(pts) @ triplet.drift + 0.5 * np.einsum("pij,ij->p", f.hessian(pts), triplet.covariance)
    nu = as_radial_or_atomic(triplet.nu)
    if isinstance(nu, ZeroMeasure):
        return np.asarray(local, dtype=float)
    if isinstance(nu, FiniteAtomic):
        fx = f(pts)
        grad = f.gradient(pts)
        jumps = np.zeros(pts.shape[0])
        for y, w in zip(nu.points, nu.weights):
            compensation = grad @ y if np.linalg.norm(y) < 1.0 else 0.0
            jumps += w * (f(pts + y) - fx - compensation)
        return local + jumps
    return np.array([generator_integro(triplet, f, p) for p in pts])


def generator_table(triplet: LevyTriplet, f: TestFunction, lower: float, upper: float, points: int = 1025):
    """Af tabulated on [lower, upper] (d = 1) and returned as an interpolating function of (m, 1) points."""
    grid = np.linspace(lower, upper, points)
    values = np.array([generator_integro(triplet, f, [g]) for g in grid])
    return lambda pts: np.interp(np.asarray(pts)[:, 0], grid, values)


@dataclass
class LimitReport:
    t_grid: np.ndarray
    raw: np.ndarray
    raw_se: np.ndarray
    limit: float
    se: float
    target: float
    passed: bool

    @property
    def residuals(self) -> np.ndarray:
        return self.raw - self.target

    def to_dict(self) -> dict:
        return {"check": "generator_limit", "limit": self.limit, "se": self.se, "target": self.target,
                "pass": self.passed,
                "t_grid": [{"t": float(t), "value": float(v), "se": float(s), "residual": float(v - self.target)}
                           for t, v, s in zip(self.t_grid, self.raw, self.raw_se)]}


def generator_limit_check(sampler: LevyEndpointSampler, f: TestFunction, x, t_grid: Sequence[float], n: int,
                          rng, rel: float = 0.02) -> LimitReport:
    """(P_t f(x) - f(x)) / t on a decreasing t grid, extrapolated linearly to 0 and compared with Af(x)."""
    t_grid = np.sort(np.asarray(t_grid, dtype=float))[::-1]
    if np.any(t_grid <= 0) or t_grid.size < 2:
        raise InvalidInput("t_grid needs at least two positive times")
    x = as_vector(x, sampler.dimension, name="x")
    fx = f.at(x)
    raw = np.empty(t_grid.size)
    raw_se = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        mean, se = semigroup_apply(sampler, f, t, x, n, rng.child(k))
        raw[k], raw_se[k] = (mean - fx) / t, se / t
    weights = np.linalg.pinv(np.column_stack([np.ones_like(t_grid), t_grid]))[0]
    limit = float(weights @ raw)
    se = float(np.sqrt(np.sum(weights ** 2 * raw_se ** 2)))
    target = generator_integro(sampler.truncated_triplet, f, x)
    passed = abs(limit - target) <= max(config.N_SE * se, rel * abs(target)) + config.ABS_TOL
    return LimitReport(t_grid, raw, raw_se, limit, se, target, bool(passed))


def operator_sweep(triplet: LevyTriplet, f: TestFunction, xs) -> pd.DataFrame:
    """Columns x, Af_fourier, Af_integro, diff."""
    psi = exponent_of(triplet)
    rows = []
    for x in np.ravel(np.asarray(xs, dtype=float)):
        fourier = generator_fourier(psi, f, x)
        integro = generator_integro(triplet, f, x)
        rows.append({"x": float(x), "Af_fourier": fourier, "Af_integro": integro, "diff": fourier - integro})
    return pd.DataFrame(rows)


# --- Operator properties ---

def dissipativity_check(triplet: LevyTriplet, f: TestFunction, lam: float, probe_points) -> CheckReport:
    """sup |lambda f - Af| >= lambda sup |f| over the probe points."""
    pts = as_points(probe_points, triplet.dimension)
    fv = f(pts)
    af = generator_many(triplet, f, pts)
    lhs = float(np.max(np.abs(lam * fv - af)))
    rhs = lam * float(np.max(np.abs(fv)))
    return CheckReport("dissipativity", lhs, rhs, 0.0, lhs >= rhs - 1e-8, len(pts))


def resolvent_identity_check(sampler: LevyEndpointSampler, f: TestFunction, lam: float, x, n: int, rng,
                             rel: float = 0.02) -> CheckReport:
    """
    (lambda - A) R_lambda f(x) against f(x).

    A commutes with the translation-invariant resolvent, so the left side is
    E[f(x + X_E) - Af(x + X_E) / lambda] over the same Exp(lambda) evaluation times.
    """
    x = as_vector(x, sampler.dimension, name="x")
    gen = as_generator(rng)
    times = exponentials(gen, lam, n)
    points = x + sampler.draw(gen, times, n)
    triplet = sampler.truncated_triplet
    if isinstance(as_radial_or_atomic(triplet.nu), RadialDensity) and sampler.dimension == 1:
        lo, hi = float(points.min()), float(points.max())
        af = generator_table(triplet, f, lo, hi if hi > lo else lo + 1.0)(points)
    else:
        af = generator_many(triplet, f, points)
    lhs, se = mean_and_se(f(points) - af / lam)
    rhs = f.at(x)
    passed = abs(lhs - rhs) <= max(config.N_SE * float(se), rel * abs(rhs)) + config.ABS_TOL
    return CheckReport("resolvent_identity", float(lhs), rhs, float(se), bool(passed), n)


def sub_markov_check(sampler: LevyEndpointSampler, f: TestFunction, ts: Sequence[float], xs, n: int,
                     rng) -> CheckReport:
    """For 0 <= f <= 1: -3 SE <= P_t f(x) <= 1 + 3 SE at every (t, x)."""
    worst = 0.0
    passed = True
    k = 0
    for t in ts:
        for x in as_points(xs, sampler.dimension):
            mean, se = semigroup_apply(sampler, f, t, x, n, rng.child(k))
            k += 1
            slack = config.N_SE * se + config.ABS_TOL
            passed &= -slack <= mean <= 1.0 + slack
            worst = max(worst, mean - 1.0, -mean)
    return CheckReport("sub_markov", worst, 0.0, 0.0, bool(passed), n, {"evaluations": k})


def positive_maximum_principle_probe(triplet: LevyTriplet, f: TestFunction, start=None) -> CheckReport:
    """Af(x0) <= 1e-8 at the numerically located global maximum x0 of f (when f(x0) >= 0)."""
    d = triplet.dimension
    probe = f._probe(None)
    x_start = probe[int(np.argmax(f(probe)))] if start is None else as_vector(start, d, name="start")
    result = optimize.minimize(lambda p: -f.at(p), x_start, jac=lambda p: -f.grad_at(p), method="BFGS",
                               options={"gtol": 1e-12})
    x0 = np.asarray(result.x, dtype=float)
    if f.at(x0) < 0:
        return CheckReport("positive_maximum_principle", 0.0, 0.0, 0.0, True, 0, {"skipped": "negative maximum"})
    af = generator_integro(triplet, f, x0)
    return CheckReport("positive_maximum_principle", af, 0.0, 0.0, af <= 1e-8, 0, {"x0": x0.tolist()})


def translation_invariance_probe(triplet: LevyTriplet, f: TestFunction, x, h, tol: float = 1e-8) -> CheckReport:
    """A(f(. + h))(x) against Af(x + h)."""
    x = as_vector(x, triplet.dimension, name="x")
    h = as_vector(h, triplet.dimension, name="h")
    lhs = generator_integro(triplet, f.shifted(h), x)
    rhs = generator_integro(triplet, f, x + h)
    return CheckReport("translation_invariance", lhs, rhs, 0.0, abs(lhs - rhs) <= tol * max(1.0, abs(rhs)), 0)


def strong_continuity_probe(sampler: LevyEndpointSampler, f: TestFunction, ts: Sequence[float], xs, n: int,
                            rng) -> pd.DataFrame:
    """sup over xs of |P_t f(x) - f(x)| for each t; shrinks to 0 as t -> 0."""
    rows = []
    for k, t in enumerate(sorted(ts, reverse=True)):
        diffs, ses = [], []
        for j, x in enumerate(as_points(xs, sampler.dimension)):
            mean, se = semigroup_apply(sampler, f, t, x, n, rng.child(1000 * k + j))
            diffs.append(abs(mean - f.at(x)))
            ses.append(se)
        i = int(np.argmax(diffs))
        rows.append({"t": float(t), "sup_diff": diffs[i], "se": ses[i]})
    return pd.DataFrame(rows)


# --- Stopped and martingale identities ---

def dynkin_check(sampler: LevyEndpointSampler, f: TestFunction, x, r: float, n: int, rng, *,
                 dt: float = 1e-3, t_max: float = 50.0, af: Optional[Callable] = None) -> CheckReport:
    """
    E f(X_sigma) - f(x) against E int_0^sigma Af(X_s) ds, sigma the first exit from B_r(x).

    ``af`` maps (m, d) points to Af values; by default Af is tabulated on the ball (d = 1)
    or evaluated pointwise.

    :raises Censored: If more than CENSOR_FRACTION of the paths never exit.
    """
    x = as_vector(x, sampler.dimension, name="x")
    triplet = sampler.truncated_triplet
    if af is None:
        if sampler.dimension == 1 and not isinstance(as_radial_or_atomic(triplet.nu), ZeroMeasure):
            af = generator_table(triplet, f, x[0] - r, x[0] + r)
        else:
            af = lambda pts: generator_many(triplet, f, pts)
    exits = simulate_exits(sampler, x, r, n, rng, dt=dt, t_max=t_max, g=af)
    if exits.censored_fraction > config.CENSOR_FRACTION:
        raise Censored(f"{exits.censored_fraction:.2%} of paths did not leave B_{r:g}(x) before {t_max:g}")
    lhs_samples = f(exits.exit_positions) - f.at(x)
    lhs, _ = mean_and_se(lhs_samples)
    rhs, _ = mean_and_se(exits.integrals)
    _, se = mean_and_se(lhs_samples - exits.integrals)
    report = se_check("dynkin", float(lhs), float(rhs), float(se), n,
                      e_sigma=float(np.mean(exits.exit_times)), censored=exits.censored_fraction)
    logger.info("Dynkin: lhs %.6g rhs %.6g se %.3g", report.lhs, report.rhs, report.se)
    return report


def default_functionals() -> list:
    """Bounded functionals of the past X_{t_0..t_k} given as (n, k+1, d) arrays."""
    return [
        ("one", lambda past: np.ones(past.shape[0])),
        ("exp_i_last", lambda past: np.exp(1j * past[:, -1, 0])),
        ("tanh_sum", lambda past: np.tanh(past[:, :, 0].sum(axis=1))),
    ]


def exponential_martingale_check(sampler: LevyEndpointSampler, xi, partition: Sequence[float], n: int, rng,
                                 functionals: Optional[list] = None) -> list:
    """
    M_t = exp(i xi.X_t + t psi_eps(xi)); E[(M_{t_{k+1}} - M_{t_k}) conj(g(past))] = 0 for every g and k.

    :return: One CheckReport per (k, g).
    """
    xi = as_vector(xi, sampler.dimension)
    times = np.asarray(partition, dtype=float)
    increments = sampler.sample_increments(times, n, rng)
    X = np.concatenate([np.zeros((n, 1, sampler.dimension)), np.cumsum(increments, axis=1)], axis=1)
    all_times = np.concatenate([[0.0], times])
    psi = sampler.exponent(xi)
    M = np.exp(1j * (X @ xi) + all_times[None, :] * psi)
    reports = []
    for k in range(times.size):
        for name, g in functionals or default_functionals():
            weight = np.conj(np.asarray(g(X[:, :k + 1]), dtype=complex))
            mean, se = mean_and_se((M[:, k + 1] - M[:, k]) * weight)
            reports.append(se_check("exponential_martingale", complex(mean), 0.0, float(se), n,
                                    t=float(all_times[k + 1]), functional=name))
    return reports


def chapman_kolmogorov_check(sampler: LevyEndpointSampler, f: TestFunction, x, s: float, t: float, n: int,
                             rng, inner: int = 16) -> CheckReport:
    """
    P_{s+t} f(x) directly against P_s(P_t f)(x) with restarts at sampled midpoints.

    The nested estimator draws n / inner midpoints X_s and ``inner`` continuations from each.
    """
    x = as_vector(x, sampler.dimension, name="x")
    direct, direct_se = semigroup_apply(sampler, f, s + t, x, n, rng.child(0))
    if s == 0:
        return se_check("chapman_kolmogorov", direct, direct, 0.0, n)
    outer = max(2, n // inner)
    mids = x + sampler.sample(s, outer, rng.child(1))
    ends = np.repeat(mids, inner, axis=0) + sampler.sample(t, outer * inner, rng.child(2))
    inner_means = f(ends).reshape(outer, inner).mean(axis=1)
    nested, nested_se = mean_and_se(inner_means)
    se = math.hypot(direct_se, float(nested_se))
    return se_check("chapman_kolmogorov", float(nested), direct, se, n, s=s, t=t)


def contraction_check(sampler: LevyEndpointSampler, f: TestFunction, ts: Sequence[float], xs, n: int,
                      rng) -> CheckReport:
    """|P_t f(x)| <= sup|f| + 3 SE on every (t, x)."""
    sup = f.certificate()["sup"]
    passed, k, worst = True, 0, 0.0
    for t in ts:
        for x in as_points(xs, sampler.dimension):
            mean, se = semigroup_apply(sampler, f, t, x, n, rng.child(k))
            k += 1
            passed &= abs(mean) <= sup + config.N_SE * se + config.ABS_TOL
            worst = max(worst, abs(mean))
    return CheckReport("contraction", worst, sup, 0.0, bool(passed), n, {"evaluations": k})
