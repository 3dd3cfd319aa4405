# levytype/feller_symbols.py
"""
State-dependent symbols q(x, xi), Lévy-driven SDEs dX = Phi(X-) dL, symbol estimation
from short-time paths, indices at infinity and maximal estimates.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

import config
from errors import (
    Blowup,
    Censored,
    DimensionMismatch,
    EmptyEnsemble,
    ExitDominates,
    IndexOrderViolation,
    InvalidInput,
    LipschitzViolation,
    SlopeUnresolved,
)
from levy_core import (
    Annulus,
    CharacteristicExponent,
    LevyTriplet,
    as_points,
    as_vector,
    eval_exponent,
    integrate_measure,
    quad,
    stable_scale_constant,
    symmetric_stable_triplet,
    unit_ball_grid,
)
from report_utils import CheckReport, mean_and_se, within_se
from samplers import (
    CadlagPath,
    ExitSample,
    LevyEndpointSampler,
    as_generator,
    assemble_path,
    normals,
    poisson_counts,
    sample_levy_ito,
    simulate_exits,
    uniforms,
)

logger = logging.getLogger(__name__)


# --- Symbols ---

@dataclass(frozen=True, eq=False)
class StateSymbol:
    """
    q(x, xi) = q(x, 0) - i l(x).xi + xi.Q(x)xi / 2 + int [1 - e^{iy.xi} + i y.xi 1_{(0,1)}(|y|)] nu(x, dy).

    ``triplet_at`` gives the Lévy triplet frozen at x. ``evaluator`` is an optional closed
    form (x, xi) -> complex used instead of the Lévy–Khintchine quadrature.
    """
    dimension: int
    triplet_at: Optional[Callable] = None
    q0_at: Callable = lambda x: 0.0
    evaluator: Optional[Callable] = None
    alpha_at: Optional[Callable] = None
    bounded: bool = False
    constant_in_x: bool = False
    label: str = ""

    def __post_init__(self):
        if self.triplet_at is None and self.evaluator is None:
            raise InvalidInput("a symbol needs a triplet field or a closed form")

    def __call__(self, x, xi) -> complex:
        return eval_symbol(self, x, xi)


def eval_symbol(q: StateSymbol, x, xi) -> complex:
    """q(x, xi), the frozen Lévy exponent at x plus the killing term q(x, 0)."""
    x = as_vector(x, q.dimension, name="x")
    xi = as_vector(xi, q.dimension)
    if q.evaluator is not None:
        return complex(q.evaluator(x, xi))
    q0 = float(q.q0_at(x))
    if q0 < 0:
        raise InvalidInput(f"q(x, 0) must be non-negative, got {q0} at x = {x}")
    return eval_exponent(q.triplet_at(x), xi) + q0


def levy_symbol(triplet: LevyTriplet, label: str = "levy") -> StateSymbol:
    """Symbol of a Lévy process: q(x, xi) = psi(xi) for every x."""
    return StateSymbol(triplet.dimension, lambda x: triplet, bounded=True, constant_in_x=True, label=label)


def symbol_from_exponent(psi: CharacteristicExponent) -> StateSymbol:
    triplet_at = (lambda x: psi.triplet) if psi.triplet is not None else None
    return StateSymbol(psi.dimension, triplet_at, evaluator=lambda x, xi: psi(xi),
                       bounded=psi.triplet is not None, constant_in_x=True, label=psi.label)


def alpha_sine(x) -> float:
    """alpha(x) = clip(1 + sin(x) / 2, 0.6, 1.9)."""
    return float(np.clip(1.0 + 0.5 * math.sin(float(np.ravel(x)[0])), 0.6, 1.9))


def stable_like_symbol(alpha_fn: Callable = alpha_sine) -> StateSymbol:
    """q(x, xi) = |xi|^{alpha(x)} on R."""
    def triplet_at(x):
        alpha = alpha_fn(x)
        return symmetric_stable_triplet(alpha, 0.5 / stable_scale_constant(alpha))

    return StateSymbol(1, triplet_at, evaluator=lambda x, xi: abs(float(xi[0])) ** alpha_fn(x),
                       alpha_at=alpha_fn, label="stable_like")


def symbol_table(q: StateSymbol, xs, xi_grid) -> pd.DataFrame:
    """Columns x_1.., xi_1.., re_q, im_q."""
    xs = as_points(xs, q.dimension)
    xis = as_points(xi_grid, q.dimension)
    rows = []
    for x in xs:
        for xi in xis:
            value = eval_symbol(q, x, xi)
            row = {f"x_{k + 1}": float(v) for k, v in enumerate(x)}
            row.update({f"xi_{k + 1}": float(v) for k, v in enumerate(xi)})
            row.update(re_q=value.real, im_q=value.imag)
            rows.append(row)
    return pd.DataFrame(rows)


def coefficient_bound(q: StateSymbol, probe_points) -> float:
    """sup over probe points of q(x, 0) + |l(x)| + ||Q(x)|| + int |y|^2 / (1 + |y|^2) nu(x, dy)."""
    if q.triplet_at is None:
        raise InvalidInput("coefficient bounds need the triplet field of the symbol")
    best = 0.0
    for x in as_points(probe_points, q.dimension):
        triplet = q.triplet_at(x)
        weight = integrate_measure(triplet.nu, lambda y: np.sum(y ** 2, axis=1) / (1.0 + np.sum(y ** 2, axis=1)),
                                   Annulus(0.0))
        value = float(q.q0_at(x)) + float(np.linalg.norm(triplet.drift)) + \
            float(np.linalg.norm(triplet.covariance, 2)) + weight
        best = max(best, value)
    logger.debug("coefficient bound of %s: %.6g", q.label, best)
    return best


# --- Coefficient fields and SDEs ---

@dataclass(frozen=True, eq=False)
class CoefficientField:
    """
    x -> Phi(x), a d x m matrix, with its declared Lipschitz constant.

    ``batch`` maps (n, d) states to (n, d, m) matrices; without it fn is applied row by row.
    """
    fn: Callable
    lipschitz: float
    dimension: int = 1
    driver_dimension: int = 1
    batch: Optional[Callable] = None
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fn(as_vector(x, self.dimension, name="x")), dtype=float).reshape(
            self.dimension, self.driver_dimension)

    def many(self, X: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(X), dtype=float).reshape(X.shape[0], self.dimension, self.driver_dimension)
        return np.stack([self(x) for x in X]) if X.shape[0] else np.zeros((0, self.dimension, self.driver_dimension))


def constant_field(c) -> CoefficientField:
    c = np.atleast_2d(np.asarray(c, dtype=float))
    d, m = c.shape
    return CoefficientField(lambda x: c, 0.0, d, m, lambda X: np.broadcast_to(c, (X.shape[0], d, m)), "constant")


def identity_field(dimension: int = 1) -> CoefficientField:
    eye = np.eye(dimension)
    return CoefficientField(lambda x: eye, 0.0, dimension, dimension,
                            lambda X: np.broadcast_to(eye, (X.shape[0], dimension, dimension)), "identity")


def linear_field(c: float = 1.0) -> CoefficientField:
    """Phi(x) = c x on R; x0 = 0 is absorbing."""
    return CoefficientField(lambda x: c * x, abs(c), batch=lambda X: c * X[:, :, None], label="linear")


def bounded_sqrt_field() -> CoefficientField:
    """Phi(x) = (1 + x^2)^{-1/2}."""
    lip = 2.0 / (3.0 * math.sqrt(3.0))
    return CoefficientField(lambda x: 1.0 / np.sqrt(1.0 + x ** 2), lip,
                            batch=lambda X: (1.0 / np.sqrt(1.0 + X ** 2))[:, :, None], label="bounded_sqrt")


def two_plus_sin_field() -> CoefficientField:
    """Phi(x) = 2 + sin x."""
    return CoefficientField(lambda x: 2.0 + np.sin(x), 1.0,
                            batch=lambda X: (2.0 + np.sin(X))[:, :, None], label="two_plus_sin")


def sqrt_abs_field(declared: float = 1.0) -> CoefficientField:
    """Phi(x) = sqrt|x|, not Lipschitz at 0."""
    return CoefficientField(lambda x: np.sqrt(np.abs(x)), declared,
                            batch=lambda X: np.sqrt(np.abs(X))[:, :, None], label="sqrt_abs")


PHI_FAMILIES = {
    "constant": constant_field,
    "identity": identity_field,
    "linear": linear_field,
    "bounded_sqrt": bounded_sqrt_field,
    "two_plus_sin": two_plus_sin_field,
    "sqrt_abs": sqrt_abs_field,
}


def validate_lipschitz(phi: CoefficientField, probe_points=None) -> float:
    """
    Largest finite-difference slope of Phi between neighbouring probe points.

    :raises LipschitzViolation: If a slope exceeds the declared constant plus LIPSCHITZ_SLACK.
    """
    if probe_points is None:
        axis = np.linspace(-5.0, 5.0, 201)
        probe_points = np.concatenate([np.outer(axis, np.eye(phi.dimension)[k]) for k in range(phi.dimension)])
    pts = as_points(probe_points, phi.dimension)
    values = phi.many(pts)
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep = steps > 0
    slopes = np.linalg.norm(np.diff(values, axis=0).reshape(len(pts) - 1, -1), axis=1)[keep] / steps[keep]
    worst = float(slopes.max()) if slopes.size else 0.0
    if worst > phi.lipschitz + config.LIPSCHITZ_SLACK:
        raise LipschitzViolation(
            f"{phi.label or 'Phi'} has slope {worst:.6g} above its declared Lipschitz constant {phi.lipschitz:g}")
    return worst


@dataclass(frozen=True, eq=False)
class SdeSpec:
    """dX_t = Phi(X_{t-}) dL_t, X_0 = x0, for a Lévy driver L."""
    phi: CoefficientField
    driver: LevyTriplet
    x0: tuple = (0.0,)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape[0] != self.phi.dimension:
            raise DimensionMismatch(f"x0 has dimension {x0.shape[0]}, Phi maps into R^{self.phi.dimension}")
        if self.driver.dimension != self.phi.driver_dimension:
            raise DimensionMismatch(
                f"driver has dimension {self.driver.dimension}, Phi expects {self.phi.driver_dimension}")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))

    @property
    def dimension(self) -> int:
        return self.phi.dimension

    def started_at(self, x) -> "SdeSpec":
        return SdeSpec(self.phi, self.driver, tuple(np.atleast_1d(x)))


def sde_symbol(spec: SdeSpec, x, xi) -> complex:
    """q(x, xi) = psi(Phi(x)^T xi)."""
    xi = as_vector(xi, spec.dimension)
    return eval_exponent(spec.driver, spec.phi(x).T @ xi)


def sde_state_symbol(spec: SdeSpec) -> StateSymbol:
    return StateSymbol(spec.dimension, None, evaluator=lambda x, xi: sde_symbol(spec, x, xi),
                       label=f"sde[{spec.phi.label}]")


def _check_blowup(X: np.ndarray, t: float):
    norms = np.linalg.norm(np.atleast_2d(X), axis=1)
    bad = ~np.isfinite(norms) | (norms > config.BLOWUP_LEVEL)
    if np.any(bad):
        value = float(norms[bad][0])
        raise Blowup(f"|X| = {value:.3g} exceeds {config.BLOWUP_LEVEL:g} at t = {t:.6g}", time=t, value=value)


def sde_euler(spec: SdeSpec, eps: float, grid_dt: float, T: float, rng) -> CadlagPath:
    """
    Euler scheme for dX = Phi(X-) dL on the driver's time grid.

    Driver jumps (|dL| >= eps) sit at their exact times and use the left limit in Phi.

    :raises Blowup: If |X| exceeds BLOWUP_LEVEL.
    """
    L = sample_levy_ito(spec.driver, eps, T, grid_dt, rng)
    dC = np.diff(L.continuous, axis=0)
    jump_at = np.full(L.times.size, -1)
    jump_at[np.searchsorted(L.times, L.jump_times)] = np.arange(L.jump_count)
    x0 = np.asarray(spec.x0)
    X = x0.copy()
    values = np.empty((L.times.size, spec.dimension))
    values[0] = X
    jump_sizes = np.zeros((L.jump_count, spec.dimension))
    for k in range(L.times.size - 1):
        X = X + spec.phi(X) @ dC[k]
        j = jump_at[k + 1]
        if j >= 0:
            jump_sizes[j] = spec.phi(X) @ L.jump_sizes[j]
            X = X + jump_sizes[j]
        values[k + 1] = X
        _check_blowup(X, float(L.times[k + 1]))
    cumulative = np.vstack([np.zeros((1, spec.dimension)), np.cumsum(jump_sizes, axis=0)])
    continuous = values - x0 - cumulative[np.searchsorted(L.jump_times, L.times, side="right")]
    keep = np.any(jump_sizes != 0.0, axis=1)
    meta = {"sampler": "sde_euler", "phi": spec.phi.label, "eps": eps, "grid_dt": grid_dt}
    return assemble_path(L.times, x0, continuous, L.jump_times[keep], jump_sizes[keep], T, meta)


@dataclass
class EulerSample:
    """States X_{t ^ tau} at the requested times for n paths."""
    times: np.ndarray
    values: np.ndarray
    exit_times: np.ndarray
    exited: np.ndarray
    blown: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


def euler_ensemble(spec: SdeSpec, times: Sequence[float], n: int, rng, *, eps: float = 1e-2,
                   grid_dt: float = 1e-3, radius: Optional[float] = None,
                   raise_on_blowup: bool = True) -> EulerSample:
    """
    Vectorised Euler scheme for n paths, optionally stopped at the first exit from B_radius(x0).

    Within a grid cell the continuous part of the driver moves linearly in time; driver
    jumps are applied at uniform times inside the cell with the left limit in Phi.
    """
    if n < 1:
        raise EmptyEnsemble("n must be at least 1")
    times = np.sort(np.atleast_1d(np.asarray(times, dtype=float)))
    if np.any(times <= 0):
        raise InvalidInput("requested times must be positive")
    if not grid_dt > 0:
        raise InvalidInput(f"grid_dt must be positive, got {grid_dt}")
    t_end = float(times[-1])
    grid = np.unique(np.concatenate([np.arange(0.0, t_end, grid_dt), times, [t_end]]))
    sampler = LevyEndpointSampler(spec.driver, eps)
    plan = sampler.plan
    gen = as_generator(rng)
    d, m = spec.dimension, spec.driver.dimension
    x0 = np.asarray(spec.x0)
    X = np.repeat(x0[None, :], n, axis=0)
    out = np.empty((n, times.size, d))
    exit_times = np.full(n, np.inf)
    exited = np.zeros(n, dtype=bool)
    blown = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    cov_sqrt = spec.driver.covariance_sqrt
    for a, b in zip(grid[:-1], grid[1:]):
        h = b - a
        if alive.size:
            cont = h * sampler.drift[None, :] + (
                (math.sqrt(h) * normals(gen, (alive.size, m))) @ cov_sqrt.T if sampler.has_gaussian else 0.0)
            cont = np.broadcast_to(cont, (alive.size, m))
            counts = poisson_counts(gen, plan.total_mass * h, alive.size) if plan.total_mass else np.zeros(alive.size, int)
            done = np.zeros(alive.size)
            total = int(counts.sum())
            if total:
                owner = np.repeat(np.arange(alive.size), counts)
                fractions = uniforms(gen, total)
                sizes = plan.sample(gen, total)
                order = np.lexsort((fractions, owner))
                owner, fractions, sizes = owner[order], fractions[order], sizes[order]
                starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
                rank = np.arange(total) - starts[owner]
                for j in range(int(counts.max())):
                    sel = rank == j
                    p = owner[sel]
                    rows = alive[p]
                    step = cont[p] * (fractions[sel] - done[p])[:, None]
                    X[rows] += np.einsum("pdm,pm->pd", spec.phi.many(X[rows]), step)
                    X[rows] += np.einsum("pdm,pm->pd", spec.phi.many(X[rows]), sizes[sel])
                    done[p] = fractions[sel]
            X[alive] += np.einsum("pdm,pm->pd", spec.phi.many(X[alive]), cont * (1.0 - done)[:, None])
            norms = np.linalg.norm(X[alive], axis=1)
            bad = ~np.isfinite(norms) | (norms > config.BLOWUP_LEVEL)
            if np.any(bad):
                if raise_on_blowup:
                    _check_blowup(X[alive[bad]], float(b))
                blown[alive[bad]] = True
                exit_times[alive[bad]] = b
                alive = alive[~bad]
            if radius is not None and alive.size:
                out_ball = np.linalg.norm(X[alive] - x0, axis=1) > radius
                exited[alive[out_ball]] = True
                exit_times[alive[out_ball]] = b
                alive = alive[~out_ball]
        hit = np.flatnonzero(times == b)
        if hit.size:
            out[:, hit[0]] = X
    return EulerSample(times, out, exit_times, exited, blown)


def sde_sampler(spec: SdeSpec, eps: float = 1e-2, grid_dt: Optional[float] = None) -> Callable:
    """(x, times, radius, n, rng) -> EulerSample for the SDE started at x."""
    def sample(x, times, radius, n, rng):
        dt = grid_dt or float(np.min(times)) / 8.0
        return euler_ensemble(spec.started_at(x), times, n, rng, eps=eps, grid_dt=dt, radius=radius)
    return sample


def conservativeness_check(spec: SdeSpec, T: float, n: int, rng, *, eps: float = 1e-2,
                           grid_dt: float = 1e-2) -> CheckReport:
    """Mass P(X_T in R^d) of non-exploded paths against 1."""
    sample = euler_ensemble(spec, [T], n, rng, eps=eps, grid_dt=grid_dt, raise_on_blowup=False)
    mass = 1.0 - float(np.mean(sample.blown))
    return CheckReport("conservativeness", mass, 1.0, 0.0, mass == 1.0, n, {"blown": int(sample.blown.sum())})


# --- Symbol estimation ---

@dataclass
class SymbolEstimate:
    q_hat: complex
    se: float
    t_grid: np.ndarray
    raw: np.ndarray
    raw_se: np.ndarray
    exit_fraction: float
    n: int

    def agrees(self, target: complex, rel: float = 0.05) -> bool:
        """|q_hat - target| <= max(3 SE, rel |target|)."""
        slack = max(config.N_SE * self.se, rel * abs(target))
        return bool(abs(self.q_hat - target) <= slack + config.ABS_TOL)

    def to_dict(self) -> dict:
        return {"q_hat": [self.q_hat.real, self.q_hat.imag], "se": self.se, "n": self.n,
                "exit_fraction": self.exit_fraction,
                "t_grid": [{"t": float(t), "value": [v.real, v.imag], "se": float(s)}
                           for t, v, s in zip(self.t_grid, self.raw, self.raw_se)]}


def estimate_symbol(sampler: Callable, x, xi, t_grid: Sequence[float], r: float, n: int, rng) -> SymbolEstimate:
    """
    -q(x, xi) as the t -> 0 limit of (E^x e^{i xi.(X_{t ^ tau_r} - x)} - 1) / t.

    The Monte Carlo values on t_grid are extrapolated linearly to t = 0.

    :raises ExitDominates: If more than EXIT_DOMINANCE of the paths leave B_r(x) before min(t_grid).
    """
    if not r > 0:
        raise InvalidInput(f"localisation radius must be positive, got {r}")
    t_grid = np.sort(np.asarray(t_grid, dtype=float))[::-1]
    if t_grid.size < 2 or np.any(t_grid <= 0):
        raise InvalidInput("t_grid needs at least two positive times")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    sample = sampler(x, t_grid[::-1], r, n, rng)
    early = float(np.mean(sample.exit_times < t_grid.min()))
    if early > config.EXIT_DOMINANCE:
        raise ExitDominates(f"{early:.1%} of paths leave B_{r:g}(x) before t = {t_grid.min():g}; increase r")
    times = sample.times
    raw = np.empty(t_grid.size, dtype=complex)
    raw_se = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        column = int(np.flatnonzero(times == t)[0])
        phase = np.exp(1j * (sample.values[:, column] - x) @ xi)
        mean, se = mean_and_se((phase - 1.0) / t)
        raw[k], raw_se[k] = mean, float(se)
    design = np.column_stack([np.ones_like(t_grid), t_grid])
    weights = np.linalg.pinv(design)[0]
    intercept = complex(weights @ raw)
    se = float(np.sqrt(np.sum(weights ** 2 * raw_se ** 2)))
    logger.debug("symbol estimate at x=%s xi=%s: %s +- %.3g", x, xi, -intercept, se)
    return SymbolEstimate(-intercept, se, t_grid, -raw, raw_se, early, n)


# --- Indices at infinity ---

def _directions(dimension: int) -> np.ndarray:
    eye = np.eye(dimension)
    dirs = [eye, -eye]
    if dimension > 1:
        diag = np.ones(dimension) / math.sqrt(dimension)
        dirs.append(np.vstack([diag, -diag]))
    return np.vstack(dirs)


def _nearby(q: StateSymbol, x: np.ndarray, radius: float, count: int = 9) -> np.ndarray:
    if q.constant_in_x:
        return x[None, :]
    if q.dimension == 1:
        return x[None, :] + np.linspace(-radius, radius, count)[:, None]
    return x[None, :] + radius * unit_ball_grid(q.dimension, 5)


def _abs_values(q: StateSymbol, ys, etas) -> np.ndarray:
    return np.array([[abs(eval_symbol(q, y, eta)) for eta in etas] for y in ys])


def upper_functional(q: StateSymbol, x, R: float) -> float:
    """sup_{|y - x| <= 1/R} sup_{|eta| <= R} |q(y, eta)|."""
    x = as_vector(x, q.dimension, name="x")
    etas = np.concatenate([R * s * _directions(q.dimension) for s in np.logspace(-3, 0, 16)])
    return float(_abs_values(q, _nearby(q, x, 1.0 / R), etas).max())


def lower_functional(q: StateSymbol, x, R: float) -> float:
    """inf_{|y - x| <= 1/R} inf_{|eta| = R} |q(y, eta)|."""
    x = as_vector(x, q.dimension, name="x")
    etas = R * _directions(q.dimension)
    return float(_abs_values(q, _nearby(q, x, 1.0 / R), etas).min())


@dataclass
class IndexEstimate:
    beta: float
    delta: float
    beta_bracket: tuple
    delta_bracket: tuple
    residuals: tuple

    def to_dict(self) -> dict:
        return {"beta": self.beta, "delta": self.delta, "beta_bracket": list(self.beta_bracket),
                "delta_bracket": list(self.delta_bracket), "residuals": list(self.residuals)}


def _tail_slope(log_r: np.ndarray, log_v: np.ndarray) -> tuple:
    slope, intercept = np.polyfit(log_r, log_v, 1)
    residual = float(np.sqrt(np.mean((log_v - (slope * log_r + intercept)) ** 2)))
    local = np.diff(log_v) / np.diff(log_r)
    return float(slope), (float(local.min()), float(local.max())), residual


def indices_at_infinity(q: StateSymbol, x, xi_max: float = None, lambda_grid=None) -> IndexEstimate:
    """
    Upper (beta) and lower (delta) indices at infinity from log-log slopes of the sup/inf functionals.

    The slope is fitted on the upper half of the frequency grid; brackets are the extreme
    local slopes there. The upper functional takes sup over |y - x| <= 1/R, the lower one inf.

    :raises SlopeUnresolved: If the fit residual exceeds SLOPE_RESIDUAL_MAX.
    :raises IndexOrderViolation: If delta exceeds beta by more than the bracket widths plus the residual.
    """
    xi_max = xi_max or config.XI_MAX
    if lambda_grid is None:
        lambda_grid = np.logspace(2.0, math.log10(xi_max), 25)
    grid = np.sort(np.asarray(lambda_grid, dtype=float))
    window = grid[grid.size // 2:]
    log_r = np.log(window)
    upper = np.log([upper_functional(q, x, R) for R in window])
    lower = np.log([lower_functional(q, x, R) for R in window])
    if not (np.all(np.isfinite(upper)) and np.all(np.isfinite(lower))):
        raise SlopeUnresolved("symbol vanishes or diverges on the frequency grid")
    beta, beta_bracket, beta_res = _tail_slope(log_r, upper)
    delta, delta_bracket, delta_res = _tail_slope(log_r, lower)
    worst = max(beta_res, delta_res)
    if worst > config.SLOPE_RESIDUAL_MAX:
        raise SlopeUnresolved(f"log-log residual {worst:.3g} exceeds {config.SLOPE_RESIDUAL_MAX:g}")
    # local-slope spread and fit residual bound the pre-asymptotic error of both slopes
    slack = (beta_bracket[1] - beta_bracket[0]) + (delta_bracket[1] - delta_bracket[0]) + worst + config.ABS_TOL
    if delta > beta + slack:
        raise IndexOrderViolation(f"lower index {delta:.4f} exceeds upper index {beta:.4f} (slack {slack:.2g})")
    return IndexEstimate(beta, delta, beta_bracket, delta_bracket, (beta_res, delta_res))


# --- Sector condition ---

def sector_check(q: StateSymbol, xs=None, xi_grid=None) -> tuple:
    """(kappa_hat, pass) with kappa_hat = sup |Im q| / Re q over the probe grid."""
    xs = as_points([np.zeros(q.dimension)] if xs is None else xs, q.dimension)
    if xi_grid is None:
        magnitudes = np.logspace(-2.0, 4.0, 61)
        xi_grid = np.concatenate([np.outer(magnitudes, d) for d in _directions(q.dimension)])
    xis = as_points(xi_grid, q.dimension)
    kappa = 0.0
    for x in xs:
        for xi in xis:
            value = eval_symbol(q, x, xi)
            if abs(value.imag) <= config.ABS_TOL:
                continue
            if value.real <= 0:
                return math.inf, False
            kappa = max(kappa, abs(value.imag) / value.real)
    return kappa, bool(kappa <= config.SECTOR_KAPPA_CAP)


# --- Maximal estimates ---

@functools.lru_cache(maxsize=8)
def cutoff_constant(dimension: int) -> float:
    """
    c = 2 int (1 + |xi|^2) |u^(xi)| dxi for the bump u(y) = (1 - |y|^2)_+^{d+3}.

    u^ is normalised as (2 pi)^{-d} int u(y) e^{-i y.xi} dy; its radial profile is
    pi^{d/2} Gamma(d + 4) (2 / rho)^nu J_nu(rho) with nu = d + 3 + d / 2.
    """
    d = int(dimension)
    order = d + 3 + 0.5 * d
    scale = math.pi ** (0.5 * d) * math.gamma(d + 4)

    def profile(rho):
        if rho < 1e-8:
            return scale / math.gamma(order + 1.0)
        return scale * (2.0 / rho) ** order * special.jv(order, rho)

    def integrand(rho):
        return (1.0 + rho * rho) * abs(profile(rho)) * rho ** (d - 1)

    total = sum(quad(integrand, k * math.pi, (k + 1) * math.pi) for k in range(256))
    sphere = 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
    c = 2.0 * sphere * total / (2.0 * math.pi) ** d
    logger.debug("maximal-inequality constant for d=%d: %.8g", d, c)
    return c


def _ball_sup(q: StateSymbol, x, r: float, frequency: float) -> float:
    """sup_{|y - x| <= r} sup_{|xi| <= frequency} |q(y, xi)|."""
    x = as_vector(x, q.dimension, name="x")
    ys = x[None, :] if q.constant_in_x else x[None, :] + r * unit_ball_grid(q.dimension, 17)
    xis = frequency * unit_ball_grid(q.dimension, 33)
    return float(_abs_values(q, ys, xis).max())


def maximal_bound(q: StateSymbol, x, r: float, e_tau: float) -> float:
    """c E^x tau sup_{|y - x| <= r} sup_{|xi| <= 1/r} |q(y, xi)| bounding P^x(sup_{s <= tau}|X_s - x| > r)."""
    if not r > 0:
        raise InvalidInput(f"r must be positive, got {r}")
    return cutoff_constant(q.dimension) * float(e_tau) * _ball_sup(q, x, r, 1.0 / r)


def maximal_exceedance_check(sampler: LevyEndpointSampler, q: StateSymbol, x, r: float, t: float, n: int, rng,
                             *, dt: float = 1e-4) -> CheckReport:
    """Monte Carlo P(sup_{s <= t}|X_s - x| > r) against maximal_bound (one-sided, 3 SE slack)."""
    exits = simulate_exits(sampler, x, r, n, rng, dt=dt, t_max=t)
    frequency = float(np.mean(exits.exited))
    se = math.sqrt(max(frequency * (1.0 - frequency), 1.0 / n) / n)
    bound = maximal_bound(q, x, r, t)
    passed = frequency - config.N_SE * se <= bound
    return CheckReport("maximal_inequality", frequency, bound, se, bool(passed), n, {"r": r, "t": t})


def maximal_sweep(q: StateSymbol, x, radii: Sequence[float], t: float) -> pd.DataFrame:
    rows = []
    for r in radii:
        sup_q = _ball_sup(q, x, r, 1.0 / r)
        rows.append({"r": float(r), "sup_q": sup_q, "bound": cutoff_constant(q.dimension) * t * sup_q})
    return pd.DataFrame(rows)


# --- Mean exit times ---

@dataclass
class MeanExitReport:
    e_tau: float
    se: float
    lower: float
    upper: float
    kappa: float
    censored_fraction: float

    @property
    def bracketed(self) -> bool:
        slack = config.N_SE * self.se
        return bool(self.lower - slack <= self.e_tau <= self.upper + slack)

    def to_dict(self) -> dict:
        return {"e_tau": self.e_tau, "se": self.se, "lower": self.lower, "upper": self.upper,
                "kappa": self.kappa, "censored_fraction": self.censored_fraction, "bracketed": self.bracketed}


def exit_time_bracket(q: StateSymbol, x, r: float) -> tuple:
    """
    (lower, upper, kappa) bounds on E^x sigma_r from the symbol.

    Both sides use S(k) = sup_{|xi| <= k/r} inf_{|y - x| <= r} |q(y, xi)|:
    lower = 1 / (c S(1)) with c the maximal-inequality constant, upper =
    2 sqrt(1 + kappa^2) / ((cos k* - kappa sin k*) S(k*)), +inf unless kappa < cot k*.
    """
    if not r > 0:
        raise InvalidInput(f"r must be positive, got {r}")
    x = as_vector(x, q.dimension, name="x")
    ys = x[None, :] if q.constant_in_x else x[None, :] + r * unit_ball_grid(q.dimension, 17)
    directions = unit_ball_grid(q.dimension, 33)

    def inf_sup(frequency):
        return float(_abs_values(q, ys, frequency * directions).min(axis=0).max())

    lower_sup = inf_sup(1.0 / r)
    lower = 1.0 / (cutoff_constant(q.dimension) * lower_sup) if lower_sup > 0 else math.inf
    xis = (config.K_STAR / r) * directions
    kappa, _ = sector_check(q, ys, xis[np.linalg.norm(xis, axis=1) > 0])
    upper_sup = inf_sup(config.K_STAR / r)
    k = config.K_STAR
    denominator = math.cos(k) - kappa * math.sin(k)
    if denominator <= 0 or upper_sup <= 0:
        upper = math.inf
    else:
        upper = 2.0 * math.sqrt(1.0 + kappa * kappa) / (denominator * upper_sup)
    return lower, upper, kappa


def mean_exit_time(exits: ExitSample, q: StateSymbol, x, r: float) -> MeanExitReport:
    """
    Monte Carlo E^x tau_r with the symbol bracket.

    :raises Censored: If more than CENSOR_FRACTION of the paths never exit.
    """
    if exits.censored_fraction > config.CENSOR_FRACTION:
        raise Censored(f"{exits.censored_fraction:.2%} of paths did not exit before t_max = {exits.t_max:g}")
    e_tau, se = mean_and_se(exits.exit_times)
    lower, upper, kappa = exit_time_bracket(q, x, r)
    return MeanExitReport(float(e_tau), float(se), lower, upper, kappa, exits.censored_fraction)


def exit_scaling_check(sampler: LevyEndpointSampler, radii: Sequence[float], exponent: float, n: int, rng,
                       *, dt: float = 1e-3, t_max: float = 50.0) -> list:
    """E tau_r / r^exponent is constant in r (Brownian: exponent 2)."""
    estimates = []
    for k, r in enumerate(radii):
        exits = simulate_exits(sampler, np.zeros(sampler.dimension), r, n, rng.child(10 ** 6 * (k + 1)),
                               dt=dt * r ** exponent, t_max=t_max * r ** exponent)
        mean, se = mean_and_se(exits.exit_times / r ** exponent)
        estimates.append((float(mean), float(se)))
    base, base_se = estimates[0]
    return [CheckReport("exit_scaling", m, base, math.hypot(s, base_se),
                        within_se(m, base, math.hypot(s, base_se)), n, {"r": float(r)})
            for (m, s), r in zip(estimates, radii)]
