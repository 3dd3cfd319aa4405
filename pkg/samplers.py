# levytype/samplers.py
"""
Path generation for Lévy processes, all driven by an explicit seeded random source.

Four constructions are provided: Poisson and compound Poisson processes from
exponential inter-arrival times, Lévy's midpoint construction of Brownian motion,
the compensated-annulus (Lévy–Itô) construction from a triplet, and random series
representations. Uniforms are drawn strictly inside (0, 1); exponentials, Gaussians
and Poisson counts are obtained from them by inversion.
"""
from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special, stats
from tqdm import tqdm

import config
from errors import (
    DimensionMismatch,
    EmptyEnsemble,
    InvalidInput,
    InvalidRate,
    MassOverflow,
    TailNotResolved,
)
from levy_core import (
    FiniteAtomic,
    GaussianDensity,
    LevyMeasureSpec,
    LevyTriplet,
    RadialDensity,
    SphericalMeasure,
    ZeroMeasure,
    as_radial_or_atomic,
    exponent_of,
    measure_of,
    quad,
    small_jump_second_moment,
    truncate_triplet,
)

logger = logging.getLogger(__name__)

_TWO_53 = float(2 ** 53)


# --- Random sources ---

@dataclass(frozen=True)
class RandomSource:
    """(seed, stream) key of a counter-based Philox generator."""
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < 2 ** 64:
                raise InvalidInput(f"{name} must be an integer in [0, 2**64), got {value!r}")
            object.__setattr__(self, name, int(value))

    def generator(self) -> np.random.Generator:
        """A fresh generator; two calls return identical sequences."""
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, (self.stream + int(index)) % 2 ** 64)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator()
    raise InvalidInput(f"expected a RandomSource, got {type(rng).__name__}")


def uniforms(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the 2**53 midpoint lattice of (0, 1)."""
    return (gen.integers(0, 2 ** 53, size=size, dtype=np.int64) + 0.5) / _TWO_53


def exponentials(gen: np.random.Generator, rate: float, size) -> np.ndarray:
    return -np.log(uniforms(gen, size)) / rate


def normals(gen: np.random.Generator, size) -> np.ndarray:
    return special.ndtri(uniforms(gen, size))


def poisson_counts(gen: np.random.Generator, mean, size=None) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    if size is None:
        size = mean.shape
    u = uniforms(gen, size)
    positive = mean > 0
    counts = stats.poisson.ppf(u, np.where(positive, mean, 1.0))
    return np.where(positive, counts, 0).astype(np.int64)


# --- Jump laws ---

class JumpLaw:
    """A sampleable jump distribution mu on R^d."""
    dimension: int

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def cf(self, xi) -> complex:
        raise NotImplementedError

    def levy_measure(self, rate: float) -> LevyMeasureSpec:
        raise NotImplementedError

    def small_mean(self) -> np.ndarray:
        """int_{0 < |y| < 1} y mu(dy)."""
        raise NotImplementedError

    def mass_of(self, region) -> float:
        """mu(region)."""
        return measure_of(self.levy_measure(1.0), region)


def categorical(cumulative: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverts unnormalised cumulative masses; cells of zero mass are never returned."""
    index = np.searchsorted(cumulative, u * cumulative[-1], side="right")
    return np.minimum(index, cumulative.size - 1)


@dataclass(frozen=True)
class DiscreteJumps(JumpLaw):
    points: tuple
    probs: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 1 and np.asarray(self.points).ndim == 1 and len(self.probs) > 1:
            pts = pts.T
        p = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if pts.shape[0] != p.shape[0]:
            raise DimensionMismatch(f"{pts.shape[0]} points but {p.shape[0]} probabilities")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidInput(f"jump probabilities must be non-negative and sum to 1, got {p}")
        object.__setattr__(self, "points", tuple(tuple(float(v) for v in row) for row in pts))
        object.__setattr__(self, "probs", tuple(float(v) for v in p / p.sum()))

    @property
    def dimension(self) -> int:
        return len(self.points[0])

    @property
    def support(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def sample(self, gen, size):
        if len(self.probs) == 1:
            return np.repeat(self.support, size, axis=0)
        index = categorical(np.cumsum(self.weights), uniforms(gen, size))
        return self.support[index]

    def cf(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return complex(np.sum(self.weights * np.exp(1j * (self.support @ xi))))

    def levy_measure(self, rate):
        nonzero = np.linalg.norm(self.support, axis=1) > 0
        if not np.any(nonzero):
            return ZeroMeasure(self.dimension)
        return FiniteAtomic(self.support[nonzero], rate * self.weights[nonzero])

    def small_mean(self):
        norms = np.linalg.norm(self.support, axis=1)
        inside = (norms > 0) & (norms < 1.0)
        return self.weights[inside] @ self.support[inside] if np.any(inside) else np.zeros(self.dimension)


def point_mass(point) -> DiscreteJumps:
    p = np.atleast_1d(np.asarray(point, dtype=float))
    return DiscreteJumps((tuple(p),), (1.0,))


def symmetric_sign() -> DiscreteJumps:
    """Uniform law on {-1, +1}."""
    return DiscreteJumps(((-1.0,), (1.0,)), (0.5, 0.5))


@dataclass(frozen=True)
class GaussianJumps(JumpLaw):
    """Centred N(0, std**2) jumps on the real line."""
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0:
            raise InvalidInput(f"std must be positive, got {self.std}")

    @property
    def dimension(self) -> int:
        return 1

    def sample(self, gen, size):
        return self.std * normals(gen, (size, 1))

    def cf(self, xi):
        x = float(np.atleast_1d(xi)[0])
        return complex(math.exp(-0.5 * (self.std * x) ** 2))

    def levy_measure(self, rate):
        density = GaussianDensity(rate / (self.std * math.sqrt(2.0 * math.pi)), self.std)
        return RadialDensity(density, SphericalMeasure.symmetric_1d(1.0))

    def small_mean(self):
        return np.zeros(1)


def compound_poisson_triplet(rate: float, jump_law: JumpLaw) -> LevyTriplet:
    """Triplet with psi(xi) = rate * (1 - mu_hat(xi))."""
    _check_rate(rate)
    d = jump_law.dimension
    return LevyTriplet(rate * jump_law.small_mean(), np.zeros((d, d)), jump_law.levy_measure(rate))


def _check_rate(rate):
    if not (rate > 0) or not math.isfinite(rate):
        raise InvalidRate(f"rate must be positive and finite, got {rate}")


def _check_horizon(T):
    if not (T > 0) or not math.isfinite(T):
        raise InvalidInput(f"horizon T must be positive and finite, got {T}")


# --- Paths ---

def _readonly(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """
    A right-continuous path on [0, T] with an explicit jump ledger.

    ``times`` contains the sampling grid merged with the jump times; ``values`` are
    right limits at those times. ``continuous`` is the path minus x0 minus the jumps
    and is interpolated linearly between stored times.
    """
    times: np.ndarray
    values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    horizon: float
    continuous: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "values", "jump_times", "jump_sizes", "continuous"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if self.values.ndim != 2 or self.values.shape[0] != self.times.shape[0]:
            raise DimensionMismatch("values must have one row per time")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInput("path times must be strictly increasing")

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def x0(self) -> np.ndarray:
        return self.values[0] - self.continuous[0]

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[-1]

    @property
    def jumps(self) -> list:
        return [(float(t), np.array(dy)) for t, dy in zip(self.jump_times, self.jump_sizes)]

    @property
    def jump_count(self) -> int:
        return int(self.jump_times.shape[0])

    def _continuous_at(self, t: np.ndarray) -> np.ndarray:
        return np.column_stack([np.interp(t, self.times, self.continuous[:, k]) for k in range(self.dimension)])

    def _jumps_until(self, t: np.ndarray, inclusive: bool = True) -> np.ndarray:
        side = "right" if inclusive else "left"
        cum = np.vstack([np.zeros((1, self.dimension)), np.cumsum(self.jump_sizes, axis=0)])
        return cum[np.searchsorted(self.jump_times, t, side=side)]

    def value_at(self, t) -> np.ndarray:
        """X_t for scalar or array t; returns (d,) or (len(t), d)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise InvalidInput(f"time outside [0, {self.horizon}]")
        out = self.x0 + self._continuous_at(t) + self._jumps_until(t)
        return out[0] if scalar else out

    def left_limit(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.x0 + self._continuous_at(t) + self._jumps_until(t, inclusive=False)
        return out[0] if scalar else out

    def reconstruct(self) -> np.ndarray:
        """x0 + continuous part + cumulative jumps at the stored times."""
        return self.x0 + self.continuous + self._jumps_until(self.times)

    def bookkeeping_error(self) -> float:
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return float(np.max(np.abs(self.reconstruct() - self.values))) / scale

    def truncated(self, t: float) -> "CadlagPath":
        """The path restricted to [0, t]."""
        if not 0 < t <= self.horizon:
            raise InvalidInput(f"truncation time {t} outside (0, {self.horizon}]")
        keep = self.times < t
        times = np.append(self.times[keep], t)
        cont = np.vstack([self.continuous[keep], self._continuous_at(np.array([t]))])
        jkeep = self.jump_times <= t
        values = self.x0 + cont + self._jumps_until(times)
        return CadlagPath(times, values, self.jump_times[jkeep], self.jump_sizes[jkeep], t, cont, dict(self.meta))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=[f"x_{k + 1}" for k in range(self.dimension)])
        frame.insert(0, "t", self.times)
        return frame

    def jump_ledger(self) -> list:
        return [{"t": float(t), "dx": [float(v) for v in dy]} for t, dy in zip(self.jump_times, self.jump_sizes)]


def assemble_path(times, x0, continuous, jump_times, jump_sizes, T, meta=None) -> CadlagPath:
    """Builds a path from a continuous part on ``times`` (which must contain the jump times) and a ledger."""
    jump_times = np.asarray(jump_times, dtype=float)
    jump_sizes = np.asarray(jump_sizes, dtype=float).reshape(jump_times.shape[0], -1) if jump_times.size else \
        np.zeros((0, np.atleast_2d(continuous).shape[1]))
    order = np.argsort(jump_times, kind="stable")
    jump_times, jump_sizes = jump_times[order], jump_sizes[order]
    nonzero = np.any(jump_sizes != 0.0, axis=1)
    jump_times, jump_sizes = jump_times[nonzero], jump_sizes[nonzero]
    continuous = np.atleast_2d(np.asarray(continuous, dtype=float))
    cum = np.vstack([np.zeros((1, continuous.shape[1])), np.cumsum(jump_sizes, axis=0)])
    values = np.asarray(x0, dtype=float) + continuous + cum[np.searchsorted(jump_times, times, side="right")]
    return CadlagPath(times, values, jump_times, jump_sizes, float(T), continuous, meta or {})


def _grid(T: float, grid_dt: float) -> np.ndarray:
    steps = max(1, int(math.ceil(T / grid_dt - 1e-9)))
    return np.linspace(0.0, T, steps + 1)


def _arrival_times(gen, rate, T) -> np.ndarray:
    """Partial sums of Exp(rate) inter-arrival times up to T."""
    expected = rate * T
    chunk = int(expected + 5.0 * math.sqrt(expected) + 10)
    arrivals = np.cumsum(exponentials(gen, rate, chunk))
    while arrivals[-1] <= T:
        arrivals = np.concatenate([arrivals, arrivals[-1] + np.cumsum(exponentials(gen, rate, chunk))])
    return arrivals[arrivals <= T]


# --- Poisson and compound Poisson processes ---

def sample_poisson_process(rate: float, T: float, rng: RandomSource) -> CadlagPath:
    """
    Poisson process with unit jumps at tau_k = sigma_1 + ... + sigma_k, sigma_k ~ Exp(rate).

    :raises InvalidRate: If rate <= 0.
    """
    _check_rate(rate)
    _check_horizon(T)
    gen = as_generator(rng)
    arrivals = _arrival_times(gen, rate, T)
    times = np.unique(np.concatenate([[0.0], arrivals, [T]]))
    return assemble_path(times, np.zeros(1), np.zeros((times.size, 1)), arrivals, np.ones((arrivals.size, 1)), T,
                         {"sampler": "poisson", "rate": rate})


def sample_compound_poisson(rate: float, jump_law: JumpLaw, T: float, rng: RandomSource) -> CadlagPath:
    """C_t = sum_{k <= N_t} H_k with H_k i.i.d. ~ jump_law."""
    _check_rate(rate)
    _check_horizon(T)
    gen = as_generator(rng)
    arrivals = _arrival_times(gen, rate, T)
    sizes = jump_law.sample(gen, arrivals.size) if arrivals.size else np.zeros((0, jump_law.dimension))
    times = np.unique(np.concatenate([[0.0], arrivals, [T]]))
    d = jump_law.dimension
    return assemble_path(times, np.zeros(d), np.zeros((times.size, d)), arrivals, sizes, T,
                         {"sampler": "compound_poisson", "rate": rate})


# --- Lévy's Brownian construction ---

def _midpoint_construction(levels: int, gen) -> tuple:
    if not 0 <= levels <= config.MAX_BROWNIAN_LEVELS:
        raise InvalidInput(f"levels must lie in [0, {config.MAX_BROWNIAN_LEVELS}], got {levels}")
    size = 2 ** levels
    W = np.zeros(size + 1)
    W[-1] = normals(gen, 1)[0]
    displacements = []
    for n in range(levels):
        step = size >> n
        half = step >> 1
        left = np.arange(0, size, step)
        gamma = normals(gen, left.size) * (0.5 * 2.0 ** (-n / 2.0))
        W[left + half] = 0.5 * (W[left] + W[left + step]) + gamma
        displacements.append(gamma)
    return W, displacements


def sample_brownian_levy(levels: int, rng: RandomSource) -> CadlagPath:
    """
    Brownian motion on [0, 1] by midpoint refinement.

    W(1) ~ N(0, 1); at level n every midpoint of a cell of width 2^-n receives the mean
    of its neighbours plus an independent N(0, 2^-n / 4) displacement.
    """
    W, _ = _midpoint_construction(levels, as_generator(rng))
    times = np.linspace(0.0, 1.0, W.size)
    return assemble_path(times, np.zeros(1), W[:, None], [], np.zeros((0, 1)), 1.0,
                         {"sampler": "brownian_levy", "levels": levels})


def brownian_midpoint_displacements(levels: int, rng: RandomSource) -> list:
    """The raw displacements Gamma of each level, in the order they are drawn."""
    _, displacements = _midpoint_construction(levels, as_generator(rng))
    return displacements


def polygonal_gaps(path: CadlagPath) -> np.ndarray:
    """
    Sup-distances between successive polygonal approximations of a midpoint-constructed path.

    The gap between levels n and n+1 is the largest midpoint displacement of level n.
    """
    levels = path.meta.get("levels")
    if levels is None:
        raise InvalidInput("polygonal gaps need a path from sample_brownian_levy")
    W = path.values[:, 0]
    size = 2 ** levels
    gaps = []
    for n in range(levels):
        step = size >> n
        left = np.arange(0, size, step)
        mid = left + (step >> 1)
        gaps.append(float(np.max(np.abs(W[mid] - 0.5 * (W[left] + W[left + step])))))
    return np.array(gaps)


# --- Jump plans ---

class JumpPlan:
    """
    Tabulation of nu restricted to {|y| >= eps} for sampling by inversion.

    Radial measures are cut into cells: the annuli [1/(n+1), 1/n) above eps, each split
    into ANNULUS_SUBCELLS pieces, and geometric cells in 1/r for |y| >= 1, followed by
    one residual cell. Cell masses come from Gauss–Legendre rules; within a cell the
    radius is drawn uniformly and accepted with probability proportional to the density.
    Atomic measures are sampled by categorical inversion.
    """

    def __init__(self, nu: LevyMeasureSpec, eps: float):
        self.eps = float(eps)
        nu = as_radial_or_atomic(nu)
        self.nu = nu
        self.dimension = nu.dimension
        self.kind = "zero"
        self.total_mass = 0.0
        self.compensator = np.zeros(self.dimension)
        if isinstance(nu, FiniteAtomic):
            self._plan_atomic(nu)
        elif isinstance(nu, RadialDensity):
            self._plan_radial(nu)
        elif not isinstance(nu, ZeroMeasure):
            raise InvalidInput(f"cannot sample from {type(nu).__name__}")
        logger.debug("jump plan (%s, eps=%g): mass %.6g, compensator %s",
                     self.kind, self.eps, self.total_mass, self.compensator)

    def _plan_atomic(self, nu):
        pts, m = nu.points, nu.weights
        norms = np.linalg.norm(pts, axis=1)
        keep = (norms >= self.eps) & (m > 0)
        self.kind = "atomic"
        self.atoms = pts[keep]
        masses = m[keep]
        self.total_mass = float(masses.sum())
        if self.total_mass > 0:
            self.atom_cdf = np.cumsum(masses)
        small = norms[keep] < 1.0
        self.compensator = masses[small] @ self.atoms[small] if np.any(small) else np.zeros(self.dimension)
        if self.total_mass == 0:
            self.kind = "zero"

    def _plan_radial(self, nu):
        self.kind = "radial"
        weight = nu.radial_weight
        start = max(self.eps, nu.r_min)
        if start < 1.0:
            n = np.arange(int(math.floor(1.0 / start)), 0, -1, dtype=float)
            ann_lo, ann_hi = np.maximum(1.0 / (n + 1.0), start), 1.0 / n
            nonempty = ann_hi > ann_lo
            ann_lo, ann_hi = ann_lo[nonempty], ann_hi[nonempty]
            # fewer sub-cells when there are very many annuli
            subcells = int(max(1, min(config.ANNULUS_SUBCELLS, 2 * 10 ** 5 // ann_lo.size)))
            frac = np.linspace(0.0, 1.0, subcells + 1)
            edges = ann_lo[:, None] + (ann_hi - ann_lo)[:, None] * frac[None, :]
            small_lo, small_hi = edges[:, :-1].ravel(), edges[:, 1:].ravel()
            self.annulus_of_cell = np.repeat(n[nonempty].astype(int), subcells)
        else:
            small_lo = small_hi = np.zeros(0)
            self.annulus_of_cell = np.zeros(0, dtype=int)
        large_lo = max(1.0, start)
        per_octave = config.LARGE_JUMP_CELLS_PER_OCTAVE
        exponents = np.arange(config.LARGE_JUMP_OCTAVES * per_octave + 1) / per_octave
        large_edges = large_lo * 2.0 ** exponents
        cell_lo = np.concatenate([small_lo, large_edges[:-1]])
        cell_hi = np.concatenate([small_hi, large_edges[1:]])
        nodes, gl_weights = np.polynomial.legendre.leggauss(config.GAUSS_LEGENDRE_NODES)
        half = 0.5 * (cell_hi - cell_lo)
        r = 0.5 * (cell_hi + cell_lo)[:, None] + half[:, None] * nodes[None, :]
        w = np.nan_to_num(weight(r), nan=0.0, posinf=0.0)
        cell_mass = half * (w @ gl_weights)
        first_moment = half * ((r * w) @ gl_weights)
        residual_lo = large_edges[-1]
        residual = quad(weight, residual_lo, math.inf)
        angular = nu.angular
        scale = angular.total
        self.cell_lo, self.cell_hi = cell_lo, cell_hi
        probe = np.linspace(0.0, 1.0, 17)
        envelope = weight(cell_lo[:, None] + (cell_hi - cell_lo)[:, None] * probe[None, :])
        self.cell_envelope = 1.1 * np.max(np.nan_to_num(envelope, nan=0.0, posinf=0.0), axis=1)
        self.residual_lo = residual_lo
        self.residual_mass = residual
        masses = np.append(cell_mass, residual) * scale
        self.cell_masses = masses[:-1]
        self.total_mass = float(masses.sum())
        if self.total_mass > 0:
            self.cell_cdf = np.cumsum(masses)
        self.direction_points = angular.points
        self.direction_cdf = np.cumsum(angular.masses)
        small_cells = cell_hi <= 1.0
        mean_direction = angular.masses @ angular.points
        self.compensator = float(first_moment[small_cells].sum()) * mean_direction
        self._weight = weight
        if self.total_mass == 0:
            self.kind = "zero"

    def annulus_masses(self) -> dict:
        """nu(A_n ∩ {|y| >= eps}) for the annuli A_n = [1/(n+1), 1/n) of a radial plan."""
        if self.kind != "radial" or not self.annulus_of_cell.size:
            return {}
        small = self.cell_masses[:self.annulus_of_cell.size]
        totals = np.bincount(self.annulus_of_cell, weights=small)
        return {int(n): float(m) for n, m in enumerate(totals) if n > 0}

    def sample(self, gen: np.random.Generator, count: int) -> np.ndarray:
        """``count`` i.i.d. jumps from nu(. ; |y| >= eps) / mass."""
        if count == 0 or self.kind == "zero":
            return np.zeros((count, self.dimension))
        if self.kind == "atomic":
            index = categorical(self.atom_cdf, uniforms(gen, count))
            return self.atoms[index]
        cells = categorical(self.cell_cdf, uniforms(gen, count))
        radii = np.empty(count)
        in_residual = cells == self.cell_lo.size
        regular = np.flatnonzero(~in_residual)
        pending = regular
        while pending.size:
            c = cells[pending]
            lo, hi = self.cell_lo[c], self.cell_hi[c]
            proposal = lo + (hi - lo) * uniforms(gen, pending.size)
            accept = uniforms(gen, pending.size) * self.cell_envelope[c] <= self._weight(proposal)
            radii[pending[accept]] = proposal[accept]
            pending = pending[~accept]
        pending = np.flatnonzero(in_residual)
        tail_shape = 0.01
        while pending.size:
            # Pareto(tail_shape) proposal beyond the last tabulated cell
            proposal = self.residual_lo * uniforms(gen, pending.size) ** (-1.0 / tail_shape)
            ratio = (self._weight(proposal) * proposal ** (1.0 + tail_shape)) / \
                (self._weight(self.residual_lo) * self.residual_lo ** (1.0 + tail_shape))
            accept = uniforms(gen, pending.size) <= np.minimum(1.0, np.nan_to_num(ratio))
            radii[pending[accept]] = proposal[accept]
            pending = pending[~accept]
        if self.direction_points.shape[0] == 1:
            directions = np.repeat(self.direction_points, count, axis=0)
        else:
            index = categorical(self.direction_cdf, uniforms(gen, count))
            directions = self.direction_points[index]
        return radii[:, None] * directions


@functools.lru_cache(maxsize=64)
def jump_plan(nu: LevyMeasureSpec, eps: float) -> JumpPlan:
    return JumpPlan(nu, eps)


def _check_eps(eps):
    if not 0.0 < eps <= 1.0:
        raise InvalidInput(f"eps must lie in (0, 1], got {eps}")


def _check_budget(plan: JumpPlan, T: float):
    expected = plan.total_mass * T
    if expected > config.JUMP_BUDGET:
        raise MassOverflow(
            f"expected {expected:.3g} jumps per path exceeds the budget of {config.JUMP_BUDGET:.3g}; raise eps")


# --- Lévy–Itô construction ---

def sample_levy_ito(triplet: LevyTriplet, eps: float, T: float, grid_dt: float, rng: RandomSource) -> CadlagPath:
    """
    Path of the Lévy process with exponent psi_eps (jumps below eps dropped).

    The path is l t + sqrt(Q) W_t plus the jumps of nu on {|y| >= eps}; jumps in the annuli
    [1/(n+1), 1/n) are compensated continuously in time. ``meta["truncation_bound"]`` holds
    T * int_{|y| < eps} |y|^2 nu(dy).

    :raises MassOverflow: If nu{|y| >= eps} * T exceeds JUMP_BUDGET.
    """
    _check_eps(eps)
    _check_horizon(T)
    if not grid_dt > 0:
        raise InvalidInput(f"grid_dt must be positive, got {grid_dt}")
    plan = jump_plan(triplet.nu, float(eps))
    _check_budget(plan, T)
    gen = as_generator(rng)
    d = triplet.dimension
    count = int(poisson_counts(gen, plan.total_mass * T, 1)[0])
    jump_times = np.sort(T * uniforms(gen, count))
    jump_sizes = plan.sample(gen, count)
    times = np.unique(np.concatenate([_grid(T, grid_dt), jump_times]))
    dt = np.diff(times)
    drift = triplet.drift - plan.compensator
    increments = dt[:, None] * drift[None, :]
    if np.any(triplet.covariance != 0.0):
        increments = increments + (np.sqrt(dt)[:, None] * normals(gen, (dt.size, d))) @ triplet.covariance_sqrt.T
    continuous = np.vstack([np.zeros((1, d)), np.cumsum(increments, axis=0)])
    meta = {"sampler": "levy_ito", "eps": eps, "jump_mass": plan.total_mass,
            "truncation_bound": T * small_jump_second_moment(triplet.nu, eps),
            "compensator": plan.compensator.tolist()}
    return assemble_path(times, np.zeros(d), continuous, jump_times, jump_sizes, T, meta)


class LevyEndpointSampler:
    """
    Vectorised sampler of X_t for the Lévy process with exponent psi_eps.

    Endpoints are drift, Gaussian and a compound Poisson sum whose jump counts are drawn
    by Poisson inversion; no paths are stored.
    """

    def __init__(self, triplet: LevyTriplet, eps: float = 1e-2):
        _check_eps(eps)
        self.triplet = triplet
        self.eps = float(eps)
        self.truncated_triplet = truncate_triplet(triplet, eps)
        self.plan = jump_plan(triplet.nu, float(eps))
        self.drift = triplet.drift - self.plan.compensator
        self.has_gaussian = bool(np.any(triplet.covariance != 0.0))
        self.dimension = triplet.dimension

    @property
    def exponent(self):
        return exponent_of(self.truncated_triplet, label=f"psi_eps(eps={self.eps:g})")

    @property
    def pure_jump(self) -> bool:
        return not self.has_gaussian and bool(np.all(np.abs(self.drift) <= 1e-15))

    @property
    def jump_rate(self) -> float:
        return self.plan.total_mass

    def draw(self, gen: np.random.Generator, t, n: int, with_counts: bool = False):
        t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
        if np.any(t < 0):
            raise InvalidInput("times must be non-negative")
        _check_budget(self.plan, float(t.max()) if n else 0.0)
        counts = poisson_counts(gen, self.plan.total_mass * t)
        total = int(counts.sum())
        out = t[:, None] * self.drift[None, :]
        if total:
            sizes = self.plan.sample(gen, total)
            owner = np.repeat(np.arange(n), counts)
            for k in range(self.dimension):
                out[:, k] += np.bincount(owner, weights=sizes[:, k], minlength=n)
        if self.has_gaussian:
            out += (np.sqrt(t)[:, None] * normals(gen, (n, self.dimension))) @ self.triplet.covariance_sqrt.T
        return (out, counts) if with_counts else out

    def sample(self, t, n: int, rng) -> np.ndarray:
        """n endpoints X_t; ``t`` may be a scalar or one time per sample."""
        if n < 1:
            raise EmptyEnsemble("n must be at least 1")
        return self.draw(as_generator(rng), t, n)

    def sample_increments(self, times: Sequence[float], n: int, rng) -> np.ndarray:
        """Independent increments over 0 = t_0 < t_1 < ... < t_m; returns (n, m, d)."""
        times = np.asarray(times, dtype=float)
        if times.size == 0 or np.any(np.diff(np.concatenate([[0.0], times])) <= 0):
            raise InvalidInput("partition times must be positive and strictly increasing")
        gen = as_generator(rng)
        steps = np.diff(np.concatenate([[0.0], times]))
        return np.stack([self.draw(gen, dt, n) for dt in steps], axis=1)

    def sample_ensemble(self, t: float, n: int, rng: "RandomSource") -> "Ensemble":
        return Ensemble.from_endpoints(self.sample(t, n, rng), t, rng,
                                       meta={"sampler": "levy_endpoint", "eps": self.eps})


# --- Exit times from balls ---

@dataclass
class ExitSample:
    exit_times: np.ndarray
    exited: np.ndarray
    exit_positions: np.ndarray
    running_max: np.ndarray
    integrals: Optional[np.ndarray]
    dt: float
    t_max: float
    event_driven: bool

    @property
    def n(self) -> int:
        return int(self.exit_times.size)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(~self.exited))


def simulate_exits(sampler: LevyEndpointSampler, x, radius: float, n: int, rng, *, dt: float = 1e-3,
                   t_max: float = 50.0, g: Optional[Callable] = None,
                   event_driven: Optional[bool] = None) -> ExitSample:
    """
    First exit times tau = inf{t : |X_t - x| > radius} for n independent paths from x.

    Pure-jump drivers with zero effective drift and no Gaussian part are simulated event by
    event, which is exact. Otherwise the paths are stepped with width dt; in d = 1 with a
    Gaussian part the Brownian-bridge crossing probability between two inside points is
    applied, and a continuous exit is placed on the boundary. Paths still inside at t_max
    are censored. ``g`` maps (m, d) positions to (m,) values; its left-point integral along
    each path up to tau ^ t_max is returned.
    """
    if n < 1:
        raise EmptyEnsemble("n must be at least 1")
    if not radius > 0:
        raise InvalidInput(f"radius must be positive, got {radius}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = sampler.dimension
    gen = as_generator(rng)
    if event_driven is None:
        event_driven = sampler.pure_jump
    if event_driven and not sampler.pure_jump:
        raise InvalidInput("event-driven exits need a pure-jump driver without drift")
    pos = np.repeat(x[None, :], n, axis=0)
    times = np.zeros(n)
    exited = np.zeros(n, dtype=bool)
    running = np.zeros(n)
    integrals = np.zeros(n) if g is not None else None
    alive = np.arange(n)
    if event_driven:
        rate = sampler.jump_rate
        if rate == 0:
            alive = np.array([], dtype=int)
        while alive.size:
            waits = exponentials(gen, rate, alive.size)
            new_t = times[alive] + waits
            over = new_t > t_max
            if integrals is not None:
                span = np.where(over, t_max - times[alive], waits)
                integrals[alive] += np.asarray(g(pos[alive]), dtype=float) * span
            times[alive[over]] = t_max
            alive = alive[~over]
            new_t = new_t[~over]
            if not alive.size:
                break
            times[alive] = new_t
            pos[alive] += sampler.plan.sample(gen, alive.size)
            dist = np.linalg.norm(pos[alive] - x, axis=1)
            running[alive] = np.maximum(running[alive], dist)
            out = dist > radius
            exited[alive[out]] = True
            alive = alive[~out]
        return ExitSample(times, exited, pos, running, integrals, 0.0, t_max, True)
    bridge = d == 1 and sampler.has_gaussian
    q = float(sampler.triplet.covariance[0, 0]) if bridge else 0.0
    t = 0.0
    while alive.size and t < t_max - 1e-15:
        step = min(dt, t_max - t)
        before = pos[alive]
        if integrals is not None:
            integrals[alive] += np.asarray(g(before), dtype=float) * step
        moves, counts = sampler.draw(gen, step, alive.size, with_counts=True)
        after = before + moves
        dist = np.linalg.norm(after - x, axis=1)
        out = dist > radius
        if bridge:
            a, b = before[:, 0] - x[0], after[:, 0] - x[0]
            inside = ~out
            p_up = np.exp(-2.0 * (radius - a) * (radius - b) / (q * step))
            p_down = np.exp(-2.0 * (radius + a) * (radius + b) / (q * step))
            crossed = inside & (uniforms(gen, alive.size) < np.minimum(1.0, p_up + p_down))
            side = np.where(p_up >= p_down, 1.0, -1.0)
            after[crossed, 0] = x[0] + side[crossed] * radius
            out = out | crossed
        continuous_exit = out & (counts == 0)
        if np.any(continuous_exit):
            offset = after[continuous_exit] - x
            norms = np.linalg.norm(offset, axis=1, keepdims=True)
            after[continuous_exit] = x + radius * offset / np.where(norms > 0, norms, 1.0)
        pos[alive] = after
        running[alive] = np.maximum(running[alive], np.linalg.norm(after - x, axis=1))
        t += step
        times[alive] = t
        exited[alive[out]] = True
        alive = alive[~out]
    return ExitSample(times, exited, pos, running, integrals, dt, t_max, False)


# --- Random series representation ---

def series_compensators(H: Callable, v_law: DiscreteJumps, n_terms: int) -> np.ndarray:
    """c_k = int_{k-1}^k E[H(r, V) 1_{|H(r, V)| < 1}] dr by quadrature, for discrete V."""
    d = v_law.dimension
    out = np.zeros((n_terms, d))
    for v, p in zip(v_law.support, v_law.weights):
        for k in range(1, n_terms + 1):
            for axis in range(d):
                def integrand(r, axis=axis, v=v):
                    h = np.atleast_2d(H(np.array([r]), v[None, :]))[0]
                    return h[axis] if np.linalg.norm(h) < 1.0 else 0.0
                out[k - 1, axis] += p * quad(integrand, k - 1.0, float(k))
    return out


def sample_series(H: Callable, v_law: JumpLaw, n_terms: int, rng: RandomSource, *,
                  compensators=None, grid_dt: float = 1e-2,
                  resolution_radius: float = None) -> CadlagPath:
    """
    Truncated series X_t = sum_{k <= n} (H(Gamma_k, V_k) 1_{[0, t]}(U_k) - t c_k) on [0, 1].

    Gamma_k are partial sums of Exp(1) variables, V_k i.i.d. ~ v_law and U_k uniform on
    (0, 1). ``H`` maps arrays (Gamma of shape (m,), V of shape (m, d)) to (m, d) jumps and
    should have |H| non-increasing in r beyond some r_0. ``compensators`` is None (all
    c_k = 0), an (n, d) array, or "quadrature".

    :raises TailNotResolved: If Gamma_n is below the resolution radius.
    """
    if n_terms < 0:
        raise InvalidInput(f"n_terms must be >= 0, got {n_terms}")
    resolution_radius = config.SERIES_RESOLUTION_RADIUS if resolution_radius is None else resolution_radius
    d = v_law.dimension
    times = _grid(1.0, grid_dt)
    if n_terms == 0:
        return assemble_path(times, np.zeros(d), np.zeros((times.size, d)), [], np.zeros((0, d)), 1.0,
                             {"sampler": "series", "n_terms": 0, "tail_index": 0.0})
    gen = as_generator(rng)
    gammas = np.cumsum(exponentials(gen, 1.0, n_terms))
    if gammas[-1] < resolution_radius:
        raise TailNotResolved(
            f"Gamma_n = {gammas[-1]:.6g} is below the resolution radius {resolution_radius:.6g}; add terms")
    marks = v_law.sample(gen, n_terms)
    arrival = uniforms(gen, n_terms)
    jumps = np.asarray(H(gammas, marks), dtype=float).reshape(n_terms, d)
    if compensators is None:
        c_total = np.zeros(d)
    elif isinstance(compensators, str) and compensators == "quadrature":
        c_total = series_compensators(H, v_law, n_terms).sum(axis=0)
    else:
        c = np.asarray(compensators, dtype=float).reshape(n_terms, d)
        c_total = c.sum(axis=0)
    times = np.unique(np.concatenate([times, arrival]))
    continuous = -times[:, None] * c_total[None, :]
    return assemble_path(times, np.zeros(d), continuous, arrival, jumps, 1.0,
                         {"sampler": "series", "n_terms": n_terms, "tail_index": float(gammas[-1])})


# --- Ensembles ---

@dataclass(frozen=True, eq=False)
class Ensemble:
    """i.i.d. paths or endpoint vectors with the random-stream range that produced them."""
    samples: object
    seed: Optional[int]
    stream_start: Optional[int]
    horizon: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise EmptyEnsemble("an ensemble needs at least one sample")
        if self.is_paths:
            dims = {p.dimension for p in self.samples}
            horizons = {p.horizon for p in self.samples}
            if len(dims) > 1 or len(horizons) > 1:
                raise DimensionMismatch("ensemble paths must share dimension and horizon")

    @property
    def is_paths(self) -> bool:
        return isinstance(self.samples, (list, tuple))

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        return self.samples[0].dimension if self.is_paths else int(np.asarray(self.samples).shape[1])

    @property
    def paths(self) -> list:
        if not self.is_paths:
            raise InvalidInput("this ensemble holds endpoints only, not paths")
        return list(self.samples)

    def endpoints(self) -> np.ndarray:
        if self.is_paths:
            return np.array([p.endpoint for p in self.samples])
        return np.asarray(self.samples)

    def values_at(self, t: float) -> np.ndarray:
        return np.array([p.value_at(t) for p in self.paths])

    def manifest(self) -> dict:
        return {"seed": self.seed, "stream_start": self.stream_start,
                "stream_end": None if self.stream_start is None else self.stream_start + self.n - 1,
                "n": self.n, "horizon": self.horizon, **self.meta}

    @classmethod
    def from_endpoints(cls, endpoints, horizon: float, rng: Optional[RandomSource] = None,
                       meta: Optional[dict] = None) -> "Ensemble":
        arr = np.asarray(endpoints, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(arr, rng.seed if rng else None, rng.stream if rng else None, float(horizon), meta or {})

    @classmethod
    def generate(cls, sampler: Callable[[RandomSource], CadlagPath], n: int, rng: RandomSource,
                 workers: Optional[int] = None, progress: bool = False) -> "Ensemble":
        """
        Draws n paths; path i uses stream rng.stream + i, so the result does not depend on ``workers``.

        :param sampler: Maps a RandomSource to a CadlagPath.
        :param workers: Thread count, default config.threads().
        :param progress: Show a tqdm bar over chunks.
        """
        if n < 1:
            raise EmptyEnsemble("n must be at least 1")
        workers = workers or config.threads()
        chunk = config.ENSEMBLE_CHUNK
        starts = list(range(0, n, chunk))

        def run(start):
            return [sampler(rng.child(i)) for i in range(start, min(start + chunk, n))]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(run, starts)
            if progress:
                chunks = tqdm(chunks, total=len(starts), desc="paths", unit="chunk")
            paths = [p for part in chunks for p in part]
        logger.debug("generated %d paths on %d threads from seed %d stream %d", n, workers, rng.seed, rng.stream)
        return cls(paths, rng.seed, rng.stream, paths[0].horizon, {})


if __name__ == '__main__':
    config.setup_logging()
    source = RandomSource(2024)
    print(sample_poisson_process(2.0, 1.0, source).jump_times)
    print(sample_brownian_levy(3, source).values[:, 0])
