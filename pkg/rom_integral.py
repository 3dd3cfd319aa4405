# levytype/rom_integral.py
"""
Random orthogonal measures and the L2 stochastic integral.

A backend describes a noise N on a semiring of sets together with its control
measure mu, E N(R) N(S) = mu(R n S). Every backend produces *replays*: one
materialised underlying path per random source, from which all interval values
are read, so draws over overlapping sets within a replay are consistent.
"""
from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

import config
from errors import (
    InvalidInput,
    NonAdaptedCoefficient,
    NotSquareIntegrable,
    OutOfSemiring,
)
from levy_core import (
    Annulus,
    FiniteAtomic,
    LevyMeasureSpec,
    LevyTriplet,
    SpaceBox,
    brownian_triplet,
    integrate_measure,
    measure_of,
    symmetric_stable_triplet,
)
from report_utils import CheckReport, mean_and_se, se_check
from samplers import (
    CadlagPath,
    RandomSource,
    as_generator,
    jump_plan,
    normals,
    poisson_counts,
    sample_levy_ito,
    uniforms,
)

logger = logging.getLogger(__name__)


# --- Semiring ---

@dataclass(frozen=True)
class TimeInterval:
    """(s, t] with 0 <= s < t."""
    s: float
    t: float

    def __post_init__(self):
        if not (0.0 <= self.s < self.t) or not math.isfinite(self.t):
            raise OutOfSemiring(f"({self.s}, {self.t}] is not an interval of [0, inf)")

    @property
    def length(self) -> float:
        return self.t - self.s

    @property
    def time(self) -> "TimeInterval":
        return self

    def intersect(self, other: "TimeInterval") -> Optional["TimeInterval"]:
        s, t = max(self.s, other.s), min(self.t, other.t)
        return TimeInterval(s, t) if s < t else None

    def difference(self, other: "TimeInterval") -> list:
        common = self.intersect(other)
        if common is None:
            return [self]
        out = []
        if self.s < common.s:
            out.append(TimeInterval(self.s, common.s))
        if common.t < self.t:
            out.append(TimeInterval(common.t, self.t))
        return out

    def split(self, parts: int) -> list:
        edges = np.linspace(self.s, self.t, parts + 1)
        return [TimeInterval(a, b) for a, b in zip(edges[:-1], edges[1:])]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.s + self.t)


def _space_intersect(a, b):
    if isinstance(a, SpaceBox) and isinstance(b, SpaceBox):
        return a.intersect(b)
    if isinstance(a, Annulus) and isinstance(b, Annulus):
        lo, hi = max(a.r_min, b.r_min), min(a.r_max, b.r_max)
        return Annulus(lo, hi) if lo < hi else None
    raise OutOfSemiring("space sets must both be boxes or both be annuli")


def _space_difference(a, b) -> list:
    if isinstance(a, SpaceBox) and isinstance(b, SpaceBox):
        return a.difference(b)
    common = _space_intersect(a, b)
    if common is None:
        return [a]
    out = []
    if a.r_min < common.r_min:
        out.append(Annulus(a.r_min, common.r_min))
    if common.r_max < a.r_max:
        out.append(Annulus(common.r_max, a.r_max))
    return out


@dataclass(frozen=True)
class SpaceTimeInterval:
    """(s, t] x B with B a box or an annulus."""
    time: TimeInterval
    space: Union[SpaceBox, Annulus]

    def intersect(self, other: "SpaceTimeInterval") -> Optional["SpaceTimeInterval"]:
        t = self.time.intersect(other.time)
        b = _space_intersect(self.space, other.space)
        if t is None or b is None:
            return None
        return SpaceTimeInterval(t, b)

    def difference(self, other: "SpaceTimeInterval") -> list:
        common = self.intersect(other)
        if common is None:
            return [self]
        out = [SpaceTimeInterval(t, self.space) for t in self.time.difference(other.time)]
        out += [SpaceTimeInterval(common.time, b) for b in _space_difference(self.space, other.space)]
        return out


SemiringInterval = Union[TimeInterval, SpaceTimeInterval]


def _elementary_times(intervals) -> list:
    edges = sorted({e for R in intervals for e in (R.time.s, R.time.t)})
    return [TimeInterval(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _elementary_spaces(spaces) -> list:
    if all(isinstance(b, Annulus) for b in spaces):
        radii = sorted({r for b in spaces for r in (b.r_min, b.r_max)})
        return [Annulus(a, b) for a, b in zip(radii[:-1], radii[1:])]
    if all(isinstance(b, SpaceBox) for b in spaces):
        d = spaces[0].dimension
        axes = [sorted({c for b in spaces for c in (b.lower[k], b.upper[k])}) for k in range(d)]
        cells = []
        for corner in itertools.product(*[range(len(a) - 1) for a in axes]):
            lo = [axes[k][i] for k, i in enumerate(corner)]
            hi = [axes[k][i + 1] for k, i in enumerate(corner)]
            cells.append(SpaceBox(lo, hi))
        return cells
    raise OutOfSemiring("space sets must all be boxes or all be annuli")


# --- Simple functions ---

@dataclass(frozen=True)
class SimpleFunction:
    """f = sum_k c_k 1_{R_k}."""
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), R) for c, R in self.terms))
        kinds = {type(R) for _, R in self.terms}
        if len(kinds) > 1:
            raise OutOfSemiring("a simple function cannot mix time and space-time intervals")

    @classmethod
    def indicator(cls, R: SemiringInterval, c: float = 1.0) -> "SimpleFunction":
        return cls(((c, R),))

    def __add__(self, other: "SimpleFunction") -> "SimpleFunction":
        return SimpleFunction(self.terms + other.terms)

    def scaled(self, factor: float) -> "SimpleFunction":
        return SimpleFunction(tuple((factor * c, R) for c, R in self.terms))

    @property
    def intervals(self) -> list:
        return [R for _, R in self.terms]

    def refine(self) -> "SimpleFunction":
        """Equivalent representation over pairwise disjoint sets."""
        if not self.terms:
            return self
        times = _elementary_times(self.intervals)
        if isinstance(self.terms[0][1], TimeInterval):
            atoms = times
        else:
            spaces = _elementary_spaces([R.space for R in self.intervals])
            atoms = [SpaceTimeInterval(t, b) for t in times for b in spaces]
        out = []
        for atom in atoms:
            c = sum(coef for coef, R in self.terms if _covers(R, atom))
            if c != 0.0:
                out.append((c, atom))
        return SimpleFunction(tuple(out))


def _covers(R, atom) -> bool:
    if isinstance(R, TimeInterval):
        return R.s <= atom.s and atom.t <= R.t
    if not (R.time.s <= atom.time.s and atom.time.t <= R.time.t):
        return False
    return _space_intersect(R.space, atom.space) == atom.space


# --- Backends ---

class Replay:
    """One materialised underlying path of a backend."""

    def sample(self, R: SemiringInterval) -> float:
        raise NotImplementedError

    def integrate(self, f: SimpleFunction) -> float:
        return float(sum(c * self.sample(R) for c, R in f.terms))


class RandomOrthogonalMeasure:
    """Common interface of the noise backends."""
    horizon: Optional[float] = None

    def control(self, R: SemiringInterval) -> float:
        raise NotImplementedError

    def replay(self, rng) -> Replay:
        raise NotImplementedError

    def validate(self, R: SemiringInterval) -> None:
        if self.horizon is not None and R.time.t > self.horizon * (1 + 1e-12):
            raise OutOfSemiring(f"{R} extends beyond the horizon {self.horizon}")

    def sample_batch(self, sets: Sequence[SemiringInterval], n: int, rng: RandomSource) -> np.ndarray:
        """(n, len(sets)) draws; row i is read from the replay of rng.child(i)."""
        for R in sets:
            self.validate(R)
        out = np.empty((n, len(sets)))
        for i in range(n):
            replay = self.replay(rng.child(i))
            out[i] = [replay.sample(R) for R in sets]
        return out

    def integral_batch(self, f: SimpleFunction, n: int, rng: RandomSource) -> np.ndarray:
        if not f.terms:
            return np.zeros(n)
        coefficients = np.array([c for c, _ in f.terms])
        return self.sample_batch(f.intervals, n, rng) @ coefficients


class TimeReplay(Replay):
    """Replay of a noise N((s, t]) = M_t - M_s read from a real-valued path M."""

    def values(self, times) -> np.ndarray:
        raise NotImplementedError

    def value(self, t: float) -> float:
        return float(self.values(np.array([t]))[0])

    def sample(self, R):
        if not isinstance(R, TimeInterval):
            raise OutOfSemiring("time-indexed noise accepts intervals (s, t] only")
        w = self.values(np.array([R.s, R.t]))
        return float(w[1] - w[0])


class _PathReplay(TimeReplay):
    def __init__(self, path: CadlagPath):
        self.path = path

    def values(self, times):
        return np.atleast_2d(self.path.value_at(np.asarray(times, dtype=float)))[:, 0] - self.path.x0[0]


@dataclass(frozen=True, eq=False)
class MartingaleNoise(RandomOrthogonalMeasure):
    """
    N((s, t]) = M_t - M_s for a square-integrable martingale M with deterministic bracket.

    ``driver`` maps a RandomSource to a one-dimensional CadlagPath on [0, horizon];
    ``bracket`` maps t to <M>_t.
    """
    driver: Callable
    bracket: Callable
    horizon: Optional[float] = 1.0
    label: str = "martingale"

    def control(self, R):
        self.validate(R)
        if not isinstance(R, TimeInterval):
            raise OutOfSemiring("martingale noise is indexed by time intervals")
        return float(self.bracket(R.t) - self.bracket(R.s))

    def replay(self, rng) -> TimeReplay:
        return _PathReplay(self.driver(rng))


def brownian_martingale(horizon: float = 1.0, grid_dt: float = 2.0 ** -10) -> MartingaleNoise:
    triplet = brownian_triplet()
    return MartingaleNoise(lambda r: sample_levy_ito(triplet, 1.0, horizon, grid_dt, r),
                           lambda t: t, horizon, "brownian")


def compensated_poisson_martingale(rate: float, horizon: float = 1.0, grid_dt: float = 2.0 ** -8) -> MartingaleNoise:
    """M_t = N_t - rate t with bracket rate t."""
    triplet = LevyTriplet((-rate,), ((0.0,),), FiniteAtomic(((1.0,),), (rate,)))
    return MartingaleNoise(lambda r: sample_levy_ito(triplet, 1.0, horizon, grid_dt, r),
                           lambda t: rate * t, horizon, "compensated_poisson")


class _BridgeReplay(TimeReplay):
    """Brownian motion materialised lazily: new times are filled by Brownian bridges."""

    def __init__(self, gen):
        self.gen = gen
        self.known_t = np.array([0.0])
        self.known_w = np.array([0.0])

    def values(self, times):
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise OutOfSemiring("white noise lives on [0, inf)")
        wanted = np.unique(times)
        new = wanted[~np.isin(wanted, self.known_t)]
        if new.size:
            last_t, last_w = self.known_t[-1], self.known_w[-1]
            beyond = new[new > last_t]
            inside = new[new < last_t]
            add_t, add_w = [], []
            if beyond.size:
                steps = np.diff(np.concatenate([[last_t], beyond]))
                add_t.append(beyond)
                add_w.append(last_w + np.cumsum(np.sqrt(steps) * normals(self.gen, steps.size)))
            if inside.size:
                gaps = np.searchsorted(self.known_t, inside)
                for g in np.unique(gaps):
                    pts = inside[gaps == g]
                    a, b = self.known_t[g - 1], self.known_t[g]
                    wa, wb = self.known_w[g - 1], self.known_w[g]
                    steps = np.diff(np.concatenate([[a], pts, [b]]))
                    free = np.cumsum(np.sqrt(steps) * normals(self.gen, steps.size))
                    add_t.append(pts)
                    add_w.append(wa + free[:-1] - (pts - a) / (b - a) * (free[-1] - (wb - wa)))
            all_t = np.concatenate([self.known_t] + add_t)
            all_w = np.concatenate([self.known_w] + add_w)
            order = np.argsort(all_t, kind="stable")
            self.known_t, self.known_w = all_t[order], all_w[order]
        return self.known_w[np.searchsorted(self.known_t, times)]


@dataclass(frozen=True, eq=False)
class WhiteNoise(MartingaleNoise):
    """Gaussian white noise on [0, inf): N((s, t]) = W_t - W_s with Lebesgue control."""
    driver: Callable = None
    bracket: Callable = None
    horizon: Optional[float] = None
    label: str = "white_noise"

    def control(self, R):
        if not isinstance(R, TimeInterval):
            raise OutOfSemiring("white noise is indexed by time intervals")
        self.validate(R)
        return R.length

    def replay(self, rng) -> TimeReplay:
        return _BridgeReplay(as_generator(rng))

    def sample_batch(self, sets, n, rng):
        for R in sets:
            if not isinstance(R, TimeInterval):
                raise OutOfSemiring("white noise is indexed by time intervals")
            self.validate(R)
        edges = np.unique(np.concatenate([[0.0]] + [[R.s, R.t] for R in sets]))
        gen = as_generator(rng)
        steps = np.diff(edges)
        W = np.zeros((n, edges.size))
        W[:, 1:] = np.cumsum(np.sqrt(steps)[None, :] * normals(gen, (n, steps.size)), axis=1)
        s_idx = np.searchsorted(edges, [R.s for R in sets])
        t_idx = np.searchsorted(edges, [R.t for R in sets])
        return W[:, t_idx] - W[:, s_idx]


@functools.lru_cache(maxsize=4096)
def _region_mass(nu: LevyMeasureSpec, region) -> float:
    return measure_of(nu, region)


class _LedgerReplay(Replay):
    def __init__(self, backend: "CompensatedPoisson", jump_times, jump_sizes):
        self.backend = backend
        self.jump_times = jump_times
        self.jump_sizes = jump_sizes

    def count(self, R: SpaceTimeInterval) -> int:
        if not self.jump_times.size:
            return 0
        in_time = (self.jump_times > R.time.s) & (self.jump_times <= R.time.t)
        return int(np.count_nonzero(in_time & R.space.contains(self.jump_sizes)))

    def sample(self, R):
        self.backend.validate(R)
        return self.count(R) - self.backend.control(R)


@dataclass(frozen=True, eq=False)
class CompensatedPoisson(RandomOrthogonalMeasure):
    """
    Compensated jump measure N~((s, t] x B) = N_t(B) - N_s(B) - (t - s) nu(B) of a Lévy process.

    Jumps of size below ``eps`` are not materialised, so every B must keep at least that
    distance from the origin.
    """
    nu: LevyMeasureSpec
    horizon: float = 1.0
    eps: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise InvalidInput(f"eps must lie in (0, 1], got {self.eps}")
        if not 0.0 < self.horizon < math.inf:
            raise InvalidInput(f"horizon must be positive and finite, got {self.horizon}")

    def validate(self, R):
        if not isinstance(R, SpaceTimeInterval):
            raise OutOfSemiring("compensated Poisson noise is indexed by (s, t] x B")
        super().validate(R)
        radius = R.space.exclusion_radius
        if not radius > 0:
            raise OutOfSemiring("B must be bounded away from the origin")
        if radius < self.eps:
            raise OutOfSemiring(f"B reaches radius {radius:g}, below the sampling cutoff eps={self.eps:g}")

    def control(self, R):
        self.validate(R)
        return R.time.length * _region_mass(self.nu, R.space)

    def replay(self, rng) -> Replay:
        plan = jump_plan(self.nu, float(self.eps))
        gen = as_generator(rng)
        count = int(poisson_counts(gen, plan.total_mass * self.horizon, 1)[0])
        times = self.horizon * uniforms(gen, count)
        return _LedgerReplay(self, times, plan.sample(gen, count))


class _CellReplay(Replay):
    def __init__(self, backend: "SpaceTimeWhiteNoise", cells: np.ndarray):
        self.backend = backend
        self.cells = cells

    def sample(self, R):
        self.backend.validate(R)
        index = self.backend.cell_slices(R)
        return float(self.cells[index].sum())


@dataclass(frozen=True, eq=False)
class SpaceTimeWhiteNoise(RandomOrthogonalMeasure):
    """
    Gaussian white noise on [0, horizon] x box with Lebesgue control.

    The replay holds independent N(0, |cell|) values on a grid of 2**level cells per
    axis; only sets aligned with that grid can be evaluated.
    """
    box: SpaceBox
    horizon: float = 1.0
    level: int = 4

    @property
    def cells_per_axis(self) -> int:
        return 2 ** self.level

    def control(self, R):
        self.validate(R)
        return R.time.length * R.space.volume

    def validate(self, R):
        if not isinstance(R, SpaceTimeInterval) or not isinstance(R.space, SpaceBox):
            raise OutOfSemiring("space-time white noise is indexed by (s, t] x box")
        super().validate(R)
        if R.space.intersect(self.box) != R.space:
            raise OutOfSemiring(f"{R.space} is not inside {self.box}")
        self.cell_slices(R)

    def _grid_index(self, value, lo, hi) -> int:
        position = (value - lo) / (hi - lo) * self.cells_per_axis
        index = int(round(position))
        if abs(position - index) > 1e-9:
            raise OutOfSemiring(f"{value} is not on the cell grid")
        return index

    def cell_slices(self, R) -> tuple:
        slices = [slice(self._grid_index(R.time.s, 0.0, self.horizon), self._grid_index(R.time.t, 0.0, self.horizon))]
        for k in range(self.box.dimension):
            lo, hi = self.box.lower[k], self.box.upper[k]
            slices.append(slice(self._grid_index(R.space.lower[k], lo, hi), self._grid_index(R.space.upper[k], lo, hi)))
        return tuple(slices)

    def replay(self, rng) -> Replay:
        m = self.cells_per_axis
        shape = (m,) * (self.box.dimension + 1)
        cell_volume = (self.horizon / m) * self.box.volume / m ** self.box.dimension
        return _CellReplay(self, math.sqrt(cell_volume) * normals(as_generator(rng), shape))


# --- Integrals ---

def sample_noise(N: RandomOrthogonalMeasure, R: SemiringInterval, rng) -> float:
    """One draw of N(R) from the replay of ``rng``."""
    N.validate(R)
    return N.replay(rng).sample(R)


def integrate_simple(f: SimpleFunction, N: RandomOrthogonalMeasure, rng, replay: Optional[Replay] = None) -> float:
    """I_N(f) = sum_k c_k N(R_k) over one replay."""
    for R in f.intervals:
        N.validate(R)
    replay = replay or N.replay(rng)
    return replay.integrate(f)


def control_integral(f: SimpleFunction, N: RandomOrthogonalMeasure) -> float:
    """int f^2 dmu, computed on the disjoint refinement of f."""
    return float(sum(c * c * N.control(R) for c, R in f.refine().terms))


@dataclass
class L2Integral:
    values: np.ndarray
    certificate: float
    level: int
    simple: SimpleFunction

    @property
    def value(self) -> float:
        return float(self.values[0])


def _cells(domain, level: int) -> list:
    parts = 2 ** level
    cells = []
    for base in domain:
        if isinstance(base, TimeInterval):
            cells.extend(base.split(parts))
            continue
        if not isinstance(base.space, SpaceBox):
            raise OutOfSemiring("L2 refinement of space sets needs boxes")
        axes = [np.linspace(lo, hi, parts + 1) for lo, hi in zip(base.space.lower, base.space.upper)]
        spaces = [SpaceBox([a[i] for a, i in zip(axes, idx)], [a[i + 1] for a, i in zip(axes, idx)])
                  for idx in itertools.product(range(parts), repeat=len(axes))]
        cells.extend(SpaceTimeInterval(t, b) for t in base.time.split(parts) for b in spaces)
    return cells


def _midpoint_value(f: Callable, cell) -> float:
    if isinstance(cell, TimeInterval):
        return float(f(cell.midpoint))
    y = 0.5 * (cell.space.lo + cell.space.hi)
    return float(f(cell.time.midpoint, y))


def simple_approximation(f: Callable, domain, level: int) -> SimpleFunction:
    """Midpoint values of f on the cells of the given dyadic level."""
    return SimpleFunction(tuple((_midpoint_value(f, c), c) for c in _cells(domain, level)))


def _cell_certificate(f: Callable, cell, N: RandomOrthogonalMeasure) -> tuple:
    """(int_cell (f(mid) - f_fine)^2 dmu, int_cell f_fine^2 dmu) with f_fine two levels finer."""
    coarse_value = _midpoint_value(f, cell)
    err = norm = 0.0
    for fine in _cells([cell], 2):
        mass = N.control(fine)
        value = _midpoint_value(f, fine)
        err += (value - coarse_value) ** 2 * mass
        norm += value * value * mass
    return err, norm


def integrate_l2(f, N: RandomOrthogonalMeasure, level: int, rng: RandomSource, *, domain=None,
                 n: int = 1, modulus: Optional[Callable] = None) -> L2Integral:
    """
    I_N(f) through the simple approximation of f on dyadic cells of the given level.

    :param f: A SimpleFunction (integrated exactly), a callable s -> float for time-indexed
        noise, or (s, y) -> float for space-time noise.
    :param domain: Base sets to refine, default (0, horizon].
    :param modulus: Optional caller bound level -> int (f - f_level)^2 dmu used as certificate.
    :return: n draws (one per replay) and the certificate.
    :raises NotSquareIntegrable: If the certificate is not finite or does not decrease with the level.
    """
    if isinstance(f, SimpleFunction):
        values = N.integral_batch(f, n, rng)
        return L2Integral(values, 0.0, level, f)
    if level < 0:
        raise InvalidInput(f"level must be >= 0, got {level}")
    if domain is None:
        if N.horizon is None:
            raise InvalidInput("a domain is needed for noise without horizon")
        domain = [TimeInterval(0.0, N.horizon)]
    if modulus is not None:
        certificate = float(modulus(level))
        following = float(modulus(level + 1))
    else:
        certificate, norm = _cells_certificate(f, domain, level, N)
        following, next_norm = _cells_certificate(f, domain, level + 1, N)
        if not math.isfinite(norm) or not math.isfinite(next_norm):
            raise NotSquareIntegrable("the L2 norm of the approximations is not finite")
    if not math.isfinite(certificate) or (certificate > 1e-14 and following >= certificate * (1 - 1e-9)):
        raise NotSquareIntegrable(
            f"L2 certificate does not decrease: {certificate:.4g} at level {level}, {following:.4g} at {level + 1}")
    simple = simple_approximation(f, domain, level)
    values = N.integral_batch(simple, n, rng)
    logger.debug("L2 integral at level %d: certificate %.3g", level, certificate)
    return L2Integral(values, certificate, level, simple)


def _cells_certificate(f, domain, level, N) -> tuple:
    err = norm = 0.0
    for cell in _cells(domain, level):
        e, m = _cell_certificate(f, cell, N)
        err += e
        norm += m
    return err, norm


# --- Predictable integrands ---

class StoppingTime:
    def evaluate(self, replay: TimeReplay) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class DeterministicTime(StoppingTime):
    t: float

    def evaluate(self, replay):
        return float(self.t)


@dataclass(frozen=True)
class FirstExitTime(StoppingTime):
    """inf{t : M_t not in [lower, upper]} ^ cap, scanned on a grid of width dt."""
    lower: float
    upper: float
    cap: float
    dt: float = 2.0 ** -12

    def evaluate(self, replay):
        chunk = 1024
        start = 0.0
        while start < self.cap:
            grid = np.minimum(self.cap, start + self.dt * np.arange(1, chunk + 1))
            values = replay.values(grid)
            outside = np.flatnonzero((values < self.lower) | (values > self.upper))
            if outside.size:
                return float(grid[outside[0]])
            start = grid[-1]
        return float(self.cap)


@dataclass(frozen=True)
class DyadicUpper(StoppingTime):
    """(floor(2^n tau) + 1) 2^-n."""
    base: StoppingTime
    n: int

    def evaluate(self, replay):
        return dyadic_upper(self.base.evaluate(replay), self.n)


def dyadic_upper(tau: float, n: int) -> float:
    return (math.floor(2 ** n * tau) + 1) / 2 ** n


class PathView:
    """Read access to a replay restricted to [0, tau]."""

    def __init__(self, replay: TimeReplay, tau: float):
        self._replay = replay
        self.tau = tau

    def value_at(self, t: float) -> float:
        if t > self.tau + 1e-15:
            raise NonAdaptedCoefficient(f"coefficient read time {t} beyond its stopping time {self.tau}")
        return self._replay.value(t)


@dataclass(frozen=True)
class Coefficient:
    """
    A predictable coefficient phi_k = fn(view, tau_k) with view restricted to [0, tau_k].

    ``reads_until`` declares the latest time fn reads, as a function of tau_k.
    """
    fn: Callable
    reads_until: Optional[Callable] = None

    def __call__(self, replay: TimeReplay, tau: float) -> float:
        if self.reads_until is not None and self.reads_until(tau) > tau + 1e-15:
            raise NonAdaptedCoefficient(f"coefficient declares reads up to {self.reads_until(tau)} > tau = {tau}")
        return float(self.fn(PathView(replay, tau), tau))


def constant(c: float) -> Coefficient:
    return Coefficient(lambda view, tau: c)


def value_at_tau() -> Coefficient:
    """phi = M_tau."""
    return Coefficient(lambda view, tau: view.value_at(tau))


@dataclass(frozen=True)
class SimpleProcess:
    """F = sum_k phi_k 1_{]tau_k, tau_{k+1}]}."""
    times: tuple
    coefficients: tuple

    def __post_init__(self):
        times = tuple(t if isinstance(t, StoppingTime) else DeterministicTime(float(t)) for t in self.times)
        coefs = tuple(c if isinstance(c, Coefficient) else constant(float(c)) for c in self.coefficients)
        if len(coefs) != len(times) - 1:
            raise InvalidInput("a simple process needs one coefficient per stochastic interval")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coefficients", coefs)

    @classmethod
    def dyadic(cls, n: int, horizon: float, coefficient: Coefficient) -> "SimpleProcess":
        steps = int(round(horizon * 2 ** n))
        return cls(tuple(k / 2 ** n for k in range(steps + 1)), (coefficient,) * steps)

    @classmethod
    def stopped(cls, tau: StoppingTime, c: float = 1.0) -> "SimpleProcess":
        return cls((DeterministicTime(0.0), tau), (constant(c),))


def integrate_predictable(F: SimpleProcess, M: MartingaleNoise, rng, replay: Optional[TimeReplay] = None) -> float:
    """
    sum_k phi_k (M_{tau_{k+1}} - M_{tau_k}) on one replay.

    :raises NonAdaptedCoefficient: If a coefficient reads the path beyond its own tau_k.
    """
    if not isinstance(M, MartingaleNoise):
        raise OutOfSemiring("predictable integrands need a time-indexed martingale noise")
    replay = replay or M.replay(rng)
    taus = []
    for tau in F.times:
        value = tau.evaluate(replay)
        taus.append(max(value, taus[-1]) if taus else value)
    if M.horizon is not None and taus[-1] > M.horizon * (1 + 1e-12):
        raise OutOfSemiring(f"stopping time {taus[-1]} beyond the horizon {M.horizon}")
    values = replay.values(np.array(taus))
    total = 0.0
    for k, phi in enumerate(F.coefficients):
        if taus[k + 1] > taus[k]:
            total += phi(replay, taus[k]) * (values[k + 1] - values[k])
    return float(total)


def predictable_samples(F: SimpleProcess, M: MartingaleNoise, n: int, rng: RandomSource) -> np.ndarray:
    return np.array([integrate_predictable(F, M, rng.child(i)) for i in range(n)])


# --- Checks ---

def orthogonality_check(N: RandomOrthogonalMeasure, R, S, n: int, rng: RandomSource) -> CheckReport:
    """E N(R) N(S) against mu(R n S)."""
    draws = N.sample_batch([R, S], n, rng)
    lhs, se = mean_and_se(draws[:, 0] * draws[:, 1])
    common = R.intersect(S)
    rhs = N.control(common) if common is not None else 0.0
    return se_check("orthogonality", float(lhs), rhs, float(se), n)


def additivity_check(N: RandomOrthogonalMeasure, R, S, union, n: int, rng: RandomSource) -> CheckReport:
    """E (N(R u S) - N(R) - N(S))^2 against 0 for disjoint R, S."""
    if R.intersect(S) is not None:
        raise InvalidInput("additivity needs disjoint sets")
    draws = N.sample_batch([union, R, S], n, rng)
    defect = (draws[:, 0] - draws[:, 1] - draws[:, 2]) ** 2
    lhs, se = mean_and_se(defect)
    return se_check("additivity", float(lhs), 0.0, float(se), n)


def isometry_check(f, N: RandomOrthogonalMeasure, n: int, rng: RandomSource, *, level: int = 6,
                   domain=None, functional: str = "", exact: Optional[float] = None) -> CheckReport:
    """
    E I_N(f)^2 against int f^2 dmu.

    Simple functions are compared with their exact control integral. For other f the target
    is ``exact`` when given, and the distance between it and the integral of the dyadic
    approximation is added to the 3 SE band; without ``exact`` the approximation's integral is used.
    """
    if isinstance(f, SimpleFunction):
        values = N.integral_batch(f, n, rng)
        approximated = control_integral(f, N)
    else:
        result = integrate_l2(f, N, level, rng, domain=domain, n=n)
        values = result.values
        approximated = control_integral(result.simple, N)
    target = approximated if exact is None else float(exact)
    gap = abs(target - approximated)
    lhs, se = mean_and_se(values ** 2)
    passed = abs(lhs - target) <= config.N_SE * se + gap + config.ABS_TOL
    return CheckReport("isometry", float(lhs), target, float(se), bool(passed), n,
                       {"functional": functional, "approximation_gap": gap})


def _annulus_identity(s, y) -> float:
    return float(y[0]) if 0.5 <= abs(float(y[0])) < 1.0 else 0.0


def isometry_suite(n: int, rng: RandomSource, *, level: int = 6, alpha: float = 1.5) -> list:
    """
    The three standard isometry cases, each against its closed-form int f^2 dmu.

    f(s) = s on (0, 1] of white noise (1/3); the simple function 2 1_(0,1] - 1_(0.5,1.5] on
    white noise (3); f(s, y) = y on 0.5 <= |y| < 1 against the compensated jump measure of
    the symmetric alpha-stable law (int y^2 nu(dy) over the annulus).
    """
    nu = symmetric_stable_triplet(alpha).nu
    annulus = [SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([0.5], [1.0])),
               SpaceTimeInterval(TimeInterval(0.0, 1.0), SpaceBox([-1.0], [-0.5]))]
    step = SimpleFunction(((2.0, TimeInterval(0.0, 1.0)), (-1.0, TimeInterval(0.5, 1.5))))
    jump_moment = integrate_measure(nu, lambda y: y[:, 0] ** 2, Annulus(0.5, 1.0))
    return [
        isometry_check(lambda s: s, WhiteNoise(), n, rng.child(0), level=level,
                       domain=[TimeInterval(0.0, 1.0)], functional="white_noise s", exact=1.0 / 3.0),
        isometry_check(step, WhiteNoise(), n, rng.child(n), functional="white_noise 2 1(0,1] - 1(0.5,1.5]",
                       exact=3.0),
        isometry_check(_annulus_identity, CompensatedPoisson(nu, 1.0, 0.5), n, rng.child(2 * n), level=2,
                       domain=annulus, functional=f"compensated_poisson y alpha={alpha:g}", exact=jump_moment),
    ]


def isometry_record(report: CheckReport) -> dict:
    """{functional, mc_moment, control_integral, se, pass}."""
    return {"functional": report.details.get("functional", ""), "mc_moment": report.lhs,
            "control_integral": report.rhs, "se": report.se, "pass": report.passed}


def martingale_increment_check(N: RandomOrthogonalMeasure, space, s: float, t: float, n: int,
                               rng: RandomSource) -> CheckReport:
    """E[N((s, t] x B) N((0, s] x B)] against 0."""
    increment = SpaceTimeInterval(TimeInterval(s, t), space)
    past = SpaceTimeInterval(TimeInterval(0.0, s), space)
    draws = N.sample_batch([increment, past], n, rng)
    lhs, se = mean_and_se(draws[:, 0] * draws[:, 1])
    return se_check("martingale_increment", float(lhs), 0.0, float(se), n)


def white_noise_divergence(cutoffs: Sequence[int] = (10, 100, 1000), n: int = 2000,
                           rng: Optional[RandomSource] = None) -> pd.DataFrame:
    """
    Medians of sum_{k <= K} |N((1/(k+1), 1/k])| for growing K.

    The sums over disjoint sets grow without bound, so white noise is not a signed measure path by path.
    """
    rng = rng or RandomSource(0)
    K = max(cutoffs)
    sets = [TimeInterval(1.0 / (k + 1), 1.0 / k) for k in range(1, K + 1)]
    draws = np.abs(WhiteNoise().sample_batch(sets, n, rng))
    partial = np.cumsum(draws, axis=1)
    rows = [{"cutoff": c, "median": float(np.median(partial[:, c - 1]))} for c in cutoffs]
    frame = pd.DataFrame(rows)
    frame["increasing"] = frame["median"].diff().fillna(1.0) > 0
    return frame
