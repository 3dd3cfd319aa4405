# levytype/levy_core.py
"""
Lévy triplets, Lévy measures and characteristic exponents.

The exponent of a triplet (l, Q, nu) is

    psi(xi) = -i l.xi + 1/2 xi.Q xi + int [1 - e^{i y.xi} + i xi.y 1_{(0,1)}(|y|)] nu(dy)

with the cutoff open at 1, so atoms on the unit sphere are never compensated.
All types here are immutable; every function is pure.
"""
from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import integrate, special

import config
from errors import (
    DimensionMismatch,
    InvalidAlpha,
    InvalidInput,
    NoConvergence,
    NotPositiveSemidefinite,
    QuadratureDivergence,
)

logger = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)


# --- Helpers ---

def as_vector(x, dimension: Optional[int] = None, name: str = "xi") -> np.ndarray:
    """Converts scalars and sequences to a finite 1-d float array of the expected length."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise DimensionMismatch(f"{name} has dimension {arr.shape[0]}, expected {dimension}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} must be finite, got {arr}")
    return arr


def as_points(points, dimension: int) -> np.ndarray:
    """Returns an (m, d) array; a 1-d array is read as m points when d == 1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dimension == 1 else arr.reshape(1, -1)
    if arr.shape[1] != dimension:
        raise DimensionMismatch(f"points have dimension {arr.shape[1]}, expected {dimension}")
    return arr


def quad(func, a, b, **kwargs) -> float:
    """
    scipy.integrate.quad with project tolerances and divergence detection.

    :raises QuadratureDivergence: If the result is not finite, or quadpack flags the
        integral and its error estimate is not small.
    """
    if a == b:
        return 0.0
    weighted_tail = kwargs.get("weight") in ("cos", "sin") and math.isinf(b)
    opts = {
        "epsabs": 1e-11 if weighted_tail else config.QUAD_EPSABS,
        "epsrel": config.QUAD_EPSREL,
        "limit": config.QUAD_LIMIT,
    }
    if weighted_tail:
        opts["limlst"] = 200
    opts.update(kwargs)
    out = integrate.quad(func, a, b, full_output=1, **opts)
    value, abserr = float(out[0]), float(out[1])
    if not math.isfinite(value):
        raise QuadratureDivergence(f"quadrature over [{a}, {b}] returned {value}")
    if len(out) > 3:
        scale = max(1.0, abs(value))
        if abserr > 1e-6 * scale:
            raise QuadratureDivergence(
                f"quadrature over [{a}, {b}] did not converge (estimate {value:.6g}, "
                f"error {abserr:.3g}): {out[3]}")
        logger.debug("quadrature flag on [%s, %s] with small error %.3g: %s", a, b, abserr, out[3])
    return value


def _one_minus_cos(x):
    # 1 - cos x without cancellation
    return 2.0 * np.sin(0.5 * x) ** 2


def _x_minus_sin(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    x2 = x * x
    series = x * x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 / 5040.0))
    return np.where(small, series, x - np.sin(x))


# --- Radial densities ---

@dataclass(frozen=True)
class ExpPowerDensity:
    """scale * r**(-power) * exp(-rate * r) on (0, inf)."""
    scale: float
    power: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.scale < 0 or self.rate < 0:
            raise InvalidInput(f"scale and rate must be non-negative: {self}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.scale * r ** (-self.power) * np.exp(-self.rate * r)

    def to_dict(self) -> dict:
        return {"family": "exp_power", "scale": self.scale, "power": self.power, "rate": self.rate}


@dataclass(frozen=True)
class GaussianDensity:
    """scale * exp(-r**2 / (2 std**2)) on (0, inf)."""
    scale: float
    std: float = 1.0

    def __post_init__(self):
        if self.scale < 0 or self.std <= 0:
            raise InvalidInput(f"scale must be >= 0 and std > 0: {self}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.scale * np.exp(-0.5 * (r / self.std) ** 2)

    def to_dict(self) -> dict:
        return {"family": "gaussian", "scale": self.scale, "std": self.std}


# --- Spherical measures ---

@dataclass(frozen=True)
class SphericalMeasure:
    """Finite weighted atoms on the unit sphere."""
    directions: tuple
    weights: tuple

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if dirs.shape[0] != w.shape[0]:
            raise DimensionMismatch(f"{dirs.shape[0]} directions but {w.shape[0]} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInput("spherical weights must be finite and non-negative")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InvalidInput(f"spherical atoms must lie on the unit sphere, norms {norms}")
        object.__setattr__(self, "directions", tuple(tuple(float(v) for v in row) for row in dirs))
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def symmetric_1d(cls, weight: float = 0.5) -> "SphericalMeasure":
        return cls(((1.0,), (-1.0,)), (weight, weight))

    @classmethod
    def uniform_circle(cls, count: int, total: float) -> "SphericalMeasure":
        """Equally spaced atoms on the unit circle with the given total mass."""
        angles = 2.0 * np.pi * np.arange(count) / count
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        return cls(dirs, np.full(count, total / count))

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.directions, dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def dimension(self) -> int:
        return len(self.directions[0])

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))

    def scaled(self, factor: float) -> "SphericalMeasure":
        return SphericalMeasure(self.directions, tuple(w * factor for w in self.weights))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        pts, w = self.points, self.masses
        for p, m in zip(pts, w):
            match = np.all(np.abs(pts + p) <= tol, axis=1)
            if abs(float(np.sum(w[match])) - m) > tol * max(1.0, m):
                return False
        return True


# --- Regions of R^d minus the origin ---

class Region:
    """A set of jump sizes with a declared distance from the origin."""
    exclusion_radius: float = 0.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Annulus(Region):
    """{r_min <= |y| < r_max}."""
    r_min: float
    r_max: float = math.inf

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise InvalidInput(f"annulus needs r_min < r_max, got [{self.r_min}, {self.r_max})")

    @property
    def exclusion_radius(self) -> float:
        return float(self.r_min)

    def contains(self, points):
        norms = np.linalg.norm(np.atleast_2d(points), axis=1)
        return (norms >= self.r_min) & (norms < self.r_max)


@dataclass(frozen=True)
class SpaceBox(Region):
    """Half-open box [lower, upper) in R^d."""
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatch("box corners have different dimensions")
        if np.any(lo >= hi):
            raise InvalidInput(f"empty box [{lo}, {hi})")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def exclusion_radius(self) -> float:
        nearest = np.clip(0.0, self.lo, self.hi)
        return float(np.linalg.norm(nearest))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo) & (pts < self.hi), axis=1)

    def intersect(self, other: "SpaceBox") -> Optional["SpaceBox"]:
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo >= hi):
            return None
        return SpaceBox(lo, hi)

    def difference(self, other: "SpaceBox") -> list:
        """Disjoint boxes whose union is self minus other."""
        common = self.intersect(other)
        if common is None:
            return [self]
        pieces = []
        lo, hi = self.lo.copy(), self.hi.copy()
        for axis in range(self.dimension):
            if lo[axis] < common.lo[axis]:
                cut_hi = hi.copy()
                cut_hi[axis] = common.lo[axis]
                pieces.append(SpaceBox(lo.copy(), cut_hi))
                lo[axis] = common.lo[axis]
            if common.hi[axis] < hi[axis]:
                cut_lo = lo.copy()
                cut_lo[axis] = common.hi[axis]
                pieces.append(SpaceBox(cut_lo, hi.copy()))
                hi[axis] = common.hi[axis]
        return pieces

    def ray_interval(self, direction: np.ndarray) -> tuple:
        """(r_lo, r_hi) with r*direction in the box iff r_lo <= r < r_hi, r > 0."""
        r_lo, r_hi = 0.0, math.inf
        for z, a, b in zip(direction, self.lo, self.hi):
            if z == 0.0:
                if not a <= 0.0 < b:
                    return (0.0, 0.0)
                continue
            t1, t2 = a / z, b / z
            r_lo = max(r_lo, min(t1, t2))
            r_hi = min(r_hi, max(t1, t2))
        if r_hi <= r_lo:
            return (0.0, 0.0)
        return (r_lo, r_hi)


@dataclass(frozen=True)
class PredicateRegion(Region):
    """An arbitrary predicate with a caller-declared exclusion radius."""
    predicate: Callable
    radius: float

    @property
    def exclusion_radius(self) -> float:
        return float(self.radius)

    def contains(self, points):
        return np.asarray(self.predicate(np.atleast_2d(points)), dtype=bool)


def point_region(point, half_width: float = 0.5) -> SpaceBox:
    """A box around a single jump size, e.g. the set {1} for unit-jump counting."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    return SpaceBox(p - half_width, p + half_width)


# --- Lévy measures ---

class LevyMeasureSpec:
    """Common interface of the Lévy-measure variants."""
    dimension: int

    def integral_term(self, xi: np.ndarray) -> complex:
        raise NotImplementedError

    def restricted(self, eps: float) -> "LevyMeasureSpec":
        raise NotImplementedError

    def validate(self) -> None:
        pass

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroMeasure(LevyMeasureSpec):
    dimension: int = 1

    def integral_term(self, xi):
        return 0j

    def restricted(self, eps):
        return self

    def to_dict(self):
        return {"variant": "zero"}


@dataclass(frozen=True)
class FiniteAtomic(LevyMeasureSpec):
    """nu = sum_k m_k delta_{y_k}, no atom at the origin."""
    atoms: tuple
    masses: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pts.size == 0:
            raise InvalidInput("FiniteAtomic needs at least one atom; use ZeroMeasure instead")
        if pts.shape[0] != m.shape[0]:
            raise DimensionMismatch(f"{pts.shape[0]} atoms but {m.shape[0]} masses")
        if np.any(m < 0) or not np.all(np.isfinite(m)) or not np.all(np.isfinite(pts)):
            raise InvalidInput("atom masses must be finite and non-negative")
        if np.any(np.linalg.norm(pts, axis=1) == 0.0):
            raise InvalidInput("a Lévy measure has no atom at the origin")
        object.__setattr__(self, "atoms", tuple(tuple(float(v) for v in row) for row in pts))
        object.__setattr__(self, "masses", tuple(float(v) for v in m))

    @property
    def dimension(self) -> int:
        return len(self.atoms[0])

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=float)

    def integral_term(self, xi):
        pts, m = self.points, self.weights
        u = pts @ xi
        small = (np.linalg.norm(pts, axis=1) < 1.0).astype(float)
        return complex(np.sum(m * (1.0 - np.exp(1j * u) + 1j * u * small)))

    def restricted(self, eps):
        keep = np.linalg.norm(self.points, axis=1) >= eps
        if not np.any(keep):
            return ZeroMeasure(self.dimension)
        return FiniteAtomic(self.points[keep], self.weights[keep])

    def to_dict(self):
        return {"variant": "finite_atomic",
                "atoms": [{"point": list(p), "mass": m} for p, m in zip(self.atoms, self.masses)]}


@dataclass(frozen=True)
class RadialDensity(LevyMeasureSpec):
    """
    nu(B) = sum_j w_j int_{r_min}^inf 1_B(r z_j) density(r) r^{d-1} dr.

    ``density`` must accept numpy arrays. ``witness_bound``, if given, is an upper
    bound the integrability witness int min(1, |y|^2) nu(dy) must respect.
    """
    density: Callable
    angular: SphericalMeasure
    r_min: float = 0.0
    witness_bound: Optional[float] = None

    def __post_init__(self):
        if self.r_min < 0:
            raise InvalidInput(f"r_min must be >= 0, got {self.r_min}")

    @property
    def dimension(self) -> int:
        return self.angular.dimension

    def radial_weight(self, r):
        r = np.asarray(r, dtype=float)
        return self.density(r) * r ** (self.dimension - 1)

    @functools.cached_property
    def witness(self) -> float:
        w = self.radial_weight
        head = quad(lambda r: r * r * w(r), self.r_min, 1.0) if self.r_min < 1.0 else 0.0
        tail = quad(w, max(1.0, self.r_min), math.inf)
        value = self.angular.total * (head + tail)
        if self.witness_bound is not None and value > self.witness_bound * (1.0 + 1e-6):
            raise QuadratureDivergence(
                f"integrability witness {value:.6g} exceeds the declared bound {self.witness_bound:.6g}")
        return value

    def validate(self):
        _ = self.witness

    def integral_term(self, xi):
        self.validate()
        total = 0j
        for z, w in zip(self.angular.points, self.angular.masses):
            if w == 0.0:
                continue
            total += w * _radial_kernel_integral(self.radial_weight, float(z @ xi), self.r_min)
        return total

    def restricted(self, eps):
        if eps <= self.r_min:
            return self
        return RadialDensity(self.density, self.angular, float(eps), self.witness_bound)

    def to_dict(self):
        if not hasattr(self.density, "to_dict"):
            raise InvalidInput("only built-in density families can be serialised")
        out = {"variant": "radial_density", "density": self.density.to_dict(),
               "directions": [list(z) for z in self.angular.directions],
               "weights": list(self.angular.weights)}
        if self.r_min > 0:
            out["r_min"] = self.r_min
        if self.witness_bound is not None:
            out["witness_bound"] = self.witness_bound
        return out


def _radial_kernel_integral(weight: Callable, u: float, r_min: float) -> complex:
    """int_{r_min}^inf [1 - e^{iru} + iru 1_{r<1}] weight(r) dr along one direction."""
    if u == 0.0:
        return 0j
    au = abs(u)
    total = 0j
    if r_min < 1.0:
        a = 1.0
        while a > r_min:
            if a * au < config.TAYLOR_SWITCH:
                # second-order Taylor form of the kernel on (r_min, a)
                m2 = quad(lambda r: r ** 2 * weight(r), r_min, a)
                m3 = quad(lambda r: r ** 3 * weight(r), r_min, a)
                m4 = quad(lambda r: r ** 4 * weight(r), r_min, a)
                total += 0.5 * u * u * m2 - u ** 4 / 24.0 * m4 + 1j * (u ** 3 / 6.0) * m3
                break
            b = max(0.5 * a, r_min)
            re = quad(lambda r: _one_minus_cos(r * u) * weight(r), b, a)
            im = quad(lambda r: _x_minus_sin(r * u) * weight(r), b, a)
            total += re + 1j * im
            a = b
    lo = max(1.0, r_min)
    mass = quad(weight, lo, math.inf)
    cos_part = quad(weight, lo, math.inf, weight="cos", wvar=au)
    sin_part = quad(weight, lo, math.inf, weight="sin", wvar=au)
    total += mass - cos_part - 1j * math.copysign(1.0, u) * sin_part
    return total


def stable_scale_constant(alpha: float) -> float:
    """C_alpha with int_0^inf (1 - cos r) r^{-1-alpha} dr = C_alpha."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return math.pi / 2.0
    return float(-special.gamma(-alpha) * math.cos(math.pi * alpha / 2.0))


@dataclass(frozen=True)
class AlphaStable(LevyMeasureSpec):
    """
    Strictly alpha-stable jumps with spherical measure ``sigma`` of the closed-form exponent.

    The underlying Lévy measure is r^{-1-alpha} dr lambda(dz) with lambda = sigma / C_alpha;
    ``drift_shift`` reconciles the closed form with the open-cutoff compensation.
    """
    alpha: float
    sigma: SphericalMeasure

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def dimension(self) -> int:
        return self.sigma.dimension

    @property
    def levy_angular(self) -> SphericalMeasure:
        return self.sigma.scaled(1.0 / stable_scale_constant(self.alpha))

    @property
    def drift_shift(self) -> np.ndarray:
        lam = self.levy_angular
        m = lam.masses @ lam.points
        if self.alpha == 1.0:
            return (1.0 - EULER_GAMMA) * m
        return -m / (1.0 - self.alpha)

    def as_radial(self) -> RadialDensity:
        return RadialDensity(ExpPowerDensity(1.0, self.alpha + self.dimension, 0.0), self.levy_angular)

    def integral_term(self, xi):
        return stable_exponent(self.alpha, self.sigma, self.drift_shift, xi)

    def restricted(self, eps):
        return self.as_radial().restricted(eps)

    def to_dict(self):
        return {"variant": "alpha_stable", "alpha": self.alpha,
                "directions": [list(z) for z in self.sigma.directions],
                "weights": list(self.sigma.weights)}


def _check_alpha(alpha):
    if not (0.0 < alpha < 2.0) or not math.isfinite(alpha):
        raise InvalidAlpha(f"alpha must lie in (0, 2), got {alpha}")


def as_radial_or_atomic(nu: LevyMeasureSpec) -> LevyMeasureSpec:
    """AlphaStable measures are handled through their radial form outside the exponent."""
    return nu.as_radial() if isinstance(nu, AlphaStable) else nu


# --- Triplets ---

@dataclass(frozen=True)
class LevyTriplet:
    """(l, Q, nu) of the Lévy–Khintchine formula."""
    l: tuple
    Q: tuple
    nu: LevyMeasureSpec = None

    def __post_init__(self):
        drift = np.atleast_1d(np.asarray(self.l, dtype=float))
        d = drift.shape[0]
        cov = np.asarray(self.Q, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.shape != (d, d):
            raise DimensionMismatch(f"Q has shape {cov.shape}, expected {(d, d)}")
        if not np.all(np.isfinite(drift)) or not np.all(np.isfinite(cov)):
            raise InvalidInput("l and Q must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise NotPositiveSemidefinite("Q must be symmetric")
        eigenvalues = np.linalg.eigvalsh(cov)
        if eigenvalues.min() < -config.TOL_PSD:
            raise NotPositiveSemidefinite(
                f"Q has eigenvalue {eigenvalues.min():.3g} below -{config.TOL_PSD:g}")
        nu = self.nu if self.nu is not None else ZeroMeasure(d)
        if nu.dimension != d:
            raise DimensionMismatch(f"nu has dimension {nu.dimension}, l has dimension {d}")
        object.__setattr__(self, "l", tuple(float(v) for v in drift))
        object.__setattr__(self, "Q", tuple(tuple(float(v) for v in row) for row in cov))
        object.__setattr__(self, "nu", nu)

    @property
    def dimension(self) -> int:
        return len(self.l)

    @property
    def drift(self) -> np.ndarray:
        return np.asarray(self.l, dtype=float)

    @property
    def covariance(self) -> np.ndarray:
        return np.asarray(self.Q, dtype=float)

    @functools.cached_property
    def covariance_sqrt(self) -> np.ndarray:
        eigenvalues, vectors = np.linalg.eigh(self.covariance)
        return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T

    def to_dict(self) -> dict:
        return {"d": self.dimension, "l": list(self.l), "Q": [list(row) for row in self.Q],
                "nu": self.nu.to_dict()}


def eval_exponent(triplet: LevyTriplet, xi) -> complex:
    """
    Evaluates psi(xi) for a triplet.

    :param triplet: The Lévy triplet.
    :param xi: A vector of the triplet's dimension (a scalar is accepted for d == 1).
    :return: psi(xi) as a complex number.
    :raises DimensionMismatch: If xi has the wrong length.
    :raises QuadratureDivergence: If the radial density fails its integrability witness.
    """
    xi = as_vector(xi, triplet.dimension)
    linear = -1j * float(triplet.drift @ xi)
    quadratic = 0.5 * float(xi @ triplet.covariance @ xi)
    return complex(linear + quadratic + triplet.nu.integral_term(xi))


def truncate_triplet(triplet: LevyTriplet, eps: float) -> LevyTriplet:
    """(l, Q, nu restricted to |y| >= eps); its exponent is psi_eps."""
    return LevyTriplet(triplet.l, triplet.Q, triplet.nu.restricted(eps))


def stable_exponent(alpha: float, spherical: SphericalMeasure, mu, xi) -> complex:
    """
    Closed-form stable exponent.

    For alpha != 1: int |z.xi|^alpha (1 - i sgn(z.xi) tan(alpha pi / 2)) sigma(dz) - i mu.xi.
    For alpha == 1: int |z.xi| (1 + (2/pi) i sgn(z.xi) log|z.xi|) sigma(dz) - i mu.xi,
    where |z.xi| log|z.xi| is 0 at z.xi = 0.
    """
    _check_alpha(alpha)
    xi = as_vector(xi, spherical.dimension)
    mu = as_vector(mu, spherical.dimension, name="mu")
    u = spherical.points @ xi
    au = np.abs(u)
    w = spherical.masses
    if alpha == 1.0:
        safe = np.where(au > 0.0, au, 1.0)
        log_term = np.where(au > 0.0, au * np.log(safe), 0.0)
        value = np.sum(w * (au + 1j * (2.0 / math.pi) * np.sign(u) * log_term))
    else:
        value = np.sum(w * au ** alpha * (1.0 - 1j * np.sign(u) * math.tan(math.pi * alpha / 2.0)))
    return complex(value - 1j * float(mu @ xi))


# --- Measure integrals ---

def _radial_integral(weight, h, lo, hi) -> float:
    """int_lo^hi h(r) weight(r) dr, split at 1 so that singular heads and infinite tails are separate."""
    if hi <= lo:
        return 0.0
    if lo < 1.0 < hi:
        return quad(lambda r: h(r) * weight(r), lo, 1.0) + quad(lambda r: h(r) * weight(r), 1.0, hi)
    return quad(lambda r: h(r) * weight(r), lo, hi)


def integrate_measure(nu: LevyMeasureSpec, g: Callable, region: Region) -> float:
    """
    int_region g(y) nu(dy) for g mapping (m, d) points to (m,) values.

    Radial measures support annuli and boxes; atomic measures support every region.
    """
    if region.exclusion_radius <= 0 and not isinstance(region, Annulus):
        logger.debug("integrating over a region with zero exclusion radius")
    nu = as_radial_or_atomic(nu)
    if isinstance(nu, ZeroMeasure):
        return 0.0
    if isinstance(nu, FiniteAtomic):
        pts = nu.points
        inside = region.contains(pts)
        if not np.any(inside):
            return 0.0
        return float(np.sum(nu.weights[inside] * np.asarray(g(pts[inside]), dtype=float)))
    if isinstance(nu, RadialDensity):
        total = 0.0
        for z, w in zip(nu.angular.points, nu.angular.masses):
            if w == 0.0:
                continue
            if isinstance(region, Annulus):
                lo, hi = region.r_min, region.r_max
            elif isinstance(region, SpaceBox):
                lo, hi = region.ray_interval(z)
            else:
                raise InvalidInput("radial measures can only be integrated over annuli and boxes")
            lo = max(lo, nu.r_min)
            if lo <= 0.0 and hi > 0.0:
                lo = 0.0
            total += w * _radial_integral(
                nu.radial_weight, lambda r, z=z: float(np.asarray(g((r * z)[None, :]))[0]), lo, hi)
        return float(total)
    raise InvalidInput(f"unsupported Lévy measure variant {type(nu).__name__}")


def measure_of(nu: LevyMeasureSpec, region: Region) -> float:
    """nu(region)."""
    return integrate_measure(nu, lambda pts: np.ones(len(pts)), region)


def small_jump_second_moment(nu: LevyMeasureSpec, eps: float) -> float:
    """int_{|y| < eps} |y|^2 nu(dy)."""
    nu = as_radial_or_atomic(nu)
    if isinstance(nu, ZeroMeasure) or eps <= 0:
        return 0.0
    if isinstance(nu, FiniteAtomic):
        norms = np.linalg.norm(nu.points, axis=1)
        inside = norms < eps
        return float(np.sum(nu.weights[inside] * norms[inside] ** 2))
    if eps <= nu.r_min:
        return 0.0
    head = quad(lambda r: r * r * nu.radial_weight(r), nu.r_min, eps)
    return float(nu.angular.total * head)


def integrability_witness(nu: LevyMeasureSpec) -> float:
    """int min(1, |y|^2) nu(dy)."""
    nu = as_radial_or_atomic(nu)
    if isinstance(nu, ZeroMeasure):
        return 0.0
    if isinstance(nu, FiniteAtomic):
        norms = np.linalg.norm(nu.points, axis=1)
        return float(np.sum(nu.weights * np.minimum(1.0, norms ** 2)))
    return nu.witness


def jump_mass(nu: LevyMeasureSpec, eps: float) -> float:
    """nu{|y| >= eps}."""
    return measure_of(nu, Annulus(eps))


# --- Characteristic exponents as objects ---

@dataclass(frozen=True, eq=False)
class CharacteristicExponent:
    """psi as an evaluator with its dimension and provenance."""
    evaluator: Callable
    dimension: int
    closed_form: bool = False
    label: str = ""
    triplet: Optional[LevyTriplet] = None
    quadrature: dict = field(default_factory=lambda: {
        "epsabs": config.QUAD_EPSABS, "epsrel": config.QUAD_EPSREL, "taylor_switch": config.TAYLOR_SWITCH})

    def __call__(self, xi) -> complex:
        return complex(self.evaluator(as_vector(xi, self.dimension)))

    def values(self, xi_grid) -> np.ndarray:
        grid = as_points(xi_grid, self.dimension)
        return np.array([self(xi) for xi in grid], dtype=complex)

    @classmethod
    def from_callable(cls, fn: Callable, dimension: int = 1, label: str = "") -> "CharacteristicExponent":
        return cls(evaluator=fn, dimension=dimension, closed_form=True, label=label)


def exponent_of(triplet: LevyTriplet, label: str = "") -> CharacteristicExponent:
    closed = isinstance(triplet.nu, (ZeroMeasure, FiniteAtomic, AlphaStable))
    return CharacteristicExponent(
        evaluator=lambda xi: eval_exponent(triplet, xi), dimension=triplet.dimension,
        closed_form=closed, label=label or type(triplet.nu).__name__, triplet=triplet)


def power_exponent(alpha: float, scale: float = 1.0, dimension: int = 1) -> CharacteristicExponent:
    """scale * |xi|^alpha."""
    return CharacteristicExponent.from_callable(
        lambda xi: scale * float(np.linalg.norm(xi)) ** alpha, dimension, label=f"{scale:g}|xi|^{alpha:g}")


# --- Analytic properties ---

def unit_ball_grid(dimension: int, points_per_axis: int = None) -> np.ndarray:
    points_per_axis = points_per_axis or config.UNIT_BALL_GRID_POINTS
    # keep the product grid below ~2e4 points in higher dimensions
    while points_per_axis ** dimension > 20000 and points_per_axis > 3:
        points_per_axis -= 1
    axis = np.linspace(-1.0, 1.0, points_per_axis)
    grid = np.array(list(itertools.product(axis, repeat=dimension)))
    return grid[np.linalg.norm(grid, axis=1) <= 1.0 + 1e-12]


def growth_constant(psi: CharacteristicExponent, points_per_axis: int = None) -> float:
    """c_psi = 2 sup_{|eta| <= 1} |psi(eta)| over the unit-ball grid."""
    values = psi.values(unit_ball_grid(psi.dimension, points_per_axis))
    return 2.0 * float(np.max(np.abs(values)))


def growth_check(psi: CharacteristicExponent, xi_grid, points_per_axis: int = None) -> bool:
    """|psi(xi)| <= c_psi (1 + |xi|^2) on the grid."""
    c = growth_constant(psi, points_per_axis)
    grid = as_points(xi_grid, psi.dimension)
    values = np.abs(psi.values(grid))
    bound = c * (1.0 + np.sum(grid ** 2, axis=1))
    return bool(np.all(values <= bound * (1.0 + 1e-9) + config.ABS_TOL))


def subadditivity_check(psi: CharacteristicExponent, xi, eta) -> bool:
    """sqrt|psi(xi + eta)| <= sqrt|psi(xi)| + sqrt|psi(eta)| + tol."""
    xi = as_vector(xi, psi.dimension)
    eta = as_vector(eta, psi.dimension, name="eta")
    lhs = math.sqrt(abs(psi(xi + eta)))
    rhs = math.sqrt(abs(psi(xi))) + math.sqrt(abs(psi(eta)))
    return lhs <= rhs + config.SUBADDITIVITY_TOL


@dataclass
class QProbeReport:
    Q_hat: np.ndarray
    grid: np.ndarray
    limits: np.ndarray
    last_change: np.ndarray
    sequences: list
    converged: bool


def _default_probe_grid(dimension: int) -> np.ndarray:
    rows = [np.eye(dimension)[i] for i in range(dimension)]
    for i, j in itertools.combinations(range(dimension), 2):
        rows.append(np.eye(dimension)[i] + np.eye(dimension)[j])
    return np.array(rows)


def _aitken(q0, q1, q2):
    d1, d2 = q1 - q0, q2 - q1
    denom = d2 - d1
    scale = max(abs(q0), abs(q1), abs(q2), 1e-300)
    if d1 == 0.0 or abs(denom) <= 1e-12 * scale:
        return None
    ratio = d2 / d1
    if not 0.0 < ratio < 1.0:
        return None
    return q2 - d2 * d2 / denom


def triplet_from_exponent_probe(psi: CharacteristicExponent, grid=None, n_max: int = None) -> QProbeReport:
    """
    Recovers Q from 1/2 xi.Q xi = lim_n Re psi(n xi) / n^2 along n = 1, 2, 4, ..., n_max.

    The limit along each grid vector uses Aitken's delta-squared step in place of a
    fixed-order Richardson extrapolation: the geometric decay rate, hence the order
    n^{alpha - 2} of the error, is estimated from the last three terms. When they do
    not decay geometrically the raw last term is used.

    :raises NoConvergence: If the last two limit estimates differ by more than
        PROBE_REL_TOL relative to max(1, |estimate|).
    """
    n_max = n_max or config.PROBE_N_MAX
    grid = _default_probe_grid(psi.dimension) if grid is None else as_points(grid, psi.dimension)
    levels = int(math.floor(math.log2(n_max)))
    ns = 2.0 ** np.arange(levels + 1)
    limits, changes, sequences = [], [], []
    for xi in grid:
        q = np.array([psi(n * xi).real / (n * n) for n in ns])
        estimates = []
        for k in range(len(q)):
            accelerated = _aitken(q[k - 2], q[k - 1], q[k]) if k >= 2 else None
            estimates.append(q[k] if accelerated is None else accelerated)
        limits.append(estimates[-1])
        changes.append(abs(estimates[-1] - estimates[-2]) if len(estimates) > 1 else 0.0)
        sequences.append(q)
    limits, changes = np.array(limits), np.array(changes)
    d = psi.dimension
    pairs = [(i, i) for i in range(d)] + list(itertools.combinations(range(d), 2))
    design = np.array([[0.5 * xi[i] * xi[j] * (1.0 if i == j else 2.0) for i, j in pairs] for xi in grid])
    coeffs, _, rank, _ = np.linalg.lstsq(design, limits, rcond=None)
    if rank < len(pairs):
        raise InvalidInput(f"probe grid has rank {rank}, {len(pairs)} needed to identify Q")
    Q_hat = np.zeros((d, d))
    for (i, j), c in zip(pairs, coeffs):
        Q_hat[i, j] = Q_hat[j, i] = c
    converged = bool(np.all(changes <= config.PROBE_REL_TOL * np.maximum(1.0, np.abs(limits))))
    report = QProbeReport(Q_hat, grid, limits, changes, sequences, converged)
    if not converged:
        raise NoConvergence(f"Q probe did not settle: last changes {changes}")
    logger.debug("Q probe: limits %s, last changes %s", limits, changes)
    return report


def exponent_table(psi: CharacteristicExponent, xi_grid) -> pd.DataFrame:
    """Columns xi_1..xi_d, re_psi, im_psi."""
    grid = as_points(xi_grid, psi.dimension)
    values = psi.values(grid)
    table = pd.DataFrame(grid, columns=[f"xi_{k + 1}" for k in range(psi.dimension)])
    table["re_psi"] = values.real
    table["im_psi"] = values.imag
    return table


# --- Standard triplets ---

def brownian_triplet(Q=1.0, l=None) -> LevyTriplet:
    cov = np.atleast_2d(np.asarray(Q, dtype=float))
    drift = np.zeros(cov.shape[0]) if l is None else l
    return LevyTriplet(drift, cov, ZeroMeasure(cov.shape[0]))


def poisson_triplet(rate: float) -> LevyTriplet:
    """Unit jumps at rate lambda; the atom at |y| = 1 is uncompensated."""
    return LevyTriplet((0.0,), ((0.0,),), FiniteAtomic(((1.0,),), (float(rate),)))


def symmetric_stable_triplet(alpha: float, scale: float = 1.0) -> LevyTriplet:
    """nu(dy) = scale |y|^{-1-alpha} dy on R; psi = symmetric_stable_constant(alpha, scale) |xi|^alpha."""
    _check_alpha(alpha)
    nu = RadialDensity(ExpPowerDensity(scale, 1.0 + alpha), SphericalMeasure.symmetric_1d(1.0))
    return LevyTriplet((0.0,), ((0.0,),), nu)


def symmetric_stable_constant(alpha: float, scale: float = 1.0) -> float:
    return 2.0 * scale * stable_scale_constant(alpha)


def stable_closed_triplet(alpha: float, sigma: SphericalMeasure = None, l=None) -> LevyTriplet:
    sigma = sigma or SphericalMeasure.symmetric_1d(0.5)
    d = sigma.dimension
    return LevyTriplet(np.zeros(d) if l is None else l, np.zeros((d, d)), AlphaStable(alpha, sigma))


def cauchy_triplet(scale: float = 1.0) -> LevyTriplet:
    """psi(xi) = scale |xi|."""
    return stable_closed_triplet(1.0, SphericalMeasure.symmetric_1d(0.5 * scale))


def gamma_triplet(shape: float = 1.0, rate: float = 1.0) -> LevyTriplet:
    """Gamma subordinator; psi(xi) = shape * log(1 - i xi / rate)."""
    nu = RadialDensity(ExpPowerDensity(shape, 1.0, rate), SphericalMeasure(((1.0,),), (1.0,)))
    drift = shape * (1.0 - math.exp(-rate)) / rate
    return LevyTriplet((drift,), ((0.0,),), nu)


if __name__ == '__main__':
    config.setup_logging()
    for name, triplet in [("brownian", brownian_triplet()), ("poisson(2)", poisson_triplet(2.0)),
                          ("gamma", gamma_triplet()), ("stable(1.5)", symmetric_stable_triplet(1.5))]:
        print(f"{name:>12}: psi(1) = {eval_exponent(triplet, 1.0):.10f}")
