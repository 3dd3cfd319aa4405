# levytype/empirical.py
"""
Estimators of jump measures, intensity measures and characteristic functions.

All pass/fail decisions use the standard-error rule of report_utils.within_se.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

import config
from errors import EmptyEnsemble, InvalidInput, RegionTouchesOrigin, UnsupportedF
from levy_core import (
    CharacteristicExponent,
    LevyMeasureSpec,
    PredicateRegion,
    Region,
    as_points,
    integrate_measure,
)
from report_utils import CheckReport, mean_and_se, se_check, within_se
from samplers import CadlagPath, Ensemble, JumpLaw, RandomSource, sample_compound_poisson

logger = logging.getLogger(__name__)


# --- Jump measures ---

@dataclass(frozen=True)
class JumpCounter:
    """N_t(B) for a region B bounded away from the origin."""
    region: Region
    horizon: Optional[float] = None

    def __post_init__(self):
        if not self.region.exclusion_radius > 0:
            raise RegionTouchesOrigin(
                f"region must be bounded away from 0, exclusion radius is {self.region.exclusion_radius}")

    def at(self, t: float) -> "JumpCounter":
        return JumpCounter(self.region, t)


def _ledger_in_region(path: CadlagPath, counter: JumpCounter, t: Optional[float]) -> np.ndarray:
    t = path.horizon if t is None else t
    if t > path.horizon * (1 + 1e-12):
        raise InvalidInput(f"count horizon {t} beyond path horizon {path.horizon}")
    sizes = path.jump_sizes
    if sizes.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    inside = counter.region.contains(sizes) & (path.jump_times <= t)
    norms = np.linalg.norm(sizes[inside], axis=1)
    if np.any(norms < counter.region.exclusion_radius):
        raise RegionTouchesOrigin(
            f"a ledger jump of size {norms.min():.3g} lies in the region below its declared exclusion radius")
    return inside


def jump_measure(path: CadlagPath, counter: JumpCounter) -> int:
    """N_t(B) = #{s in (0, t] : Delta X_s in B}, read from the jump ledger."""
    return int(np.count_nonzero(_ledger_in_region(path, counter, counter.horizon)))


def jump_counts(ensemble: Ensemble, counter: JumpCounter, t: Optional[float] = None) -> np.ndarray:
    counter = counter if t is None else counter.at(t)
    return np.array([jump_measure(p, counter) for p in ensemble.paths])


def estimate_intensity(ensemble: Ensemble, counter: JumpCounter, t: Optional[float] = None) -> tuple:
    """
    nu_hat(B) = mean N_t(B) / t with its CLT standard error.

    :raises EmptyEnsemble: If the ensemble has no paths.
    """
    if ensemble is None or ensemble.n < 1:
        raise EmptyEnsemble("cannot estimate an intensity from an empty ensemble")
    t = t if t is not None else (counter.horizon or ensemble.horizon)
    if not t > 0:
        raise InvalidInput(f"t must be positive, got {t}")
    counts = jump_counts(ensemble, counter, t) / t
    mean, se = mean_and_se(counts)
    return float(mean), float(se)


def jump_count_additivity(path: CadlagPath, first: Region, second: Region, t: Optional[float] = None) -> bool:
    """N_t(B u C) == N_t(B) + N_t(C) for disjoint B, C."""
    b, c = JumpCounter(first, t), JumpCounter(second, t)
    in_b = _ledger_in_region(path, b, t)
    in_c = _ledger_in_region(path, c, t)
    if np.any(in_b & in_c):
        raise InvalidInput("regions are not disjoint on this path")
    union = PredicateRegion(lambda y: first.contains(y) | second.contains(y),
                            min(first.exclusion_radius, second.exclusion_radius))
    return jump_measure(path, JumpCounter(union, t)) == int(in_b.sum()) + int(in_c.sum())


def total_variation(samples, pmf, support) -> float:
    """
    Total-variation distance between the empirical law of integer samples and a pmf.

    :param pmf: Callable on the support or an array aligned with it.
    """
    samples = np.asarray(samples)
    support = np.asarray(support)
    p = np.asarray(pmf(support) if callable(pmf) else pmf, dtype=float)
    counts = np.array([np.count_nonzero(samples == k) for k in support], dtype=float)
    p_hat = counts / samples.size
    outside = (1.0 - p_hat.sum()) + max(0.0, 1.0 - p.sum())
    return 0.5 * (float(np.sum(np.abs(p_hat - p))) + outside)


def compound_poisson_pmf(rate: float, t: float, jump_law: JumpLaw, support_max: int) -> np.ndarray:
    """
    P(C_t = m), m = 0..support_max, for integer-valued jumps: sum_k Poi(k; rate t) mu^{*k}(m).

    :raises UnsupportedF: If the jump law is not discrete on the non-negative integers.
    """
    points = getattr(jump_law, "support", None)
    if points is None or points.shape[1] != 1 or np.any(points < 0) or np.any(points != np.round(points)):
        raise UnsupportedF("the mixture pmf needs jumps on the non-negative integers")
    base = np.zeros(support_max + 1)
    for p, w in zip(points[:, 0].astype(int), jump_law.weights):
        if p <= support_max:
            base[p] += w
    mean = rate * t
    k_max = int(mean + 10.0 * math.sqrt(mean) + 10)
    power = np.zeros(support_max + 1)
    power[0] = 1.0
    pmf = stats.poisson.pmf(0, mean) * power
    for k in range(1, k_max + 1):
        power = np.convolve(power, base)[:support_max + 1]
        pmf += stats.poisson.pmf(k, mean) * power
    return pmf


def poissonity_check(ensemble: Ensemble, counter: JumpCounter, t: Optional[float] = None,
                     tol: float = 0.02) -> CheckReport:
    """TV distance between the law of N_t(B) and Poi(t nu_hat(B))."""
    t = t if t is not None else (counter.horizon or ensemble.horizon)
    counts = jump_counts(ensemble, counter, t)
    rate = counts.mean()
    support = np.arange(0, int(counts.max()) + 1)
    tv = total_variation(counts, lambda k: stats.poisson.pmf(k, rate), support)
    return CheckReport("poissonity", tv, 0.0, tol, tv < tol, ensemble.n, {"mean_count": rate})


def region_independence_check(ensemble: Ensemble, first: Region, second: Region,
                              t: Optional[float] = None) -> CheckReport:
    """Empirical covariance of N_t(U), N_t(V) for disjoint U, V against 0."""
    a = jump_counts(ensemble, JumpCounter(first, t), t).astype(float)
    b = jump_counts(ensemble, JumpCounter(second, t), t).astype(float)
    products = (a - a.mean()) * (b - b.mean())
    cov, se = mean_and_se(products)
    return se_check("region_independence", float(cov), 0.0, float(se), ensemble.n)


def compensated_second_moment_check(ensemble: Ensemble, counter: JumpCounter, f: Callable,
                                    t: Optional[float] = None,
                                    nu: Optional[LevyMeasureSpec] = None) -> CheckReport:
    """
    E (sum_{Delta X in B} f(Delta X) - t int_B f dnu)^2 = t int_B f^2 dnu.

    Without ``nu`` the compensator is t nu_hat(B) f_bar and the target t nu_hat(B) mean(f^2),
    with f_bar the average of f over all recorded jumps in B.
    """
    t = t if t is not None else (counter.horizon or ensemble.horizon)
    sums, values = [], []
    for path in ensemble.paths:
        inside = _ledger_in_region(path, counter, t)
        fx = np.asarray(f(path.jump_sizes[inside]), dtype=float) if inside.any() else np.zeros(0)
        sums.append(fx.sum())
        values.append(fx)
    sums = np.array(sums)
    if nu is not None:
        mean_f = integrate_measure(nu, f, counter.region)
        target = t * integrate_measure(nu, lambda y: np.asarray(f(y), dtype=float) ** 2, counter.region)
        compensator = t * mean_f
    else:
        pooled = np.concatenate(values) if values else np.zeros(0)
        intensity = sum(v.size for v in values) / (ensemble.n * t)
        compensator = t * intensity * (pooled.mean() if pooled.size else 0.0)
        target = t * intensity * (np.mean(pooled ** 2) if pooled.size else 0.0)
    squares = (sums - compensator) ** 2
    lhs, se = mean_and_se(squares)
    return se_check("compensated_second_moment", float(lhs), float(target), float(se), ensemble.n)


# --- Characteristic functions ---

@dataclass
class CfEstimate:
    """phi_hat(xi) = mean exp(i xi.X) with SE sqrt((1 - |phi_hat|^2) / n)."""
    xi: np.ndarray
    phi_hat: np.ndarray
    se: np.ndarray
    n: int

    def agreement(self, target, n_se: float = None) -> float:
        """Fraction of grid points where |phi_hat - target| <= n_se * se + ABS_TOL."""
        target = self._target_values(target)
        n_se = config.N_SE if n_se is None else n_se
        ok = np.abs(self.phi_hat - target) <= n_se * self.se + config.ABS_TOL
        return float(np.mean(ok))

    def compare(self, target, n_se: float = None, name: str = "cf") -> CheckReport:
        target = self._target_values(target)
        n_se = config.N_SE if n_se is None else n_se
        deviation = np.abs(self.phi_hat - target)
        worst = int(np.argmax(deviation - n_se * self.se))
        passed = bool(np.all(deviation <= n_se * self.se + config.ABS_TOL))
        return CheckReport(name, self.phi_hat[worst], target[worst], float(self.se[worst]), passed, self.n,
                           {"fraction_within": self.agreement(target, n_se), "worst_xi": self.xi[worst]})

    def _target_values(self, target) -> np.ndarray:
        if callable(target):
            return np.array([complex(target(x)) for x in self.xi])
        return np.asarray(target, dtype=complex)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.xi, columns=[f"xi_{k + 1}" for k in range(self.xi.shape[1])])
        frame["re"] = self.phi_hat.real
        frame["im"] = self.phi_hat.imag
        frame["se"] = self.se
        return frame


def _endpoints(samples) -> np.ndarray:
    if isinstance(samples, Ensemble):
        return samples.endpoints()
    arr = np.asarray(samples, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def _cf_values(X: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape[0], dtype=complex)
    block = max(1, 2 ** 22 // max(1, grid.shape[0]))
    for start in range(0, X.shape[0], block):
        out += np.exp(1j * (X[start:start + block] @ grid.T)).sum(axis=0)
    return out / X.shape[0]


def empirical_cf(samples, xi_grid) -> CfEstimate:
    """Empirical characteristic function of endpoints (an Ensemble or an (n, d) array)."""
    X = _endpoints(samples)
    if X.shape[0] < 1:
        raise EmptyEnsemble("no endpoints to estimate from")
    grid = as_points(xi_grid, X.shape[1])
    phi = _cf_values(X, grid)
    se = np.sqrt(np.clip(1.0 - np.abs(phi) ** 2, 0.0, None) / X.shape[0])
    return CfEstimate(grid, phi, se, X.shape[0])


def cf_agreement(estimate: CfEstimate, target, n_se: float = None) -> float:
    return estimate.agreement(target, n_se)


def exponent_target(psi: CharacteristicExponent, t: float = 1.0) -> Callable:
    """xi -> exp(-t psi(xi))."""
    return lambda xi: np.exp(-t * psi(xi))


# --- Campbell's formula ---

@dataclass(frozen=True)
class StepFunction:
    """f = sum_j c_j 1_{(t_{j-1}, t_j]} with t_0 = breaks[0]."""
    breaks: tuple
    levels: tuple

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        c = np.atleast_1d(np.asarray(self.levels, dtype=float))
        if b.ndim != 1 or b.size != c.shape[0] + 1:
            raise UnsupportedF("a step function needs one level per interval between breaks")
        if b[0] < 0 or np.any(np.diff(b) <= 0) or not np.all(np.isfinite(b)):
            raise UnsupportedF("breaks must be finite, non-negative and strictly increasing")
        object.__setattr__(self, "breaks", tuple(float(v) for v in b))
        object.__setattr__(self, "levels", tuple(float(v) for v in c))

    @classmethod
    def zero(cls, horizon: float = 1.0) -> "StepFunction":
        return cls((0.0, horizon), (0.0,))

    @property
    def support_end(self) -> float:
        return self.breaks[-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(np.asarray(self.breaks), t, side="left") - 1
        valid = (index >= 0) & (index < len(self.levels)) & (t > self.breaks[0])
        levels = np.asarray(self.levels)
        return np.where(valid, levels[np.clip(index, 0, len(self.levels) - 1)], 0.0)

    def intervals(self):
        return [(self.breaks[j + 1] - self.breaks[j], self.levels[j]) for j in range(len(self.levels))]


def stieltjes_sum(path: CadlagPath, f: StepFunction) -> float:
    """int f(t) dC_t over the jump ledger of a pure-jump path."""
    if path.jump_count == 0:
        return 0.0
    return float(np.sum(f(path.jump_times) * path.jump_sizes[:, 0]))


def campbell_check(rate: float, jump_law: JumpLaw, f, n: int, rng: RandomSource,
                   progress: bool = False) -> CheckReport:
    """
    E exp(i int f dC) against exp(rate sum_j Delta t_j (mu_hat(c_j) - 1)) for a compound Poisson C.

    :raises UnsupportedF: If f is not a StepFunction.
    """
    if not isinstance(f, StepFunction):
        raise UnsupportedF("campbell_check accepts step functions with compact support only")
    if jump_law.dimension != 1:
        raise InvalidInput("campbell_check is implemented for real-valued jumps")
    horizon = f.support_end
    ensemble = Ensemble.generate(lambda r: sample_compound_poisson(rate, jump_law, horizon, r), n, rng,
                                 progress=progress)
    integrals = np.array([stieltjes_sum(p, f) for p in ensemble.paths])
    lhs = complex(np.mean(np.exp(1j * integrals)))
    se = math.sqrt(max(0.0, 1.0 - abs(lhs) ** 2) / n)
    rhs = complex(np.exp(rate * sum(dt * (jump_law.cf(c) - 1.0) for dt, c in f.intervals())))
    return se_check("campbell", lhs, rhs, se, n)


# --- Finite-dimensional laws ---

def increment_independence_probe(ensemble: Ensemble, partition: Sequence[float], xis,
                                 psi: Optional[CharacteristicExponent] = None) -> CheckReport:
    """
    Joint empirical CF of (X_{t_1}, ..., X_{t_m}) against the product of increment CFs.

    With eta_k = xi_k + ... + xi_m, E exp(i sum xi_k.X_{t_k}) = prod_k E exp(i eta_k.(X_{t_k} - X_{t_{k-1}})).
    The standard error combines the joint SE with the delta-method SE of the product.
    If ``psi`` is given, the theoretical value prod_k exp(-(t_k - t_{k-1}) psi(eta_k)) is reported too.
    """
    times = np.asarray(partition, dtype=float)
    if times.size and times[0] == 0.0:
        times = times[1:]
    if times.size == 0 or np.any(np.diff(times) <= 0):
        raise InvalidInput("partition must be strictly increasing")
    d = ensemble.dimension
    xis = np.asarray(xis, dtype=float).reshape(times.size, d)
    start = ensemble.values_at(0.0)
    values = np.stack([ensemble.values_at(t) - start for t in times], axis=1)
    increments = np.diff(np.concatenate([np.zeros((ensemble.n, 1, d)), values], axis=1), axis=1)
    etas = np.cumsum(xis[::-1], axis=0)[::-1]
    n = ensemble.n
    joint = complex(np.mean(np.exp(1j * np.einsum("nkd,kd->n", values, xis))))
    marginals = np.array([np.mean(np.exp(1j * increments[:, k] @ etas[k])) for k in range(times.size)])
    product = complex(np.prod(marginals))
    se_joint = math.sqrt(max(0.0, 1.0 - abs(joint) ** 2) / n)
    se_product_sq = 0.0
    for k in range(times.size):
        others = abs(np.prod(np.delete(marginals, k))) ** 2
        se_product_sq += others * max(0.0, 1.0 - abs(marginals[k]) ** 2) / n
    se = math.sqrt(se_joint ** 2 + se_product_sq)
    details = {"partition": times, "etas": etas}
    if psi is not None:
        steps = np.diff(np.concatenate([[0.0], times]))
        details["theory"] = complex(np.prod([np.exp(-dt * psi(eta)) for dt, eta in zip(steps, etas)]))
    return se_check("increment_independence", joint, product, se, n, **details)


def stationarity_probe(ensemble: Ensemble, shifts: Sequence[float], t: float, xi_grid,
                       n_se: float = None) -> CheckReport:
    """Empirical CF of X_{s+t} - X_s for each shift s against the first shift."""
    shifts = list(shifts)
    reference = empirical_cf(ensemble.values_at(shifts[0] + t) - ensemble.values_at(shifts[0]), xi_grid)
    worst, worst_ratio, passed = None, 0.0, True
    for s in shifts[1:]:
        other = empirical_cf(ensemble.values_at(s + t) - ensemble.values_at(s), xi_grid)
        se = np.sqrt(reference.se ** 2 + other.se ** 2)
        diff = np.abs(other.phi_hat - reference.phi_hat)
        ratio = diff / np.maximum(se, 1e-300)
        k = int(np.argmax(ratio))
        if ratio[k] > worst_ratio:
            worst_ratio, worst = ratio[k], (s, k, other.phi_hat[k], reference.phi_hat[k], se[k])
        passed &= bool(np.all([within_se(a, b, e, n_se) for a, b, e in zip(other.phi_hat, reference.phi_hat, se)]))
    if worst is None:
        return CheckReport("stationarity", 0.0, 0.0, 0.0, True, ensemble.n)
    s, k, lhs, rhs, se = worst
    return CheckReport("stationarity", lhs, rhs, float(se), passed, ensemble.n,
                       {"shift": s, "xi": reference.xi[k], "max_se_ratio": float(worst_ratio)})


def _variance_and_se(x: np.ndarray) -> tuple:
    n = x.size
    centred = x - x.mean()
    var = float(np.sum(centred ** 2) / (n - 1))
    m4 = float(np.mean(centred ** 4))
    return var, math.sqrt(max(0.0, m4 - var ** 2) / n)


def moment_scaling_check(ensemble: Ensemble, times: Sequence[float] = (0.25, 0.5, 1.0),
                         coordinate: int = 0) -> CheckReport:
    """Mean and variance of X_t divided by t against their values at the last time."""
    times = list(times)
    T = times[-1]
    ref = ensemble.values_at(T)[:, coordinate]
    ref_mean, ref_mean_se = float(ref.mean()), float(ref.std(ddof=1) / math.sqrt(ref.size))
    ref_var, ref_var_se = _variance_and_se(ref)
    passed, rows = True, []
    for t in times[:-1]:
        x = ensemble.values_at(t)[:, coordinate]
        mean, mean_se = float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
        var, var_se = _variance_and_se(x)
        mean_ok = within_se(mean / t, ref_mean / T, math.hypot(mean_se / t, ref_mean_se / T))
        var_ok = within_se(var / t, ref_var / T, math.hypot(var_se / t, ref_var_se / T))
        passed &= mean_ok and var_ok
        rows.append({"t": t, "mean_rate": mean / t, "var_rate": var / t, "mean_ok": mean_ok, "var_ok": var_ok})
    return CheckReport("moment_scaling", ref_mean / T, ref_var / T, ref_var_se / T, passed, ensemble.n,
                       {"rows": rows})


def self_similarity_probe(endpoints_t, endpoints_2t, alpha: float, xi_grid, n_se: float = None) -> CheckReport:
    """Empirical CF of X_{2t} against that of 2^{1/alpha} X_t."""
    scaled = _endpoints(endpoints_t) * 2.0 ** (1.0 / alpha)
    a = empirical_cf(endpoints_2t, xi_grid)
    b = empirical_cf(scaled, xi_grid)
    se = np.sqrt(a.se ** 2 + b.se ** 2)
    ok = [within_se(x, y, e, n_se) for x, y, e in zip(a.phi_hat, b.phi_hat, se)]
    k = int(np.argmax(np.abs(a.phi_hat - b.phi_hat) / np.maximum(se, 1e-300)))
    return CheckReport("self_similarity", a.phi_hat[k], b.phi_hat[k], float(se[k]), bool(all(ok)), a.n,
                       {"alpha": alpha, "xi": a.xi[k]})
