# levytype/cli.py
"""
Command-line entry point.

    python cli.py exponent --triplet nu.json --plot
    python cli.py simulate --method bm-levy --set levels=10 --seed 7
    python cli.py validate --suite isometry --set n=100000
    python cli.py symbol --config sde.json
    python cli.py indices --set 'symbol={"family": "stable_like", "alpha": 1.3}'

Every run writes its tables, ``run_manifest.json`` and ``run_timestamps.json`` into
``--out`` (default data/runs/<command>). Exit codes: 0 pass, 1 check failed,
2 invalid input, 3 statistical precondition unmet; errors are reported on stderr
as ``{"error": kind, "message": text}``.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd

import config
import serialization
from empirical import StepFunction, campbell_check, empirical_cf, exponent_target
from errors import CheckFailed, ConfigError, LevyTypeError, SchemaError
from feller_symbols import (
    SdeSpec,
    estimate_symbol,
    exit_time_bracket,
    identity_field,
    indices_at_infinity,
    maximal_bound,
    sde_euler,
    sde_sampler,
    sde_state_symbol,
    sector_check,
    symbol_table,
    validate_lipschitz,
)
from levy_core import (
    brownian_triplet,
    exponent_of,
    exponent_table,
    symmetric_stable_triplet,
)
from report_utils import CheckReport
from rom_integral import isometry_record, isometry_suite
from samplers import (
    Ensemble,
    LevyEndpointSampler,
    RandomSource,
    sample_brownian_levy,
    sample_compound_poisson,
    sample_levy_ito,
    sample_poisson_process,
    sample_series,
    symmetric_sign,
)
from semigroup_ops import (
    chapman_kolmogorov_check,
    dynkin_check,
    exponential_martingale_check,
    gaussian_bump,
    quadratic_function,
)

logger = logging.getLogger(__name__)

COMMANDS = ("exponent", "simulate", "validate", "symbol", "indices")
METHODS = ("poisson", "cpp", "bm-levy", "levy-ito", "series", "sde")
SUITES = ("cf", "campbell", "isometry", "dynkin", "martingale", "ck")
FORMATS = ("csv", "json")
CONFIG_KEYS = {"command", "params", "seed", "out", "format", "plot", "method", "suite"}


# --- Run configuration ---

@dataclass
class RunConfig:
    """Validated parameters of one CLI run; echoed verbatim into the manifest."""
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    plot: bool = False
    method: Optional[str] = None
    suite: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a JSON object")
        if self.command == "simulate" and self.method not in METHODS:
            raise ConfigError(f"simulate needs --method from {METHODS}, got {self.method!r}")
        if self.command == "validate" and self.suite not in SUITES:
            raise ConfigError(f"validate needs --suite from {SUITES}, got {self.suite!r}")

    @property
    def out_dir(self) -> str:
        return self.out or os.path.join(config.RUNS_DIR, self.command)

    @property
    def rng(self) -> RandomSource:
        return RandomSource(self.seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def number(self, key: str, default: float) -> float:
        return _coerce(self.params.get(key, default), float, key)

    def integer(self, key: str, default: int) -> int:
        value = self.params.get(key, default)
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"parameter {key!r} must be an integer, got {value!r}")
        return value

    def vector(self, key: str, default) -> np.ndarray:
        return _coerce(self.params.get(key, default), lambda v: np.atleast_1d(np.asarray(v, dtype=float)), key)


def _coerce(value, kind: Callable, key: str):
    try:
        return kind(value)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"parameter {key!r} has the wrong type: {value!r}") from e


def _parse_assignment(text: str) -> tuple:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise SchemaError(f"--set expects KEY=VALUE, got {text!r}")
    try:
        return key.strip(), json.loads(raw)
    except json.JSONDecodeError:
        return key.strip(), raw


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merges the --config document with command-line flags (flags win)."""
    doc = serialization.load_json(args.config) if args.config else {}
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise SchemaError(f"unknown run-config fields {sorted(unknown)}")
    if "command" in doc and doc["command"] != args.command:
        raise ConfigError(f"config file is for {doc['command']!r}, not {args.command!r}")
    params = dict(doc.get("params", {}))
    if getattr(args, "triplet", None):
        params["triplet"] = serialization.load_json(args.triplet)
    for assignment in args.set or []:
        key, value = _parse_assignment(assignment)
        params[key] = value
    merged = {
        "seed": doc.get("seed", 0), "out": doc.get("out"), "format": doc.get("format", "csv"),
        "plot": bool(doc.get("plot", False)), "method": doc.get("method"), "suite": doc.get("suite"),
    }
    for key in ("seed", "out", "format", "method", "suite"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.plot:
        merged["plot"] = True
    return RunConfig(command=args.command, params=params, **merged)


# --- Command results ---

@dataclass
class CommandResult:
    files: list = field(default_factory=list)
    streams: tuple = (0, 0)
    extra: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r for r in self.reports if not r.passed]


def _triplet(cfg: RunConfig, default=None):
    doc = cfg.params.get("triplet")
    if doc is None:
        if "alpha" in cfg.params:
            return symmetric_stable_triplet(cfg.number("alpha", 1.5), cfg.number("scale", 1.0))
        if default is None:
            raise SchemaError("this command needs a triplet (--triplet FILE or params.triplet)")
        return default
    return serialization.parse_triplet(doc)


def _progress() -> bool:
    return sys.stderr.isatty()


# --- exponent ---

def cmd_exponent(cfg: RunConfig) -> CommandResult:
    """psi on a grid xi = s * direction, s in [-xi_max, xi_max]."""
    triplet = _triplet(cfg)
    direction = cfg.vector("direction", np.eye(triplet.dimension)[0])
    if direction.shape[0] != triplet.dimension:
        raise SchemaError(f"direction has {direction.shape[0]} entries, triplet dimension is {triplet.dimension}")
    xi_max = cfg.number("xi_max", 3.0)
    steps = np.linspace(-xi_max, xi_max, cfg.integer("points", 61))
    table = exponent_table(exponent_of(triplet), steps[:, None] * direction[None, :])
    files = [serialization.write_table(table, cfg.out_dir, "exponent", cfg.format)]
    if cfg.plot:
        files.append(serialization.plot_lines(table, "xi_1", ["re_psi", "im_psi"],
                                              os.path.join(cfg.out_dir, "exponent.svg"), "characteristic exponent"))
    return CommandResult(files, extra={"triplet": triplet.to_dict() if _serialisable(triplet) else None})


def _serialisable(triplet) -> bool:
    try:
        triplet.to_dict()
    except LevyTypeError:
        return False
    return True


# --- simulate ---

def _lepage_series(alpha: float) -> Callable:
    """H(r, v) = r^{-1/alpha} v, the LePage series of a symmetric alpha-stable law."""
    return lambda gammas, marks: gammas[:, None] ** (-1.0 / alpha) * marks


def _path_sampler(cfg: RunConfig) -> tuple:
    method = cfg.method
    T = cfg.number("T", 1.0)
    if method == "poisson":
        rate = cfg.number("rate", 1.0)
        return (lambda r: sample_poisson_process(rate, T, r)), {"rate": rate}
    if method == "cpp":
        rate = cfg.number("rate", 1.0)
        law = serialization.parse_jump_law(cfg.params.get("jump_law", {"law": "gaussian", "std": 1.0}))
        return (lambda r: sample_compound_poisson(rate, law, T, r)), {"rate": rate}
    if method == "bm-levy":
        levels = cfg.integer("levels", 10)
        return (lambda r: sample_brownian_levy(levels, r)), {"levels": levels}
    if method == "levy-ito":
        triplet = _triplet(cfg, brownian_triplet())
        eps, grid_dt = cfg.number("eps", 1e-2), cfg.number("grid_dt", 1e-3)
        return (lambda r: sample_levy_ito(triplet, eps, T, grid_dt, r)), {"eps": eps}
    if method == "series":
        alpha = cfg.number("alpha", 1.5)
        n_terms, grid_dt = cfg.integer("n_terms", 1000), cfg.number("grid_dt", 1e-2)
        H = _lepage_series(alpha)
        return (lambda r: sample_series(H, symmetric_sign(), n_terms, r, grid_dt=grid_dt)), \
            {"alpha": alpha, "n_terms": n_terms}
    spec = serialization.parse_sde(cfg.params.get("sde", cfg.params))
    slope = validate_lipschitz(spec.phi)
    eps, grid_dt = cfg.number("eps", 1e-2), cfg.number("grid_dt", 1e-3)
    return (lambda r: sde_euler(spec, eps, grid_dt, T, r)), {"phi": spec.phi.label, "max_slope": slope}


def cmd_simulate(cfg: RunConfig) -> CommandResult:
    """Paths by the chosen construction; one table of (path, t, x_k) rows plus the jump ledgers."""
    sampler, settings = _path_sampler(cfg)
    n_paths = cfg.integer("n_paths", 1)
    ensemble = Ensemble.generate(sampler, n_paths, cfg.rng, progress=_progress())
    frames = []
    for i, path in enumerate(ensemble.paths):
        frame = path.to_frame()
        frame.insert(0, "path", i)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)
    files = [serialization.write_table(table, cfg.out_dir, "paths", cfg.format),
             serialization.write_json([{"path": i, "jumps": p.jump_ledger()} for i, p in enumerate(ensemble.paths)],
                                      os.path.join(cfg.out_dir, "jumps.json"))]
    if cfg.plot:
        files.append(serialization.plot_lines(frames[0], "t", ["x_1"], os.path.join(cfg.out_dir, "paths.svg"),
                                              f"{cfg.method} path"))
    manifest = ensemble.manifest()
    extra = {"method": cfg.method, "settings": settings, "ensemble": manifest,
             "paths": [p.meta for p in ensemble.paths]}
    logger.info("simulated %d %s path(s)", n_paths, cfg.method)
    return CommandResult(files, (manifest["stream_start"], manifest["stream_end"]), extra)


# --- validate ---

def _suite_cf(cfg: RunConfig, n: int) -> tuple:
    triplet = _triplet(cfg, brownian_triplet())
    sampler = LevyEndpointSampler(triplet, cfg.number("eps", 1e-2))
    t = cfg.number("t", 1.0)
    xi_max = cfg.number("xi_max", 3.0)
    grid = np.linspace(-xi_max, xi_max, cfg.integer("points", 25))
    estimate = empirical_cf(sampler.sample(t, n, cfg.rng), grid)
    target = exponent_target(sampler.exponent, t)
    fraction = estimate.agreement(target)
    required = cfg.number("min_fraction", 0.95)
    report = CheckReport("cf_agreement", fraction, required, 0.0, fraction >= required, n,
                         {"t": t, "eps": sampler.eps})
    table = estimate.to_frame()
    values = np.array([complex(target(x)) for x in estimate.xi])
    table["target_re"], table["target_im"] = values.real, values.imag
    return [report], {"cf": table}


def _suite_campbell(cfg: RunConfig, n: int) -> tuple:
    law = serialization.parse_jump_law(cfg.params.get("jump_law", {"law": "gaussian", "std": 1.0}))
    step = cfg.params.get("step", {"breaks": [0.0, 0.5, 1.0], "levels": [1.0, -0.5]})
    try:
        f = StepFunction(step["breaks"], step["levels"])
    except (KeyError, TypeError) as e:
        raise SchemaError(f"step needs breaks and levels: {e}") from e
    return [campbell_check(cfg.number("rate", 2.0), law, f, n, cfg.rng, progress=_progress())], {}


def _suite_isometry(cfg: RunConfig, n: int) -> tuple:
    reports = isometry_suite(n, cfg.rng, level=cfg.integer("level", 6), alpha=cfg.number("alpha", 1.5))
    records = pd.DataFrame([isometry_record(r) for r in reports])
    records["ratio"] = records["mc_moment"] / records["control_integral"]
    return reports, {"isometry": records}


def _suite_dynkin(cfg: RunConfig, n: int) -> tuple:
    triplet = _triplet(cfg, brownian_triplet())
    sampler = LevyEndpointSampler(triplet, cfg.number("eps", 1e-2))
    f = quadratic_function(triplet.dimension)
    x = cfg.vector("x", np.zeros(triplet.dimension))
    return [dynkin_check(sampler, f, x, cfg.number("r", 1.0), n, cfg.rng, dt=cfg.number("dt", 1e-3))], {}


def _suite_martingale(cfg: RunConfig, n: int) -> tuple:
    triplet = _triplet(cfg, brownian_triplet())
    sampler = LevyEndpointSampler(triplet, cfg.number("eps", 1e-2))
    xi = cfg.vector("xi", np.ones(triplet.dimension))
    partition = cfg.vector("partition", [0.25, 0.5, 0.75, 1.0])
    return exponential_martingale_check(sampler, xi, partition, n, cfg.rng), {}


def _suite_ck(cfg: RunConfig, n: int) -> tuple:
    triplet = _triplet(cfg, brownian_triplet())
    sampler = LevyEndpointSampler(triplet, cfg.number("eps", 1e-2))
    f = gaussian_bump(0.5, dimension=triplet.dimension)
    x = cfg.vector("x", np.zeros(triplet.dimension))
    return [chapman_kolmogorov_check(sampler, f, x, cfg.number("s", 0.3), cfg.number("t", 0.5), n, cfg.rng)], {}


SUITE_RUNNERS = {
    "cf": _suite_cf,
    "campbell": _suite_campbell,
    "isometry": _suite_isometry,
    "dynkin": _suite_dynkin,
    "martingale": _suite_martingale,
    "ck": _suite_ck,
}


def report_frame(reports: list) -> pd.DataFrame:
    """One row per check with real and imaginary parts in separate columns."""
    rows = []
    for r in reports:
        lhs, rhs = complex(r.lhs), complex(r.rhs)
        rows.append({"check": r.name, "n": r.n, "lhs_re": lhs.real, "lhs_im": lhs.imag,
                     "rhs_re": rhs.real, "rhs_im": rhs.imag, "se": r.se, "pass": r.passed})
    return pd.DataFrame(rows, columns=["check", "n", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "se", "pass"])


def cmd_validate(cfg: RunConfig) -> CommandResult:
    n = cfg.integer("n", 10 ** 4)
    reports, tables = SUITE_RUNNERS[cfg.suite](cfg, n)
    files = []
    if cfg.format == "json":
        files.append(serialization.write_json([r.to_dict() for r in reports],
                                              os.path.join(cfg.out_dir, "report.json")))
    else:
        files.append(serialization.write_csv(report_frame(reports), os.path.join(cfg.out_dir, "report.csv")))
    for stem, table in tables.items():
        files.append(serialization.write_table(table, cfg.out_dir, stem, cfg.format))
    if cfg.plot and "cf" in tables:
        files.append(serialization.plot_lines(tables["cf"], "xi_1", ["re", "target_re"],
                                              os.path.join(cfg.out_dir, "cf.svg"), "empirical CF"))
    for r in reports:
        logger.info("%s: %s (lhs %s, rhs %s, se %.3g)", r.name, "pass" if r.passed else "FAIL", r.lhs, r.rhs, r.se)
    return CommandResult(files, (0, max(0, n - 1)), {"suite": cfg.suite}, reports)


# --- symbol ---

def cmd_symbol(cfg: RunConfig) -> CommandResult:
    """
    Symbol table of a named family, or of an SDE together with Monte Carlo estimates.

    ``params.sde`` (or ``params.triplet``, read as the SDE with Phi = identity) switches
    on estimation at every (x, xi) pair of the grid.
    """
    spec = None
    if "sde" in cfg.params:
        spec = serialization.parse_sde(cfg.params["sde"])
    elif "triplet" in cfg.params or "alpha" in cfg.params:
        triplet = _triplet(cfg)
        spec = SdeSpec(identity_field(triplet.dimension), triplet, tuple(np.zeros(triplet.dimension)))
    if spec is None:
        q = serialization.parse_symbol(cfg.params.get("symbol", {"family": "stable_like"}))
    else:
        validate_lipschitz(spec.phi)
        q = sde_state_symbol(spec)
    xs = cfg.vector("xs", [0.0]).reshape(-1, q.dimension)
    xis = cfg.vector("xis", [0.5, 1.0, 2.0]).reshape(-1, q.dimension)
    table = symbol_table(q, xs, xis)
    files, estimates = [], []
    if spec is not None and cfg.params.get("estimate", True):
        sampler = sde_sampler(spec, cfg.number("eps", 1e-2), cfg.params.get("grid_dt"))
        t_grid = cfg.vector("t_grid", [1e-2, 5e-3, 2.5e-3])
        r, n = cfg.number("r", 1.0), cfg.integer("n", 10 ** 4)
        q_hat, q_se, agrees = [], [], []
        k = 0
        for x in xs:
            for xi in xis:
                est = estimate_symbol(sampler, x, xi, t_grid, r, n, cfg.rng.child(k * n))
                k += 1
                target = complex(q(x, xi))
                q_hat.append(est.q_hat)
                q_se.append(est.se)
                agrees.append(est.agrees(target, cfg.number("rel", 0.05)))
                estimates.append({"x": x, "xi": xi, **est.to_dict()})
        q_hat = np.array(q_hat)
        table["q_hat_re"], table["q_hat_im"] = q_hat.real, q_hat.imag
        table["se"], table["agrees"] = q_se, agrees
        files.append(serialization.write_json(estimates, os.path.join(cfg.out_dir, "estimates.json")))
    files.insert(0, serialization.write_table(table, cfg.out_dir, "symbol", cfg.format))
    if cfg.plot and q.dimension == 1:
        files.append(serialization.plot_lines(table[table["x_1"] == xs[0, 0]], "xi_1", ["re_q", "im_q"],
                                              os.path.join(cfg.out_dir, "symbol.svg"), q.label))
    return CommandResult(files, (0, max(0, len(estimates) * cfg.integer("n", 10 ** 4) - 1)), {"symbol": q.label})


# --- indices ---

def cmd_indices(cfg: RunConfig) -> CommandResult:
    """Indices at infinity, sector constant, maximal bound and exit-time bracket per start point."""
    q = serialization.parse_symbol(cfg.params.get("symbol", {"family": "stable_like"}))
    xs = cfg.vector("xs", [0.0]).reshape(-1, q.dimension)
    xi_max = cfg.number("xi_max", config.XI_MAX)
    r, t = cfg.number("r", 1.0), cfg.number("t", 0.01)
    rows = []
    for x in xs:
        est = indices_at_infinity(q, x, xi_max)
        kappa, sector_ok = sector_check(q, [x])
        lower, upper, _ = exit_time_bracket(q, x, r)
        row = {f"x_{k + 1}": v for k, v in enumerate(x)}
        if q.alpha_at is not None:
            row["alpha"] = float(q.alpha_at(x))
        row.update({"beta": est.beta, "delta": est.delta,
                    "beta_lo": est.beta_bracket[0], "beta_hi": est.beta_bracket[1],
                    "delta_lo": est.delta_bracket[0], "delta_hi": est.delta_bracket[1],
                    "kappa": kappa, "sector_pass": sector_ok,
                    "maximal_bound": maximal_bound(q, x, r, t), "exit_lower": lower, "exit_upper": upper})
        rows.append(row)
    table = pd.DataFrame(rows)
    files = [serialization.write_table(table, cfg.out_dir, "indices", cfg.format)]
    return CommandResult(files, (0, 0), {"symbol": q.label, "r": r, "t": t})


HANDLERS = {
    "exponent": cmd_exponent,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "symbol": cmd_symbol,
    "indices": cmd_indices,
}


def run(cfg: RunConfig) -> CommandResult:
    """
    Executes one command and writes its manifest.

    :raises CheckFailed: If a validation suite finished with a failing check.
    """
    started = datetime.datetime.now(datetime.timezone.utc)
    os.makedirs(cfg.out_dir, exist_ok=True)
    logger.info("running %s into %s (seed %d)", cfg.command, cfg.out_dir, cfg.seed)
    result = HANDLERS[cfg.command](cfg)
    seeds = {"seed": cfg.seed, "stream_start": result.streams[0], "stream_end": result.streams[1]}
    serialization.write_manifest(cfg.out_dir, cfg.to_dict(), seeds, result.files, result.extra)
    serialization.write_timestamps(cfg.out_dir, started, datetime.datetime.now(datetime.timezone.utc))
    if result.failures:
        names = ", ".join(sorted({r.name for r in result.failures}))
        raise CheckFailed(f"{len(result.failures)} of {len(result.reports)} checks failed: {names}")
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levytype", description="Simulate and verify Lévy and Lévy-type processes.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON document mirroring RunConfig")
    parser.add_argument("--seed", type=int, help="u64 seed of the Philox generator (default 0)")
    parser.add_argument("--out", help="output directory (default data/runs/<command>)")
    parser.add_argument("--format", choices=FORMATS, help="table format (default csv)")
    parser.add_argument("--plot", action="store_true", help="also write an SVG line chart")
    parser.add_argument("--method", choices=METHODS, help="construction used by simulate")
    parser.add_argument("--suite", choices=SUITES, help="check suite run by validate")
    parser.add_argument("--triplet", help="JSON file holding a Lévy triplet")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="parameter override; VALUE is parsed as JSON when possible")
    parser.add_argument("--log-level", default=None, help="logging level (default from LEVYTYPE_LOG_LEVEL)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config.setup_logging(args.log_level)
    try:
        run(config_from_args(args))
    except LevyTypeError as e:
        logger.debug("run aborted", exc_info=True)
        sys.stderr.write(json.dumps({"error": e.kind, "message": str(e)}) + "\n")
        return e.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
