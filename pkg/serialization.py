# levytype/serialization.py
"""
JSON documents in, CSV/JSON/SVG files out.

Triplets are read from ``{"d", "l", "Q", "nu"}`` documents whose Lévy measure is
dispatched on its ``variant`` key and, for radial densities, on the density ``family``.
Numbers are written in their shortest round-trip decimal form so that two runs with
the same seed produce byte-identical files.
"""
from __future__ import annotations

import datetime
import json
import logging
import math
import os
import platform

import matplotlib
import numpy as np
import pandas as pd
import scipy

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from errors import SchemaError  # noqa: E402
from feller_symbols import (  # noqa: E402
    PHI_FAMILIES,
    SdeSpec,
    StateSymbol,
    levy_symbol,
    stable_like_symbol,
    symbol_from_exponent,
)
from levy_core import (  # noqa: E402
    AlphaStable,
    CharacteristicExponent,
    ExpPowerDensity,
    FiniteAtomic,
    GaussianDensity,
    LevyTriplet,
    RadialDensity,
    SphericalMeasure,
    ZeroMeasure,
    brownian_triplet,
)
from report_utils import jsonable  # noqa: E402
from samplers import DiscreteJumps, GaussianJumps, JumpLaw  # noqa: E402

logger = logging.getLogger(__name__)

MANIFEST_FILE = "run_manifest.json"
TIMESTAMPS_FILE = "run_timestamps.json"

plt.rcParams["svg.hashsalt"] = "levytype"


# --- Reading ---

def load_json(path: str) -> dict:
    """Reads a JSON object from a file; decoding and I/O failures become SchemaError."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e.msg} at line {e.lineno}") from e
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e.strerror}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"{path} must hold a JSON object, found {type(doc).__name__}")
    return doc


def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be a JSON object")
    if key not in doc:
        raise SchemaError(f"{where} is missing the field {key!r}")
    return doc[key]


def parse_density(doc: dict):
    family = _require(doc, "family", "density")
    try:
        if family == "exp_power":
            return ExpPowerDensity(float(doc["scale"]), float(doc.get("power", 0.0)), float(doc.get("rate", 0.0)))
        if family == "gaussian":
            return GaussianDensity(float(doc["scale"]), float(doc.get("std", 1.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed {family} density: {e}") from e
    raise SchemaError(f"unknown density family {family!r}")


def _spherical(doc: dict, where: str) -> SphericalMeasure:
    try:
        return SphericalMeasure(doc["directions"], doc["weights"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{where} needs directions and weights: {e}") from e


def parse_measure(doc, dimension: int):
    """A LevyMeasureSpec from its ``variant`` document; None or {} means the zero measure."""
    if not doc:
        return ZeroMeasure(dimension)
    variant = _require(doc, "variant", "nu")
    if variant == "zero":
        return ZeroMeasure(dimension)
    if variant == "finite_atomic":
        try:
            atoms = [a["point"] for a in doc["atoms"]]
            masses = [float(a["mass"]) for a in doc["atoms"]]
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"finite_atomic atoms need point and mass: {e}") from e
        return FiniteAtomic(atoms, masses)
    if variant == "radial_density":
        density = parse_density(_require(doc, "density", "radial_density"))
        bound = doc.get("witness_bound")
        return RadialDensity(density, _spherical(doc, "radial_density"), float(doc.get("r_min", 0.0)),
                             None if bound is None else float(bound))
    if variant == "alpha_stable":
        try:
            alpha = float(doc["alpha"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"alpha_stable needs a numeric alpha: {e}") from e
        return AlphaStable(alpha, _spherical(doc, "alpha_stable"))
    raise SchemaError(f"unknown measure variant {variant!r}")


def parse_triplet(doc: dict) -> LevyTriplet:
    """
    A LevyTriplet from ``{"d", "l", "Q", "nu"}``.

    :raises SchemaError: If fields are missing or have the wrong shape.
    :raises InvalidInput: Subclasses from the triplet invariants (PSD, dimensions).
    """
    if not isinstance(doc, dict):
        raise SchemaError("a triplet must be a JSON object")
    try:
        d = int(doc.get("d", len(doc["l"])))
        l = [float(v) for v in doc["l"]]
        Q = np.asarray(doc["Q"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed triplet: {e}") from e
    if len(l) != d:
        raise SchemaError(f"l has {len(l)} entries but d = {d}")
    return LevyTriplet(l, Q, parse_measure(doc.get("nu"), d))


def parse_jump_law(doc: dict) -> JumpLaw:
    """``{"law": "discrete", "points", "probs"}`` or ``{"law": "gaussian", "std"}``."""
    law = _require(doc, "law", "jump_law")
    try:
        if law == "discrete":
            return DiscreteJumps(doc["points"], doc["probs"])
        if law == "gaussian":
            return GaussianJumps(float(doc.get("std", 1.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed {law} jump law: {e}") from e
    raise SchemaError(f"unknown jump law {law!r}")


def drift_sqrt_exponent(drift: float = 1.0) -> CharacteristicExponent:
    """psi(xi) = i drift xi + |xi|^{1/2}."""
    return CharacteristicExponent.from_callable(
        lambda xi: 1j * drift * float(xi[0]) + math.sqrt(abs(float(xi[0]))), 1, label="drift_sqrt")


def parse_symbol(doc: dict) -> StateSymbol:
    """Named symbol families: brownian, stable_like, levy, drift_sqrt."""
    family = _require(doc, "family", "symbol")
    if family == "brownian":
        return levy_symbol(brownian_triplet(doc.get("Q", 1.0)), label="brownian")
    if family == "stable_like":
        if "alpha" in doc:
            alpha = float(doc["alpha"])
            return stable_like_symbol(lambda x: alpha)
        return stable_like_symbol()
    if family == "levy":
        return levy_symbol(parse_triplet(_require(doc, "triplet", "levy symbol")))
    if family == "drift_sqrt":
        return symbol_from_exponent(drift_sqrt_exponent(float(doc.get("drift", 1.0))))
    raise SchemaError(f"unknown symbol family {family!r}")


def parse_phi(doc: dict):
    """A CoefficientField from ``{"family", ...parameters}``."""
    family = _require(doc, "family", "phi")
    factory = PHI_FAMILIES.get(family)
    if factory is None:
        raise SchemaError(f"unknown coefficient family {family!r}; choose from {sorted(PHI_FAMILIES)}")
    params = {k: v for k, v in doc.items() if k != "family"}
    try:
        return factory(**params)
    except TypeError as e:
        raise SchemaError(f"bad parameters for {family}: {e}") from e


def parse_sde(doc: dict) -> SdeSpec:
    phi = parse_phi(_require(doc, "phi", "sde"))
    driver = parse_triplet(_require(doc, "driver", "sde"))
    return SdeSpec(phi, driver, tuple(np.atleast_1d(doc.get("x0", [0.0] * phi.dimension))))


# --- Writing ---

def format_number(value) -> str:
    """Shortest decimal string that reads back to the same float."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """Writes a table with every cell in shortest round-trip form; returns the path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    text = frame.copy()
    for column in text.columns:
        text[column] = text[column].map(format_number)
    text.to_csv(path, index=False, lineterminator="\n")
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def write_json(obj, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(jsonable(obj), handle, indent=2, sort_keys=True, allow_nan=True)
        handle.write("\n")
    return path


def write_table(frame: pd.DataFrame, out_dir: str, stem: str, fmt: str = "csv") -> str:
    """``<stem>.csv`` or ``<stem>.json`` (a list of records) under out_dir."""
    if fmt == "csv":
        return write_csv(frame, os.path.join(out_dir, f"{stem}.csv"))
    if fmt == "json":
        return write_json(frame.to_dict(orient="records"), os.path.join(out_dir, f"{stem}.json"))
    raise SchemaError(f"unknown output format {fmt!r}")


def library_versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pd.__version__}


def write_manifest(out_dir: str, config_echo: dict, seeds: dict, outputs: list, extra: dict = None) -> str:
    """run_manifest.json: everything needed to reproduce the run, and nothing time-dependent."""
    manifest = {"config": config_echo, "seeds": seeds, "versions": library_versions(),
                "outputs": sorted(os.path.basename(p) for p in outputs)}
    if extra:
        manifest.update(extra)
    return write_json(manifest, os.path.join(out_dir, MANIFEST_FILE))


def write_timestamps(out_dir: str, started: datetime.datetime, finished: datetime.datetime) -> str:
    return write_json({"started": started.isoformat(), "finished": finished.isoformat(),
                       "elapsed_seconds": (finished - started).total_seconds()},
                      os.path.join(out_dir, TIMESTAMPS_FILE))


def plot_lines(frame: pd.DataFrame, x: str, ys: list, path: str, title: str = "") -> str:
    """A single-file SVG line chart of the given columns against ``x``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    for column in ys:
        ax.plot(frame[x].to_numpy(), frame[column].to_numpy(), label=column, linewidth=1.2)
    ax.set_xlabel(x)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    if len(ys) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("plot saved to %s", path)
    return path
