# levytype/tests/test_serialization.py
import datetime
import json
import os

import numpy as np
import pandas as pd
import pytest

from errors import InvalidInput, NotPositiveSemidefinite, SchemaError
from feller_symbols import SdeSpec
from levy_core import AlphaStable, FiniteAtomic, RadialDensity, ZeroMeasure, eval_exponent
from samplers import DiscreteJumps, GaussianJumps
from serialization import (
    MANIFEST_FILE,
    TIMESTAMPS_FILE,
    format_number,
    load_json,
    parse_jump_law,
    parse_measure,
    parse_phi,
    parse_sde,
    parse_symbol,
    parse_triplet,
    plot_lines,
    write_csv,
    write_json,
    write_manifest,
    write_table,
    write_timestamps,
)

BROWNIAN = {"d": 1, "l": [0.0], "Q": [[1.0]], "nu": {"variant": "zero"}}


def _read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def test_parse_brownian_triplet() -> None:
    triplet = parse_triplet(BROWNIAN)
    assert eval_exponent(triplet, 2.0) == pytest.approx(2.0)
    assert isinstance(triplet.nu, ZeroMeasure)


def test_parse_measure_variants() -> None:
    atoms = parse_measure({"variant": "finite_atomic", "atoms": [{"point": [1.0], "mass": 2.0}]}, 1)
    assert isinstance(atoms, FiniteAtomic)
    stable = parse_measure({"variant": "alpha_stable", "alpha": 1.5, "directions": [[1.0], [-1.0]],
                            "weights": [0.5, 0.5]}, 1)
    assert isinstance(stable, AlphaStable)
    radial = parse_measure({"variant": "radial_density", "density": {"family": "exp_power", "scale": 1.0,
                            "power": 1.5, "rate": 1.0}, "directions": [[1.0]], "weights": [1.0]}, 1)
    assert isinstance(radial, RadialDensity)
    assert isinstance(parse_measure(None, 2), ZeroMeasure)


@pytest.mark.parametrize("doc", [
    {"l": [0.0]},
    {"l": [0.0], "Q": "one"},
    {"d": 2, "l": [0.0], "Q": [[1.0]]},
    {"l": [0.0], "Q": [[1.0]], "nu": {"variant": "cloud"}},
    {"l": [0.0], "Q": [[1.0]], "nu": {"variant": "finite_atomic", "atoms": [{"point": [1.0]}]}},
    {"l": [0.0], "Q": [[1.0]], "nu": {"variant": "radial_density", "density": {"family": "pareto"}}},
    {"l": [0.0], "Q": [[1.0]], "nu": {"variant": "alpha_stable", "directions": [[1.0]], "weights": [1.0]}},
])
def test_malformed_triplets_are_schema_errors(doc) -> None:
    with pytest.raises(SchemaError):
        parse_triplet(doc)


def test_triplet_invariants_survive_parsing() -> None:
    with pytest.raises(NotPositiveSemidefinite):
        parse_triplet({"l": [0.0], "Q": [[-1.0]]})
    assert issubclass(SchemaError, InvalidInput)


def test_load_json_errors(tmp_path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_json(str(bad))
    with pytest.raises(SchemaError):
        load_json(str(tmp_path / "missing.json"))
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_json(str(listing))


def test_parse_jump_laws() -> None:
    assert isinstance(parse_jump_law({"law": "gaussian", "std": 2.0}), GaussianJumps)
    law = parse_jump_law({"law": "discrete", "points": [[1.0], [2.0]], "probs": [0.5, 0.5]})
    assert isinstance(law, DiscreteJumps)
    with pytest.raises(SchemaError):
        parse_jump_law({"law": "laplace"})


def test_parse_symbol_families() -> None:
    assert parse_symbol({"family": "stable_like", "alpha": 1.3})(0.0, 2.0).real == pytest.approx(2.0 ** 1.3)
    assert parse_symbol({"family": "brownian"})(5.0, 2.0).real == pytest.approx(2.0)
    assert parse_symbol({"family": "levy", "triplet": BROWNIAN}).constant_in_x
    with pytest.raises(SchemaError):
        parse_symbol({"family": "heston"})


def test_parse_phi_and_sde() -> None:
    assert parse_phi({"family": "linear", "c": 2.0}).lipschitz == 2.0
    with pytest.raises(SchemaError):
        parse_phi({"family": "linear", "slope": 2.0})
    with pytest.raises(SchemaError):
        parse_phi({"family": "cubic"})
    spec = parse_sde({"phi": {"family": "two_plus_sin"}, "driver": BROWNIAN, "x0": [0.5]})
    assert isinstance(spec, SdeSpec)
    assert spec.x0 == (0.5,)


def test_format_number_round_trips() -> None:
    assert format_number(True) == "true"
    assert format_number(np.int64(7)) == "7"
    assert format_number(0.1) == "0.1"
    value = 1.0 / 3.0
    assert float(format_number(np.float64(value))) == value


def test_write_csv_reads_back_exactly(out_dir) -> None:
    frame = pd.DataFrame({"x": [0.1, 1.0 / 3.0], "ok": [True, False], "k": [1, 2]})
    path = write_csv(frame, os.path.join(out_dir, "table.csv"))
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "x,ok,k"
    assert lines[1] == "0.1,true,1"
    assert float(lines[2].split(",")[0]) == 1.0 / 3.0


def test_write_table_formats(out_dir) -> None:
    frame = pd.DataFrame({"a": [1.0]})
    assert write_table(frame, out_dir, "t").endswith("t.csv")
    json_path = write_table(frame, out_dir, "t", "json")
    assert _read_json(json_path) == [{"a": 1.0}]
    with pytest.raises(SchemaError):
        write_table(frame, out_dir, "t", "xml")


def test_write_json_handles_complex(out_dir) -> None:
    path = write_json({"z": 1 + 2j, "arr": np.arange(2)}, os.path.join(out_dir, "z.json"))
    assert _read_json(path) == {"arr": [0, 1], "z": [1.0, 2.0]}


def test_manifest_has_no_timestamps(out_dir) -> None:
    path = write_manifest(out_dir, {"seed": 1}, {"seed": 1, "stream": 0}, [os.path.join(out_dir, "b.csv"), "a.csv"])
    manifest = load_json(path)
    assert os.path.basename(path) == MANIFEST_FILE
    assert set(manifest) == {"config", "seeds", "versions", "outputs"}
    assert manifest["outputs"] == ["a.csv", "b.csv"]
    now = datetime.datetime(2024, 1, 1)
    stamps = load_json(write_timestamps(out_dir, now, now + datetime.timedelta(seconds=2)))
    assert stamps["elapsed_seconds"] == 2.0
    assert os.path.exists(os.path.join(out_dir, TIMESTAMPS_FILE))


def test_plot_lines_writes_svg(out_dir) -> None:
    frame = pd.DataFrame({"t": [0.0, 1.0], "a": [0.0, 1.0], "b": [1.0, 0.0]})
    path = plot_lines(frame, "t", ["a", "b"], os.path.join(out_dir, "plot.svg"), title="demo")
    with open(path, encoding="utf-8") as handle:
        assert "<svg" in handle.read()
