# levytype/tests/test_cli.py
import json
import os

import pandas as pd
import pytest

from cli import RunConfig, build_parser, config_from_args, main, run
from errors import ConfigError
from report_utils import calculate_sha256
from serialization import MANIFEST_FILE, TIMESTAMPS_FILE, load_json

BROWNIAN = '{"d": 1, "l": [0.0], "Q": [[1.0]], "nu": {"variant": "zero"}}'


def _error(capsys) -> dict:
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def _digests(out_dir: str) -> dict:
    return {name: calculate_sha256(os.path.join(out_dir, name))
            for name in sorted(os.listdir(out_dir)) if name != TIMESTAMPS_FILE}


def test_malformed_triplet_exits_with_schema_error(out_dir, capsys) -> None:
    code = main(["exponent", "--out", out_dir, "--set", 'triplet={"l": [0.0]}'])
    assert code == 2
    assert _error(capsys)["error"] == "schema"


def test_exponent_table(out_dir) -> None:
    assert main(["exponent", "--out", out_dir, "--set", f"triplet={BROWNIAN}", "--set", "points=5"]) == 0
    table = pd.read_csv(os.path.join(out_dir, "exponent.csv"))
    assert list(table.columns) == ["xi_1", "re_psi", "im_psi"]
    assert table["re_psi"].iloc[0] == pytest.approx(4.5)
    assert os.path.exists(os.path.join(out_dir, MANIFEST_FILE))


def test_brownian_construction_writes_every_dyadic_point(out_dir) -> None:
    assert main(["simulate", "--method", "bm-levy", "--set", "levels=10", "--seed", "7", "--out", out_dir]) == 0
    table = pd.read_csv(os.path.join(out_dir, "paths.csv"))
    assert len(table) == 1025
    manifest = load_json(os.path.join(out_dir, MANIFEST_FILE))
    assert manifest["seeds"]["seed"] == 7
    assert manifest["config"]["params"] == {"levels": 10}


def test_non_lipschitz_sde_is_rejected(out_dir, capsys) -> None:
    sde = f'sde={{"phi": {{"family": "sqrt_abs"}}, "driver": {BROWNIAN}}}'
    assert main(["simulate", "--method", "sde", "--set", sde, "--out", out_dir]) == 2
    assert _error(capsys)["error"] == "lipschitz"


def test_failed_check_exits_with_one(out_dir, capsys) -> None:
    code = main(["validate", "--suite", "cf", "--set", "n=500", "--set", "min_fraction=1.01", "--out", out_dir])
    assert code == 1
    assert _error(capsys)["error"] == "check_failed"
    assert os.path.exists(os.path.join(out_dir, "report.csv"))


def test_exit_dominated_symbol_estimate_exits_with_three(out_dir, capsys) -> None:
    code = main(["symbol", "--set", f"triplet={BROWNIAN}", "--set", "r=0.001", "--set", "n=200",
                 "--set", "xis=[1.0]", "--out", out_dir])
    assert code == 3
    assert _error(capsys)["error"] == "ExitDominates"


def test_replay_is_byte_identical(out_dir) -> None:
    argv = ["simulate", "--method", "levy-ito", "--set", "alpha=1.5", "--set", "eps=0.1",
            "--set", "n_paths=3", "--seed", "11", "--out", out_dir]
    assert main(argv) == 0
    first = _digests(out_dir)
    assert main(argv) == 0
    assert _digests(out_dir) == first
    assert "jumps.json" in first


def test_indices_output(out_dir) -> None:
    symbol = 'symbol={"family": "stable_like", "alpha": 1.3}'
    assert main(["indices", "--set", symbol, "--set", "xs=[0.0, 1.0]", "--out", out_dir]) == 0
    table = pd.read_csv(os.path.join(out_dir, "indices.csv"))
    assert len(table) == 2
    assert table["beta"].tolist() == pytest.approx([1.3, 1.3], abs=0.02)
    assert table["alpha"].tolist() == pytest.approx([1.3, 1.3])
    assert {"delta", "kappa", "sector_pass", "maximal_bound", "exit_lower", "exit_upper"} <= set(table.columns)


def test_config_file_is_merged_with_flags(tmp_path) -> None:
    doc = tmp_path / "run.json"
    doc.write_text(json.dumps({"seed": 3, "params": {"levels": 4}, "method": "bm-levy"}), encoding="utf-8")
    args = build_parser().parse_args(["simulate", "--config", str(doc), "--set", "levels=6"])
    cfg = config_from_args(args)
    assert cfg.seed == 3
    assert cfg.params == {"levels": 6}


def test_run_config_validation() -> None:
    with pytest.raises(ConfigError):
        RunConfig("simulate")
    with pytest.raises(ConfigError):
        RunConfig("exponent", seed=-1)
    with pytest.raises(ConfigError):
        RunConfig("exponent", format="xml")


def test_run_returns_files(out_dir) -> None:
    result = run(RunConfig("indices", params={"symbol": {"family": "brownian"}}, out=out_dir))
    assert [os.path.basename(p) for p in result.files] == ["indices.csv"]
    assert result.failures == []
