# levytype/tests/test_report_utils.py
import csv
import os

import numpy as np
import pytest

import config
from errors import CheckFailed, ConfigError, ExitDominates, InvalidInput, LevyTypeError, SchemaError
from report_utils import (
    RESULT_FIELDNAMES,
    CheckReport,
    calculate_sha256,
    jsonable,
    mean_and_se,
    save_results_to_csv,
    se_check,
    timed,
    within_se,
)


def test_within_se_uses_three_standard_errors() -> None:
    assert within_se(1.0, 1.29, 0.1)
    assert not within_se(1.0, 1.31, 0.1)
    assert within_se(1.0 + 0.2j, 1.0, 0.1)
    assert within_se(0.0, 0.0, 0.0)


def test_mean_and_se() -> None:
    mean, se = mean_and_se([1.0, 2.0, 3.0, 4.0])
    assert mean == pytest.approx(2.5)
    assert se == pytest.approx(np.std([1.0, 2.0, 3.0, 4.0], ddof=1) / 2.0)
    _, single = mean_and_se([5.0])
    assert single == 0.0


def test_complex_mean_and_se() -> None:
    mean, se = mean_and_se(np.array([1j, -1j]))
    assert mean == 0
    assert se == pytest.approx(1.0)


def test_jsonable_handles_numpy_and_complex() -> None:
    value = {"a": np.float64(1.5), "b": np.arange(2), "c": 2 - 1j, "d": (np.bool_(True),)}
    assert jsonable(value) == {"a": 1.5, "b": [0, 1], "c": [2.0, -1.0], "d": [True]}


def test_check_report_dict_and_row() -> None:
    report = se_check("demo", 1.0, 1.0, 0.01, n=10, t=0.5)
    assert report.passed
    assert report.to_dict() == {"check": "demo", "lhs": 1.0, "rhs": 1.0, "se": 0.01, "pass": True, "n": 10,
                                "details": {"t": 0.5}}
    row = report.to_row()
    assert set(row) <= set(RESULT_FIELDNAMES)
    assert CheckReport("bare", 0.0, 1.0, 0.0, False).to_dict()["n"] == 0


def test_save_results_appends_with_single_header(tmp_path) -> None:
    path = str(tmp_path / "out" / "results.csv")
    save_results_to_csv([{"gate": 1, "check": "a", "passed": True}], path)
    save_results_to_csv([{"gate": 2, "check": "b", "passed": False, "unknown": "x"}], path)
    save_results_to_csv([], path)
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert [r["check"] for r in rows] == ["a", "b"]
    assert list(rows[0]) == RESULT_FIELDNAMES


def test_sha256(tmp_path) -> None:
    path = tmp_path / "f.txt"
    path.write_bytes(b"abc")
    assert calculate_sha256(str(path)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    assert calculate_sha256(str(tmp_path / "missing")) == ""


def test_timed_records_duration() -> None:
    record = {}
    with timed(record):
        pass
    assert record["elapsed_seconds"] >= 0.0


def test_error_exit_codes() -> None:
    assert CheckFailed("x").exit_code == 1
    assert SchemaError("x").exit_code == 2
    assert ExitDominates("x").exit_code == 3
    assert issubclass(ConfigError, InvalidInput)
    assert issubclass(ExitDominates, LevyTypeError)


def test_threads_from_environment(monkeypatch) -> None:
    monkeypatch.delenv(config.THREADS_ENV_VAR, raising=False)
    assert config.threads() == config.DEFAULT_THREADS
    monkeypatch.setenv(config.THREADS_ENV_VAR, "2")
    assert config.threads() == 2
    for bad in ("zero", "0"):
        monkeypatch.setenv(config.THREADS_ENV_VAR, bad)
        with pytest.raises(ConfigError):
            config.threads()


def test_output_directories_exist() -> None:
    assert os.path.isdir(config.RESULTS_DIR)
    assert os.path.isdir(config.RUNS_DIR)
