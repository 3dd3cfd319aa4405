# levytype/tests/test_run_all_experiments.py
import glob

import pandas as pd

import config
import run_all_experiments
from report_utils import CheckReport, save_results_to_csv


def _row(check, passed, error=""):
    return {"timestamp": "2024-01-01 00:00:00", "gate": "01_demo", "check": check, "n": 10, "lhs": 1.0,
            "rhs": 1.0, "se": 0.1, "passed": passed, "elapsed_seconds": 0.5, "error_message": error}


def test_gates_are_numbered_in_order() -> None:
    assert [g[0] for g in run_all_experiments.GATES] == list(range(1, 14))


def test_sanity_checks_accept_clean_results(tmp_path) -> None:
    path = str(tmp_path / "ok.csv")
    save_results_to_csv([_row("a", True), _row("b", True)], path)
    assert run_all_experiments.perform_sanity_checks(path)


def test_sanity_checks_flag_failures_and_errors(tmp_path) -> None:
    failed = str(tmp_path / "failed.csv")
    save_results_to_csv([_row("a", True), _row("b", False)], failed)
    assert not run_all_experiments.perform_sanity_checks(failed)
    raised = str(tmp_path / "raised.csv")
    save_results_to_csv([_row("a", False, "Run failed: ValueError - boom")], raised)
    assert not run_all_experiments.perform_sanity_checks(raised)
    assert not run_all_experiments.perform_sanity_checks(str(tmp_path / "missing.csv"))


def test_main_runs_selected_gates_and_survives_a_broken_one(tmp_path, monkeypatch) -> None:
    def passing(rng):
        return [CheckReport("fine", 1.0, 1.0, 0.1, True, 5)]

    def broken(rng):
        raise RuntimeError("boom")

    monkeypatch.setattr(config, "RESULTS_DIR", str(tmp_path))
    monkeypatch.setattr(run_all_experiments, "GATES", [(1, "passing", passing), (2, "broken", broken)])
    assert run_all_experiments.main({1}) == 0
    assert run_all_experiments.main() == 1
    frames = [pd.read_csv(p, keep_default_na=False) for p in sorted(glob.glob(str(tmp_path / "*.csv")))]
    rows = pd.concat(frames)
    assert "Run failed: RuntimeError - boom" in rows["error_message"].tolist()
