# levytype/report_utils.py

import csv
import hashlib
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

import config

logger = logging.getLogger(__name__)

# Column order of every results CSV written by this project
RESULT_FIELDNAMES = [
    "timestamp", "gate", "check", "n", "lhs", "rhs", "se", "passed",
    "elapsed_seconds", "error_message",
]


# --- Helper Functions ---

def within_se(lhs, rhs, se, n_se: float = None) -> bool:
    """The acceptance rule |lhs - rhs| <= n_se * se + ABS_TOL."""
    n_se = config.N_SE if n_se is None else n_se
    return bool(abs(complex(lhs) - complex(rhs)) <= n_se * float(se) + config.ABS_TOL)


def mean_and_se(values) -> tuple:
    """Sample mean and its standard error (ddof=1; 0 for a single sample)."""
    arr = np.asarray(values)
    n = arr.shape[0]
    mean = arr.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(np.abs(mean), dtype=float)
    centred = arr - mean
    var = np.mean(np.abs(centred) ** 2, axis=0) * n / (n - 1)
    return mean, np.sqrt(var / n)


def jsonable(value):
    """numpy scalars, arrays and complex numbers as plain JSON values ([re, im] for complex)."""
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


@dataclass
class CheckReport:
    """Outcome of one statistical or numerical check: {lhs, rhs, se, pass}."""
    name: str
    lhs: object
    rhs: object
    se: float
    passed: bool
    n: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"check": self.name, "lhs": jsonable(self.lhs), "rhs": jsonable(self.rhs),
               "se": float(self.se), "pass": bool(self.passed), "n": int(self.n)}
        if self.details:
            out["details"] = jsonable(self.details)
        return out

    def to_row(self) -> dict:
        """Flat record for save_results_to_csv."""
        return {"check": self.name, "n": self.n, "lhs": repr(self.lhs), "rhs": repr(self.rhs),
                "se": repr(float(self.se)), "passed": self.passed}


def se_check(name: str, lhs, rhs, se, n: int = 0, n_se: float = None, **details) -> CheckReport:
    """A CheckReport judged by within_se."""
    return CheckReport(name, lhs, rhs, float(se), within_se(lhs, rhs, se, n_se), n, details)


def calculate_sha256(file_path: str) -> str:
    """SHA-256 of a file's bytes; empty string if the file does not exist."""
    if not os.path.isfile(file_path):
        return ""
    digest = hashlib.sha256()
    with open(file_path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@contextmanager
def timed(record: dict, key: str = "elapsed_seconds"):
    """Stores the wall-clock duration of the block in record[key]."""
    start = time.perf_counter()
    try:
        yield record
    finally:
        record[key] = time.perf_counter() - start


# --- Saving Results ---

def save_results_to_csv(rows, csv_filepath=None, fieldnames=None):
    """Appends rows to a CSV file, writing the header when the file is new."""
    if not rows:
        return
    if csv_filepath is None:
        csv_filepath = config.DEFAULT_RESULTS_FILE
    fieldnames = fieldnames or RESULT_FIELDNAMES
    os.makedirs(os.path.dirname(os.path.abspath(csv_filepath)), exist_ok=True)
    file_exists = os.path.isfile(csv_filepath)
    try:
        with open(csv_filepath, mode="a", newline="", encoding="utf-8") as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=fieldnames, extrasaction="ignore")
            if not file_exists:
                writer.writeheader()
            for row in rows:
                writer.writerow(row)
        logger.info("results saved to/appended to %s", csv_filepath)
    except IOError as e:
        logger.error("could not save results to %s: %s", csv_filepath, e)
        raise


if __name__ == '__main__':
    config.setup_logging()
    report = se_check("demo", 1.0 + 0.001j, 1.0, 0.001, n=10 ** 6)
    print(report.to_dict())
