import csv
import os

import numpy as np
import pytest

from gceals.linalg import Rng


def make_blobs(centers, n_per, noise=1.0, seed=0):
    """Gaussian blobs around the given centers; returns (x, labels)."""
    gen = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    parts = [c + noise * gen.normal(size=(n_per, centers.shape[1])) for c in centers]
    x = np.vstack(parts)
    y = np.repeat(np.arange(len(centers)), n_per)
    return x, y


def separated_centers(k, d, distance, seed=0):
    """k centers that are pairwise at least `distance` apart."""
    gen = np.random.default_rng(seed)
    while True:
        c = gen.normal(size=(k, d)) * distance
        gaps = [np.linalg.norm(c[i] - c[j]) for i in range(k) for j in range(i + 1, k)]
        if min(gaps) >= distance:
            return c


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


@pytest.fixture(scope="session")
def wdbc_csv(tmp_path_factory):
    """The 569x30 two-class breast-cancer diagnostic table as a CSV file."""
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    data = sklearn_datasets.load_breast_cancer()
    path = tmp_path_factory.mktemp("data") / "wdbc.csv"
    header = [f"a{j}" for j in range(data.data.shape[1])] + ["target"]
    rows = [[repr(float(v)) for v in row] + [int(lab)]
            for row, lab in zip(data.data, data.target)]
    write_csv(path, header, rows)
    return str(path)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record and print one pass/fail line for an acceptance criterion."""

    def check(number, ok, detail):
        status = "PASS" if ok else "FAIL"
        line = f"{status} criterion {number}: {detail}"
        print(line)
        request.config._acceptance_lines.append(line)
        assert ok, line

    return check
