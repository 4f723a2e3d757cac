"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import json
import subprocess
import sys

import pytest

from fraclevy.io import read_manifest
from fraclevy.verification import run_suite

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def report():
    return run_suite("all")


def _checks(report, suite, prefix=""):
    out = [c for c in report.checks if c.suite == suite and c.name.startswith(prefix)]
    assert out, f"no checks {suite}/{prefix}*"
    return out


def _record(log, number, title, checks):
    ok = all(c.passed for c in checks)
    detail = "; ".join(f"{c.name}={c.value:.3g}" for c in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} {title}: {detail}"
    log.append(line)
    print(line)
    assert ok, "\n".join(c.line() for c in checks if not c.passed)


def test_criterion_1_isometry(report, acceptance_log):
    checks = _checks(report, "isometry")
    assert len(checks) == 6
    _record(acceptance_log, 1, "isometry (3 SE, 60 s per beta)", checks)


def test_criterion_2_operators(report, acceptance_log):
    checks = _checks(report, "operators", "semigroup[0.1,0.2]") + _checks(report, "operators", "parts")
    _record(acceptance_log, 2, "semigroup and integration by parts", checks)


def test_criterion_3_wick(report, acceptance_log):
    checks = _checks(report, "wick", "homomorphism") + _checks(report, "wick", "no_overflow")
    _record(acceptance_log, 3, "Wick/S homomorphism", checks)


def test_criterion_4_skorohod(report, acceptance_log):
    checks = _checks(report, "skorohod", "s_identity") + _checks(report, "skorohod", "kernel_route")
    _record(acceptance_log, 4, "Skorohod S-identity and kernel route", checks)


def test_criterion_5_transform(report, acceptance_log):
    checks = _checks(report, "skorohod", "transform")
    _record(acceptance_log, 5, "parameter transformation", checks)


def test_criterion_6_volterra(report, acceptance_log):
    checks = (
        _checks(report, "volterra", "constant_kernel_exp")
        + _checks(report, "volterra", "collocation_vs")
        + _checks(report, "volterra", "resolvent_identity")
    )
    _record(acceptance_log, 6, "Volterra", checks)


def test_criterion_7_sde(report, acceptance_log):
    checks = (
        _checks(report, "sde", "wick_exponential")
        + _checks(report, "sde", "decay_ratio")
        + _checks(report, "sde", "deterministic_exp")
    )
    _record(acceptance_log, 7, "SDE", checks)


def test_criterion_8_hoelder(report, acceptance_log):
    checks = _checks(report, "hoelder")
    _record(acceptance_log, 8, "noise Hoelder slope", checks)


def test_verify_all_runtime(report, acceptance_log):
    _record(acceptance_log, "runtime", "verify all within budget", _checks(report, "all", "seconds"))


def test_criterion_9_determinism(tmp_path, acceptance_log):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": {"kind": "simulate", "n_paths": 500}, "grid": {"h": 1 / 32}}))
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        subprocess.run(
            [sys.executable, "-m", "fraclevy.cli", "run", "--config", str(cfg), "--seed", "99", "--out", str(out)],
            check=True,
            capture_output=True,
        )
        runs.append(out)
    csvs = sorted(f for f in read_manifest(runs[0])["files"] if f.endswith(".csv"))
    same = [(runs[0] / f).read_bytes() == (runs[1] / f).read_bytes() for f in csvs]
    line = f"{'PASS' if all(same) and csvs else 'FAIL'} criterion 9 determinism: {sum(same)}/{len(csvs)} CSV files byte-identical"
    acceptance_log.append(line)
    print(line)
    assert csvs and all(same)
