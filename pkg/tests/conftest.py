"""Shared fixtures plus the per-criterion acceptance summary printed after the run."""
from __future__ import annotations

import time
from pathlib import Path

import pytest

from guessbench.human import load_fixture
from guessbench.runner import analyze, load_config, load_traces, simulate, write_metrics
from guessbench.runner.oos import validate_oos

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_RESULTS: dict[str, dict] = {}


@pytest.fixture
def detail(request):
    """Attach a short measurement string to the acceptance line of the current test."""
    def add(text: str):
        request.node.user_properties.append(("detail", text))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and not rep.skipped and not rep.failed):
        return
    cid, title = mark.args
    entry = _RESULTS.setdefault(cid, {"title": title, "passed": 0, "failed": 0, "skipped": 0, "details": []})
    if rep.failed:
        entry["failed"] += 1
    elif rep.skipped:
        entry["skipped"] += 1
        reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        entry["details"].append("skipped: " + reason.removeprefix("Skipped: "))
    elif rep.when == "call":
        entry["passed"] += 1
    if rep.when == "call":
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def order(k):
        return int(k[2:]) if k[2:].isdigit() else 99

    for cid in sorted(_RESULTS, key=order):
        e = _RESULTS[cid]
        status = "FAIL" if e["failed"] else ("PASS" if e["passed"] else "SKIP")
        extra = "; ".join(dict.fromkeys(e["details"]))
        tr.write_line(f"{cid} {status:4s} {e['title']}" + (f" [{extra}]" if extra else ""))


@pytest.fixture(scope="session")
def human():
    return load_fixture()


@pytest.fixture(scope="session")
def runs(tmp_path_factory, human):
    """Stub-matrix baseline, shifted and range-ignorant OOS runs, and the mimic run."""
    base = tmp_path_factory.mktemp("runs")
    out = {"timings": {}}
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "stub_matrix.yaml", output_dir=str(base / "matrix"))
    out["matrix_manifest"] = simulate(cfg)
    out["timings"]["simulate"] = time.perf_counter() - t0
    out["matrix"] = base / "matrix"
    out["matrix_config"] = cfg
    tables = analyze(load_traces(out["matrix"]), *human, cfg.analysis)
    write_metrics(tables, out["matrix"] / "metrics")
    out["matrix_tables"] = tables

    shift = load_config(CONFIGS / "oos_shift.yaml", output_dir=str(base / "shift"))
    out["shift_tables"] = validate_oos(shift, out["matrix"])
    out["shift"] = base / "shift"
    ignorant = load_config(CONFIGS / "oos_range_ignorant.yaml", output_dir=str(base / "ignorant"))
    out["ignorant_tables"] = validate_oos(ignorant, out["matrix"])

    mimic = load_config(CONFIGS / "mimic.yaml", output_dir=str(base / "mimic"))
    simulate(mimic)
    out["mimic_tables"] = analyze(load_traces(base / "mimic"), *human, mimic.analysis)
    out["base"] = base
    return out
