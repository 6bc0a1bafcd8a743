"""Shifted-range treatment: validity ratios and shift-normalised comparisons."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import stats
from .analyze import group_cells, load_traces, make_table, _clean, write_metrics
from .config import ExperimentConfig
from .simulate import simulate


class MissingBaselineError(FileNotFoundError):
    pass


def compare_runs(shifted_traces, baseline_traces, levene_center: str = "mean") -> dict:
    base = {c.id: c for c in group_cells(baseline_traces)}
    shifted = group_cells(shifted_traces)
    validity, comparison, notes = [], [], []
    for c in shifted:
        n = len(c.traces)
        valid = sum(t.valid for t in c.traces)
        validity.append({**c.label(), "sophistication": stats.sophistication_score(c), "episodes": n,
                         "valid": valid, "validity_ratio": valid / n if n else 0.0})
        if c.id not in base:
            notes.append(f"cell {c.id} has no baseline traces")
            continue
        b = base[c.id]
        offset = int(c.game["low"]) - int(b.game["low"])
        normalised = c.guesses() - offset
        original = b.guesses()
        row = {**c.label(), "n_original": len(original), "n_shifted_valid": len(normalised),
               "w": float("nan"), "w_kde": float("nan"), "t": float("nan"), "t_kind": None,
               "t_p": float("nan"), "chosen_test": None, "chosen_p": float("nan"), "stars": ""}
        if len(normalised) and len(original):
            row["w"] = stats.wasserstein_1d(original, normalised)
        if len(normalised) >= 2 and len(original) >= 2:
            low, high = int(b.game["low"]), int(b.game["high"])
            row["w_kde"] = stats.wasserstein_kde(original, normalised, low, high)
            lev = stats.levene(original, normalised, center=levene_center)
            tt = stats.t_test(original, normalised, equal_var=lev.p_value >= 0.05)
            chosen = stats.choose_test(original, normalised, levene_center=levene_center)
            row.update(t=tt.statistic, t_kind=tt.test_kind, t_p=tt.p_value, chosen_test=chosen.test_kind,
                       chosen_p=chosen.p_value, stars=stats.stars(tt.p_value))
        else:
            notes.append(f"cell {c.id}: too few valid shifted guesses for a comparison")
        comparison.append(row)
    return {
        "oos_validity": make_table("oos_validity", list(validity[0]) if validity else [], _clean(validity)),
        "oos_comparison": make_table(
            "oos_comparison", list(comparison[0]) if comparison else [], _clean(comparison),
            notes=notes + ["shifted guesses are normalised by subtracting the range offset"]),
    }


def validate_oos(config: ExperimentConfig, baseline_dir, resume: bool = False, backend=None) -> dict:
    baseline_dir = Path(baseline_dir)
    baseline = load_traces(baseline_dir) if baseline_dir.exists() else []
    if not baseline:
        raise MissingBaselineError(f"no baseline traces under {baseline_dir}")
    simulate(config, resume=resume, backend=backend)
    tables = compare_runs(load_traces(config.output_dir), baseline, config.analysis.levene_center)
    write_metrics(tables, Path(config.output_dir) / "metrics")
    return tables


def normalise(guesses, offset: int = 100) -> np.ndarray:
    return np.asarray(guesses) - offset
