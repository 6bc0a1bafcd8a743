"""Render metric tables into rounded CSV/JSON tables, pivoted layouts and SVG figures.

Nothing here computes a metric: layouts and figures only reshape rows read
from the metrics directories.
"""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from ..agents import CM_ORDER
from ..stats import ZERO_K_CAP
from . import svg
from .analyze import read_metrics

PROFILED_CM = tuple(cm for cm in CM_ORDER if not cm.startswith("c0"))
FIGURE_ONLY = {"kde_curves"}


def fmt(v) -> str:
    """Table cell text; floats round half-even to two decimals."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        d = Decimal(repr(v)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
        s = format(d, "f")
        return "0.00" if s == "-0.00" else s
    return str(v)


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _models(tables) -> list[str]:
    seen = []
    for name in ("cell_status", "oos_validity"):
        for r in tables.get(name, {}).get("rows", []):
            if r.get("model") and r["model"] not in seen:
                seen.append(r["model"])
    return seen


def _index(rows, *keys):
    return {tuple(r[k] for k in keys): r for r in rows}


class Layouts:
    """Pivots metric rows into the fixed row/column arrangements of the published tables."""

    def __init__(self, tables):
        self.t = tables
        self.models = _models(tables)
        self.gaps: dict[str, int] = {}

    def _cell(self, row, key, name):
        if row is None or row.get(key) is None:
            self.gaps[name] = self.gaps.get(name, 0) + 1
            return ""
        return fmt(row[key]) + (row.get("stars", "") if key in ("coef", "delta", "t") else "")

    def regression(self, name, cohorts=(None,)):
        rows = self.t[name]["rows"]
        idx = {(r.get("cohort"), r["metric"], r["factor"]): r for r in rows}
        header = ["factor"]
        for cohort in cohorts:
            for m in ("k_error", "wasserstein", "zero_rate_error"):
                pre = f"{cohort}:" if cohort else ""
                header += [f"{pre}{m}:coef", f"{pre}{m}:p"]
        out = []
        for factor in ("agent", "model", "context", "instruction", "spearman_rho"):
            line = [factor]
            for cohort in cohorts:
                for m in ("k_error", "wasserstein", "zero_rate_error"):
                    r = idx.get((cohort, m, factor))
                    line += [self._cell(r, "coef", name), self._cell(r, "p_value", name)]
            out.append(line)
        return header, out

    def wasserstein_population(self):
        idx = _index(self.t["wasserstein_population"]["rows"], "agent", "model", "cm")
        header = ["config", "EWA"] + [f"{a}/{m}" for a in ("S", "R") for m in self.models]
        out = []
        for cm in CM_ORDER:
            line = [cm, self._cell(idx.get(("EWA", "", cm)), "w", "wasserstein_population")
                    if cm == "c0.m0" else "N.A."]
            for a in ("S", "R"):
                for m in self.models:
                    line.append(self._cell(idx.get((a, m, cm)), "w", "wasserstein_population"))
            out.append(line)
        return header, out

    def zero_rates(self):
        idx = _index(self.t["zero_rates"]["rows"], "agent", "model", "cm")
        out = []
        for m in self.models:
            for a in ("S", "R"):
                out.append([m, a] + [self._cell(idx.get((a, m, cm)), "zeros_per_100", "zero_rates")
                                     for cm in CM_ORDER])
        return ["model", "agent", *CM_ORDER], out

    def wasserstein_cohort(self):
        idx = _index(self.t["wasserstein_cohort"]["rows"], "cohort", "agent", "model", "cm")
        header = ["config"] + [f"{c}:{a}/{m}" for c in ("student", "expert") for a in ("S", "R") for m in self.models]
        out = []
        for cm in PROFILED_CM:
            out.append([cm] + [self._cell(idx.get((c, a, m, cm)), "w", "wasserstein_cohort")
                               for c in ("student", "expert") for a in ("S", "R") for m in self.models])
        return header, out

    def token_cost(self):
        idx = _index(self.t["token_cost"]["rows"], "agent", "model", "cm")
        out = []
        for a in ("S", "R"):
            for key, lab in (("tokens_in_mean", "In"), ("tokens_out_mean", "Out")):
                out.append([a, lab] + [self._cell(idx.get((a, "all", cm)), key, "token_cost") for cm in CM_ORDER])
        return ["agent", "direction", *CM_ORDER], out

    def oos_comparison(self):
        idx = _index(self.t["oos_comparison"]["rows"], "agent", "model", "cm")
        header = ["config"] + [f"{a}/{m}:{k}" for a in ("S", "R") for m in self.models for k in ("W", "t")]
        out = []
        for cm in CM_ORDER:
            line = [cm]
            for a in ("S", "R"):
                for m in self.models:
                    r = idx.get((a, m, cm))
                    line += [self._cell(r, "w", "oos_comparison"), self._cell(r, "t", "oos_comparison")]
            out.append(line)
        return header, out

    def oos_validity(self):
        idx = _index(self.t["oos_validity"]["rows"], "agent", "model", "cm")
        out = []
        for a in ("S", "R"):
            for m in self.models:
                out.append([a, m] + [self._cell(idx.get((a, m, cm)), "validity_ratio", "oos_validity")
                                     for cm in CM_ORDER])
        return ["agent", "model", *CM_ORDER], out


def _heat_panels(rows, models, agents, cms, key, with_ewa=False):
    idx = _index(rows, "agent", "model", "cm")
    panels = []
    for m in models:
        vals, labels, names = [], [], []
        for a in agents:
            vrow, lrow = [], []
            for cm in cms:
                r = idx.get((a, "" if a == "EWA" else m, cm))
                v = None if r is None else r.get(key)
                vrow.append(v)
                lrow.append("" if v is None else fmt(v) + (r.get("stars", "") or ""))
            vals.append(vrow)
            labels.append(lrow)
            names.append(a)
        panels.append((m, names, list(cms), vals, labels))
    return panels


def _curves(tables):
    series = defaultdict(lambda: ([], []))
    for r in tables.get("kde_curves", {}).get("rows", []):
        xs, ys = series[r["series"]]
        xs.append(r["x"])
        ys.append(r["density"])
    return series


def figures(tables, out: Path) -> list[str]:
    written = []
    models = _models(tables)
    curves = _curves(tables)
    k_lines = [50 * (2 / 3) ** k for k in range(0, 9)]

    def save(name, text):
        (out / name).write_text(text, encoding="utf-8")
        written.append(name)

    if curves:
        panel = [("cohorts", [(lab, *curves[f"human/{lab}"], col, 1.0) for lab, col in
                              (("student", "#85c1e9"), ("expert", "#1f618d"), ("pooled", "#333333"))
                              if f"human/{lab}" in curves])]
        save("fig_human_cohorts.svg", svg.line_chart(panel, "Human guesses by cohort", (0, 100), "guess",
                                                     "density", vlines=k_lines, ncols=1))
        if "EWA/pooled" in curves:
            panel = [("EWA vs humans", [("human", *curves["human/pooled"], "#333333", 1.0),
                                        ("EWA", *curves["EWA/pooled"], svg.PALETTE[0], 1.0)])]
            save("fig_ewa_kde.svg", svg.line_chart(panel, "EWA benchmark against pooled human guesses", (0, 100),
                                                   "guess", "density", vlines=k_lines, ncols=1))
        for agent, name in (("S", "simple"), ("R", "reasoner")):
            panels = []
            for cm in CM_ORDER:
                series = [("human", *curves["human/pooled"], "#333333", 1.0)]
                for j, m in enumerate(models):
                    cid = f"{agent}.{m}.{cm}"
                    colour = svg.PALETTE[j % len(svg.PALETTE)]
                    if f"{cid}/pooled" in curves:
                        series.append((m, *curves[f"{cid}/pooled"], colour, 1.0))
                    for role, op in (("student", 0.35), ("expert", 0.6)):
                        if f"{cid}/{role}" in curves:
                            series.append((f"{m}:{role}", *curves[f"{cid}/{role}"], colour, op))
                panels.append((cm, series))
            save(f"fig_kde_{name}.svg", svg.line_chart(panels, f"Guess densities, {name} agents", (0, 100),
                                                       "guess", "density", vlines=k_lines))
    if "ame_heatmap" in tables and models:
        panels = _heat_panels(tables["ame_heatmap"]["rows"], models, ("EWA", "S", "R"), CM_ORDER, "ame")
        save("fig_ame_heatmap.svg", svg.heatmap(panels, "Absolute mean k-level error vs humans"))
    if "delta_heatmap" in tables and models:
        panels = _heat_panels(tables["delta_heatmap"]["rows"], models, ("S", "R"), PROFILED_CM, "delta")
        save("fig_delta_heatmap.svg", svg.heatmap(panels, "Cohort delta (* p<0.05, ** p<0.01, *** p<0.001)",
                                                  diverging=True))
    if "oos_validity" in tables:
        idx = _index(tables["oos_validity"]["rows"], "agent", "model", "cm")
        series = []
        for j, (a, m) in enumerate((a, m) for a in ("S", "R") for m in models):
            pts = [(i, idx[(a, m, cm)]["validity_ratio"]) for i, cm in enumerate(CM_ORDER) if (a, m, cm) in idx]
            if pts:
                series.append((f"{a}/{m}", [p[0] for p in pts], [p[1] for p in pts],
                               svg.PALETTE[j % len(svg.PALETTE)], 1.0))
        save("fig_validity_trend.svg", svg.line_chart([("valid-guess ratio by config (c0.m0 .. cbio.m1)", series)],
                                                      "Shifted-range validity", (0, len(CM_ORDER) - 1),
                                                      "configuration index", "ratio", ncols=1))
    return written


def report(metric_dirs, out_dir, with_svg: bool = True) -> dict:
    tables = read_metrics(metric_dirs if isinstance(metric_dirs, (list, tuple)) else [metric_dirs])
    out = Path(out_dir)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    (out / "layouts").mkdir(parents=True, exist_ok=True)
    for name, table in sorted(tables.items()):
        if name in FIGURE_ONLY:
            continue
        rows = [[fmt(r.get(c)) for c in table["columns"]] for r in table["rows"]]
        _write_rows(out / "tables" / f"{name}.csv", table["columns"], rows)
        (out / "tables" / f"{name}.json").write_text(json.dumps(
            {"name": name, "columns": table["columns"], "rows": rows, "notes": table.get("notes", [])},
            indent=1, sort_keys=True) + "\n")

    lay = Layouts(tables)
    plan = {
        "regression_population": ("regression_population", lambda: lay.regression("regression_population")),
        "wasserstein_population": ("wasserstein_population", lay.wasserstein_population),
        "zero_rates": ("zero_rates", lay.zero_rates),
        "wasserstein_cohort": ("wasserstein_cohort", lay.wasserstein_cohort),
        "regression_cohort": ("regression_cohort",
                              lambda: lay.regression("regression_cohort", ("student", "expert"))),
        "token_cost": ("token_cost", lay.token_cost),
        "oos_comparison": ("oos_comparison", lay.oos_comparison),
        "oos_validity": ("oos_validity", lay.oos_validity),
    }
    layouts = []
    for name, (source, build) in plan.items():
        if source not in tables:
            continue
        header, rows = build()
        _write_rows(out / "layouts" / f"{name}.csv", header, rows)
        layouts.append(name)
    written = figures(tables, out) if with_svg else []
    summary = {"tables": sorted(n for n in tables if n not in FIGURE_ONLY), "layouts": layouts,
               "figures": written, "gaps": lay.gaps, "k_zero_cap": fmt(ZERO_K_CAP)}
    (out / "report_index.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary
