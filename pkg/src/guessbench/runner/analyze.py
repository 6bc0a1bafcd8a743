"""Turn trace files plus human cohorts into metric tables.

Every table is a plain ``{"name", "columns", "rows", "notes"}`` mapping; the
report stage only reshapes these rows and never computes new values.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .. import stats
from ..agents import AGENT_SYMBOLS, CM_ORDER, CONTEXT_SYMBOLS, ReasoningTrace
from ..human import CohortSample, pooled, summarize
from .config import AnalysisFlags

FACTORS = ("agent", "model", "context", "instruction")
METRICS = ("k_error", "wasserstein", "zero_rate_error")


def make_table(name: str, columns, rows, notes=()) -> dict:
    return {"name": name, "columns": list(columns), "rows": list(rows), "notes": list(notes)}


def load_traces(path) -> list[ReasoningTrace]:
    path = Path(path)
    tdir = path / "traces" if (path / "traces").is_dir() else path
    out = []
    for f in sorted(tdir.glob("*.jsonl")):
        for line in f.read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(ReasoningTrace.from_json(line))
    return out


class CellData:
    """Traces of one lattice cell, in canonical episode order."""

    def __init__(self, cell_id: str, traces: list[ReasoningTrace]):
        self.id = cell_id
        role_code = {"unspecified": 0, "student": 1, "expert": 2}
        self.traces = sorted(traces, key=lambda t: (role_code[t.role], int(t.episode_id.rsplit("/", 1)[1])))
        cfg = self.traces[0].config
        self.agent_kind = cfg["agent_kind"]
        self.agent = AGENT_SYMBOLS[self.agent_kind]
        self.model = cfg.get("llm_model")
        self.model_ordinal = cfg.get("model_ordinal")
        self.context_kind = cfg["context"]
        self.moa = bool(cfg["moa"])
        self.cm = f"{CONTEXT_SYMBOLS[self.context_kind]}.{'m1' if self.moa else 'm0'}"
        self.game = self.traces[0].game

    @property
    def profiled(self) -> bool:
        return self.context_kind != "none"

    @property
    def factors(self) -> dict:
        return stats.sophistication_factors(self)

    def guesses(self, role: str | None = None) -> np.ndarray:
        return np.array([t.guess for t in self.traces if t.valid and (role is None or t.role == role)],
                         dtype=float)

    def sort_key(self):
        return (stats._AGENT_ORD[self.agent_kind], self.model_ordinal or 0, CM_ORDER.index(self.cm))

    def label(self) -> dict:
        return {"cell": self.id, "agent": self.agent, "model": self.model or "", "cm": self.cm}


def group_cells(traces) -> list[CellData]:
    groups = defaultdict(list)
    for t in traces:
        groups[t.cell_id].append(t)
    cells = [CellData(cid, ts) for cid, ts in groups.items()]
    return sorted(cells, key=CellData.sort_key)


def _k(guesses, game: dict, flags: AnalysisFlags) -> np.ndarray:
    low, high = int(game["low"]), int(game["high"])
    from fractions import Fraction
    p = float(Fraction(game["p"]))
    return stats.to_k_levels(np.asarray(guesses) - low, a0=(high - low) / 2, p=p, zeros=flags.zero_k)


def _nan_to_none(v):
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return None
    if isinstance(v, (np.floating,)):
        return _nan_to_none(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _clean(rows):
    return [{k: _nan_to_none(v) for k, v in r.items()} for r in rows]


def _regression_rows(metric: str, X, y, score, cohort=None) -> tuple[list, list]:
    notes, rows = [], []
    base = {"cohort": cohort} if cohort else {}
    try:
        fit = stats.ols(X, y, names=FACTORS)
        for r in fit.rows():
            rows.append({**base, "metric": metric, **r, "stars": stats.stars(r["p_value"]), "n": fit.n})
    except (ValueError, np.linalg.LinAlgError) as exc:
        notes.append(f"{cohort + ' ' if cohort else ''}{metric}: regression not estimable ({exc})")
    if len(y) >= 3:
        sp = stats.spearman(score, y)
        rows.append({**base, "metric": metric, "factor": "spearman_rho", "coef": sp.statistic,
                     "se": None, "t": None, "p_value": sp.p_value, "stars": stats.stars(sp.p_value),
                     "n": len(y)})
    return rows, notes


def analyze(traces, student: CohortSample, expert: CohortSample,
            flags: AnalysisFlags = AnalysisFlags()) -> dict:
    cells = group_cells(traces)
    if not cells:
        raise ValueError("no traces to analyse")
    game = cells[0].game
    low, high = int(game["low"]), int(game["high"])
    human = {"pooled": pooled(student, expert).array(), "student": student.array(),
             "expert": expert.array()}
    human_k = {c: _k(v, game, flags) for c, v in human.items()}

    def wdist(a, b):
        return stats.wasserstein_1d(a, b)

    def wkde(a, b):
        return stats.wasserstein_kde(a, b, low, high) if len(a) >= 2 and len(b) >= 2 else float("nan")

    def chosen_w(raw, smooth):
        return smooth if flags.wasserstein == "kde" else raw

    tables, notes = {}, []

    # -- cell status and failure budget
    status_rows, usable = [], []
    for c in cells:
        n = len(c.traces)
        failed = sum(t.status == "failed" for t in c.traces)
        valid = sum(t.valid for t in c.traces)
        rate = failed / n if n else 1.0
        flagged = rate > flags.failure_budget or valid == 0
        status_rows.append({**c.label(), "episodes": n, "valid": valid, "invalid": n - valid - failed,
                            "failed": failed, "failure_rate": rate, "llm_calls": sum(t.llm_calls for t in c.traces),
                            "flagged": flagged})
        if flagged:
            notes.append(f"cell {c.id} excluded: failure rate {rate:.2f} or no valid guesses")
        else:
            usable.append(c)
    tables["cell_status"] = make_table("cell_status", list(status_rows[0]), status_rows)

    # -- human benchmark
    hrows = []
    for name in ("student", "expert", "pooled"):
        s = summarize(CohortSample(name, human[name].astype(int)))
        hrows.append({"cohort": name, "n": s.n, "mean": s.mean, "sd": s.sd, "skewness": s.skewness,
                      "zero_rate": s.zero_rate, "k_mean": float(np.mean(human_k[name]))})
    lev = stats.levene(human["student"], human["expert"], center=flags.levene_center)
    tt = stats.t_test(human["student"], human["expert"], equal_var=True)
    tables["human_summary"] = make_table(
        "human_summary", list(hrows[0]), _clean(hrows),
        notes=[f"levene p={lev.p_value:.4f}; student-vs-expert t={tt.statistic:.4f} (p={tt.p_value:.4g})"])
    tables["human_tests"] = make_table("human_tests", ["test", "statistic", "p_value"], _clean([
        {"test": lev.test_kind, "statistic": lev.statistic, "p_value": lev.p_value},
        {"test": tt.test_kind, "statistic": tt.statistic, "p_value": tt.p_value}]))

    # -- per-cell population metrics
    pop_rows, zero_rows, ame_rows = [], [], []
    per_cell = {}
    h_zero = stats.zero_rate(human["pooled"])
    for c in usable:
        g = c.guesses()
        k = _k(g, game, flags)
        raw, smooth = wdist(g, human["pooled"]), wkde(g, human["pooled"])
        zr = stats.zero_rate(g)
        rec = {"ame": stats.ame(human_k["pooled"], k), "w": chosen_w(raw, smooth),
               "zero_err": abs(zr - h_zero) * 100, "k": k}
        per_cell[c.id] = rec
        pop_rows.append({**c.label(), "n": len(g), "w": rec["w"], "w_raw": raw, "w_kde": smooth})
        zero_rows.append({**c.label(), "n_valid": len(g), "zero_count": int(np.sum(g == 0)),
                          "zeros_per_100": zr * 100, "human_zeros_per_100": h_zero * 100,
                          "zero_rate_error": rec["zero_err"]})
        ame_rows.append({**c.label(), "ame": rec["ame"], "k_mean_agent": float(np.mean(k)),
                         "k_mean_human": float(np.mean(human_k["pooled"]))})
    tables["ame_heatmap"] = make_table("ame_heatmap", list(ame_rows[0]) if ame_rows else [], _clean(ame_rows))
    tables["wasserstein_population"] = make_table(
        "wasserstein_population", list(pop_rows[0]) if pop_rows else [], _clean(pop_rows),
        notes=[f"w uses the {flags.wasserstein} variant; w_raw and w_kde shown side by side"])
    tables["zero_rates"] = make_table("zero_rates", list(zero_rows[0]) if zero_rows else [], _clean(zero_rows))

    # -- EWA benchmark
    ewa = [c for c in usable if c.agent_kind == "ewa"]
    if ewa:
        g = ewa[0].guesses()
        res = stats.choose_test(g, human["pooled"], levene_center=flags.levene_center)
        tables["ewa_benchmark"] = make_table("ewa_benchmark", [], _clean([{
            "n": len(g), "mean": float(g.mean()), "sd": float(g.std(ddof=1)),
            "k_of_mean": stats.to_k_level(float(g.mean()) - low, (high - low) / 2),
            "k_mean": float(np.mean(_k(g, game, flags))), "zero_count": int(np.sum(g == 0)),
            "test_kind": res.test_kind, "statistic": res.statistic, "p_value": res.p_value,
            "w": per_cell["EWA"]["w"], "human_mean": float(human["pooled"].mean()),
            "human_sd": float(human["pooled"].std(ddof=1))}]))
        tables["ewa_benchmark"]["columns"] = list(tables["ewa_benchmark"]["rows"][0])
    else:
        notes.append("no EWA cell in traces")

    # -- subpopulation metrics
    cohort_rows, delta_rows = [], []
    for c in usable:
        if not c.profiled:
            continue
        ks = {}
        for role in ("student", "expert"):
            g = c.guesses(role)
            if len(g) == 0:
                continue
            ks[role] = _k(g, game, flags)
            raw, smooth = wdist(g, human[role]), wkde(g, human[role])
            cohort_rows.append({**c.label(), "cohort": role, "n": len(g), "w": chosen_w(raw, smooth),
                                "w_raw": raw, "w_kde": smooth,
                                "ame": stats.ame(human_k[role], ks[role]),
                                "zeros_per_100": stats.zero_rate(g) * 100,
                                "zero_rate_error": abs(stats.zero_rate(g) - stats.zero_rate(human[role])) * 100})
        if len(ks) == 2:
            d = stats.delta_subpop(human_k["student"], ks["student"], human_k["expert"], ks["expert"])
            if min(len(ks["student"]), len(ks["expert"])) >= 2:
                res = stats.choose_test(ks["student"], ks["expert"], levene_center=flags.levene_center)
                kind, stat, p = res.test_kind, res.statistic, res.p_value
            else:
                kind, stat, p = None, float("nan"), float("nan")
            delta_rows.append({**c.label(), "ame_student": stats.ame(human_k["student"], ks["student"]),
                               "ame_expert": stats.ame(human_k["expert"], ks["expert"]), "delta": d,
                               "test_kind": kind, "statistic": stat, "p_value": p, "stars": stats.stars(p)})
    tables["wasserstein_cohort"] = make_table(
        "wasserstein_cohort", list(cohort_rows[0]) if cohort_rows else [], _clean(cohort_rows))
    tables["delta_heatmap"] = make_table(
        "delta_heatmap", list(delta_rows[0]) if delta_rows else [], _clean(delta_rows),
        notes=["significance: agent student-role vs expert-role k-levels, test chosen by the skew/Levene rule"])

    # -- regressions over LLM cells
    llm = [c for c in usable if c.agent_kind != "ewa"]
    reg_rows, reg_notes = [], []
    X_s, y_s, score_s = [], [], []
    for c in llm:
        f = [c.factors[n] for n in FACTORS]
        for kv in per_cell[c.id]["k"]:
            X_s.append(f)
            y_s.append(abs(kv - float(np.mean(human_k["pooled"]))))
            score_s.append(sum(f))
    for metric, X, y, score in (
            ("k_error", X_s, y_s, score_s),
            ("wasserstein", [[c.factors[n] for n in FACTORS] for c in llm],
             [per_cell[c.id]["w"] for c in llm], [stats.sophistication_score(c) for c in llm]),
            ("zero_rate_error", [[c.factors[n] for n in FACTORS] for c in llm],
             [per_cell[c.id]["zero_err"] for c in llm], [stats.sophistication_score(c) for c in llm])):
        rows, ns = _regression_rows(metric, X, y, score)
        reg_rows += rows
        reg_notes += ns
    tables["regression_population"] = make_table(
        "regression_population", ["metric", "factor", "coef", "se", "t", "p_value", "stars", "n"],
        _clean(reg_rows),
        notes=reg_notes + ["k_error is per episode |k_i - mean human k|; other metrics are per cell"])

    creg_rows, creg_notes = [], []
    by_role = {r: [row for row in cohort_rows if row["cohort"] == r] for r in ("student", "expert")}
    cell_by_id = {c.id: c for c in llm}
    for role in ("student", "expert"):
        role_cells = [cell_by_id[r["cell"]] for r in by_role[role] if r["cell"] in cell_by_id]
        hk = float(np.mean(human_k[role]))
        X_s, y_s, score_s = [], [], []
        for c in role_cells:
            f = [c.factors[n] for n in FACTORS]
            for kv in _k(c.guesses(role), game, flags):
                X_s.append(f)
                y_s.append(abs(kv - hk))
                score_s.append(sum(f))
        Xc = [[c.factors[n] for n in FACTORS] for c in role_cells]
        sc = [stats.sophistication_score(c) for c in role_cells]
        for metric, X, y, score in (
                ("k_error", X_s, y_s, score_s),
                ("wasserstein", Xc, [r["w"] for r in by_role[role] if r["cell"] in cell_by_id], sc),
                ("zero_rate_error", Xc, [r["zero_rate_error"] for r in by_role[role] if r["cell"] in cell_by_id], sc)):
            rows, ns = _regression_rows(metric, X, y, score, cohort=role)
            creg_rows += rows
            creg_notes += ns
    tables["regression_cohort"] = make_table(
        "regression_cohort", ["cohort", "metric", "factor", "coef", "se", "t", "p_value", "stars", "n"],
        _clean(creg_rows), notes=creg_notes)

    # -- token cost
    tok_rows = []
    agg = defaultdict(lambda: [0, 0, 0, False])
    for c in llm:
        tin = [t.tokens_in for t in c.traces]
        tout = [t.tokens_out for t in c.traces]
        approx = any(t.tokens_approx for t in c.traces)
        tok_rows.append({**c.label(), "episodes": len(c.traces), "tokens_in_mean": float(np.mean(tin)),
                         "tokens_out_mean": float(np.mean(tout)), "approximate": approx})
        a = agg[(c.agent, c.cm)]
        a[0] += sum(tin)
        a[1] += sum(tout)
        a[2] += len(c.traces)
        a[3] = a[3] or approx
    for (agent, cm), (si, so, n, approx) in sorted(agg.items(), key=lambda kv: (kv[0][0], CM_ORDER.index(kv[0][1]))):
        tok_rows.append({"cell": f"{agent}.all.{cm}", "agent": agent, "model": "all", "cm": cm, "episodes": n,
                         "tokens_in_mean": si / n, "tokens_out_mean": so / n, "approximate": approx})
    tables["token_cost"] = make_table("token_cost", list(tok_rows[0]) if tok_rows else [], _clean(tok_rows))

    # -- KDE curves (plotting only)
    curve_rows = []

    def add_curve(series, values):
        if len(values) >= 2:
            curve = stats.kde(values, low=low, high=high, points=101)
            curve_rows.extend({"series": series, "x": float(x), "density": float(d)}
                              for x, d in zip(curve.grid, curve.density))

    for name in ("pooled", "student", "expert"):
        add_curve(f"human/{name}", human[name])
    for c in usable:
        add_curve(f"{c.id}/pooled", c.guesses())
        if c.profiled:
            for role in ("student", "expert"):
                add_curve(f"{c.id}/{role}", c.guesses(role))
    tables["kde_curves"] = make_table("kde_curves", ["series", "x", "density"], curve_rows)

    tables["analysis_notes"] = make_table("analysis_notes", ["note"], [{"note": n} for n in notes])
    return tables


def write_metrics(tables: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        (out / f"{name}.json").write_text(json.dumps(table, indent=1, sort_keys=True, allow_nan=False) + "\n")
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=table["columns"], lineterminator="\n", extrasaction="ignore")
            w.writeheader()
            for row in table["rows"]:
                w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return out


def read_metrics(dirs) -> dict:
    tables = {}
    for d in dirs:
        for f in sorted(Path(d).glob("*.json")):
            tables[f.stem] = json.loads(f.read_text())
    return tables
