"""Human cohort data: CSV loading, summaries and the synthetic stand-in fixture."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import stats
from .game import GameSpec

COHORTS = ("student", "expert")


class HumanDataError(ValueError):
    """Malformed human dataset; ``problems`` lists ``(line, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.problems))


@dataclass(frozen=True)
class CohortSample:
    label: str
    guesses: tuple
    source: str = "external_csv"

    def __post_init__(self):
        object.__setattr__(self, "guesses", tuple(int(g) for g in self.guesses))

    def __len__(self):
        return len(self.guesses)

    def array(self) -> np.ndarray:
        return np.asarray(self.guesses, dtype=float)


@dataclass(frozen=True)
class CohortSummary:
    n: int
    mean: float
    sd: float
    skewness: float
    zero_rate: float
    min: int
    max: int


def pooled(student: CohortSample, expert: CohortSample) -> CohortSample:
    return CohortSample("pooled", student.guesses + expert.guesses, student.source)


def summarize(sample: CohortSample) -> CohortSummary:
    a = sample.array()
    if a.size == 0:
        raise ValueError("cannot summarise an empty cohort")
    sd = float(a.std(ddof=1)) if a.size >= 2 else float("nan")
    return CohortSummary(n=int(a.size), mean=float(a.mean()), sd=sd, skewness=stats.skewness(a),
                         zero_rate=stats.zero_rate(a), min=int(a.min()), max=int(a.max()))


def load_human_csv(path, spec: GameSpec = GameSpec()) -> tuple[CohortSample, CohortSample]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    found = {c: [] for c in COHORTS}
    problems = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["cohort", "guess"]:
            raise HumanDataError([(1, f"expected header 'cohort,guess', got {header!r}")])
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                problems.append((line, f"expected 2 fields, got {len(row)}"))
                continue
            cohort, raw = row[0].strip(), row[1].strip()
            if cohort not in found:
                problems.append((line, f"unknown cohort {cohort!r}"))
                continue
            try:
                guess = int(raw)
            except ValueError:
                problems.append((line, f"guess {raw!r} is not an integer"))
                continue
            if not spec.contains(guess):
                problems.append((line, f"guess {guess} outside [{spec.low}, {spec.high}]"))
                continue
            found[cohort].append(guess)
    if problems:
        raise HumanDataError(problems)
    source = "synthetic_fixture" if path.name.startswith("human_fixture") else "external_csv"
    return (CohortSample("student", found["student"], source),
            CohortSample("expert", found["expert"], source))


def write_human_csv(path, student: CohortSample, expert: CohortSample) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cohort", "guess"])
        for sample in (student, expert):
            for g in sample.guesses:
                w.writerow([sample.label, g])


def fixture_path() -> Path:
    return Path(str(resources.files("guessbench") / "data" / "human_fixture.csv"))


def load_fixture() -> tuple[CohortSample, CohortSample]:
    return load_human_csv(fixture_path())


# -- synthetic fixture ----------------------------------------------------------

@dataclass(frozen=True)
class FixtureTargets:
    """Published cohort statistics the fixture is tuned toward."""

    n_student: int = 168
    n_expert: int = 130
    zeros_student: int = 20      # 11.9 %
    zeros_expert: int = 49       # 37.7 %
    skew_student: float = 0.55
    skew_expert: float = 1.50
    pooled_mean: float = 29.05
    pooled_sd: float = 28.28
    levene_p: float = 0.4351
    t_equal_var: float = 4.04
    low: int = 1
    high: int = 100


def fixture_statistics(student, expert) -> dict:
    s, e = np.asarray(student, float), np.asarray(expert, float)
    both = np.concatenate([s, e])
    return {
        "skew_student": stats.skewness(s), "skew_expert": stats.skewness(e),
        "pooled_mean": float(both.mean()), "pooled_sd": float(both.std(ddof=1)),
        "levene_p": stats.levene(s, e).p_value, "t_equal_var": stats.t_test(s, e).statistic,
        "zero_student": stats.zero_rate(s), "zero_expert": stats.zero_rate(e),
    }


def _loss(st: dict, tg: FixtureTargets) -> float:
    terms = [
        ((st["skew_student"] - tg.skew_student) / 0.05) ** 2,
        ((st["skew_expert"] - tg.skew_expert) / 0.05) ** 2,
        ((st["pooled_mean"] - tg.pooled_mean) / 0.05) ** 2,
        ((st["pooled_sd"] - tg.pooled_sd) / 0.05) ** 2,
        ((st["levene_p"] - tg.levene_p) / 0.01) ** 2,
        ((st["t_equal_var"] - tg.t_equal_var) / 0.02) ** 2,
    ]
    return float(sum(terms))


class FixtureInfeasible(RuntimeError):
    pass


def make_fixture(targets: FixtureTargets = FixtureTargets(), seed: int = 2024, iterations: int = 40000,
                 tolerance: float = 1.0) -> tuple[CohortSample, CohortSample]:
    """Seeded local search over integer guesses until every target is hit.

    Zero counts are fixed up front; the non-zero guesses start from gamma-shaped
    draws and are nudged (singly or in opposing pairs), keeping a move only if
    the loss drops.
    """
    rng = np.random.default_rng(seed)
    n_s = targets.n_student - targets.zeros_student
    n_e = targets.n_expert - targets.zeros_expert
    start_s = rng.gamma(2.5, 15.0, n_s) + 5
    start_e = rng.gamma(1.5, 15.0, n_e) + 2
    nz = np.clip(np.rint(np.concatenate([start_s, start_e])), targets.low, targets.high).astype(int)
    zeros_s = np.zeros(targets.zeros_student, dtype=int)
    zeros_e = np.zeros(targets.zeros_expert, dtype=int)

    def split(v):
        return np.concatenate([zeros_s, v[:n_s]]), np.concatenate([zeros_e, v[n_s:]])

    best = _loss(fixture_statistics(*split(nz)), targets)
    for _ in range(iterations):
        if best < tolerance * 1e-2:
            break
        i = int(rng.integers(nz.size))
        step = int(rng.integers(1, 16)) * (1 if rng.random() < 0.5 else -1)
        moves = [(i, min(max(nz[i] + step, targets.low), targets.high))]
        if rng.random() < 0.5:
            # partner from the same cohort moves the other way, roughly keeping the mean
            lo, hi = (0, n_s) if i < n_s else (n_s, nz.size)
            j = int(rng.integers(lo, hi))
            if j != i:
                moves.append((j, min(max(nz[j] - step, targets.low), targets.high)))
        old = [(k, nz[k]) for k, _ in moves]
        for k, v in moves:
            nz[k] = v
        loss = _loss(fixture_statistics(*split(nz)), targets)
        if loss < best:
            best = loss
        else:
            for k, v in old:
                nz[k] = v
    if best > tolerance:
        raise FixtureInfeasible(f"fixture search stalled at loss {best:.3f}")
    s, e = split(nz)
    return (CohortSample("student", sorted(s.tolist()), "synthetic_fixture"),
            CohortSample("expert", sorted(e.tolist()), "synthetic_fixture"))


def relative_error(value: float, target: float) -> float:
    return abs(value - target) / abs(target) if target else math.inf
