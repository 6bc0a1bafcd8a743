"""Alignment metrics and hypothesis tests.

Test statistics are computed here directly; only the t, F and normal tail
probabilities come from ``scipy.special``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

ZERO_K_CAP = math.log(1 / 50) / math.log(2 / 3)


# -- descriptive -------------------------------------------------------------

def _arr(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    return a


def _nonempty(x, name="sample") -> np.ndarray:
    a = _arr(x)
    if a.size == 0:
        raise ValueError(f"{name} is empty")
    return a


def skewness(x) -> float:
    """Adjusted Fisher-Pearson skewness G1; nan below three observations or with zero spread."""
    a = _arr(x)
    n = a.size
    if n < 3:
        return float("nan")
    d = a - a.mean()
    m2 = np.mean(d ** 2)
    if m2 == 0:
        return float("nan")
    g1 = np.mean(d ** 3) / m2 ** 1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def zero_rate(sample) -> float:
    a = _nonempty(sample)
    return float(np.mean(a == 0))


# -- k-levels ----------------------------------------------------------------

def to_k_level(guess, a0: float = 50.0, p: float = 2 / 3) -> float:
    """Reasoning level k solving ``p**k * a0 = guess``; guess 0 is capped at the level of guess 1."""
    if guess < 0:
        raise ValueError(f"k-level undefined for negative guess {guess}")
    if guess == 0:
        return math.log(1 / a0) / math.log(p)
    return math.log(guess / a0) / math.log(p)


def to_k_levels(guesses, a0: float = 50.0, p: float = 2 / 3, zeros: str = "cap") -> np.ndarray:
    g = _arr(guesses)
    if np.any(g < 0):
        raise ValueError("k-level undefined for negative guesses")
    if zeros == "exclude":
        g = g[g > 0]
    elif zeros != "cap":
        raise ValueError(f"unknown zero policy {zeros!r}")
    return np.log(np.where(g == 0, 1.0, g) / a0) / math.log(p)


def ame(true_ks, pred_ks) -> float:
    return abs(float(np.mean(_nonempty(true_ks, "true"))) - float(np.mean(_nonempty(pred_ks, "pred"))))


def delta_subpop(student_true, student_pred, expert_true, expert_pred) -> float:
    """Signed difference of cohort AMEs; negative when the agent sits closer to experts."""
    return ame(student_true, student_pred) - ame(expert_true, expert_pred)


# -- distributions -----------------------------------------------------------

def wasserstein_1d(a, b) -> float:
    """Exact 1-D earth mover's distance between two empirical distributions."""
    u = np.sort(_nonempty(a, "a"))
    v = np.sort(_nonempty(b, "b"))
    pts = np.concatenate([u, v])
    pts.sort(kind="mergesort")
    widths = np.diff(pts)
    cdf_u = np.searchsorted(u, pts[:-1], side="right") / u.size
    cdf_v = np.searchsorted(v, pts[:-1], side="right") / v.size
    return float(np.sum(np.abs(cdf_u - cdf_v) * widths))


def silverman_bandwidth(x) -> float:
    a = _arr(x)
    sd = a.std(ddof=1)
    q75, q25 = np.percentile(a, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if spread <= 0:
        spread = 1.0
    return 0.9 * spread * a.size ** (-0.2)


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def kde(sample, bandwidth: float | None = None, grid=None, low: float = 0, high: float = 100,
        points: int = 201) -> KdeCurve:
    a = _arr(sample)
    if a.size < 2:
        raise ValueError("KDE needs at least two observations")
    h = silverman_bandwidth(a) if bandwidth is None else float(bandwidth)
    x = np.linspace(low, high, points) if grid is None else np.asarray(grid, dtype=float)
    z = (x[:, None] - a[None, :]) / h
    dens = np.exp(-0.5 * z ** 2).sum(axis=1) / (a.size * h * math.sqrt(2 * math.pi))
    return KdeCurve(x, dens, h)


def wasserstein_kde(a, b, low: float = 0, high: float = 100, points: int = 1001) -> float:
    """Earth mover's distance between KDE-smoothed densities on a shared grid."""
    pad = 0.25 * (high - low)
    grid = np.linspace(low - pad, high + pad, points)
    fa = kde(a, grid=grid).density
    fb = kde(b, grid=grid).density
    step = grid[1] - grid[0]
    ca = np.cumsum(fa) * step
    cb = np.cumsum(fb) * step
    return float(np.sum(np.abs(ca / ca[-1] - cb / cb[-1])) * step)


# -- tests -------------------------------------------------------------------

@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    test_kind: str
    n_a: int
    n_b: int
    df: float | None = None
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class


def _two_sided_t(t: float, df: float) -> float:
    return float(min(1.0, 2.0 * special.stdtr(df, -abs(t))))


def levene(a, b, center: str = "mean") -> TestResult:
    groups = [_arr(a), _arr(b)]
    if min(g.size for g in groups) < 2:
        raise ValueError("Levene's test needs at least two observations per group")
    loc = np.mean if center == "mean" else np.median
    z = [np.abs(g - loc(g)) for g in groups]
    n = np.array([g.size for g in groups], dtype=float)
    total = n.sum()
    zbar_i = np.array([zi.mean() for zi in z])
    zbar = np.concatenate(z).mean()
    between = float(np.sum(n * (zbar_i - zbar) ** 2))
    within = float(sum(np.sum((zi - m) ** 2) for zi, m in zip(z, zbar_i)))
    kind = "levene" if center == "mean" else "brown_forsythe"
    if within == 0:
        return TestResult(0.0 if between == 0 else float("nan"), 1.0, kind, int(n[0]), int(n[1]),
                          degenerate=True)
    k = 2
    w = (total - k) / (k - 1) * between / within
    p = float(special.fdtrc(k - 1, total - k, w))
    return TestResult(float(w), p, kind, int(n[0]), int(n[1]), df=float(total - k))


def t_test(a, b, equal_var: bool = True) -> TestResult:
    x, y = _arr(a), _arr(b)
    if x.size < 2 or y.size < 2:
        raise ValueError("t-test needs at least two observations per group")
    n1, n2 = x.size, y.size
    v1, v2 = x.var(ddof=1), y.var(ddof=1)
    diff = x.mean() - y.mean()
    if equal_var:
        kind = "t_equal_var"
        df = n1 + n2 - 2
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(sp2 * (1 / n1 + 1 / n2))
    else:
        kind = "welch"
        s1, s2 = v1 / n1, v2 / n2
        se = math.sqrt(s1 + s2)
        df = (s1 + s2) ** 2 / (s1 ** 2 / (n1 - 1) + s2 ** 2 / (n2 - 1)) if se > 0 else float(n1 + n2 - 2)
    if se == 0:
        t = 0.0 if diff == 0 else math.copysign(float("inf"), diff)
        return TestResult(t, 1.0 if diff == 0 else 0.0, kind, n1, n2, df=df, degenerate=True)
    t = diff / se
    return TestResult(float(t), _two_sided_t(t, df), kind, n1, n2, df=float(df))


def welch(a, b) -> TestResult:
    return t_test(a, b, equal_var=False)


def rankdata(x) -> np.ndarray:
    """Average ranks (1-based) with ties sharing the mean of their positions."""
    a = _arr(x)
    order = np.argsort(a, kind="mergesort")
    s = a[order]
    ranks = np.empty(a.size)
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _mw_exact_pvalue(ranks_doubled: np.ndarray, n_a: int, r_obs2: int) -> float:
    """Two-sided exact p-value from the permutation law of the (doubled) rank sum."""
    counts = {(0, 0): 1}
    for r in ranks_doubled:
        nxt = dict(counts)
        for (k, s), c in counts.items():
            if k < n_a:
                key = (k + 1, s + int(r))
                nxt[key] = nxt.get(key, 0) + c
        counts = nxt
    law = {s: c for (k, s), c in counts.items() if k == n_a}
    total = sum(law.values())
    centre = n_a * (len(ranks_doubled) + 1)  # doubled mean rank sum
    dev = abs(r_obs2 - centre)
    return min(1.0, sum(c for s, c in law.items() if abs(s - centre) >= dev) / total)


def mann_whitney_u(a, b, method: str = "asymptotic") -> TestResult:
    """U for sample ``a`` with a tie-corrected, continuity-corrected normal p-value.

    ``method="exact"`` enumerates the permutation law of the rank sum instead.
    """
    x, y = _nonempty(a, "a"), _nonempty(b, "b")
    n1, n2 = x.size, y.size
    ranks = rankdata(np.concatenate([x, y]))
    r1 = ranks[:n1].sum()
    u = r1 - n1 * (n1 + 1) / 2
    if method == "exact":
        p = _mw_exact_pvalue(np.rint(2 * ranks).astype(int), n1, int(round(2 * r1)))
        return TestResult(float(u), p, "mann_whitney_u", n1, n2, extra={"method": "exact"})
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = np.sum(tie_counts ** 3 - tie_counts) / (n * (n - 1))
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    mu = n1 * n2 / 2
    if var <= 0:
        return TestResult(float(u), 1.0, "mann_whitney_u", n1, n2, degenerate=True)
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = float(min(1.0, 2 * special.ndtr(-z)))
    return TestResult(float(u), p, "mann_whitney_u", n1, n2, extra={"method": "asymptotic", "z": z})


def choose_test(a, b, alpha: float = 0.05, levene_center: str = "mean") -> TestResult:
    """Mann-Whitney under severe skew (|G1| > 2), otherwise Levene-gated Student or Welch t."""
    x, y = _arr(a), _arr(b)
    skews = [abs(s) for s in (skewness(x), skewness(y)) if not math.isnan(s)]
    if skews and max(skews) > 2:
        res = mann_whitney_u(x, y)
        return TestResult(res.statistic, res.p_value, res.test_kind, res.n_a, res.n_b,
                          extra={**res.extra, "max_abs_skew": max(skews)})
    lev = levene(x, y, center=levene_center)
    res = t_test(x, y, equal_var=lev.p_value >= alpha)
    return TestResult(res.statistic, res.p_value, res.test_kind, res.n_a, res.n_b, df=res.df,
                      degenerate=res.degenerate, extra={"levene_p": lev.p_value})


def pearson_r(x, y) -> float:
    a, b = _arr(x), _arr(y)
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.sum(da ** 2) * np.sum(db ** 2)))
    if denom == 0:
        return float("nan")
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))


def spearman(x, y) -> TestResult:
    a, b = _arr(x), _arr(y)
    if a.size != b.size:
        raise ValueError("Spearman correlation needs paired samples of equal length")
    if a.size < 3:
        raise ValueError("Spearman correlation needs at least three pairs")
    n = a.size
    rho = pearson_r(rankdata(a), rankdata(b))
    if math.isnan(rho):
        return TestResult(float("nan"), float("nan"), "spearman", n, n, degenerate=True)
    df = n - 2
    if abs(rho) == 1.0:
        return TestResult(rho, 0.0, "spearman", n, n, df=df)
    t = rho * math.sqrt(df / (1 - rho ** 2))
    return TestResult(rho, _two_sided_t(t, df), "spearman", n, n, df=df)


def stars(p: float) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# -- regression --------------------------------------------------------------

class RankDeficiencyError(ValueError):
    def __init__(self, column: str):
        super().__init__(f"design matrix is rank deficient at column {column!r}")
        self.column = column


@dataclass(frozen=True)
class RegressionFit:
    names: list
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    n: int
    df_resid: int
    r2: float

    def rows(self) -> list[dict]:
        return [{"factor": nm, "coef": float(c), "se": float(s), "t": float(t), "p_value": float(p)}
                for nm, c, s, t, p in zip(self.names, self.coef, self.se, self.t, self.p)]

    def __getitem__(self, name: str) -> dict:
        return self.rows()[self.names.index(name)]


def ols(factors, y, names=None, intercept: bool = True) -> RegressionFit:
    X = np.asarray(factors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
    if intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["intercept"] + names
    yv = _arr(y)
    n, k = X.shape
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} observations for {k} coefficients")
    for j in range(1, k + 1):
        if np.linalg.matrix_rank(X[:, :j]) < j:
            raise RankDeficiencyError(names[j - 1])
    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ yv)
    resid = yv - X @ coef
    df = n - k
    rss = float(resid @ resid)
    sigma2 = rss / df
    rinv = np.linalg.inv(r)
    se = np.sqrt(sigma2 * np.sum(rinv ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = np.array([_two_sided_t(ti, df) if np.isfinite(ti) else (0.0 if np.isinf(ti) else float("nan"))
                  for ti in t])
    tss = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1 - rss / tss if tss > 0 else float("nan")
    return RegressionFit(names, coef, se, t, p, n, df, r2)


# -- sophistication ----------------------------------------------------------

_AGENT_ORD = {"ewa": 0, "simple": 1, "reasoner": 2}
_CONTEXT_ORD = {"none": 0, "simple_profile": 1, "biography": 2}


def sophistication_factors(config) -> dict:
    """Ordinal encodings (agent, model, context, instruction) of an AgentConfig or Cell."""
    kind = config.agent_kind
    ctx = getattr(config, "context_kind", None) or config.context.kind
    moa = config.moa if hasattr(config, "moa") else config.instruction.moa
    model = getattr(config, "model_ordinal", None)
    return {"agent": _AGENT_ORD[kind], "model": int(model or 0) if kind != "ewa" else 0,
            "context": _CONTEXT_ORD[ctx], "instruction": int(bool(moa))}


def sophistication_score(config) -> int:
    return sum(sophistication_factors(config).values())
