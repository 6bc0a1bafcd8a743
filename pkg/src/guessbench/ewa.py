"""Self-tuning experience weighted attraction (EWA) benchmark agent.

Strategies are the integers of the game's action range; vectors below are
indexed by ``action - spec.low``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .game import GameDescription, GameSpec, translate, utility, utility_against


class EwaDivisionError(ZeroDivisionError):
    """The printed attraction update divides by zero once phi hits 0."""


@dataclass(frozen=True)
class EwaParams:
    lam: float = 2.39
    tau: float = 1.5
    kappa: float = 0.0
    n0: float = 1.0
    k_max: int = 10
    level0: str = "uniform"  # or "point": level-0 opponents all play the midpoint
    denominator_plus_one: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.level0 not in ("uniform", "point"):
            raise ValueError(f"unknown level-0 model {self.level0!r}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "tau": self.tau, "kappa": self.kappa, "n0": self.n0,
                "k_max": self.k_max, "level0": self.level0,
                "denominator_plus_one": self.denominator_plus_one}

    @classmethod
    def from_dict(cls, d: dict | None) -> "EwaParams":
        d = dict(d or {})
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True)
class ChLevels:
    weights: np.ndarray       # renormalised P(k), k = 0..k_max
    raw_weights: np.ndarray   # Poisson pmf before renormalisation
    guesses: list[int]        # a_k for each level


@dataclass(frozen=True)
class SurpriseComponents:
    h: np.ndarray  # cumulative opponent-strategy frequencies
    r: np.ndarray  # indicator of the latest opponent strategy
    s: float


@dataclass(frozen=True)
class AttractionState:
    attractions: np.ndarray
    n: float = 1.0
    t: int = 0
    opponent_history: tuple = ()
    phi: float = 1.0
    low: int = 0

    @property
    def strategies(self) -> np.ndarray:
        return np.arange(self.low, self.low + len(self.attractions))


def level_guess(k: int, spec: GameSpec) -> int:
    """``a_k``: the level-k guess, anchored at the range midpoint and shrunk by ``p**k`` toward ``low``."""
    exact = spec.low + (spec.midpoint - spec.low) * spec.p ** k
    return int(round(Fraction(exact)))


def poisson_ch_levels(params: EwaParams, spec: GameSpec | None = None) -> ChLevels:
    spec = spec or GameSpec()
    ks = range(params.k_max + 1)
    raw = np.array([math.exp(-params.tau) * params.tau ** k / math.factorial(k) for k in ks])
    return ChLevels(weights=raw / raw.sum(), raw_weights=raw, guesses=[level_guess(k, spec) for k in ks])


def init_attractions(spec: GameSpec, params: EwaParams) -> AttractionState:
    """Initial attractions as expected payoffs against the truncated Poisson-CH opponent mix."""
    ch = poisson_ch_levels(params, spec)
    actions = spec.actions
    if params.level0 == "uniform":
        level0 = np.mean([utility_against(actions, b, spec) for b in actions], axis=0)
    else:
        level0 = utility_against(actions, ch.guesses[0], spec)
    att = ch.weights[0] * level0
    for k in range(1, len(ch.weights)):
        att = att + ch.weights[k] * utility_against(actions, ch.guesses[k], spec)
    return AttractionState(attractions=att, n=params.n0, t=0, opponent_history=(), phi=1.0, low=spec.low)


def surprise(history, m: int, low: int = 0) -> SurpriseComponents:
    if len(history) == 0:
        raise ValueError("surprise index is undefined before any opponent play")
    idx = np.asarray(history, dtype=np.int64) - low
    if idx.min() < 0 or idx.max() >= m:
        raise ValueError("opponent strategy outside the strategy set")
    h = np.bincount(idx, minlength=m) / len(idx)
    r = np.zeros(m)
    r[idx[-1]] = 1.0
    return SurpriseComponents(h=h, r=r, s=float(np.sum((h - r) ** 2)))


def phi(s: float) -> float:
    return 1.0 - 0.5 * s


def update_experience_weight(n_prev: float, phi_t: float, params: EwaParams) -> float:
    return (1.0 - params.kappa) * phi_t * n_prev + 1.0


def reinforcement(j: int, own_play: int, opp_play: int, spec: GameSpec) -> float:
    foregone = utility(j, opp_play, spec)[0]
    realised = utility(own_play, opp_play, spec)[0]
    delta = 1.0 if foregone >= realised else 0.0
    chosen = 1.0 if j == own_play else 0.0
    return (delta + (1.0 - delta) * chosen) * foregone


def reinforcement_vector(own_play: int, opp_play: int, spec: GameSpec) -> np.ndarray:
    actions = spec.actions
    foregone = utility_against(actions, opp_play, spec)
    realised = utility(own_play, opp_play, spec)[0]
    delta = (foregone >= realised).astype(float)
    chosen = (actions == own_play).astype(float)
    return (delta + (1.0 - delta) * chosen) * foregone


def update_attractions(state: AttractionState, own_play: int, opp_play: int,
                       spec: GameSpec, params: EwaParams) -> AttractionState:
    history = state.opponent_history + (int(opp_play),)
    phi_t = phi(surprise(history, len(state.attractions), state.low).s)
    memory = phi_t * state.n * state.attractions
    divisor = state.n * phi_t * (1.0 - params.kappa)
    if params.denominator_plus_one:
        divisor += 1.0
    if divisor == 0:
        raise EwaDivisionError("attraction divisor N(t-1)*phi*(1-kappa) is zero; "
                               "enable denominator_plus_one to use the N(t) normalisation")
    new = (memory + reinforcement_vector(own_play, opp_play, spec)) / divisor
    return replace(state, attractions=new, n=update_experience_weight(state.n, phi_t, params),
                   t=state.t + 1, opponent_history=history, phi=phi_t)


def choice_probabilities(attractions: np.ndarray, lam: float) -> np.ndarray:
    z = lam * (np.asarray(attractions, dtype=float) - np.max(attractions))
    w = np.exp(z)
    return w / w.sum()


def choose(state: AttractionState, params: EwaParams, rng: np.random.Generator) -> int:
    probs = choice_probabilities(state.attractions, params.lam)
    return int(state.low + rng.choice(len(probs), p=probs))


def one_shot_distribution(spec: GameSpec, params: EwaParams) -> np.ndarray:
    return choice_probabilities(init_attractions(spec, params).attractions, params.lam)


def i_ewa(spec: GameSpec, params: EwaParams, rng: np.random.Generator) -> int:
    """One-shot guess: a single draw from the logit rule over the initial attractions."""
    return choose(init_attractions(spec, params), params, rng)


def self_play(spec: GameSpec, params: EwaParams, rounds: int, rng: np.random.Generator):
    """Two EWA players repeatedly meet; returns per-round guesses and the final states."""
    states = [init_attractions(spec, params), init_attractions(spec, params)]
    plays = []
    for _ in range(rounds):
        a, b = choose(states[0], params, rng), choose(states[1], params, rng)
        plays.append((a, b))
        states = [update_attractions(states[0], a, b, spec, params),
                  update_attractions(states[1], b, a, spec, params)]
    return plays, states


def dump_attractions(state: AttractionState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "attraction"])
        for s, a in zip(state.strategies, state.attractions):
            w.writerow([int(s), repr(float(a))])


@dataclass
class EwaAgent:
    """Adapter exposing the one-shot EWA draw through the umpire's agent interface."""

    params: EwaParams = field(default_factory=EwaParams)
    cell_id: str = "EWA"
    _cache: dict = field(default_factory=dict, repr=False)

    def probabilities(self, spec: GameSpec) -> np.ndarray:
        if spec not in self._cache:
            self._cache[spec] = one_shot_distribution(spec, self.params)
        return self._cache[spec]

    def decide(self, description: GameDescription, *, seed: int, episode: int, role: str = "unspecified"):
        from .agents import AgentConfig, ReasoningTrace

        spec = translate(description)  # the umpire's translation step; EWA never reads prose
        rng = np.random.default_rng(seed)
        probs = self.probabilities(spec)
        guess = int(spec.low + rng.choice(len(probs), p=probs))
        return ReasoningTrace(
            episode_id=f"{self.cell_id}/{role}/{episode}", cell_id=self.cell_id,
            config=AgentConfig.ewa().to_dict(), role=role, prompts=[], responses=[],
            belief=None, guess=guess, valid=True, status="ok", tokens_in=0, tokens_out=0,
            tokens_approx=False, template_version=None, seed=seed, game=spec.to_dict(),
            llm_calls=0, ewa=self.params.to_dict())
