"""Two-player one-shot guessing game: rules, umpire, and text rendering.

Payoffs are decided in exact integer arithmetic. With ``p = num/den`` and
``mu = (a + b) / 2`` the distance ``|a - p*mu|`` scaled by ``2*den`` is the
integer ``|2*den*a - num*(a + b)|``, so ties never depend on rounding.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    from .agents import ReasoningTrace

DESCRIPTION_TEMPLATE_VERSION = "game-desc/1"


class ActionOutOfRange(ValueError):
    """An action lies outside the game's action interval."""


class TranslationError(ValueError):
    """A game description does not match any known template."""


@dataclass(frozen=True)
class GameSpec:
    p: Fraction = Fraction(2, 3)
    low: int = 0
    high: int = 100
    n_players: int = 2

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if not (isinstance(self.low, (int, np.integer)) and isinstance(self.high, (int, np.integer))):
            raise TypeError("action bounds must be integers")
        if self.low >= self.high:
            raise ValueError(f"empty action range [{self.low}, {self.high}]")
        if not 0 < self.p < 1:
            raise ValueError(f"multiplier must lie in (0, 1), got {self.p}")
        if self.n_players != 2:
            raise ValueError("only two-player games are supported")

    @property
    def actions(self) -> np.ndarray:
        return np.arange(self.low, self.high + 1)

    @property
    def n_actions(self) -> int:
        return self.high - self.low + 1

    @property
    def midpoint(self) -> Fraction:
        return Fraction(self.low + self.high, 2)

    def contains(self, a) -> bool:
        return self.low <= a <= self.high

    def to_dict(self) -> dict:
        return {"p": str(self.p), "low": int(self.low), "high": int(self.high)}

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        return cls(p=Fraction(str(d.get("p", "2/3"))), low=int(d.get("low", 0)), high=int(d.get("high", 100)))


@dataclass(frozen=True)
class MatchResult:
    guess_i: int | None
    guess_j: int | None
    mu: Fraction | None
    target: Fraction | None
    utility_i: float | None
    utility_j: float | None
    complete: bool = True


@dataclass(frozen=True)
class GameDescription:
    text: str
    spec: GameSpec
    template_version: str = DESCRIPTION_TEMPLATE_VERSION


def _check(a, spec: GameSpec):
    if isinstance(a, bool) or not isinstance(a, (int, np.integer)):
        raise ActionOutOfRange(f"action {a!r} is not an integer")
    if not spec.contains(a):
        raise ActionOutOfRange(f"action {a} outside [{spec.low}, {spec.high}]")


def _scaled_distances(a, b, p: Fraction):
    s = p.numerator * (a + b)
    two_den = 2 * p.denominator
    return abs(two_den * a - s), abs(two_den * b - s)


def utility(a_i: int, a_j: int, spec: GameSpec) -> tuple[float, float]:
    """Payoffs ``(u_i, u_j)``: 1 to the guess closer to ``p * mean``, 0.5 each on a tie."""
    _check(a_i, spec)
    _check(a_j, spec)
    d_i, d_j = _scaled_distances(int(a_i), int(a_j), spec.p)
    if d_i < d_j:
        return 1.0, 0.0
    if d_i == d_j:
        return 0.5, 0.5
    return 0.0, 1.0


def utility_against(actions: np.ndarray, opponent: int, spec: GameSpec) -> np.ndarray:
    """Vectorised own payoff for each of ``actions`` against a fixed opponent action."""
    a = np.asarray(actions, dtype=np.int64)
    d_own, d_opp = _scaled_distances(a, np.int64(opponent), spec.p)
    return np.where(d_own < d_opp, 1.0, np.where(d_own == d_opp, 0.5, 0.0))


def payoff_matrix(spec: GameSpec) -> np.ndarray:
    """``M[x, y]`` = row player's payoff for action ``low + x`` against ``low + y``."""
    a = spec.actions.astype(np.int64)
    d_own, d_opp = _scaled_distances(a[:, None], a[None, :], spec.p)
    return np.where(d_own < d_opp, 1.0, np.where(d_own == d_opp, 0.5, 0.0))


# -- natural-language rendering -------------------------------------------

_FRACTION_WORDS = {
    Fraction(1, 2): "one-half",
    Fraction(1, 3): "one-third",
    Fraction(2, 3): "two-thirds",
    Fraction(1, 4): "one-quarter",
    Fraction(3, 4): "three-quarters",
}
_WORD_FRACTIONS = {v: k for k, v in _FRACTION_WORDS.items()}

_TEMPLATE = (
    "You are playing a number guessing game against one other player. "
    "Each of you simultaneously and independently chooses a whole number between {low} and {high} "
    "(inclusive); neither player sees the other's choice in advance. "
    "The target is {p_words} of the average of the two chosen numbers. "
    "The player whose number is closer to the target wins the prize. "
    "If both numbers are equally close to the target, the game is a tie and each player receives half of the prize."
)

_PATTERNS = {
    "opening": re.compile(r"^You are playing a number guessing game against one other player\. "),
    "range": re.compile(r"chooses a whole number between (-?\d+) and (-?\d+) \(inclusive\)"),
    "multiplier": re.compile(r"The target is ([a-z\-]+|\d+/\d+) of the average of the two chosen numbers\."),
    "tie rule": re.compile(r"equally close to the target, the game is a tie"),
}


def _p_words(p: Fraction) -> str:
    return _FRACTION_WORDS.get(p, f"{p.numerator}/{p.denominator}")


def describe_game(spec: GameSpec) -> GameDescription:
    text = _TEMPLATE.format(low=spec.low, high=spec.high, p_words=_p_words(spec.p))
    return GameDescription(text=text, spec=spec)


def translate(description: GameDescription | str) -> GameSpec:
    """Recover the :class:`GameSpec` from a templated description."""
    text = description.text if isinstance(description, GameDescription) else description
    found = {}
    for name, pattern in _PATTERNS.items():
        m = pattern.search(text)
        if m is None:
            raise TranslationError(f"unmatched template fragment: {name!r}")
        found[name] = m
    low, high = (int(g) for g in found["range"].groups())
    word = found["multiplier"].group(1)
    if word in _WORD_FRACTIONS:
        p = _WORD_FRACTIONS[word]
    elif "/" in word:
        p = Fraction(word)
    else:
        raise TranslationError(f"unmatched template fragment: multiplier {word!r}")
    return GameSpec(p=p, low=low, high=high)


# -- umpire ----------------------------------------------------------------

class Agent(Protocol):
    def decide(self, description: GameDescription, *, seed: int, episode: int) -> "ReasoningTrace": ...


def score(guess_i, guess_j, spec: GameSpec) -> MatchResult:
    """Score two (possibly missing) guesses; a missing guess leaves the match incomplete."""
    if guess_i is None or guess_j is None or not spec.contains(guess_i) or not spec.contains(guess_j):
        return MatchResult(guess_i, guess_j, None, None, None, None, complete=False)
    mu = Fraction(int(guess_i) + int(guess_j), 2)
    u_i, u_j = utility(int(guess_i), int(guess_j), spec)
    return MatchResult(int(guess_i), int(guess_j), mu, spec.p * mu, u_i, u_j)


@dataclass
class Umpire:
    """Initialises agents with the game text, collects simultaneous guesses and scores them."""

    spec: GameSpec
    seed: int = 0
    matches: list = field(default_factory=list)

    def play_match(self, agent_a: Agent, agent_b: Agent, episode: int = 0):
        description = describe_game(self.spec)
        # both agents decide from the same description; neither sees the other's trace
        trace_a = agent_a.decide(description, seed=_match_seed(self.seed, episode, 0), episode=episode)
        trace_b = agent_b.decide(description, seed=_match_seed(self.seed, episode, 1), episode=episode)
        ga = trace_a.guess if trace_a.valid else None
        gb = trace_b.guess if trace_b.valid else None
        result = score(ga, gb, self.spec)
        self.matches.append((result, trace_a, trace_b))
        return result, trace_a, trace_b


def _match_seed(seed: int, episode: int, seat: int) -> int:
    return int(np.random.SeedSequence([seed, episode, seat]).generate_state(1)[0])


def play_match(agent_a: Agent, agent_b: Agent, spec: GameSpec, *, seed: int = 0, episode: int = 0):
    return Umpire(spec, seed).play_match(agent_a, agent_b, episode)


def derangement_pairs(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Pair ``n`` independent episodes for post-hoc scoring; nobody is paired with themself."""
    if n < 2:
        return []
    order = rng.permutation(n)
    return [(int(order[k]), int(order[(k + 1) % n])) for k in range(n)]
