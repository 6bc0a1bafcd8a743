from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from guessbench.ewa import EwaAgent
from guessbench.game import (ActionOutOfRange, GameSpec, TranslationError, Umpire, derangement_pairs,
                             describe_game, payoff_matrix, score, translate, utility, utility_against)

FRACTIONS = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(3, 4), Fraction(3, 5)]


def test_spec_validation():
    with pytest.raises(ValueError):
        GameSpec(low=5, high=5)
    with pytest.raises(ValueError):
        GameSpec(p=Fraction(3, 2))
    with pytest.raises(ValueError):
        GameSpec(n_players=3)
    with pytest.raises(TypeError):
        GameSpec(low=0.5)
    assert GameSpec().n_actions == 101
    assert GameSpec.from_dict(GameSpec(low=100, high=200).to_dict()) == GameSpec(low=100, high=200)


def test_utility_rejects_out_of_range_and_non_integers():
    spec = GameSpec()
    with pytest.raises(ActionOutOfRange):
        utility(101, 3, spec)
    with pytest.raises(ActionOutOfRange):
        utility(3.5, 3, spec)
    with pytest.raises(ActionOutOfRange):
        utility(True, 3, spec)


def test_tie_is_decided_exactly():
    # 2/3 of the mean of (1, 2) is 1; guess 1 is closer
    assert utility(1, 2, GameSpec()) == (1.0, 0.0)
    # p = 1/2: target for (1, 3) is 1, distance 0 vs 2
    assert utility(1, 3, GameSpec(p=Fraction(1, 2))) == (1.0, 0.0)


@given(st.integers(0, 100), st.integers(0, 100), st.sampled_from(FRACTIONS))
def test_utility_zero_sum_and_symmetric(a, b, p):
    spec = GameSpec(p=p)
    ui, uj = utility(a, b, spec)
    assert ui + uj == 1
    assert utility(b, a, spec) == (uj, ui)
    if a != b:
        assert (ui == 1.0) == (a < b)  # the lower guess wins whenever p < 1 with two players


@given(st.integers(-50, 50), st.integers(1, 80), st.sampled_from(FRACTIONS))
def test_payoff_matrix_matches_scalar_utility(low, width, p):
    spec = GameSpec(p=p, low=low, high=low + width)
    m = payoff_matrix(spec)
    rng = np.random.default_rng(abs(low) + width)
    for x, y in rng.integers(0, spec.n_actions, size=(20, 2)):
        assert m[x, y] == utility(int(spec.low + x), int(spec.low + y), spec)[0]
    np.testing.assert_array_equal(utility_against(spec.actions, spec.low, spec), m[:, 0])


@given(st.integers(-1000, 1000), st.integers(1, 1000), st.sampled_from(FRACTIONS))
def test_description_round_trip(low, width, p):
    spec = GameSpec(p=p, low=low, high=low + width)
    desc = describe_game(spec)
    assert f"between {low} and {low + width}" in desc.text
    assert translate(desc) == spec
    assert translate(desc.text) == spec


def test_translate_names_the_missing_fragment():
    text = describe_game(GameSpec()).text.replace("equally close to the target, the game is a tie", "")
    with pytest.raises(TranslationError, match="tie rule"):
        translate(text)
    with pytest.raises(TranslationError, match="range"):
        translate(describe_game(GameSpec()).text.replace("between 0 and 100", "from 0 to 100"))


def test_score_marks_missing_guess_incomplete():
    spec = GameSpec()
    r = score(None, 10, spec)
    assert not r.complete and r.utility_i is None
    r = score(20, 40, spec)
    assert r.complete and r.target == Fraction(20) and (r.utility_i, r.utility_j) == (1.0, 0.0)


def test_umpire_runs_ewa_match_deterministically():
    spec = GameSpec()
    first = Umpire(spec, seed=3).play_match(EwaAgent(), EwaAgent(), episode=4)
    second = Umpire(spec, seed=3).play_match(EwaAgent(), EwaAgent(), episode=4)
    assert first[0] == second[0]
    assert first[0].complete and first[0].utility_i + first[0].utility_j == 1


@given(st.integers(2, 200), st.integers(0, 2 ** 32 - 1))
def test_derangement_pairs(n, seed):
    pairs = derangement_pairs(n, np.random.default_rng(seed))
    assert len(pairs) == n
    assert all(a != b for a, b in pairs)
    assert sorted(a for a, _ in pairs) == list(range(n))
    assert sorted(b for _, b in pairs) == list(range(n))
