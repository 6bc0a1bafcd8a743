import pytest
from hypothesis import given, strategies as st

from guessbench.agents import (AgentConfig, Cell, ReasoningTrace, approx_tokens, build_lattice, parse_guess,
                               reasoner_decide, simple_decide)
from guessbench.backends import Completion, RetryPolicy, ScriptedStub, TransportError
from guessbench.game import GameSpec, describe_game
from guessbench.prompts import (MOA_QUESTIONS, AgentContext, InstructionModel, compose_belief_prompt,
                                compose_decision_prompt, compose_prompt)

SPEC = GameSpec()
DESC = describe_game(SPEC)


class Recorder:
    """Backend double returning queued texts and recording every prompt."""

    name = "recorder"

    def __init__(self, *texts, fail_on=()):
        self.texts = list(texts)
        self.prompts = []
        self.fail_on = set(fail_on)

    def complete(self, prompt, *, model, settings, seed, episode):
        self.prompts.append(prompt)
        if len(self.prompts) in self.fail_on:
            raise TransportError("boom")
        return Completion(self.texts.pop(0))


# -- prompts -------------------------------------------------------------------

def test_moa_questions_in_order():
    text = InstructionModel(moa=True).text
    positions = [text.index(q) for q in MOA_QUESTIONS]
    assert positions == sorted(positions)
    assert "FINAL ANSWER" in text
    assert MOA_QUESTIONS[0] not in InstructionModel(moa=False).text


@pytest.mark.parametrize("kind", ["simple_profile", "biography"])
def test_contexts_differ_by_role(kind):
    student, expert = AgentContext(kind, "student").text, AgentContext(kind, "expert").text
    assert student and expert and student != expert
    assert AgentContext().text == ""
    with pytest.raises(ValueError):
        AgentContext(kind)
    with pytest.raises(ValueError):
        AgentContext("none", "student")


def test_prompt_composition_order():
    ctx, ins = AgentContext("biography", "expert"), InstructionModel(True)
    p = compose_prompt(DESC, ctx, ins).text
    assert p.index(ctx.text) < p.index(DESC.text) < p.index(MOA_QUESTIONS[0])
    belief = compose_belief_prompt(DESC, ctx, ins).text
    assert "FINAL ANSWER" not in belief and "other player" in belief
    decision = compose_decision_prompt(DESC, "around 30", ctx, ins).text
    assert "around 30" in decision and DESC.text in decision


# -- parsing -------------------------------------------------------------------

@pytest.mark.parametrize("text, value, status", [
    ("FINAL ANSWER: 22", 22, "ok"),
    ("I think 50 then 33.\nFINAL ANSWER: **15**", 15, "ok"),
    ("final answer: 7", 7, "ok"),
    ("Many players pick 33 but I go with 22", 22, "ok"),
    ("FINAL ANSWER: 3 ... FINAL ANSWER: 4", None, "ambiguous"),
    ("FINAL ANSWER: 12\nFINAL ANSWER: 12", 12, "ok"),
    ("I would rather not say.", None, "no_number"),
    ("FINAL ANSWER: 150", 150, "out_of_range"),
    ("FINAL ANSWER: -3", -3, "out_of_range"),
    ("Maybe 22.5 is best", None, "no_number"),
    ("", None, "no_number"),
])
def test_parse_guess(text, value, status):
    parsed = parse_guess(text, SPEC)
    assert (parsed.value, parsed.status) == (value, status)


@given(st.text(max_size=300))
def test_parse_never_raises(text):
    parsed = parse_guess(text, SPEC)
    assert parsed.status in {"ok", "no_number", "out_of_range", "ambiguous"}
    assert parsed.valid == (parsed.value is not None and SPEC.contains(parsed.value) and parsed.status == "ok")


def test_approx_tokens():
    assert approx_tokens("FINAL ANSWER: 22") == 4
    assert approx_tokens("") == 0


# -- lattice and configs ---------------------------------------------------------

def test_lattice_shape_and_ids():
    cells = build_lattice([("haiku", 0), ("sonnet", 1)])
    ids = [c.id for c in cells]
    assert len(cells) == 25 and len(set(ids)) == 25
    assert ids[0] == "EWA" and "R.sonnet.cbio.m1" in ids
    ordinals = {"haiku": 0, "sonnet": 1}
    assert all(Cell.from_id(i, ordinals) == c for i, c in zip(ids, cells))
    assert sum(c.profiled for c in cells) == 16


def test_agent_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        AgentConfig("ewa", context=AgentContext("biography", "student"))
    with pytest.raises(ValueError):
        AgentConfig("simple")
    cfg = AgentConfig("reasoner", "haiku", 0, AgentContext("simple_profile", "expert"), InstructionModel(True))
    assert AgentConfig.from_dict(cfg.to_dict()) == cfg


# -- decision procedures ----------------------------------------------------------

def test_simple_agent_single_call():
    backend = Recorder("Hmm. FINAL ANSWER: 33")
    cfg = AgentConfig("simple", "haiku", 0)
    trace = simple_decide(backend, cfg, DESC, seed=1, episode=2, cell_id="S.haiku.c0.m0")
    assert trace.valid and trace.guess == 33 and trace.llm_calls == 1
    assert trace.episode_id == "S.haiku.c0.m0/unspecified/2"
    assert trace.tokens_approx and trace.tokens_out == approx_tokens("Hmm. FINAL ANSWER: 33")
    assert ReasoningTrace.from_json(trace.to_json()) == trace


def test_reasoner_two_stage_with_belief():
    backend = Recorder("I expect about 30.", "FINAL ANSWER: 20")
    cfg = AgentConfig("reasoner", "sonnet", 1, AgentContext("biography", "student"))
    trace = reasoner_decide(backend, cfg, DESC, seed=1, episode=0, cell_id="R.sonnet.cbio.m0")
    assert trace.llm_calls == 2 and trace.belief == "I expect about 30." and trace.guess == 20
    assert "I expect about 30." in backend.prompts[1] and "I expect about 30." not in backend.prompts[0]
    assert trace.role == "student"


def test_reasoner_first_call_failure_aborts_second():
    backend = Recorder("never used", fail_on={1})
    cfg = AgentConfig("reasoner", "sonnet", 1)
    trace = reasoner_decide(backend, cfg, DESC, retry=RetryPolicy(attempts=1, backoff=0), cell_id="R")
    assert trace.status == "failed" and not trace.valid and len(backend.prompts) == 1
    assert trace.belief is None and trace.error == "boom"


def test_invalid_response_is_recorded_not_raised():
    trace = simple_decide(Recorder("no idea"), AgentConfig("simple", "haiku", 0), DESC, cell_id="S")
    assert not trace.valid and trace.status == "no_number" and trace.guess is None


def test_retry_only_on_transport_errors():
    backend = Recorder("FINAL ANSWER: 5", fail_on={1, 2})
    trace = simple_decide(backend, AgentConfig("simple", "haiku", 0), DESC,
                          retry=RetryPolicy(attempts=3, backoff=0), cell_id="S")
    assert trace.valid and trace.guess == 5 and len(backend.prompts) == 3

    calls = []

    def broken():
        calls.append(1)
        raise KeyError("not transient")

    with pytest.raises(KeyError):
        RetryPolicy(attempts=3, backoff=0).call(broken)
    assert len(calls) == 1


def test_same_seed_same_trace_with_stub():
    stub = ScriptedStub([{"match": ".*", "responses": ["FINAL ANSWER: {uniform:0:100}"]}])
    cfg = AgentConfig("simple", "haiku", 0)
    a = simple_decide(stub, cfg, DESC, seed=9, episode=1, cell_id="S")
    b = simple_decide(stub, cfg, DESC, seed=9, episode=1, cell_id="S")
    assert a.to_json() == b.to_json()
