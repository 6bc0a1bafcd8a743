"""LLM-driven agents (Simple and Reasoner), their configuration lattice and traces."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field

from .backends import LlmBackend, RetryPolicy, TransportError
from .game import GameDescription, GameSpec
from .prompts import (ANSWER_MARKER, CONTEXT_KINDS, PROMPT_TEMPLATE_VERSION, AgentContext,
                      InstructionModel, compose_belief_prompt, compose_decision_prompt,
                      compose_prompt)

AGENT_KINDS = ("ewa", "simple", "reasoner")
AGENT_SYMBOLS = {"ewa": "EWA", "simple": "S", "reasoner": "R"}
CONTEXT_SYMBOLS = {"none": "c0", "simple_profile": "csim", "biography": "cbio"}
TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AgentConfig:
    agent_kind: str
    llm_model: str | None = None
    model_ordinal: int | None = None
    context: AgentContext = AgentContext()
    instruction: InstructionModel = InstructionModel()

    def __post_init__(self):
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.agent_kind!r}")
        if self.agent_kind == "ewa":
            if self.context.kind != "none" or self.instruction.moa:
                raise ValueError("the EWA agent only implements the empty context without MoA")
        elif self.llm_model is None:
            raise ValueError("LLM agents need a model")

    @classmethod
    def ewa(cls) -> "AgentConfig":
        return cls("ewa")

    def to_dict(self) -> dict:
        return {"agent_kind": self.agent_kind, "llm_model": self.llm_model,
                "model_ordinal": self.model_ordinal, "context": self.context.kind,
                "role": self.context.role, "moa": self.instruction.moa}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        return cls(d["agent_kind"], d.get("llm_model"), d.get("model_ordinal"),
                   AgentContext(d.get("context", "none"), d.get("role", "unspecified")),
                   InstructionModel(bool(d.get("moa", False))))


@dataclass(frozen=True)
class Cell:
    """A point of the experiment lattice; profiled cells expand into student/expert agents."""

    agent_kind: str
    model: str | None = None
    model_ordinal: int | None = None
    context_kind: str = "none"
    moa: bool = False

    @property
    def id(self) -> str:
        if self.agent_kind == "ewa":
            return "EWA"
        return ".".join([AGENT_SYMBOLS[self.agent_kind], self.model, CONTEXT_SYMBOLS[self.context_kind],
                         "m1" if self.moa else "m0"])

    @property
    def profiled(self) -> bool:
        return self.context_kind != "none"

    @property
    def roles(self) -> tuple[str, ...]:
        return ("student", "expert") if self.profiled else ("unspecified",)

    @property
    def cm(self) -> str:
        """Context/instruction label, ordered by sophistication: c0.m0 < c0.m1 < csim.m0 < ..."""
        return f"{CONTEXT_SYMBOLS[self.context_kind]}.{'m1' if self.moa else 'm0'}"

    def agent_config(self, role: str = "unspecified") -> AgentConfig:
        return AgentConfig(self.agent_kind, self.model, self.model_ordinal,
                           AgentContext(self.context_kind, role), InstructionModel(self.moa))

    @classmethod
    def from_id(cls, cell_id: str, ordinals: dict) -> "Cell":
        if cell_id == "EWA":
            return cls("ewa")
        sym, model, ctx, m = cell_id.split(".")
        kind = {v: k for k, v in AGENT_SYMBOLS.items()}[sym]
        context = {v: k for k, v in CONTEXT_SYMBOLS.items()}[ctx]
        return cls(kind, model, ordinals[model], context, m == "m1")


CM_ORDER = tuple(f"{CONTEXT_SYMBOLS[c]}.{m}" for c in CONTEXT_KINDS for m in ("m0", "m1"))


def build_lattice(models) -> list[Cell]:
    """EWA plus {S, R} x models x contexts x {m0, m1}; 25 cells for two models."""
    cells = [Cell("ewa")]
    for kind in ("simple", "reasoner"):
        for name, ordinal in models:
            for ctx in CONTEXT_KINDS:
                for moa in (False, True):
                    cells.append(Cell(kind, name, ordinal, ctx, moa))
    return cells


@dataclass
class ReasoningTrace:
    episode_id: str
    cell_id: str
    config: dict
    role: str
    prompts: list
    responses: list
    belief: str | None
    guess: int | None
    valid: bool
    status: str
    tokens_in: int
    tokens_out: int
    tokens_approx: bool
    template_version: str | None
    seed: int
    game: dict
    llm_calls: int = 0
    error: str | None = None
    exchanges: list | None = None
    ewa: dict | None = None
    game_template_version: str | None = None
    schema: int = TRACE_SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ReasoningTrace":
        return cls(**json.loads(line))


# -- response parsing ------------------------------------------------------

@dataclass(frozen=True)
class ParsedGuess:
    value: int | None
    status: str  # ok | no_number | out_of_range | ambiguous

    @property
    def valid(self) -> bool:
        return self.status == "ok"


_MARKER = re.compile(re.escape(ANSWER_MARKER) + r"\s*\**\s*(-?\d+)(?![\d.])", re.IGNORECASE)
_INTEGER = re.compile(r"(?<![\d.,])-?\d+(?![\d]|\.\d|,\d)")


def parse_guess(text: str, spec: GameSpec) -> ParsedGuess:
    """Marker line first, else the last standalone integer; never raises."""
    if not isinstance(text, str):
        return ParsedGuess(None, "no_number")
    marked = {int(m) for m in _MARKER.findall(text)}
    if len(marked) > 1:
        return ParsedGuess(None, "ambiguous")
    if marked:
        value = marked.pop()
    else:
        found = _INTEGER.findall(text)
        if not found:
            return ParsedGuess(None, "no_number")
        value = int(found[-1])
    if not spec.contains(value):
        return ParsedGuess(value, "out_of_range")
    return ParsedGuess(value, "ok")


_TOKEN = re.compile(r"\w+|[^\w\s]")


def approx_tokens(text: str) -> int:
    """Whitespace-and-punctuation token count used when the backend reports no usage."""
    return len(_TOKEN.findall(text or ""))


def count_tokens(trace: ReasoningTrace) -> tuple[int, int]:
    return trace.tokens_in, trace.tokens_out


# -- decision procedures ------------------------------------------------------

@dataclass
class _Call:
    prompts: list = field(default_factory=list)
    responses: list = field(default_factory=list)
    exchanges: list = field(default_factory=list)
    tokens_in: int = 0
    tokens_out: int = 0
    approx: bool = False

    def run(self, backend: LlmBackend, prompt: str, config: AgentConfig, settings, seed, episode, retry):
        self.prompts.append(prompt)
        done = retry.call(backend.complete, prompt, model=config.llm_model, settings=settings,
                          seed=seed, episode=episode)
        self.responses.append(done.text)
        if done.exchange is not None:
            self.exchanges.append(done.exchange)
        if done.tokens_in is None:
            self.approx = True
            self.tokens_in += approx_tokens(prompt)
        else:
            self.tokens_in += done.tokens_in
        if done.tokens_out is None:
            self.approx = True
            self.tokens_out += approx_tokens(done.text)
        else:
            self.tokens_out += done.tokens_out
        return done.text


def _trace(call: _Call, config: AgentConfig, cell_id, description, seed, episode, belief, parsed,
           error=None) -> ReasoningTrace:
    status = "failed" if error else parsed.status
    return ReasoningTrace(
        episode_id=f"{cell_id}/{config.context.role}/{episode}", cell_id=cell_id,
        config=config.to_dict(), role=config.context.role, prompts=call.prompts,
        responses=call.responses, belief=belief,
        guess=None if parsed is None else parsed.value,
        valid=bool(parsed is not None and parsed.valid and not error), status=status,
        tokens_in=call.tokens_in, tokens_out=call.tokens_out, tokens_approx=call.approx,
        template_version=PROMPT_TEMPLATE_VERSION, seed=seed, game=description.spec.to_dict(),
        llm_calls=len(call.responses), error=error, exchanges=call.exchanges or None,
        game_template_version=description.template_version)


def simple_decide(backend: LlmBackend, config: AgentConfig, description: GameDescription, *,
                  seed: int = 0, episode: int = 0, settings: dict | None = None,
                  retry: RetryPolicy = RetryPolicy(), cell_id: str | None = None) -> ReasoningTrace:
    if config.agent_kind != "simple":
        raise ValueError("simple_decide needs a Simple agent configuration")
    call = _Call()
    prompt = compose_prompt(description, config.context, config.instruction).text
    try:
        text = call.run(backend, prompt, config, settings or {}, seed, episode, retry)
    except TransportError as exc:
        return _trace(call, config, cell_id, description, seed, episode, None, None, error=str(exc))
    return _trace(call, config, cell_id, description, seed, episode, None,
                  parse_guess(text, description.spec))


def reasoner_decide(backend: LlmBackend, config: AgentConfig, description: GameDescription, *,
                    seed: int = 0, episode: int = 0, settings: dict | None = None,
                    retry: RetryPolicy = RetryPolicy(), cell_id: str | None = None) -> ReasoningTrace:
    """Belief elicitation first, then a decision conditioned on that belief."""
    if config.agent_kind != "reasoner":
        raise ValueError("reasoner_decide needs a Reasoner agent configuration")
    call = _Call()
    settings = settings or {}
    try:
        belief = call.run(backend, compose_belief_prompt(description, config.context, config.instruction).text,
                          config, settings, seed, episode, retry)
        prompt = compose_decision_prompt(description, belief, config.context, config.instruction).text
        text = call.run(backend, prompt, config, settings, seed, episode, retry)
    except TransportError as exc:
        belief = call.responses[0] if call.responses else None
        return _trace(call, config, cell_id, description, seed, episode, belief, None, error=str(exc))
    return _trace(call, config, cell_id, description, seed, episode, belief,
                  parse_guess(text, description.spec))


@dataclass
class LlmAgent:
    """Binds a backend and configuration to the umpire's agent interface."""

    backend: LlmBackend
    config: AgentConfig
    cell_id: str | None = None
    settings: dict = field(default_factory=dict)
    retry: RetryPolicy = RetryPolicy()

    def decide(self, description: GameDescription, *, seed: int, episode: int) -> ReasoningTrace:
        fn = simple_decide if self.config.agent_kind == "simple" else reasoner_decide
        return fn(self.backend, self.config, description, seed=seed, episode=episode,
                  settings=self.settings, retry=self.retry, cell_id=self.cell_id)
