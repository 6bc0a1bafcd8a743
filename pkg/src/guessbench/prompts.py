"""Prompt templates: agent contexts, instruction models and their composition."""
from __future__ import annotations

from dataclasses import dataclass

from .game import GameDescription

PROMPT_TEMPLATE_VERSION = "prompts/1"

CONTEXT_KINDS = ("none", "simple_profile", "biography")
ROLES = ("student", "expert")

MOA_QUESTIONS = (
    "What kind of situation is this?",
    "What kind of person am I?",
    "What should a person like me do in a situation like this?",
)

ANSWER_MARKER = "FINAL ANSWER:"

_PROFILES = {
    "student": (
        "You are a first-year undergraduate student. You have never studied game theory "
        "and have no training in strategic reasoning. Think and decide as such a person would."
    ),
    "expert": (
        "You are an expert in game theory and strategic decision making. "
        "Think and decide as such a person would."
    ),
}

_BIOGRAPHIES = {
    "student": (
        "You are Sam, a 19-year-old first-year undergraduate studying history. You grew up in a small town, "
        "enjoy football and playing guitar with friends, and work part-time in a café. You took the usual "
        "school mathematics but have never studied economics, game theory or strategic reasoning, and you "
        "usually go with your gut on puzzles. Today you agreed to take part in a short decision experiment "
        "run on campus for a small cash prize. Think and decide as Sam would."
    ),
    "expert": (
        "You are Dr. Alex Morgan, a 45-year-old professor who researches behavioural economics and the "
        "psychology of decision making. You hold a PhD in economics, have published on game theory and "
        "bounded rationality, and regularly teach graduate courses on strategic reasoning. You are attending "
        "an international conference on decision making, where the organisers have asked participants to "
        "play a short game for a cash prize. Think and decide as Dr. Morgan would."
    ),
}


@dataclass(frozen=True)
class AgentContext:
    kind: str = "none"
    role: str = "unspecified"

    def __post_init__(self):
        if self.kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}")
        if self.kind == "none" and self.role != "unspecified":
            raise ValueError("the empty context carries no role")
        if self.kind != "none" and self.role not in ROLES:
            raise ValueError(f"context {self.kind!r} needs a role in {ROLES}, got {self.role!r}")

    @property
    def ordinal(self) -> int:
        return CONTEXT_KINDS.index(self.kind)

    @property
    def text(self) -> str:
        if self.kind == "simple_profile":
            return _PROFILES[self.role]
        if self.kind == "biography":
            return _BIOGRAPHIES[self.role]
        return ""


@dataclass(frozen=True)
class InstructionModel:
    moa: bool = False

    @property
    def ordinal(self) -> int:
        return int(self.moa)

    @property
    def moa_text(self) -> str:
        if not self.moa:
            return ""
        lines = "\n".join(f"{i}. {q}" for i, q in enumerate(MOA_QUESTIONS, 1))
        return ("Before giving your answer, address the following three questions in order:\n" + lines)

    @property
    def text(self) -> str:
        parts = [self.moa_text] if self.moa else []
        parts.append("Pick a number. Explain your reasoning briefly, then end your response with a line "
                     f"of the form '{ANSWER_MARKER} <number>'.")
        return "\n\n".join(parts)


@dataclass(frozen=True)
class PromptBundle:
    text: str
    stage: str  # "decide", "belief" or "decide_given_belief"
    template_version: str = PROMPT_TEMPLATE_VERSION


def _join(*parts: str) -> str:
    return "\n\n".join(p for p in parts if p)


def compose_prompt(description: GameDescription, context: AgentContext,
                   instruction: InstructionModel) -> PromptBundle:
    return PromptBundle(_join(context.text, description.text, instruction.text), stage="decide")


BELIEF_REQUEST = ("Do not choose your own number yet. First think about the other player: "
                  "what number do you expect the other player to choose, and why? "
                  "Describe your belief about the other player's choice.")


def compose_belief_prompt(description: GameDescription, context: AgentContext,
                          instruction: InstructionModel) -> PromptBundle:
    return PromptBundle(_join(context.text, description.text, instruction.moa_text, BELIEF_REQUEST),
                        stage="belief")


def compose_decision_prompt(description: GameDescription, belief: str, context: AgentContext,
                            instruction: InstructionModel) -> PromptBundle:
    belief_block = "Your belief about the other player's choice:\n" + belief.strip()
    return PromptBundle(_join(context.text, description.text, belief_block, instruction.text),
                        stage="decide_given_belief")
