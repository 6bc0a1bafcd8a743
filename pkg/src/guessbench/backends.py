"""LLM backends: a chat-completions HTTP client and a deterministic scripted stub.

Stub scripts are mappings with ``rules`` and ``pools``::

    pools:
      low_guesses: [0, 10, 22, 33]
      student: {csv: ../data/human.csv, cohort: student}
    rules:
      - match: "expect the other player"          # regex searched in the prompt
        response: "I expect about {pick:beliefs}."
      - model: sonnet                              # optional regex on the model id
        match: "expert"
        response: ["FINAL ANSWER: {pick:low_guesses}", "no idea"]
      - match: ".*"
        fail: true                                  # raise a transport error

Placeholders: ``{pick:POOL}`` (seeded draw), ``{cycle:POOL}`` (pool[episode]),
``{uniform:A:B}``, ``{low}``, ``{high}``; any source may carry ``+low`` to
shift it by the range's lower bound parsed from the prompt.
"""
from __future__ import annotations

import csv
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

log = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """Network, rate-limit or server failure; eligible for retry."""


@dataclass
class Completion:
    text: str
    tokens_in: int | None = None
    tokens_out: int | None = None
    exchange: dict | None = None  # verbatim request/response bodies, secrets excluded


class LlmBackend(Protocol):
    name: str
    network_calls: int

    def complete(self, prompt: str, *, model: str, settings: dict, seed: int, episode: int) -> Completion: ...


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 0.5

    def call(self, fn, *args, **kwargs):
        for attempt in range(self.attempts):
            try:
                return fn(*args, **kwargs)
            except TransportError as exc:
                if attempt == self.attempts - 1:
                    raise
                delay = self.backoff * 2 ** attempt
                log.warning("transport error (%s); retrying in %.2fs", exc, delay)
                if delay:
                    time.sleep(delay)


# -- scripted stub ------------------------------------------------------------

_PLACEHOLDER = re.compile(r"\{(pick|cycle|uniform|low|high)(?::([^}+]*))?(\+low)?\}")
_RANGE = re.compile(r"between (-?\d+) and (-?\d+)")


@dataclass(frozen=True)
class StubRule:
    match: str
    responses: tuple[str, ...] = ()
    model: str | None = None
    fail: bool = False

    def applies(self, prompt: str, model: str) -> bool:
        if self.model is not None and re.search(self.model, model) is None:
            return False
        return re.search(self.match, prompt, flags=re.DOTALL) is not None


def _load_pool(spec, base: Path) -> list:
    if isinstance(spec, list):
        return list(spec)
    if isinstance(spec, dict) and "range" in spec:
        lo, hi = spec["range"]
        return list(range(int(lo), int(hi) + 1))
    if isinstance(spec, dict) and "csv" in spec:
        path = Path(spec["csv"])
        if not path.is_absolute():
            path = base / path
        cohorts = spec.get("cohort")
        cohorts = {cohorts} if isinstance(cohorts, str) else set(cohorts or ("student", "expert"))
        with open(path, newline="", encoding="utf-8") as fh:
            return [int(row["guess"]) for row in csv.DictReader(fh) if row["cohort"] in cohorts]
    raise ValueError(f"unrecognised pool specification: {spec!r}")


class ScriptedStub:
    """Deterministic backend: the same (prompt, model, seed, episode) always yields the same text."""

    name = "scripted_stub"

    def __init__(self, rules, pools=None, base_dir=None):
        self.rules = [r if isinstance(r, StubRule) else self._rule(r) for r in rules]
        base = Path(base_dir or ".")
        self.pools = {k: _load_pool(v, base) for k, v in (pools or {}).items()}
        self.network_calls = 0
        self.calls = 0
        self._lock = threading.Lock()

    @staticmethod
    def _rule(d: dict) -> StubRule:
        resp = d.get("response", d.get("responses", ()))
        resp = (resp,) if isinstance(resp, str) else tuple(resp)
        return StubRule(match=d.get("match", ".*"), responses=resp, model=d.get("model"),
                        fail=bool(d.get("fail", False)))

    @classmethod
    def from_file(cls, path) -> "ScriptedStub":
        import yaml

        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            script = yaml.safe_load(fh)
        return cls(script.get("rules", []), script.get("pools"), base_dir=path.parent)

    def complete(self, prompt: str, *, model: str, settings: dict, seed: int, episode: int) -> Completion:
        with self._lock:
            self.calls += 1
        for rule in self.rules:
            if rule.applies(prompt, model):
                break
        else:
            raise ValueError("no stub rule matches the prompt")
        if rule.fail:
            raise TransportError("scripted failure")
        # one stream per (seed, episode, rule) so identical draws recur across game variants
        rng = np.random.default_rng([seed & 0xFFFFFFFF, episode, self.rules.index(rule)])
        template = rule.responses[int(rng.integers(len(rule.responses)))] if len(rule.responses) > 1 \
            else (rule.responses[0] if rule.responses else "")
        text = self._render(template, prompt, rng, episode)
        return Completion(text=text)

    def _render(self, template: str, prompt: str, rng, episode: int) -> str:
        m = _RANGE.search(prompt)
        low, high = (int(m.group(1)), int(m.group(2))) if m else (0, 0)

        def sub(match):
            kind, arg, shift = match.groups()
            if kind == "low":
                value = low
            elif kind == "high":
                value = high
            elif kind == "uniform":
                a, b = (int(x) for x in arg.split(":"))
                value = int(rng.integers(a, b + 1))
            elif kind == "pick":
                pool = self.pools[arg]
                value = pool[int(rng.integers(len(pool)))]
            else:
                pool = self.pools[arg]
                value = pool[episode % len(pool)]
            if shift:
                value = int(value) + low
            return str(value)

        return _PLACEHOLDER.sub(sub, template)


# -- HTTP chat-completions ----------------------------------------------------

@dataclass
class HttpChatBackend:
    base_url: str
    api_key_env: str = "GUESSBENCH_API_KEY"
    model_map: dict = field(default_factory=dict)
    timeout: float = 60.0
    send_seed: bool = False
    name: str = "http_chat"
    network_calls: int = 0
    _client: httpx.Client | None = field(default=None, repr=False)

    def __post_init__(self):
        self._lock = threading.Lock()

    def _http(self) -> httpx.Client:
        if self._client is None:
            headers = {"Content-Type": "application/json"}
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
            self._client = httpx.Client(base_url=self.base_url.rstrip("/"), headers=headers,
                                        timeout=self.timeout)
        return self._client

    def complete(self, prompt: str, *, model: str, settings: dict, seed: int, episode: int) -> Completion:
        body = {"model": self.model_map.get(model, model),
                "messages": [{"role": "user", "content": prompt}]}
        body.update({k: v for k, v in (settings or {}).items() if v is not None})
        if self.send_seed:
            body["seed"] = int(seed)
        with self._lock:
            self.network_calls += 1
        try:
            resp = self._http().post("/chat/completions", json=body)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        text = data["choices"][0]["message"]["content"] or ""
        usage = data.get("usage") or {}
        return Completion(text=text, tokens_in=usage.get("prompt_tokens"),
                          tokens_out=usage.get("completion_tokens"),
                          exchange={"request": body, "response": data})


def make_backend(settings: dict, base_dir=None) -> LlmBackend:
    kind = settings.get("kind", "stub")
    base = Path(base_dir or ".")
    if kind == "stub":
        if "script" in settings:
            script = Path(settings["script"])
            return ScriptedStub.from_file(script if script.is_absolute() else base / script)
        return ScriptedStub(settings.get("rules", []), settings.get("pools"), base_dir=base)
    if kind == "http":
        return HttpChatBackend(base_url=settings["base_url"],
                               api_key_env=settings.get("api_key_env", "GUESSBENCH_API_KEY"),
                               model_map=settings.get("model_map", {}),
                               timeout=float(settings.get("timeout", 60.0)),
                               send_seed=bool(settings.get("send_seed", False)))
    raise ValueError(f"unknown backend kind {kind!r}")
