"""Run every configured cell and persist one JSONL trace file per cell."""
from __future__ import annotations

import json
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..agents import Cell, ReasoningTrace, reasoner_decide, simple_decide
from ..backends import make_backend
from ..ewa import EwaAgent
from ..game import DESCRIPTION_TEMPLATE_VERSION, describe_game
from ..prompts import PROMPT_TEMPLATE_VERSION
from .config import ExperimentConfig

log = logging.getLogger(__name__)

_ROLE_CODE = {"unspecified": 0, "student": 1, "expert": 2}


@dataclass
class RunManifest:
    config_hash: str
    template_versions: dict
    backend: dict
    game: dict
    seed: int
    started: str
    finished: str | None = None
    cells: dict = field(default_factory=dict)
    network_calls: int = 0

    def write(self, path: Path) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        os.replace(tmp, path)

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def episode_seed(seed: int, cell_id: str, role: str, index: int) -> int:
    """Per-episode seed; independent of the game so shifted-range runs reuse the same draws."""
    ss = np.random.SeedSequence([seed, zlib.crc32(cell_id.encode()), _ROLE_CODE[role], index])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def trace_path(out_dir: Path, cell_id: str) -> Path:
    return Path(out_dir) / "traces" / f"{cell_id}.jsonl"


def _read_existing(path: Path) -> dict:
    done = {}
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                try:
                    t = ReasoningTrace.from_json(line)
                except (json.JSONDecodeError, TypeError):
                    continue  # torn final line from an interrupted write
                done[t.episode_id] = line
    return done


def _episode_key(episode_id: str):
    _, role, idx = episode_id.rsplit("/", 2)
    return _ROLE_CODE[role], int(idx)


def simulate(config: ExperimentConfig, resume: bool = False, backend=None) -> RunManifest:
    out = Path(config.output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if not resume:
        for f in (out / "traces").glob("*.jsonl"):
            f.unlink()
        manifest_path.unlink(missing_ok=True)

    backend = backend or make_backend(config.backend, config.base_dir)
    description = describe_game(config.game)
    ewa_agent = EwaAgent(config.ewa)
    manifest = RunManifest(
        config_hash=config.config_hash(),
        template_versions={"game": DESCRIPTION_TEMPLATE_VERSION, "prompts": PROMPT_TEMPLATE_VERSION},
        backend={"name": backend.name, "kind": config.backend.get("kind", "stub"),
                 "models": dict(config.models)},
        game=config.game.to_dict(), seed=config.seed,
        started=datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def run_episode(cell: Cell, role: str, index: int) -> ReasoningTrace:
        seed = episode_seed(config.seed, cell.id, role, index)
        if cell.agent_kind == "ewa":
            return ewa_agent.decide(description, seed=seed, episode=index, role=role)
        fn = simple_decide if cell.agent_kind == "simple" else reasoner_decide
        return fn(backend, cell.agent_config(role), description, seed=seed, episode=index,
                  settings=config.generation, retry=config.retry, cell_id=cell.id)

    with ThreadPoolExecutor(max_workers=max(1, config.parallelism)) as pool:
        for cell in config.cells:
            path = trace_path(out, cell.id)
            done = _read_existing(path) if resume else {}
            todo = [(r, i) for r, i in config.episodes_for(cell) if f"{cell.id}/{r}/{i}" not in done]
            if todo:
                log.info("cell %s: %d episodes to run", cell.id, len(todo))
            with open(path, "a", encoding="utf-8") as fh:
                # single writer: results arrive in submission order and are appended here
                for trace in pool.map(lambda ri: run_episode(cell, *ri), todo):
                    line = trace.to_json()
                    fh.write(line + "\n")
                    fh.flush()
                    done[trace.episode_id] = line
            ordered = sorted(done, key=_episode_key)
            path.write_text("".join(done[k] + "\n" for k in ordered), encoding="utf-8")
            traces = [ReasoningTrace.from_json(done[k]) for k in ordered]
            manifest.cells[cell.id] = {
                "trace_file": f"traces/{cell.id}.jsonl",
                "episodes": len(traces),
                "valid": sum(t.valid for t in traces),
                "invalid": sum((not t.valid) and t.status != "failed" for t in traces),
                "failed": sum(t.status == "failed" for t in traces),
                "llm_calls": sum(t.llm_calls for t in traces),
            }
    manifest.network_calls = int(getattr(backend, "network_calls", 0))
    manifest.finished = datetime.now(timezone.utc).isoformat(timespec="seconds")
    manifest.write(manifest_path)
    return manifest
