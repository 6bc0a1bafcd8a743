"""Experiment configuration files (YAML or JSON).

Schema::

    seed: 7                      # mandatory
    samples_per_cell: 100
    roles: {student: 50, expert: 50}   # episodes per role in profiled cells
    game: {p: "2/3", low: 0, high: 100}
    models: [{name: haiku, ordinal: 0}, {name: sonnet, ordinal: 1}]
    cells: all                   # or a list of cell ids, e.g. [EWA, S.haiku.c0.m0]
    backend: {kind: stub, script: stub_matrix.yaml}
    #        {kind: http, base_url: ..., api_key_env: ..., model_map: {...}}
    generation: {temperature: null}
    parallelism: 8
    retry: {attempts: 3, backoff: 0.5}
    ewa: {lambda: 2.39, tau: 1.5, k_max: 10, level0: uniform, denominator_plus_one: false}
    output_dir: runs/matrix
    analysis: {wasserstein: raw, levene_center: mean, zero_k: cap, failure_budget: 0.2}
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..agents import Cell, build_lattice
from ..backends import RetryPolicy
from ..ewa import EwaParams
from ..game import GameSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnalysisFlags:
    wasserstein: str = "raw"       # raw | kde
    levene_center: str = "mean"    # mean | median
    zero_k: str = "cap"            # cap | exclude
    failure_budget: float = 0.2

    @classmethod
    def from_dict(cls, d: dict | None) -> "AnalysisFlags":
        flags = cls(**(d or {}))
        if flags.wasserstein not in ("raw", "kde"):
            raise ConfigError(f"unknown Wasserstein variant {flags.wasserstein!r}")
        if flags.levene_center not in ("mean", "median"):
            raise ConfigError(f"unknown Levene centre {flags.levene_center!r}")
        if flags.zero_k not in ("cap", "exclude"):
            raise ConfigError(f"unknown zero k-level policy {flags.zero_k!r}")
        return flags


@dataclass
class ExperimentConfig:
    seed: int
    samples_per_cell: int = 100
    roles: dict | None = None
    game: GameSpec = field(default_factory=GameSpec)
    models: list = field(default_factory=lambda: [("haiku", 0), ("sonnet", 1)])
    cell_ids: list | None = None
    backend: dict = field(default_factory=lambda: {"kind": "stub", "rules": []})
    generation: dict = field(default_factory=dict)
    parallelism: int = 8
    retry: RetryPolicy = RetryPolicy()
    ewa: EwaParams = field(default_factory=EwaParams)
    output_dir: Path = Path("runs/default")
    analysis: AnalysisFlags = AnalysisFlags()
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def cells(self) -> list[Cell]:
        lattice = build_lattice(self.models)
        if self.cell_ids is None:
            return lattice
        by_id = {c.id: c for c in lattice}
        missing = [c for c in self.cell_ids if c not in by_id]
        if missing:
            raise ConfigError(f"unknown cell ids: {missing}")
        return [by_id[c] for c in self.cell_ids]

    def episodes_for(self, cell: Cell) -> list[tuple[str, int]]:
        """``(role, index-within-role)`` for every episode of a cell."""
        if not cell.profiled:
            return [("unspecified", i) for i in range(self.samples_per_cell)]
        if self.roles:
            counts = {r: int(self.roles.get(r, 0)) for r in ("student", "expert")}
        else:
            half = self.samples_per_cell // 2
            counts = {"student": self.samples_per_cell - half, "expert": half}
        return [(r, i) for r in ("student", "expert") for i in range(counts[r])]

    @property
    def model_ordinals(self) -> dict:
        return dict(self.models)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        if "seed" not in d:
            raise ConfigError("config needs a 'seed'")
        models = [(m["name"], int(m["ordinal"])) for m in d.get("models", [])] or [("haiku", 0), ("sonnet", 1)]
        names = [m for m, _ in models]
        if len(set(names)) != len(names):
            raise ConfigError("model names must be distinct")
        cells = d.get("cells", "all")
        base = Path(base_dir)
        out = Path(d.get("output_dir", "runs/default"))
        cfg = cls(
            seed=int(d["seed"]),
            samples_per_cell=int(d.get("samples_per_cell", 100)),
            roles=d.get("roles"),
            game=GameSpec.from_dict(d.get("game", {})),
            models=models,
            cell_ids=None if cells == "all" else list(cells),
            backend=dict(d.get("backend", {"kind": "stub", "rules": []})),
            generation=dict(d.get("generation") or {}),
            parallelism=int(d.get("parallelism", 8)),
            retry=RetryPolicy(**(d.get("retry") or {})),
            ewa=EwaParams.from_dict(d.get("ewa")),
            output_dir=out if out.is_absolute() else base / out,
            analysis=AnalysisFlags.from_dict(d.get("analysis")),
            base_dir=base,
            raw=d,
        )
        if cfg.cell_ids is not None and len(set(cfg.cell_ids)) != len(cfg.cell_ids):
            raise ConfigError("cell ids must be distinct")
        cfg.cells  # validates ids
        if cfg.backend.get("kind", "stub") == "stub" and "script" in cfg.backend:
            script = Path(cfg.backend["script"])
            if not (script if script.is_absolute() else base / script).exists():
                raise ConfigError(f"stub script not found: {script}")
        return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data, base_dir=path.parent)
