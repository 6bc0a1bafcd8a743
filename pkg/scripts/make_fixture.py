"""Regenerate the committed synthetic human fixture.

    python scripts/make_fixture.py [--out src/guessbench/data/human_fixture.csv]
"""
import argparse
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from guessbench.human import FixtureTargets, fixture_statistics, make_fixture, write_human_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "guessbench" / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=DATA / "fixture_targets.yaml")
    ap.add_argument("--out", default=DATA / "human_fixture.csv")
    args = ap.parse_args()

    with open(args.config) as fh:
        cfg = yaml.safe_load(fh)
    names = {f.name for f in fields(FixtureTargets)}
    targets = FixtureTargets(**{k: v for k, v in cfg["targets"].items() if k in names})
    student, expert = make_fixture(targets, seed=cfg["seed"], iterations=cfg["iterations"])
    write_human_csv(args.out, student, expert)
    for k, v in fixture_statistics(student.guesses, expert.guesses).items():
        print(f"{k:>14s}: {v:.4f}")


if __name__ == "__main__":
    main()
