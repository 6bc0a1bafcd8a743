"""Full pipeline against the scripted stub: baseline matrix, shifted-range run, analysis and report.

    python3 scripts/run_stub_matrix.py [--out runs] [--human path/to/cohorts.csv]
"""
import argparse
import json
import time
from pathlib import Path

from guessbench.human import fixture_path, load_human_csv
from guessbench.runner import analyze, load_config, load_traces, report, simulate, validate_oos, write_metrics

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--human", default=None, help="cohort,guess CSV (default: bundled synthetic fixture)")
    args = ap.parse_args()
    out = Path(args.out).resolve()

    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "stub_matrix.yaml", output_dir=str(out / "stub_matrix"))
    manifest = simulate(cfg)
    print(f"simulated {sum(c['episodes'] for c in manifest.cells.values())} episodes "
          f"in {time.perf_counter() - t0:.1f}s, network calls {manifest.network_calls}")

    student, expert = load_human_csv(args.human or fixture_path())
    tables = analyze(load_traces(cfg.output_dir), student, expert, cfg.analysis)
    write_metrics(tables, cfg.output_dir / "metrics")

    shift = load_config(CONFIGS / "oos_shift.yaml", output_dir=str(out / "oos_shift"))
    validate_oos(shift, cfg.output_dir)

    summary = report([cfg.output_dir / "metrics", shift.output_dir / "metrics"], out / "report")
    print(json.dumps({k: summary[k] for k in ("layouts", "figures", "gaps")}, indent=1))
    print(f"report written to {out / 'report'}")


if __name__ == "__main__":
    main()
