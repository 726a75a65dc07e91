"""Synthetic-year comparison of the tuned SVR against ARIMA and seasonal naive.

Thin wrapper around ``heatload compare`` that times the run and prints the
monthly table. ``--mode open_loop`` feeds true lagged counter values instead
of the model's own predictions, which isolates one-step accuracy from
recursive drift.
"""
import argparse
import json
import os
import time
from pathlib import Path

from heatload.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--out", default="year_comparison")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mode", default="recursive", choices=["recursive", "open_loop"])
    ap.add_argument("--tau", type=int, default=-1)
    ap.add_argument("--workers", type=int, default=min(8, os.cpu_count() or 1))
    args = ap.parse_args()
    t0 = time.perf_counter()
    rc = cli(["compare", "--preset", "year", "--seed", str(args.seed), "--mode", args.mode,
              "--tau", str(args.tau), "--workers", str(args.workers), "-o", args.out, "--force"])
    elapsed = time.perf_counter() - t0
    if rc:
        raise SystemExit(rc)
    out = Path(args.out)
    print((out / "comparison.md").read_text())
    doc = json.loads((out / "comparison.json").read_text())
    print("monthly mean MAPE:", {m: round(v["mean"], 3) for m, v in doc["monthly_mean_mape"].items()})
    print(f"pso_ksvr beats arima in {doc['pso_ksvr_beats_arima_months']}/{doc['n_months']} months")
    print(f"{elapsed / 60:.1f} min with {args.workers} workers")


if __name__ == "__main__":
    main()
