"""Rebuild the training curves from the trace CSVs alone.

Runs the smallest CLI pipeline into a temporary directory, then reads
the two trace files back and renders the plotted series (cost vs
iteration and cost vs cumulative angle movement) as text, proving the
CSVs carry everything a plotting script needs.
"""

import csv
import tempfile
from pathlib import Path

from qfold.cli import PipelineConfig, run_pipeline
from qfold.encoder import Stage1Config


def sparkline(values, width=48):
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    chars = " .:-=+*#%@"
    idx = [int((v - lo) / span * (len(chars) - 1)) for v in values]
    step = max(1, len(idx) // width)
    return "".join(chars[i] for i in idx[::step])


with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "run"
    config = PipelineConfig(
        side=4,
        out_dir=str(out),
        run_id="curves",
        stage1=Stage1Config(depth=3, learning_rate=0.1, max_iters=400),
        classifier_lr=0.02,
    )
    run_pipeline(config)

    with open(out / "stage1_trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    costs = [float(r["cost"]) for r in rows]
    residuals = [float(r["residual"]) for r in rows]
    cum = [float(r["cum_delta_theta_l1"]) for r in rows]
    print(f"stage 1: {len(rows)} iterations")
    print(f"  cost vs iteration      {sparkline(costs)}  {costs[0]:.3f} -> {costs[-1]:.3f}")
    print(f"  residual vs iteration  {sparkline(residuals)}  {residuals[0]:.3f} -> {residuals[-1]:.1e}")
    print(f"  cum |dtheta|_1         {sparkline(cum)}  0 -> {cum[-1]:.2f}")

    with open(out / "classifier_trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    costs = [float(r["cost"]) for r in rows]
    cum = [float(r["cum_delta_theta_l1"]) for r in rows]
    print(f"\nclassifier: {len(rows)} iterations")
    print(f"  cost vs iteration      {sparkline(costs)}  {costs[0]:.2f} -> {costs[-1]:.2f}")
    print(f"  cost vs cum |dtheta|_1 pairs, first/last: "
          f"({cum[0]:.3f}, {costs[0]:.2f}) -> ({cum[-1]:.3f}, {costs[-1]:.2f})")
