#!/usr/bin/env python3
"""Plot loss, gradient norm and CARP cost from one or more fedex artifact directories."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("runs", nargs="+", type=Path, help="artifact directories written by `fedex run`")
    parser.add_argument("--out", type=Path, default=Path("fedex_plot.png"))
    args = parser.parse_args()

    fig, (ax_loss, ax_grad, ax_cost) = plt.subplots(1, 3, figsize=(15, 4))
    for run in args.runs:
        traces = [pd.read_csv(p) for p in sorted(run.glob("trace_rep*.csv"))]
        if not traces:
            raise SystemExit(f"{run}: no trace_rep*.csv files")
        mean = pd.concat(traces).groupby("slot").mean(numeric_only=True)
        ax_loss.plot(mean.index, mean["loss"], label=run.name)
        ax_grad.semilogy(mean.index, mean["grad_norm_sq"], label=run.name)
        cost = pd.read_csv(run / "cost_trace.csv")
        ax_cost.step(cost["iteration"], cost["best_cost"], where="post", label=run.name)

    ax_loss.set(xlabel="slot", ylabel="loss", title="global loss")
    ax_grad.set(xlabel="slot", ylabel="||grad f||^2", title="gradient norm")
    ax_cost.set(xlabel="Gibbs iteration", ylabel="best cost", title="CARP best cost")
    for ax in (ax_loss, ax_grad, ax_cost):
        ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
