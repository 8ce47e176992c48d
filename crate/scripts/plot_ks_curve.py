#!/usr/bin/env python3
"""Plot one or more ks_curve.csv files from `mew diagnose` on log-log axes."""
import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("curves", nargs="+", help="ks_curve.csv files; label with LABEL=PATH")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    for spec in a.curves:
        label, _, path = spec.rpartition("=")
        df = pd.read_csv(path)
        label = label or path
        ax.plot(df.checkpoint, df.pairwise_mean, marker="o", label=f"{label} pairwise")
        if "to_target_mean" in df:
            ax.plot(df.checkpoint, df.to_target_mean, marker="s", ls="--", label=f"{label} to target")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("records per chain")
    ax.set_ylabel("mean KS distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(a.output, dpi=150)


if __name__ == "__main__":
    main()
