#!/usr/bin/env python3
"""Heat map of sweep.csv from `mew sweep`."""
import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("sweep")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    df = pd.read_csv(a.sweep)
    x, y = df.columns[1], df.columns[2]
    grid = df.pivot(index=y, columns=x, values="mean_pairwise_ks")
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid.values, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(grid.columns)), [f"{v:g}" for v in grid.columns])
    ax.set_yticks(range(len(grid.index)), [f"{v:g}" for v in grid.index])
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    fig.colorbar(im, label="mean pairwise 2D KS")
    fig.tight_layout()
    fig.savefig(a.output, dpi=150)


if __name__ == "__main__":
    main()
