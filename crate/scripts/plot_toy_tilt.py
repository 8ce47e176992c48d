#!/usr/bin/env python3
"""Sampled versus predicted means from toy_tilt.csv (`mew toy-tilt --out`)."""
import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("toy")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    df = pd.read_csv(a.toy)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(df["lambda"], df["mean"], "o-", label="sampled")
    ax.plot(df["lambda"], df.predicted_mean, "s--", label="predicted")
    ax.set_xlabel("proposal rate lambda")
    ax.set_ylabel("mean")
    ax.legend()
    fig.tight_layout()
    fig.savefig(a.output, dpi=150)


if __name__ == "__main__":
    main()
