#!/usr/bin/env python3
"""Histograms of one observable from record files (chain_*.jsonl, baseline.jsonl)."""
import argparse
import json

import matplotlib.pyplot as plt
import numpy as np


def column(path, name):
    with open(path) as f:
        return np.array([json.loads(line)["observables"][name] for line in f if line.strip()])


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("records", nargs="+", help="record files; label with LABEL=PATH")
    p.add_argument("--observable", default="cut_edges")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    series = []
    for spec in a.records:
        label, _, path = spec.rpartition("=")
        series.append((label or path, column(path, a.observable)))
    lo = min(v.min() for _, v in series)
    hi = max(v.max() for _, v in series)
    integer = all(np.all(v == np.round(v)) for _, v in series)
    bins = np.arange(lo - 0.5, hi + 1.5) if integer else 40
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in series:
        ax.hist(values, bins=bins, density=True, histtype="step", label=label)
    ax.set_xlabel(a.observable)
    ax.set_ylabel("frequency")
    ax.legend()
    fig.tight_layout()
    fig.savefig(a.output, dpi=150)


if __name__ == "__main__":
    main()
