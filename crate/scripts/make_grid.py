#!/usr/bin/env python3
"""Write a rows x cols grid dual graph with unit populations and optional random votes."""
import argparse
import json
import random


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("--votes-seed", type=int, help="add dem_votes/rep_votes drawn from this seed")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    rng = random.Random(a.votes_seed)
    vertices, edges = [], []
    for r in range(a.rows):
        for c in range(a.cols):
            v = {"id": f"{r}_{c}", "population": 1}
            if a.votes_seed is not None:
                dem = rng.randint(0, 10)
                v["dem_votes"], v["rep_votes"] = dem, 10 - dem
            vertices.append(v)
            if c + 1 < a.cols:
                edges.append([f"{r}_{c}", f"{r}_{c + 1}"])
            if r + 1 < a.rows:
                edges.append([f"{r}_{c}", f"{r + 1}_{c}"])
    with open(a.output, "w") as f:
        json.dump({"vertices": vertices, "edges": edges}, f)


if __name__ == "__main__":
    main()
