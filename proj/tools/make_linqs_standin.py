# SPDX-License-Identifier: Apache-2.0
"""Write a synthetic citation graph in LINQS layout (<name>.content, <name>.cites).

Cora-sized by default: 2708 nodes, 1433 binary word features, 7 classes,
~5429 undirected links. Links and words are class-correlated so that both
the topology and the features carry signal. Useful for exercising the Cora
acceptance path when the real dataset is not available; the numbers it
produces say nothing about Cora itself.
"""

import argparse
import pathlib

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--name", default="cora")
    ap.add_argument("--nodes", type=int, default=2708)
    ap.add_argument("--words", type=int, default=1433)
    ap.add_argument("--classes", type=int, default=7)
    ap.add_argument("--edges", type=int, default=5429)
    ap.add_argument("--homophily", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    rng = np.random.default_rng(a.seed)
    labels = rng.integers(a.classes, size=a.nodes)
    by_class = [np.flatnonzero(labels == c) for c in range(a.classes)]

    # each class prefers its own slice of the vocabulary
    topic = rng.integers(a.classes, size=a.words)
    x = np.zeros((a.nodes, a.words), dtype=np.uint8)
    for v in range(a.nodes):
        own = np.flatnonzero(topic == labels[v])
        x[v, rng.choice(own, size=min(12, own.size), replace=False)] = 1
        x[v, rng.integers(a.words, size=6)] = 1

    # preferential attachment inside and across classes gives a skewed degree
    weight = rng.pareto(2.0, size=a.nodes) + 1.0
    edges = set()
    while len(edges) < a.edges:
        u = int(rng.integers(a.nodes))
        pool = by_class[labels[u]] if rng.random() < a.homophily else np.arange(a.nodes)
        p = weight[pool] / weight[pool].sum()
        v = int(rng.choice(pool, p=p))
        if u != v:
            edges.add((min(u, v), max(u, v)))

    a.out.mkdir(parents=True, exist_ok=True)
    with open(a.out / f"{a.name}.content", "w") as f:
        for v in range(a.nodes):
            f.write(f"n{v}\t" + "\t".join(map(str, x[v])) + f"\tc{labels[v]}\n")
    with open(a.out / f"{a.name}.cites", "w") as f:
        for u, v in sorted(edges):
            f.write(f"n{u}\tn{v}\n")


if __name__ == "__main__":
    main()
