#!/usr/bin/env python3
"""Convert the raw Planetoid files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the plain-text dataset directory read by fpgnn::load_dataset.

Output: meta, features.csv, edges.txt, labels.txt, split.txt.

The split is the standard fixed one: the first len(y) nodes train, the next
500 validate, and the nodes listed in test.index test. Citeseer's isolated
test nodes (missing from tx) get zero features and label -1 and are left
unsplit.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_pickle(path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(raw_dir: Path, name: str, out_dir: Path, val_size: int) -> None:
    part = {k: load_pickle(raw_dir / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_index = [int(line) for line in (raw_dir / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    tx, ty = dense(part["tx"]), np.asarray(part["ty"])
    lo, hi = int(test_sorted.min()), int(test_sorted.max())
    if hi - lo + 1 != tx.shape[0]:
        full_x = np.zeros((hi - lo + 1, tx.shape[1]))
        full_y = np.zeros((hi - lo + 1, ty.shape[1]))
        full_x[test_sorted - lo] = tx
        full_y[test_sorted - lo] = ty
        tx, ty = full_x, full_y

    features = np.vstack([dense(part["allx"]), tx])
    onehot = np.vstack([np.asarray(part["ally"]), ty])
    features[test_index] = features[test_sorted]
    onehot[test_index] = onehot[test_sorted]

    n, d = features.shape
    c = onehot.shape[1]
    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)

    n_train = len(part["y"])
    split = ["none"] * n
    for i in range(n_train):
        split[i] = "train"
    for i in range(n_train, n_train + val_size):
        split[i] = "val"
    for i in test_index:
        split[i] = "test"

    edges = set()
    for u, nbrs in part["graph"].items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "meta").write_text(f"{n} {d} {c}\n")
    with open(out_dir / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    with open(out_dir / "edges.txt", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")
    (out_dir / "labels.txt").write_text("".join(f"{int(y)}\n" for y in labels))
    (out_dir / "split.txt").write_text("".join(f"{s}\n" for s in split))

    counts = {s: split.count(s) for s in ("train", "val", "test")}
    print(f"{name}: n={n} d={d} c={c} edges={len(edges)} "
          f"train={counts['train']} val={counts['val']} test={counts['test']}", file=sys.stderr)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw_dir", type=Path, help="directory holding ind.<name>.* files")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--name", default="cora", help="cora, citeseer or pubmed")
    ap.add_argument("--val-size", type=int, default=500)
    args = ap.parse_args()
    convert(args.raw_dir, args.name, args.out_dir, args.val_size)


if __name__ == "__main__":
    main()
