"""Converter for the Lazega law-firm data as distributed on the SIENA site.

The raw distribution is two whitespace-separated matrices:

* ``ELwork.dat``: 71 x 71 0/1 matrix, row i naming lawyer j as a close
  co-worker gives the edge i -> j;
* ``ELattr.dat``: 71 rows of (seniority, status, gender, office, years,
  age, practice, law school).

``convert`` writes the canonical ``edges.csv`` / ``attrs.csv`` /
``schema.json`` triple that the CLI consumes. Node ids are the 1-based row
numbers of the raw files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

ATTRIBUTES = [
    # (output name, raw column index in ELattr.dat, kind)
    ("identity", 1, "categorical"),
    ("gender", 2, "categorical"),
    ("location", 3, "categorical"),
    ("years", 4, "continuous"),
    ("age", 5, "continuous"),
    ("practice", 6, "categorical"),
    ("school", 7, "categorical"),
]

SCHEMA = {
    "id": "id",
    "attributes": [{"name": name, "kind": kind} for name, _, kind in ATTRIBUTES],
}

RAW_WORK = "ELwork.dat"
RAW_ATTR = "ELattr.dat"


def convert(work_path, attr_path, out_dir) -> list[Path]:
    work = np.loadtxt(work_path, dtype=int)
    attr = np.loadtxt(attr_path)
    n = work.shape[0]
    if work.shape != (n, n):
        raise ValueError(f"{work_path}: expected a square matrix, got {work.shape}")
    if attr.shape[0] != n or attr.shape[1] < 8:
        raise ValueError(f"{attr_path}: expected {n} rows of 8 attributes, got {attr.shape}")
    if not np.isin(work, (0, 1)).all():
        raise ValueError(f"{work_path}: entries must be 0/1")
    np.fill_diagonal(work, 0)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges = out / "edges.csv"
    with open(edges, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for i, j in zip(*np.nonzero(work)):
            w.writerow([i + 1, j + 1])
    attrs = out / "attrs.csv"
    with open(attrs, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [name for name, _, _ in ATTRIBUTES])
        for i in range(n):
            row = []
            for _, col, kind in ATTRIBUTES:
                v = attr[i, col]
                row.append(int(v) if kind == "categorical" or v == int(v) else v)
            w.writerow([i + 1] + row)
    schema = out / "schema.json"
    schema.write_text(json.dumps(SCHEMA, indent=2) + "\n")
    return [edges, attrs, schema]


def find_dataset(root) -> dict | None:
    """Locate canonical (or raw, converting on the fly) Lazega files under
    ``root``; returns the three canonical paths or None."""
    root = Path(root)
    canon = {k: root / f for k, f in (("graph", "edges.csv"), ("attrs", "attrs.csv"), ("schema", "schema.json"))}
    if canon["graph"].exists() and canon["attrs"].exists():
        if not canon["schema"].exists():
            canon["schema"].write_text(json.dumps(SCHEMA, indent=2) + "\n")
        return canon
    raw_work, raw_attr = root / RAW_WORK, root / RAW_ATTR
    if raw_work.exists() and raw_attr.exists():
        convert(raw_work, raw_attr, root)
        return canon
    return None
