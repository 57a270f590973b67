"""Edge-list and node-attribute ingestion, and edge covariate construction."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph_model import CovariateSet, DirectedGraph, degree_sequences

KINDS = ("categorical", "continuous")
RULES = ("match_sign", "abs_distance")
DEFAULT_RULE = {"categorical": "match_sign", "continuous": "abs_distance"}


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class EmptyGraphError(ValueError):
    pass


def _sort_ids(ids):
    ids = list(ids)
    if all(s.lstrip("-").isdigit() for s in ids):
        return sorted(ids, key=int)
    return sorted(ids)


@dataclass(frozen=True)
class NodeAttributeTable:
    ids: tuple
    names: tuple
    kinds: tuple
    values: np.ndarray  # (n, k), float; categorical levels are stored as codes

    def __post_init__(self):
        if self.values.shape != (len(self.ids), len(self.names)):
            raise SchemaError("attribute table shape does not match ids/names")
        for k in self.kinds:
            if k not in KINDS:
                raise SchemaError(f"unknown attribute kind {k!r}")

    @property
    def n(self) -> int:
        return len(self.ids)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def subset(self, keep) -> "NodeAttributeTable":
        keep = list(keep)
        return NodeAttributeTable(
            tuple(self.ids[k] for k in keep), self.names, self.kinds, self.values[keep]
        )


@dataclass(frozen=True)
class EdgeCovariateRule:
    """One rule per attribute, in the order the covariates are assembled."""

    names: tuple
    rules: tuple

    def __post_init__(self):
        if len(self.names) != len(self.rules):
            raise SchemaError("one rule per attribute is required")
        for r in self.rules:
            if r not in RULES:
                raise SchemaError(f"unknown rule {r!r}; expected one of {RULES}")

    @property
    def p(self) -> int:
        return len(self.names)

    @classmethod
    def from_schema(cls, schema: dict) -> "EdgeCovariateRule":
        attrs = schema["attributes"]
        return cls(
            tuple(a["name"] for a in attrs),
            tuple(a.get("rule", DEFAULT_RULE[a["kind"]]) for a in attrs),
        )


def load_schema(path) -> dict:
    with open(path) as fh:
        schema = json.load(fh)
    if "attributes" not in schema or not schema["attributes"]:
        raise SchemaError("schema needs a non-empty 'attributes' list")
    for a in schema["attributes"]:
        if "name" not in a or a.get("kind") not in KINDS:
            raise SchemaError(f"attribute entry {a!r} needs a name and kind in {KINDS}")
    schema.setdefault("id", "id")
    return schema


def load_attributes(path, schema: dict) -> NodeAttributeTable:
    """Read a CSV with an id column plus one column per schema attribute.

    Categorical values are kept as opaque labels (coded to integers);
    continuous values must parse as floats.
    """
    id_col = schema.get("id", "id")
    names = tuple(a["name"] for a in schema["attributes"])
    kinds = tuple(a["kind"] for a in schema["attributes"])
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {id_col, *names} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            node = row[id_col].strip()
            if node in rows:
                raise ParseError(f"{path}:{lineno}: duplicate node id {node!r}")
            rows[node] = (lineno, row)
    ids = tuple(_sort_ids(rows))
    values = np.empty((len(ids), len(names)))
    for k, (name, kind) in enumerate(zip(names, kinds)):
        raw = [rows[i][1][name].strip() for i in ids]
        if kind == "continuous":
            for idx, (node, text) in enumerate(zip(ids, raw)):
                try:
                    values[idx, k] = float(text)
                except ValueError:
                    raise ParseError(f"{path}:{rows[node][0]}: {name}={text!r} is not a number") from None
        else:
            if any(t == "" for t in raw):
                raise ParseError(f"{path}: empty value in categorical column {name}")
            levels = {t: c for c, t in enumerate(sorted(set(raw)))}
            values[:, k] = [levels[t] for t in raw]
    return NodeAttributeTable(ids, names, kinds, values)


def load_graph(edge_list_path, node_ids=None) -> DirectedGraph:
    """Read a ``src,dst`` CSV of directed edges.

    Without ``node_ids`` the node set is every id mentioned in the file.
    With ``node_ids`` the node order is taken from it, and edges naming an
    unknown node are rejected. Duplicate edges collapse with a warning.
    """
    edges = []
    with open(edge_list_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["src", "dst"]:
            raise ParseError(f"{edge_list_path}:1: header must be 'src,dst'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise ParseError(f"{edge_list_path}:{lineno}: expected two fields, got {row!r}")
            src, dst = row[0].strip(), row[1].strip()
            if src == dst:
                raise ValidationError(f"{edge_list_path}:{lineno}: self-loop on node {src!r}")
            edges.append((lineno, src, dst))
    if node_ids is None:
        node_ids = _sort_ids({x for _, s, d in edges for x in (s, d)})
    node_ids = tuple(str(x) for x in node_ids)
    index = {node: k for k, node in enumerate(node_ids)}
    n = len(node_ids)
    a = np.zeros((n, n), dtype=np.int8)
    dupes = 0
    for lineno, s, d in edges:
        if s not in index or d not in index:
            bad = s if s not in index else d
            raise ValidationError(f"{edge_list_path}:{lineno}: node {bad!r} has no attribute row")
        if a[index[s], index[d]]:
            dupes += 1
        a[index[s], index[d]] = 1
    if dupes:
        warnings.warn(f"{edge_list_path}: collapsed {dupes} duplicate edge(s)", stacklevel=2)
    return DirectedGraph(a, node_ids)


def save_graph(g: DirectedGraph, path) -> None:
    labels = g.labels if g.labels is not None else tuple(str(k + 1) for k in range(g.n))
    src, dst = np.nonzero(g.adjacency)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for i, j in zip(src, dst):
            w.writerow([labels[i], labels[j]])


def preprocess_drop_isolates(g: DirectedGraph, attrs: NodeAttributeTable | None = None):
    """Remove nodes with zero out-degree or zero in-degree until none remain.

    Returns the reduced graph, the matching attribute rows and a map from
    new index to original label (or original index when unlabelled).
    """
    if attrs is not None and g.labels is not None and tuple(attrs.ids) != tuple(g.labels):
        raise ValidationError("attribute rows are not aligned with graph nodes")
    keep = np.arange(g.n)
    a = g.adjacency
    while True:
        sub = a[np.ix_(keep, keep)]
        ok = (sub.sum(axis=1) > 0) & (sub.sum(axis=0) > 0)
        if ok.all():
            break
        keep = keep[ok]
        if keep.size < 2:
            raise EmptyGraphError("removing zero-degree nodes leaves fewer than two nodes")
    labels = g.labels if g.labels is not None else tuple(range(g.n))
    id_map = {new: labels[old] for new, old in enumerate(keep)}
    g2 = g.subgraph(keep)
    attrs2 = attrs.subset(keep) if attrs is not None else None
    return g2, attrs2, id_map


def build_covariates(attrs: NodeAttributeTable, rules: EdgeCovariateRule) -> CovariateSet:
    """Z_ijk = +1/-1 for equal/unequal categorical values (match_sign) or
    |x_ik - x_jk| for continuous values (abs_distance)."""
    blocks = []
    for name, rule in zip(rules.names, rules.rules):
        if name not in attrs.names:
            raise SchemaError(f"no attribute named {name!r}")
        kind = attrs.kinds[attrs.names.index(name)]
        x = attrs.column(name)
        if rule == "abs_distance":
            if kind != "continuous":
                raise SchemaError(f"abs_distance needs a continuous attribute, {name!r} is {kind}")
            blocks.append(np.abs(x[:, None] - x[None, :]))
        else:
            blocks.append(np.where(x[:, None] == x[None, :], 1.0, -1.0))
    return CovariateSet(np.stack(blocks, axis=-1))


def degree_summary(g: DirectedGraph) -> dict:
    """min, quartiles and max of the out- and in-degrees."""
    d, b = degree_sequences(g)
    q = lambda x: [float(v) for v in np.percentile(x, [0, 25, 50, 75, 100])]
    return {"d": q(d), "b": q(b)}
