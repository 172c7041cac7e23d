"""JSON (de)serialization of spaces, mechanisms and extension results.

Metric space::

    {"labels": [...],
     "metric": {"type": "explicit", "matrix": [[...]]}
             | {"type": "hamming", "vectors": [...]}
             | {"type": "graph_node", "n": 4, "graphs": [<graph>, ...]}}

``labels`` may be omitted for Hamming and graph spaces. ``graphs`` is
optional and defaults to every graph on ``n`` vertices. A graph is
``{"n": 4, "edges": [[0, 1], ...]}``.

Mechanism::

    {"space": <space>, "outputs": [...], "rows": {"<label>": [p, ...]},
     "hypothesis": ["<label>", ...]}

With ``hypothesis`` the file describes a mechanism on ``H`` and only rows of
``H`` are used.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Union

import numpy as np

from dpextend.extension import ExtensionResult
from dpextend.mechanism import FiniteMechanism, Mechanism, PartialMechanism
from dpextend.spaces import (
    HypothesisSet,
    LabeledGraph,
    MetricSpace,
    explicit_space,
    graph_space,
    hamming_space,
    vertex_pairs,
)


class SchemaError(ValueError):
    """The JSON document does not have the expected structure."""


def read_json(path: Union[str, Path]) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _render(obj: Any, depth: int) -> str:
    pad = "  " * (depth + 1)
    if isinstance(obj, dict) and obj:
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, depth + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * depth + "}"
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        items = [pad + _render(v, depth + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * depth + "]"
    return json.dumps(obj)


def dumps(obj: Any) -> str:
    """Indented JSON with flat lists kept on one line."""
    return _render(obj, 0) + "\n"


def _require(obj: Any, key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    return obj[key]


def space_from_json(obj: dict[str, Any]) -> MetricSpace:
    metric = _require(obj, "metric", "space")
    kind = _require(metric, "type", "space.metric")
    labels = obj.get("labels")
    if kind == "explicit":
        if labels is None:
            raise SchemaError("space: explicit metrics need 'labels'")
        return explicit_space(labels, _require(metric, "matrix", "space.metric"))
    if kind == "hamming":
        return hamming_space(_require(metric, "vectors", "space.metric"), labels)
    if kind == "graph_node":
        n = int(_require(metric, "n", "space.metric"))
        graphs = metric.get("graphs")
        if graphs is not None:
            graphs = [LabeledGraph.from_json(g) for g in graphs]
        return graph_space(n, graphs, labels)
    raise SchemaError(f"space.metric: unknown type {kind!r}")


def space_to_json(space: MetricSpace) -> dict[str, Any]:
    if space.kind == "hamming":
        vecs = space.params["vectors"]
        raw = [
            "".join(v) if all(isinstance(s, str) and len(s) == 1 for s in v) else list(v)
            for v in vecs
        ]
        return {"labels": list(space.labels), "metric": {"type": "hamming", "vectors": raw}}
    if space.kind == "graph_node":
        n = space.params["n"]
        graphs = space.params["graphs"]
        metric: dict[str, Any] = {"type": "graph_node", "n": n}
        default = [g.label for g in graphs] == list(space.labels)
        masks = [g.mask for g in graphs]
        if masks != list(range(1 << len(vertex_pairs(n)))):
            metric["graphs"] = [g.to_json() for g in graphs]
        out: dict[str, Any] = {"metric": metric}
        if not default:
            out["labels"] = list(space.labels)
        return out
    matrix = np.asarray(space.params["matrix"]).tolist()
    return {"labels": list(space.labels), "metric": {"type": "explicit", "matrix": matrix}}


def mechanism_from_json(obj: dict[str, Any]) -> Mechanism:
    space = space_from_json(_require(obj, "space", "mechanism"))
    outputs = [str(o) for o in _require(obj, "outputs", "mechanism")]
    rows = _require(obj, "rows", "mechanism")
    if not isinstance(rows, dict):
        raise SchemaError("mechanism.rows must map dataset labels to probability lists")
    for label in rows:
        space.index(label)
    hypothesis = obj.get("hypothesis")
    if hypothesis is not None:
        h = HypothesisSet.from_labels(space, hypothesis)
        wanted = [space.labels[i] for i in h.members]
    else:
        h = None
        wanted = list(space.labels)
    missing = [label for label in wanted if label not in rows]
    if missing:
        raise SchemaError(f"mechanism.rows: no row for datasets {missing[:5]}")
    table = []
    for label in wanted:
        row = rows[label]
        if not isinstance(row, list) or len(row) != len(outputs):
            raise SchemaError(f"mechanism.rows[{label!r}] must list {len(outputs)} probabilities")
        table.append([float(p) for p in row])
    if h is None:
        return FiniteMechanism(space, outputs, table)
    return PartialMechanism(space, outputs, h, table)


def mechanism_to_json(m: Mechanism) -> dict[str, Any]:
    labels = [m.space.labels[i] for i in m.indices]
    out: dict[str, Any] = {
        "space": space_to_json(m.space),
        "outputs": list(m.outputs),
        "rows": {label: [float(p) for p in row] for label, row in zip(labels, m.table)},
    }
    if isinstance(m, PartialMechanism):
        out["hypothesis"] = labels
    return out


def extension_to_json(r: ExtensionResult) -> dict[str, Any]:
    labels = r.mechanism.space.labels
    return {
        "mechanism": mechanism_to_json(r.mechanism),
        "normalizers": {label: float(z) for label, z in zip(labels, r.normalizers)},
        "eps_in": r.eps_in,
        "base": labels[r.base_index],
    }


def load_mechanism(path: Union[str, Path]) -> Mechanism:
    return mechanism_from_json(read_json(path))
