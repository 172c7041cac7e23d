"""Finite metric spaces over dataset universes.

A :class:`MetricSpace` is an ordered list of dataset labels together with a
distance function. Distances are served in blocks (``space.block(rows, cols)``)
so that large graph universes never need their full distance matrix in
memory; small spaces can still be materialized with :meth:`MetricSpace.matrix`.

Graphs are labeled simple graphs on ``n`` vertices stored as an edge bitmask.
Bit ``b`` of the mask is the ``b``-th vertex pair in lexicographic order
``(0, 1), (0, 2), ..., (n - 2, n - 1)``, so ascending mask order is the
canonical graph order used everywhere in the package.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from dpextend.errors import (
    EmptyHypothesis,
    InvalidHypothesis,
    LengthMismatch,
    MetricError,
    SizeMismatch,
    TooLarge,
    UnknownDataset,
)

ENUMERATION_CAP = 6
VERTEX_COVER_CAP = 8
# Full distance matrices above this many points are refused.
MAX_MATRIX_POINTS = 4096

BlockFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MetricSpace:
    """Ordered dataset labels plus a pairwise distance.

    Args:
      labels: dataset identifiers, one per point.
      block: function mapping two index arrays to the float distance block
        ``d[rows][:, cols]``.
      kind: metric family, one of ``"explicit"``, ``"hamming"``,
        ``"graph_node"``.
      params: family-specific data needed to serialize the space.
    """

    def __init__(
        self,
        labels: Sequence[str],
        block: BlockFn,
        kind: str = "explicit",
        params: Optional[dict[str, Any]] = None,
    ):
        self.labels = tuple(str(label) for label in labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("dataset labels must be unique")
        self._block = block
        self.kind = kind
        self.params = dict(params or {})
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def from_matrix(cls, labels: Sequence[str], matrix: Any) -> "MetricSpace":
        mat = np.array(matrix, dtype=float)
        labels = list(labels)
        if mat.shape != (len(labels), len(labels)):
            raise SizeMismatch(
                f"distance matrix has shape {mat.shape}, expected {(len(labels), len(labels))}"
            )
        mat.setflags(write=False)
        return cls(
            labels,
            lambda rows, cols: mat[np.ix_(rows, cols)],
            kind="explicit",
            params={"matrix": mat},
        )

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"MetricSpace(kind={self.kind!r}, size={len(self)})"

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise UnknownDataset(f"unknown dataset label {label!r}") from None

    def block(self, rows: Iterable[int], cols: Iterable[int]) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        return np.asarray(self._block(rows, cols), dtype=float)

    def distance(self, i: int, j: int) -> float:
        return float(self.block([i], [j])[0, 0])

    def matrix(self, max_points: int = MAX_MATRIX_POINTS) -> np.ndarray:
        if len(self) > max_points:
            raise TooLarge(f"{len(self)} points exceeds the {max_points}-point matrix limit")
        idx = np.arange(len(self))
        return self.block(idx, idx)

    def subspace(self, indices: Sequence[int]) -> "MetricSpace":
        """Restriction of the metric to ``indices`` (in the given order)."""
        idx = np.asarray(indices, dtype=np.int64)
        parent = self._block
        return MetricSpace(
            [self.labels[i] for i in idx],
            lambda rows, cols: parent(idx[rows], idx[cols]),
            kind="explicit",
            params={"matrix": self.block(idx, idx)},
        )

    def dist_to_set(self, members: Sequence[int]) -> np.ndarray:
        """``min_{h in members} d(x, h)`` for every point ``x``."""
        out = np.empty(len(self))
        members = np.asarray(members, dtype=np.int64)
        for start in range(0, len(self), 256):
            rows = np.arange(start, min(start + 256, len(self)))
            out[rows] = self.block(rows, members).min(axis=1)
        return out


@dataclasses.dataclass(frozen=True)
class ValidationResult:
    """Outcome of a structural check; falsy when a violation was found."""

    ok: bool
    kind: str = "Ok"
    witness: tuple = ()
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def raise_for_error(self) -> None:
        if not self.ok:
            raise MetricError(self.kind, self.witness, self.message)

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "kind": self.kind, "witness": list(self.witness), "message": self.message}


OK = ValidationResult(True)


def _first_true(mask: np.ndarray) -> Optional[tuple[int, ...]]:
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    return tuple(int(x) for x in np.unravel_index(hits[0], mask.shape))


def validate_metric(m: MetricSpace, rel_tol: float = 1e-12) -> ValidationResult:
    """Check the metric axioms exhaustively.

    Checks run in the order: negativity, diagonal, symmetry, distinctness of
    points, triangle inequality. The first violation found is returned with
    the lexicographically smallest witness of its kind.
    """
    if len(m) == 0:
        return ValidationResult(False, "EmptySpace", (), "metric space has no points")
    d = m.matrix()
    if not np.all(np.isfinite(d)):
        w = _first_true(~np.isfinite(d))
        return ValidationResult(False, "NonFiniteDistance", w, f"non-finite distance at {w}")
    tol = rel_tol * max(1.0, float(d.max()))

    w = _first_true(d < 0)
    if w is not None:
        return ValidationResult(False, "NegativeDistance", w, f"d{w} = {d[w]} < 0")
    diag = np.diag(d)
    w = _first_true(diag != 0)
    if w is not None:
        i = w[0]
        return ValidationResult(False, "NonzeroDiagonal", (i, i), f"d({i},{i}) = {diag[i]} != 0")
    w = _first_true(np.triu(np.abs(d - d.T) > tol, k=1))
    if w is not None:
        i, j = w
        return ValidationResult(
            False, "NonSymmetric", w, f"d({i},{j}) = {d[i, j]} but d({j},{i}) = {d[j, i]}"
        )
    w = _first_true(np.triu(d <= tol, k=1))
    if w is not None:
        return ValidationResult(
            False, "DuplicateDatasets", w, f"distinct datasets {w} at distance {d[w]}"
        )

    best: Optional[tuple[int, int, int]] = None
    for j in range(len(m)):
        viol = d > d[:, j : j + 1] + d[j : j + 1, :] + tol
        rows = np.flatnonzero(viol.any(axis=1))
        if rows.size == 0:
            continue
        i = int(rows[0])
        k = int(np.flatnonzero(viol[i])[0])
        if best is None or (i, j, k) < best:
            best = (i, j, k)
    if best is not None:
        i, j, k = best
        return ValidationResult(
            False,
            "TriangleViolation",
            best,
            f"d({i},{k}) = {d[i, k]} > d({i},{j}) + d({j},{k}) = {d[i, j] + d[j, k]}",
        )
    return OK


def explicit_space(labels: Sequence[str], matrix: Any) -> MetricSpace:
    return MetricSpace.from_matrix(labels, matrix)


def hamming_space(
    vectors: Sequence[Sequence[Any]], labels: Optional[Sequence[str]] = None
) -> MetricSpace:
    """Hamming distance between fixed-length symbol vectors.

    Strings are treated as vectors of characters. Labels default to the
    vectors themselves joined into strings.
    """
    if len(vectors) == 0:
        raise LengthMismatch("hamming space needs at least one vector")
    vecs = [tuple(v) for v in vectors]
    length = len(vecs[0])
    for i, v in enumerate(vecs):
        if len(v) != length:
            raise LengthMismatch(f"vector {i} has length {len(v)}, expected {length}")
    symbols: dict[Any, int] = {}
    codes = np.array(
        [[symbols.setdefault(s, len(symbols)) for s in v] for v in vecs], dtype=np.int64
    ).reshape(len(vecs), length)
    if labels is None:
        labels = ["".join(str(s) for s in v) for v in vecs]
    if len(labels) != len(vecs):
        raise SizeMismatch(f"{len(labels)} labels for {len(vecs)} vectors")

    def block(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return (codes[rows][:, None, :] != codes[cols][None, :, :]).sum(axis=-1)

    return MetricSpace(labels, block, kind="hamming", params={"vectors": vecs, "codes": codes})


# --------------------------------------------------------------------------
# Graphs
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def vertex_pairs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(n), 2))


@functools.lru_cache(maxsize=None)
def incidence_masks(n: int) -> tuple[int, ...]:
    """Edge bitmask of all pairs touching each vertex."""
    inc = [0] * n
    for b, (u, v) in enumerate(vertex_pairs(n)):
        inc[u] |= 1 << b
        inc[v] |= 1 << b
    return tuple(inc)


@dataclasses.dataclass(frozen=True, order=True)
class LabeledGraph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    mask: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        if self.mask < 0 or self.mask >> len(vertex_pairs(self.n)):
            raise ValueError(f"edge mask {self.mask} out of range for n={self.n}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "LabeledGraph":
        index = {p: b for b, p in enumerate(vertex_pairs(n))}
        mask = 0
        for edge in edges:
            u, v = int(edge[0]), int(edge[1])
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key not in index:
                raise ValueError(f"edge {key} out of range for n={n}")
            mask |= 1 << index[key]
        return cls(n, mask)

    @classmethod
    def from_adjacency(cls, adjacency: Any) -> "LabeledGraph":
        a = np.asarray(adjacency).astype(bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(a != a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a)):
            raise ValueError("adjacency must have a zero diagonal")
        n = a.shape[0]
        return cls.from_edges(n, [(u, v) for u, v in vertex_pairs(n) if a[u, v]])

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "LabeledGraph":
        edges = obj.get("edges", [])
        for e in edges:
            if len(e) != 2 or not e[0] < e[1]:
                raise ValueError(f"edge {e} must be a pair [u, v] with u < v")
        return cls.from_edges(int(obj["n"]), edges)

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [p for b, p in enumerate(vertex_pairs(self.n)) if self.mask >> b & 1]

    @property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    @property
    def edge_count(self) -> int:
        return self.mask.bit_count()

    def degrees(self) -> list[int]:
        return [(self.mask & inc).bit_count() for inc in incidence_masks(self.n)]

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    @property
    def label(self) -> str:
        return f"g{self.mask}"


@functools.lru_cache(maxsize=None)
def _covers_by_size(n: int) -> tuple[tuple[int, int], ...]:
    """``(|T|, edges incident to T)`` for every vertex subset T, smallest first."""
    inc = incidence_masks(n)
    covers = []
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            cov = 0
            for v in subset:
                cov |= inc[v]
            covers.append((size, cov))
    return tuple(covers)


def min_vertex_cover_size(n: int, edge_mask: int) -> int:
    """Size of a minimum vertex cover of the graph with the given edge mask."""
    if n > VERTEX_COVER_CAP:
        raise TooLarge(f"vertex cover search is capped at n={VERTEX_COVER_CAP}")
    for size, cov in _covers_by_size(n):
        if edge_mask & ~cov == 0:
            return size
    raise AssertionError("the full vertex set always covers")


@functools.lru_cache(maxsize=8)
def cover_size_table(n: int) -> np.ndarray:
    """Minimum vertex cover size for every edge mask on ``n`` vertices."""
    if n > 7:
        raise TooLarge("cover tables are only built for n <= 7")
    masks = np.arange(1 << len(vertex_pairs(n)), dtype=np.int64)
    table = np.full(masks.shape, -1, dtype=np.int64)
    for size, cov in _covers_by_size(n):
        hit = (table < 0) & ((masks & ~cov) == 0)
        table[hit] = size
    table.setflags(write=False)
    return table


def _check_same_size(g1: LabeledGraph, g2: LabeledGraph) -> None:
    if g1.n != g2.n:
        raise SizeMismatch(f"graphs have {g1.n} and {g2.n} vertices")


def node_distance(g1: LabeledGraph, g2: LabeledGraph) -> int:
    """Fewest vertices whose incident edges must be rewritten to turn g1 into g2.

    Equals the minimum vertex cover of the symmetric difference of the edge
    sets.
    """
    _check_same_size(g1, g2)
    return min_vertex_cover_size(g1.n, g1.mask ^ g2.mask)


def edge_distance(g1: LabeledGraph, g2: LabeledGraph) -> int:
    _check_same_size(g1, g2)
    return (g1.mask ^ g2.mask).bit_count()


def degree_matrix(n: int, masks: np.ndarray) -> np.ndarray:
    """Vertex degrees, shape ``(len(masks), n)``."""
    inc = np.array(incidence_masks(n), dtype=np.int64)
    return np.bitwise_count(np.asarray(masks, dtype=np.int64)[:, None] & inc[None, :]).astype(
        np.int64
    )


def enumerate_graphs(
    n: int, max_degree: Optional[int] = None, cap: int = ENUMERATION_CAP
) -> list[LabeledGraph]:
    """All labeled graphs on ``n`` vertices in ascending edge-mask order."""
    if n > cap:
        raise TooLarge(f"n={n} exceeds the enumeration cap {cap}")
    if n < 0:
        raise ValueError("vertex count must be nonnegative")
    masks = np.arange(1 << len(vertex_pairs(n)), dtype=np.int64)
    if max_degree is not None and n > 0:
        masks = masks[degree_matrix(n, masks).max(axis=1) <= max_degree]
    return [LabeledGraph(n, int(m)) for m in masks]


def graph_space(
    n: int,
    graphs: Optional[Sequence[LabeledGraph]] = None,
    labels: Optional[Sequence[str]] = None,
    cap: int = ENUMERATION_CAP,
) -> MetricSpace:
    """Node-distance metric space over ``graphs`` (default: every graph on n vertices)."""
    if graphs is None:
        graphs = enumerate_graphs(n, cap=cap)
    for g in graphs:
        if g.n != n:
            raise SizeMismatch(f"graph on {g.n} vertices in a space over n={n}")
    graphs = list(graphs)
    masks = np.array([g.mask for g in graphs], dtype=np.int64)
    if labels is None:
        labels = [g.label for g in graphs]
    if len(labels) != len(graphs):
        raise SizeMismatch(f"{len(labels)} labels for {len(graphs)} graphs")

    if n <= 7:
        table = cover_size_table(n)

        def block(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
            return table[masks[rows][:, None] ^ masks[cols][None, :]]

    else:

        @functools.lru_cache(maxsize=None)
        def cover(mask: int) -> int:
            return min_vertex_cover_size(n, mask)

        def block(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
            return np.array(
                [[cover(int(masks[r] ^ masks[c])) for c in cols] for r in rows], dtype=float
            ).reshape(len(rows), len(cols))

    return MetricSpace(labels, block, kind="graph_node", params={"n": n, "graphs": graphs})


# --------------------------------------------------------------------------
# Hypothesis sets
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class HypothesisSet:
    """Nonempty subset of dataset indices, kept in ascending (canonical) order.

    The first member is the base dataset used for density views.
    """

    members: tuple[int, ...]

    def __post_init__(self):
        if len(self.members) == 0:
            raise EmptyHypothesis("hypothesis set must be nonempty")
        if len(set(self.members)) != len(self.members):
            raise InvalidHypothesis(f"duplicate members in hypothesis set {self.members}")
        object.__setattr__(self, "members", tuple(sorted(int(i) for i in self.members)))

    @classmethod
    def of(cls, space: MetricSpace, members: Iterable[int]) -> "HypothesisSet":
        h = cls(tuple(members))
        h.check(space)
        return h

    @classmethod
    def from_labels(cls, space: MetricSpace, labels: Iterable[str]) -> "HypothesisSet":
        return cls.of(space, [space.index(label) for label in labels])

    def check(self, space: MetricSpace) -> None:
        bad = [i for i in self.members if not 0 <= i < len(space)]
        if bad:
            raise InvalidHypothesis(f"indices {bad} are not datasets of the space")

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, index: object) -> bool:
        return index in self.members

    def __iter__(self):
        return iter(self.members)

    @property
    def base(self) -> int:
        return self.members[0]

    def position(self, index: int) -> int:
        return self.members.index(index)
