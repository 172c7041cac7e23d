"""Graph applications: bounded-degree edge counting and G(n, p) density estimation.

The universe is every labeled graph on ``n`` vertices under node distance.
On graphs of maximum degree at most ``degree_bound`` the edge count moves by
at most ``degree_bound`` per rewired vertex, so two-sided geometric noise with
``alpha = eps / degree_bound`` is eps-DP there. The extension carries that
mechanism to all graphs at privacy 2 eps. The baseline instead uses the global
sensitivity ``n - 1``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from typing import Any, Optional, Sequence

import numpy as np

from dpextend.errors import BadParameters
from dpextend.extension import ExtensionResult, extend
from dpextend.mechanism import FiniteMechanism, PartialMechanism, truncated_geometric
from dpextend.spaces import (
    ENUMERATION_CAP,
    HypothesisSet,
    MetricSpace,
    ValidationResult,
    degree_matrix,
    graph_space,
    vertex_pairs,
)
from dpextend.verifier import AuditReport, audit_extension


def _edge_counts(space: MetricSpace) -> np.ndarray:
    return np.array([g.edge_count for g in space.params["graphs"]], dtype=np.int64)


def _check_graph_params(n: int, degree_bound: int, eps: float) -> None:
    if n < 2:
        raise BadParameters("graph experiments need at least two vertices")
    if not 1 <= degree_bound < n:
        raise BadParameters(f"degree_bound must be in [1, {n - 1}], got {degree_bound}")
    if not (eps > 0 and math.isfinite(eps)):
        raise BadParameters(f"eps must be positive and finite, got {eps}")


def bounded_degree_hypothesis(space: MetricSpace, degree_bound: int) -> HypothesisSet:
    graphs = space.params["graphs"]
    n = space.params["n"]
    masks = np.array([g.mask for g in graphs], dtype=np.int64)
    keep = degree_matrix(n, masks).max(axis=1) <= degree_bound
    return HypothesisSet.of(space, np.flatnonzero(keep).tolist())


def bounded_degree_mechanism(
    n: int, degree_bound: int, eps: float, cap: int = ENUMERATION_CAP
) -> PartialMechanism:
    """Noisy edge count on graphs of maximum degree at most ``degree_bound``."""
    _check_graph_params(n, degree_bound, eps)
    space = graph_space(n, cap=cap)
    h = bounded_degree_hypothesis(space, degree_bound)
    k_max = len(vertex_pairs(n))
    counts = _edge_counts(space)
    alpha = eps / degree_bound
    rows = _noise_rows(k_max, alpha)
    table = rows[counts[list(h.members)]]
    return PartialMechanism(space, [str(k) for k in range(k_max + 1)], h, table)


def baseline_mechanism(n: int, eps: float, cap: int = ENUMERATION_CAP) -> FiniteMechanism:
    """Noisy edge count calibrated to the global node sensitivity ``n - 1``."""
    _check_graph_params(n, 1, eps)
    space = graph_space(n, cap=cap)
    k_max = len(vertex_pairs(n))
    rows = _noise_rows(k_max, eps / (n - 1))
    return FiniteMechanism(space, [str(k) for k in range(k_max + 1)], rows[_edge_counts(space)])


def _noise_rows(k_max: int, alpha: float) -> np.ndarray:
    """Row ``c`` is the clamped geometric distribution centered at ``c``."""
    return np.array([truncated_geometric(k_max, c, alpha) for c in range(k_max + 1)])


def extended_graph_mechanism(
    n: int, degree_bound: int, eps: float, cap: int = ENUMERATION_CAP
) -> ExtensionResult:
    return extend(bounded_degree_mechanism(n, degree_bound, eps, cap), eps)


def check_restricted_sensitivity(m: PartialMechanism, degree_bound: int) -> ValidationResult:
    """Exhaustively check ``|e(G1) - e(G2)| <= degree_bound * d(G1, G2)`` on ``H``."""
    members = np.array(m.hypothesis.members)
    counts = _edge_counts(m.space)[members]
    for start in range(0, members.size, 256):
        rows = np.arange(start, min(start + 256, members.size))
        dist = m.space.block(members[rows], members)
        bad = np.abs(counts[rows][:, None] - counts[None, :]) > degree_bound * dist
        if bad.any():
            a, b = (int(x) for x in np.argwhere(bad)[0])
            pair = (int(members[rows[a]]), int(members[b]))
            return ValidationResult(
                False, "SensitivityViolation", pair, f"edge counts differ too much for {pair}"
            )
    return ValidationResult(True)


def audit_graph_extension(
    n: int,
    degree_bound: int,
    eps: float,
    base_points: Optional[Sequence[int]] = None,
    cap: int = ENUMERATION_CAP,
) -> AuditReport:
    """Sensitivity check, privacy on ``H``, then the full extension audit."""
    m = bounded_degree_mechanism(n, degree_bound, eps, cap)
    report = AuditReport()
    sens = check_restricted_sensitivity(m, degree_bound)
    report.add(
        "restricted_sensitivity",
        sens.ok,
        degree_bound,
        [m.space.labels[i] for i in sens.witness] if not sens.ok else None,
    )
    report.extend(audit_extension(m, eps, base_points=base_points))
    report.info["n"] = n
    report.info["degree_bound"] = degree_bound
    report.info["hypothesis_size"] = len(m.hypothesis)
    return report


# --------------------------------------------------------------------------
# Rate experiment
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class GraphExperimentConfig:
    n: int = 5
    degree_bound: int = 3
    eps: float = 1.0
    p_values: tuple[float, ...] = (0.5,)
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        if self.n > ENUMERATION_CAP:
            from dpextend.errors import TooLarge

            raise TooLarge(f"n={self.n} exceeds the enumeration cap {ENUMERATION_CAP}")
        _check_graph_params(self.n, self.degree_bound, self.eps)
        if self.trials < 1:
            raise BadParameters("trials must be at least 1")
        if not self.p_values or not all(0 < p < 1 for p in self.p_values):
            raise BadParameters("p_values must be a nonempty list of numbers in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "GraphExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise BadParameters(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclasses.dataclass(frozen=True)
class RateEntry:
    p: float
    estimator: str
    mse: float
    stderr: float


@dataclasses.dataclass(frozen=True)
class RateReport:
    config: GraphExperimentConfig
    entries: tuple[RateEntry, ...]

    COLUMNS = ("p", "estimator", "mse", "stderr", "trials", "eps", "n", "degree_bound", "seed")

    def get(self, p: float, estimator: str) -> RateEntry:
        for e in self.entries:
            if e.p == p and e.estimator == estimator:
                return e
        raise KeyError((p, estimator))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        c = self.config
        for e in self.entries:
            writer.writerow(
                [repr(e.p), e.estimator, repr(e.mse), repr(e.stderr), c.trials, repr(c.eps), c.n,
                 c.degree_bound, c.seed]
            )
        return buf.getvalue()


def _trial_uniforms(seed: int, trials: int, width: int) -> np.ndarray:
    """``width`` uniforms per trial, each trial from its own ``(seed, trial)`` stream."""
    out = np.empty((trials, width))
    for t in range(trials):
        out[t] = np.random.default_rng([seed, t]).random(width)
    return out


def _sample_rows(rows: np.ndarray, which: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sample from ``rows[which[t]]`` using uniform ``u[t]``."""
    cdf = np.cumsum(rows, axis=1)[which]
    k = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(k, rows.shape[1] - 1)


def _mse(estimates: np.ndarray, p: float) -> tuple[float, float]:
    sq = (estimates - p) ** 2
    stderr = float(np.std(sq, ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan
    return float(sq.mean()), stderr


def run_rate_experiment(
    cfg: GraphExperimentConfig, extension: Optional[ExtensionResult] = None
) -> RateReport:
    """Empirical MSE of the baseline and extended edge-density estimators.

    Every trial draws ``C(n, 2) + 2`` uniforms from its own stream: one per
    vertex pair for the G(n, p) sample, one for the baseline noise and one for
    the extended mechanism. The same draws are reused for every ``p``.
    """
    n = cfg.n
    pairs = len(vertex_pairs(n))
    if extension is None:
        extension = extended_graph_mechanism(n, cfg.degree_bound, cfg.eps)
    baseline_rows = _noise_rows(pairs, cfg.eps / (n - 1))
    weights = 1 << np.arange(pairs, dtype=np.int64)
    u = _trial_uniforms(cfg.seed, cfg.trials, pairs + 2)

    entries = []
    for p in cfg.p_values:
        edges = u[:, :pairs] < p
        # canonical graph order is ascending edge mask, so the mask is the row index
        masks = edges.astype(np.int64) @ weights
        counts = edges.sum(axis=1)
        base = _sample_rows(baseline_rows, counts, u[:, pairs]) / pairs
        ext = _sample_rows(extension.mechanism.table, masks, u[:, pairs + 1]) / pairs
        for name, est in (("baseline", base), ("extended", ext)):
            mse, se = _mse(est, p)
            entries.append(RateEntry(p, name, mse, se))
    return RateReport(cfg, tuple(entries))
