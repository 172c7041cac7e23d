"""Brute-force audits of the extension guarantees.

Everything here is written to be independent of :mod:`dpextend.extension`:
the oracle works directly on probabilities (no base measure, no logs), and
the set-level audit enumerates every event instead of relying on the
pointwise reduction.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Any, Optional, Sequence

import numpy as np

from dpextend.errors import NotPrivateOnH, TooManyOutputs
from dpextend.extension import ExtensionResult, extend, normalizer_ratio_check
from dpextend.mechanism import (
    DEFAULT_REL_TOL,
    FiniteMechanism,
    Mechanism,
    PartialMechanism,
    measured_epsilon,
    verify_epsilon,
)

MAX_SET_LEVEL_OUTPUTS = 20
AGREEMENT_TOL = 1e-12
Z_TOL = 1e-9
INVARIANCE_TOL = 1e-10
ORACLE_TOL = 1e-10
ROW_SUM_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class AuditCheck:
    name: str
    passed: bool
    measured: Any = None
    witness: Optional[Any] = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": _jsonable(self.measured),
            "witness": _jsonable(self.witness),
            "detail": self.detail,
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    return value


@dataclasses.dataclass
class AuditReport:
    """Named pass/fail checks; ``overall`` is their conjunction."""

    checks: list[AuditCheck] = dataclasses.field(default_factory=list)
    info: dict[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, measured: Any = None, witness: Any = None, detail: str = ""):
        self.checks.append(
            AuditCheck(name, bool(passed), measured, None if passed else witness, detail)
        )

    def extend(self, other: "AuditReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(dataclasses.replace(c, name=prefix + c.name))
        for k, v in other.info.items():
            self.info[prefix + k] = v

    def check(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall": self.overall,
            "checks": [c.to_dict() for c in self.checks],
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{width}}  result  measured"]
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            line = f"{c.name:<{width}}  {verdict:<6}  {_jsonable(c.measured)}"
            if not c.passed and c.witness is not None:
                line += f"  witness={_jsonable(c.witness)}"
            lines.append(line)
        for k, v in self.info.items():
            lines.append(f"# {k}: {_jsonable(v)}")
        lines.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(lines) + "\n"


def oracle_extend(m: PartialMechanism, eps: float, rel_tol: float = DEFAULT_REL_TOL) -> FiniteMechanism:
    """Extension computed from probabilities alone, one dataset at a time.

    Row ``D`` is proportional to ``min_{D' in H} exp(eps d(D, D')) P(D' -> w)``.
    The common factor ``exp(eps * dist(D, H))`` is divided out before
    exponentiating so large distances do not overflow.
    """
    report = verify_epsilon(m, eps, rel_tol)
    if not report.passed:
        raise NotPrivateOnH(report)
    members = list(m.hypothesis.members)
    rows = []
    for d in range(len(m.space)):
        dists = np.array([m.space.distance(d, h) for h in members])
        scale = np.exp(eps * (dists - dists.min()))
        weights = np.min(scale[:, None] * m.table, axis=0)
        rows.append(weights / weights.sum())
    return FiniteMechanism(m.space, m.outputs, np.array(rows))


def _subset_indicators(k: int, masks: np.ndarray) -> np.ndarray:
    return ((masks[None, :] >> np.arange(k)[:, None]) & 1).astype(float)


def audit_set_level(m: Mechanism, eps: float, rel_tol: float = DEFAULT_REL_TOL) -> AuditReport:
    """Check the privacy inequality on every event and compare with the pointwise verdict.

    Events are the nonempty subsets of the outputs, visited in ascending
    bitmask order; the first failing (event, pair) is the witness. The full
    output set comes last. It is trivial for exact distributions but not for
    float rows that sum to 1 only up to rounding. ``subsets_enumerated``
    counts the nonempty proper subsets.
    """
    k = len(m.outputs)
    if k > MAX_SET_LEVEL_OUTPUTS:
        raise TooManyOutputs(f"{k} outputs; set-level audit is capped at {MAX_SET_LEVEL_OUTPUTS}")
    idx = m.indices
    n = len(idx)
    dist = m.space.block(idx, idx)
    bound = np.exp(eps * dist * (1 + rel_tol))
    n_sets = max((1 << k) - 2, 0)
    last = (1 << k) - 1
    witness = None
    worst = 0.0
    for start in range(1, last + 1, 4096):
        masks = np.arange(start, min(start + 4096, last + 1), dtype=np.int64)
        probs = m.table @ _subset_indicators(k, masks)  # (n, subsets)
        for a in range(n):
            lhs = probs[a][None, :]
            bad = lhs > bound[a][:, None] * probs
            bad[a] = False
            if bad.any():
                b_hits, s_hits = np.nonzero(bad)
                order = np.lexsort((b_hits, s_hits))
                s, b = int(s_hits[order[0]]), int(b_hits[order[0]])
                cand = (int(masks[s]), a, b)
                if witness is None or cand < witness:
                    witness = cand
            with np.errstate(divide="ignore", invalid="ignore"):
                loss = (np.log(lhs) - np.log(probs)) / dist[a][:, None]
            loss[a] = -np.inf
            loss[np.isnan(loss)] = -np.inf
            if loss.size:
                worst = max(worst, float(loss.max()))
        if witness is not None:
            # later blocks only hold larger masks
            break
    set_pass = witness is None
    pointwise = verify_epsilon(m, eps, rel_tol)

    report = AuditReport()
    wit = None
    if witness is not None:
        mask, a, b = witness
        event = [m.outputs[j] for j in range(k) if mask >> j & 1]
        wit = {"event": event, "datasets": [m.space.labels[idx[a]], m.space.labels[idx[b]]]}
    report.add("set_level", set_pass, None if witness is not None else worst, wit)
    report.add(
        "pointwise",
        bool(pointwise.passed),
        pointwise.epsilon,
        list(pointwise.witness_labels) if pointwise.witness_labels else None,
    )
    report.add(
        "lemma_equivalence",
        set_pass == bool(pointwise.passed),
        f"set_level={set_pass} pointwise={bool(pointwise.passed)}",
        "verdicts differ",
    )
    report.info["subsets_enumerated"] = n_sets
    report.info["eps"] = float(eps)
    return report


def set_level_verdict(m: Mechanism, eps: float, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    return audit_set_level(m, eps, rel_tol).check("set_level").passed


def _max_abs_diff(a: np.ndarray, b: np.ndarray) -> tuple[float, Optional[tuple[int, int]]]:
    diff = np.abs(a - b)
    if diff.size == 0:
        return 0.0, None
    flat = int(np.argmax(diff))
    return float(diff.reshape(-1)[flat]), tuple(int(x) for x in np.unravel_index(flat, diff.shape))


def audit_extension(
    m: PartialMechanism,
    eps: float,
    rel_tol: float = DEFAULT_REL_TOL,
    base_points: Optional[Sequence[int]] = None,
    result: Optional[ExtensionResult] = None,
) -> AuditReport:
    """Extend ``m`` and re-check every guarantee of the construction.

    Args:
      m: mechanism on its hypothesis set.
      eps: privacy level of ``m`` on ``H``.
      rel_tol: relative tolerance on privacy levels.
      base_points: base datasets tried for the invariance check; all of ``H``
        by default.
      result: an already computed ``extend(m, eps)`` to audit.

    Raises:
      NotPrivateOnH: the precondition of the construction fails.
    """
    r = result if result is not None else extend(m, eps, rel_tol=rel_tol)
    table = r.mechanism.table
    space = m.space
    labels = space.labels
    members = np.array(m.hypothesis.members)
    report = AuditReport()

    dev, where = _max_abs_diff(table[members], m.table)
    report.add(
        "agreement_on_h",
        dev <= AGREEMENT_TOL,
        dev,
        where and (labels[members[where[0]]], m.outputs[where[1]]),
    )

    out = measured_epsilon(r.mechanism)
    report.add(
        "privacy_2eps",
        out.private and out.epsilon <= 2 * eps * (1 + rel_tol),
        out.epsilon,
        list(out.witness_labels) if out.witness_labels else None,
        f"bound {2 * eps!r}",
    )

    z_dev, where = _max_abs_diff(r.normalizers[members], np.ones(len(members)))
    report.add("z_one_on_h", z_dev <= Z_TOL, z_dev, where and labels[members[where[0]]])

    positive = np.isfinite(r.log_normalizers)
    report.add(
        "z_positive",
        bool(positive.all()),
        float(np.min(r.log_normalizers)),
        labels[int(np.argmin(positive))] if not positive.all() else None,
    )

    to_h = space.dist_to_set(members)
    excess = r.log_normalizers - (eps * to_h + math.log1p(Z_TOL))
    worst = int(np.argmax(excess))
    report.add("z_dist_bound", bool(excess[worst] <= 0), float(excess[worst]), labels[worst])

    ratio = normalizer_ratio_check(r)
    report.add(
        "z_ratio_bound",
        ratio.ok,
        ratio.kind,
        [labels[i] for i in ratio.witness] if not ratio.ok else None,
    )

    worst_shift, worst_base = 0.0, None
    for b in m.hypothesis.members if base_points is None else base_points:
        other = extend(m, eps, base=int(b), rel_tol=rel_tol).mechanism.table
        shift, _ = _max_abs_diff(other, table)
        if worst_base is None or shift > worst_shift:
            worst_shift, worst_base = shift, labels[int(b)]
    report.add("base_point_invariance", worst_shift <= INVARIANCE_TOL, worst_shift, worst_base)

    oracle = oracle_extend(m, eps, rel_tol).table
    dev, where = _max_abs_diff(oracle, table)
    report.add(
        "oracle_equality",
        dev <= ORACLE_TOL,
        dev,
        where and (labels[where[0]], m.outputs[where[1]]),
    )

    sums = np.abs(table.sum(axis=1) - 1.0)
    worst = int(np.argmax(sums))
    report.add("row_normalization", sums[worst] <= ROW_SUM_TOL, float(sums[worst]), labels[worst])

    report.info["eps_in"] = float(eps)
    report.info["eps_out_measured"] = out.epsilon
    report.info["base"] = labels[r.base_index]
    report.info["operations"] = r.operations
    return report
