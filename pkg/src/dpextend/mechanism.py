"""Finite mechanisms as row-stochastic probability tables.

Rows are datasets of a :class:`~dpextend.spaces.MetricSpace`, columns are
output labels. The output sigma-algebra is the power set of the outputs, so
every question about privacy reduces to ratios of table entries.

Privacy loss is always computed in the log domain. For datasets ``a != b``
and output ``w`` the loss is ``(log p_a(w) - log p_b(w)) / d(a, b)``; outputs
with ``p_a(w) = p_b(w) = 0`` are skipped and ``p_a(w) > 0 = p_b(w)`` gives an
infinite loss.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Any, Optional, Sequence, Union

import numpy as np

from dpextend.errors import (
    AbsoluteContinuityViolation,
    BadParameters,
    InvalidMechanism,
    InvalidSpace,
    UnknownDataset,
)
from dpextend.spaces import HypothesisSet, MetricSpace

ROW_SUM_TOL = 1e-9
DEFAULT_REL_TOL = 1e-9


def _check_table(table: np.ndarray, n_rows: int, outputs: Sequence[str], row_labels) -> None:
    if table.ndim != 2 or table.shape != (n_rows, len(outputs)):
        raise InvalidMechanism(
            f"table has shape {table.shape}, expected {(n_rows, len(outputs))}"
        )
    if len(outputs) == 0:
        raise InvalidMechanism("mechanism needs at least one output")
    if len(set(outputs)) != len(outputs):
        raise InvalidMechanism("output labels must be unique")
    bad = np.flatnonzero(~np.all(np.isfinite(table) & (table >= 0), axis=1))
    if bad.size:
        label = row_labels[bad[0]]
        raise InvalidMechanism(f"row {label!r} has a negative or non-finite entry", row=label)
    sums = table.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        label = row_labels[bad[0]]
        raise InvalidMechanism(
            f"row {label!r} sums to {float(sums[bad[0]])!r}, not 1", row=label
        )


def _frozen(table: Any) -> np.ndarray:
    arr = np.array(table, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteMechanism:
    """A randomized algorithm on every dataset of ``space``."""

    space: MetricSpace
    outputs: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(str(o) for o in self.outputs))
        object.__setattr__(self, "table", _frozen(self.table))
        _check_table(self.table, len(self.space), self.outputs, self.space.labels)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(len(self.space))

    def row(self, dataset: Union[int, str]) -> np.ndarray:
        i = self.space.index(dataset) if isinstance(dataset, str) else int(dataset)
        if not 0 <= i < len(self.space):
            raise UnknownDataset(f"no dataset with index {i}")
        return self.table[i]


@dataclasses.dataclass(frozen=True, eq=False)
class PartialMechanism:
    """A randomized algorithm defined only on the datasets of ``hypothesis``.

    ``table[k]`` is the output distribution of dataset ``hypothesis.members[k]``.
    """

    space: MetricSpace
    outputs: tuple[str, ...]
    hypothesis: HypothesisSet
    table: np.ndarray

    def __post_init__(self):
        self.hypothesis.check(self.space)
        object.__setattr__(self, "outputs", tuple(str(o) for o in self.outputs))
        object.__setattr__(self, "table", _frozen(self.table))
        labels = [self.space.labels[i] for i in self.hypothesis.members]
        _check_table(self.table, len(self.hypothesis), self.outputs, labels)

    @property
    def indices(self) -> np.ndarray:
        return np.array(self.hypothesis.members, dtype=np.int64)

    def row(self, dataset: Union[int, str]) -> np.ndarray:
        i = self.space.index(dataset) if isinstance(dataset, str) else int(dataset)
        if i not in self.hypothesis:
            raise UnknownDataset(f"dataset {i} is not in the hypothesis set")
        return self.table[self.hypothesis.position(i)]


Mechanism = Union[FiniteMechanism, PartialMechanism]


def restrict(m: FiniteMechanism, h: HypothesisSet) -> PartialMechanism:
    h.check(m.space)
    return PartialMechanism(m.space, m.outputs, h, m.table[list(h.members)])


# --------------------------------------------------------------------------
# Density views
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class DensityView:
    """Rows of a partial mechanism as densities with respect to a base row.

    Attributes:
      base_index: dataset whose row is the base measure ``mu``.
      mu: the base row, over all outputs.
      support: output indices where ``mu > 0``.
      members: dataset indices, in the same order as ``densities``.
      densities: ``densities[k, s] = P(row k = support[s]) / mu[support[s]]``.
    """

    base_index: int
    mu: np.ndarray
    support: np.ndarray
    members: tuple[int, ...]
    densities: np.ndarray

    def log_densities(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.densities)

    def reconstruct(self) -> np.ndarray:
        """Probability table rebuilt from ``mu`` and the densities."""
        table = np.zeros((len(self.members), self.mu.shape[0]))
        table[:, self.support] = self.densities * self.mu[self.support]
        return table


def density_view(m: PartialMechanism, base: Optional[int] = None) -> DensityView:
    """Express every row of ``m`` as a density relative to row ``base``.

    Raises:
      AbsoluteContinuityViolation: some row has mass where the base row has
        none, so ``m`` is not differentially private for any epsilon.
    """
    if base is None:
        base = m.hypothesis.base
    if base not in m.hypothesis:
        raise UnknownDataset(f"base dataset {base} is not in the hypothesis set")
    mu = m.row(base)
    support = np.flatnonzero(mu > 0)
    outside = m.table[:, mu == 0] > 0
    if outside.any():
        k, s = (int(x) for x in np.argwhere(outside)[0])
        off_support = np.flatnonzero(mu == 0)
        raise AbsoluteContinuityViolation(m.hypothesis.members[k], int(off_support[s]))
    densities = m.table[:, support] / mu[support]
    densities.setflags(write=False)
    return DensityView(int(base), mu, support, m.hypothesis.members, densities)


# --------------------------------------------------------------------------
# Privacy measurement
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class PrivacyReport:
    """Measured Lipschitz constant of a mechanism into the max-divergence.

    ``witness`` is ``(dataset_1, dataset_2, output)`` attaining the maximum
    privacy loss, or ``None`` when the mechanism has fewer than two rows.
    ``passed`` is only set when a claimed epsilon was checked.
    """

    epsilon: float
    witness: Optional[tuple[int, int, int]]
    witness_labels: Optional[tuple[str, str, str]] = None
    claimed_eps: Optional[float] = None
    rel_tol: Optional[float] = None
    passed: Optional[bool] = None

    @property
    def private(self) -> bool:
        return math.isfinite(self.epsilon)

    def summary(self) -> str:
        eps = "inf (NonPrivate)" if not self.private else repr(self.epsilon)
        text = f"measured eps = {eps}"
        if self.witness_labels is not None:
            a, b, w = self.witness_labels
            text += f"; witness datasets ({a}, {b}) output {w}"
        if self.claimed_eps is not None:
            verdict = "pass" if self.passed else "FAIL"
            text += f"; claimed eps = {self.claimed_eps!r} (rel_tol {self.rel_tol!r}): {verdict}"
        return text

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon if self.private else "inf",
            "private": self.private,
            "witness": list(self.witness_labels) if self.witness_labels else None,
            "claimed_eps": self.claimed_eps,
            "rel_tol": self.rel_tol,
            "passed": self.passed,
        }


def max_privacy_loss(
    table: np.ndarray, indices: np.ndarray, space: MetricSpace, block_rows: int = 32
) -> tuple[float, Optional[tuple[int, int, int]]]:
    """Largest ``log(p_a(w) / p_b(w)) / d(a, b)`` over ordered pairs and outputs.

    ``table[k]`` is the row of dataset ``indices[k]``. Returns the value and the
    ``(k_a, k_b, w)`` positions of its first occurrence in lexicographic order.
    """
    n = table.shape[0]
    if n < 2:
        return 0.0, None
    with np.errstate(divide="ignore"):
        logp = np.log(table)
    best = -np.inf
    where: Optional[tuple[int, int, int]] = None
    for start in range(0, n, block_rows):
        rows = np.arange(start, min(start + block_rows, n))
        with np.errstate(invalid="ignore"):
            diff = logp[rows][:, None, :] - logp[None, :, :]
        # both zero: nothing to compare
        diff[np.isnan(diff)] = -np.inf
        dist = space.block(indices[rows], indices)
        with np.errstate(invalid="ignore", divide="ignore"):
            loss = diff / dist[:, :, None]
        loss[np.isnan(loss)] = -np.inf
        loss[np.arange(rows.size), rows] = -np.inf
        flat = int(np.argmax(loss))
        value = float(loss.reshape(-1)[flat])
        if value > best or where is None:
            best = value
            a, b, w = np.unravel_index(flat, loss.shape)
            where = (int(rows[a]), int(b), int(w))
    return max(best, 0.0), where


def measured_epsilon(m: Mechanism) -> PrivacyReport:
    """Smallest epsilon for which ``m`` is epsilon-DP on the datasets it covers."""
    idx = m.indices
    eps, where = max_privacy_loss(m.table, idx, m.space)
    if where is None:
        return PrivacyReport(eps, None)
    a, b, w = where
    witness = (int(idx[a]), int(idx[b]), w)
    labels = (m.space.labels[witness[0]], m.space.labels[witness[1]], m.outputs[w])
    return PrivacyReport(eps, witness, labels)


def verify_epsilon(m: Mechanism, claimed_eps: float, rel_tol: float = DEFAULT_REL_TOL) -> PrivacyReport:
    if not claimed_eps >= 0:
        raise BadParameters(f"claimed epsilon must be nonnegative, got {claimed_eps}")
    report = measured_epsilon(m)
    passed = report.private and report.epsilon <= claimed_eps * (1 + rel_tol)
    return dataclasses.replace(report, claimed_eps=float(claimed_eps), rel_tol=rel_tol, passed=passed)


# --------------------------------------------------------------------------
# Stock mechanisms
# --------------------------------------------------------------------------


def _as_bits(vector: Sequence[Any]) -> list[int]:
    bits = []
    for s in vector:
        if s in (0, 1, "0", "1"):
            bits.append(int(s))
        else:
            raise InvalidSpace(f"randomized response needs bit vectors, got symbol {s!r}")
    return bits


def bit_strings(length: int) -> list[str]:
    return [format(k, f"0{length}b") if length else "" for k in range(1 << length)]


def randomized_response(space: MetricSpace, eps: float) -> FiniteMechanism:
    """Flip each bit independently with probability ``1 / (1 + e^eps)``.

    Outputs are all bit strings of the vector length in ascending binary order.
    """
    if space.kind != "hamming":
        raise InvalidSpace("randomized response needs a Hamming space over bit vectors")
    if not eps >= 0:
        raise BadParameters(f"eps must be nonnegative, got {eps}")
    inputs = np.array([_as_bits(v) for v in space.params["vectors"]], dtype=np.int64)
    length = inputs.shape[1]
    outputs = bit_strings(length)
    out_bits = np.array([[int(c) for c in s] for s in outputs], dtype=np.int64).reshape(
        len(outputs), length
    )
    flips = (inputs[:, None, :] != out_bits[None, :, :]).sum(axis=-1)
    # log q and log(1 - q) for q = 1 / (1 + e^eps)
    log_q = -np.logaddexp(0.0, eps)
    log_keep = -np.logaddexp(0.0, -eps)
    table = np.exp(flips * log_q + (length - flips) * log_keep)
    return FiniteMechanism(space, outputs, table)


def truncated_geometric(k_max: int, center: int, alpha: float) -> np.ndarray:
    """Two-sided geometric noise around ``center``, clamped onto ``0..k_max``.

    ``P(k)`` is proportional to ``exp(-alpha * |k - center|)`` on the interior,
    and the tail mass beyond each end is collapsed onto that end, so the
    vector is a post-processing of the untruncated mechanism.
    """
    if k_max < 0 or int(k_max) != k_max:
        raise BadParameters(f"k_max must be a nonnegative integer, got {k_max}")
    if int(center) != center or not 0 <= center <= k_max:
        raise BadParameters(f"center must be an integer in [0, {k_max}], got {center}")
    if not alpha > 0:
        raise BadParameters(f"alpha must be positive, got {alpha}")
    k_max, center = int(k_max), int(center)
    if k_max == 0:
        return np.ones(1)
    steps = np.abs(np.arange(k_max + 1) - center)
    if math.isinf(alpha):
        return (steps == 0).astype(float)
    # interior: r^|k-c| (1-r)/(1+r); each end: r^|k-c| / (1+r), with r = e^-alpha
    log1p_r = math.log1p(math.exp(-alpha))
    log_interior = math.log(-math.expm1(-alpha)) - log1p_r
    logp = -alpha * steps + log_interior
    logp[0] = -alpha * steps[0] - log1p_r
    logp[-1] = -alpha * steps[-1] - log1p_r
    return np.exp(logp)
