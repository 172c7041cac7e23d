"""Extension of a private mechanism from a hypothesis set to the whole space.

Given a mechanism that is eps-DP on ``H``, every dataset ``D`` of the space
gets the output distribution with density (relative to ``mu``, the row of the
base dataset)

    g_D(w) = min_{D' in H} exp(eps * d(D, D')) * f_{D'}(w),

normalized by ``Z_D = sum_w g_D(w) mu(w)``. The result is 2 eps-DP on the
whole space and reproduces the input row for every ``D`` in ``H``.

All arithmetic is done on logs; the normalizing sum runs left to right over
the output index so that :func:`extend` and :func:`extend_row` agree bit for
bit.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from dpextend.errors import BadParameters, NotPrivateOnH, UnknownDataset
from dpextend.mechanism import (
    DEFAULT_REL_TOL,
    DensityView,
    FiniteMechanism,
    PartialMechanism,
    density_view,
    verify_epsilon,
)
from dpextend.spaces import HypothesisSet, ValidationResult

RATIO_REL_TOL = 1e-9
_BLOCK_ELEMENTS = 1 << 21


@dataclasses.dataclass(frozen=True, eq=False)
class ExtensionResult:
    """An extended mechanism together with its normalizers.

    Attributes:
      mechanism: the extension, defined on every dataset.
      normalizers: ``Z_D`` per dataset (may be ``inf`` if it overflows; use
        ``log_normalizers`` then).
      log_normalizers: ``log Z_D`` per dataset.
      eps_in: privacy level of the input on ``H`` used in the construction.
      base_index: dataset whose row served as the base measure.
      hypothesis: the hypothesis set of the input.
      operations: number of density-scaling operations performed.
    """

    mechanism: FiniteMechanism
    normalizers: np.ndarray
    log_normalizers: np.ndarray
    eps_in: float
    base_index: int
    hypothesis: HypothesisSet
    operations: int


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (math.isfinite(eps) and eps >= 0):
        raise BadParameters(f"eps must be a finite nonnegative number, got {eps}")
    return eps


def _require_private(m: PartialMechanism, eps: float, rel_tol: float) -> None:
    report = verify_epsilon(m, eps, rel_tol)
    if not report.passed:
        raise NotPrivateOnH(report)


def _rows(
    m: PartialMechanism, view: DensityView, eps: float, queries: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Extended rows (over all outputs) and ``log Z`` for the query datasets."""
    log_f = view.log_densities()
    log_mu = np.log(view.mu[view.support])
    members = np.asarray(view.members, dtype=np.int64)
    probs = np.zeros((queries.size, view.mu.shape[0]))
    log_z = np.empty(queries.size)
    step = max(1, _BLOCK_ELEMENTS // max(1, log_f.size))
    for start in range(0, queries.size, step):
        sl = slice(start, min(start + step, queries.size))
        dist = m.space.block(queries[sl], members)
        # measure distances from the nearest member so far rows keep precision
        near = dist.min(axis=1, keepdims=True)
        log_g = (eps * (dist - near)[:, :, None] + log_f[None, :, :]).min(axis=1)
        w = log_g + log_mu
        shift = w.max(axis=1, keepdims=True)
        mass = np.exp(w - shift)
        total = np.cumsum(mass, axis=1)[:, -1]
        probs[sl, view.support] = mass / total[:, None]
        log_z[sl] = eps * near[:, 0] + shift[:, 0] + np.log(total)
    return probs, log_z


def extend(
    m: PartialMechanism,
    eps: float,
    base: Optional[int] = None,
    rel_tol: float = DEFAULT_REL_TOL,
) -> ExtensionResult:
    """Extend ``m`` from its hypothesis set to every dataset of ``m.space``.

    Args:
      m: mechanism defined on ``H``.
      eps: privacy level of ``m`` on ``H``; checked before extending.
      base: dataset in ``H`` whose row is the base measure. Defaults to the
        first member of ``H``. The result does not depend on it beyond
        rounding.
      rel_tol: relative tolerance of the privacy precondition.

    Raises:
      NotPrivateOnH: ``m`` is not ``eps``-DP on ``H``.
    """
    eps = _check_eps(eps)
    _require_private(m, eps, rel_tol)
    view = density_view(m, base)
    queries = np.arange(len(m.space))
    probs, log_z = _rows(m, view, eps, queries)
    with np.errstate(over="ignore"):
        z = np.exp(log_z)
    mech = FiniteMechanism(m.space, m.outputs, probs)
    ops = len(m.space) * len(m.hypothesis) * int(view.support.size)
    return ExtensionResult(mech, z, log_z, eps, view.base_index, m.hypothesis, ops)


def extend_row(
    m: PartialMechanism,
    eps: float,
    d_query: int,
    base: Optional[int] = None,
    rel_tol: float = DEFAULT_REL_TOL,
) -> tuple[np.ndarray, float]:
    """One row of :func:`extend` and its normalizer, computed on its own."""
    eps = _check_eps(eps)
    if not 0 <= int(d_query) < len(m.space):
        raise UnknownDataset(f"no dataset with index {d_query}")
    _require_private(m, eps, rel_tol)
    view = density_view(m, base)
    probs, log_z = _rows(m, view, eps, np.array([int(d_query)]))
    with np.errstate(over="ignore"):
        return probs[0], float(np.exp(log_z[0]))


def normalizer_ratio_check(r: ExtensionResult, rel_tol: float = RATIO_REL_TOL) -> ValidationResult:
    """Check ``Z_a <= exp(eps * d(a, b)) * Z_b`` for every ordered pair."""
    space = r.mechanism.space
    log_z = r.log_normalizers
    slack = math.log1p(rel_tol)
    everything = np.arange(len(space))
    for start in range(0, len(space), 256):
        rows = np.arange(start, min(start + 256, len(space)))
        bound = r.eps_in * space.block(rows, everything) + slack
        bad = (log_z[rows][:, None] - log_z[None, :]) > bound
        if bad.any():
            a, b = (int(x) for x in np.argwhere(bad)[0])
            a = int(rows[a])
            return ValidationResult(
                False,
                "NormalizerRatioViolation",
                (a, b),
                f"log Z[{a}] - log Z[{b}] = {log_z[a] - log_z[b]!r} exceeds "
                f"eps * d = {r.eps_in * space.distance(a, b)!r}",
            )
    return ValidationResult(True)
