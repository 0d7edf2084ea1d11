"""Exact coordinate maximisation of the dual and the Sinkhorn-type loop.

Holding one multiplier block fixed, the dual is maximised in closed form: for
each row i the optimality condition

    sum_j [-(c_ij + mu_j) - lam_i]_+ = gamma * a_i

is a piecewise-linear decreasing equation in lam_i whose root is found from
the order statistics of the row.  Alternating these block solves over rows
and columns gives the quadratic-regularisation analogue of Sinkhorn-Knopp.

The public solves (:func:`threshold_solve`, :func:`update_lambda`,
:func:`update_mu`) sort each row outright (O(m log m)), which at desk scale
is simple and deterministic.  The jitted loop behind
:func:`run_euclidean_sinkhorn` uses the comparison-only alternative, taking
order statistics by repeated selection, which costs O((l+1) m) per row for an
active set of size l and produces bit-identical multipliers; at the small
regularisation levels the accuracy pipeline prescribes, l is a handful.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._kernels import sinkhorn_chunk
from .core import (
    DualPoint,
    Problem,
    SolveResult,
    TraceBuilder,
    TransportPlan,
    plan_array,
)


@dataclass(frozen=True)
class ThresholdResult:
    """Solved multiplier plus the number of active (unclipped) entries."""

    value: float
    active_count: int


def threshold_solve(v: np.ndarray, target: float) -> ThresholdResult:
    """Solve sum_j [-v_j - lam]_+ = target for lam.

    Sorting v ascending, the active set at the root is a prefix of the order
    statistics; the cutoff l is the largest prefix for which the excess at
    lam = -v_(l) still fits under ``target``.  A zero target returns the
    smallest lam that clips everything, lam = -min(v), with the convention
    active_count = 0.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("threshold_solve needs a non-empty 1-d vector")
    if not np.isfinite(v).all():
        raise ValueError("threshold_solve needs finite entries")
    if target < 0:
        raise ValueError("target mass must be nonnegative")
    if target == 0.0:
        return ThresholdResult(value=float(-v.min()), active_count=0)
    s = np.sort(v)
    csum = np.cumsum(s)
    counts = np.arange(1, s.size + 1, dtype=np.float64)
    # excess mass when lam sits exactly at -s[l-1]; nondecreasing in l
    excess = counts * s - csum
    l = int(np.searchsorted(excess, target, side="right"))
    lam = -(target + csum[l - 1]) / l
    return ThresholdResult(value=float(lam), active_count=l)


def threshold_rows(rows: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Vectorised threshold solve, one multiplier per row of ``rows``.

    Rows with a zero target get -min(row), zeroing their plan row.
    """
    s = np.sort(rows, axis=1)
    csum = np.cumsum(s, axis=1)
    counts = np.arange(1, rows.shape[1] + 1, dtype=np.float64)
    excess = counts[None, :] * s - csum
    l = (excess <= targets[:, None]).sum(axis=1)
    idx = np.arange(rows.shape[0])
    lam = -(targets + csum[idx, l - 1]) / l
    zero = targets == 0.0
    if np.any(zero):
        lam[zero] = -s[zero, 0]
    return lam


def update_lambda(p: Problem, d: DualPoint) -> DualPoint:
    """Exactly maximise the dual over lam with mu held fixed.

    Afterwards the clipped plan's row marginals equal a.
    """
    rows = p.cost.entries + d.mu[None, :]
    lam = threshold_rows(rows, p.gamma * p.a.weights)
    return DualPoint(lam, d.mu)


def update_mu(p: Problem, d: DualPoint) -> DualPoint:
    """Exactly maximise the dual over mu with lam held fixed."""
    cols = p.cost.entries.T + d.lam[None, :]
    mu = threshold_rows(cols, p.gamma * p.b.weights)
    return DualPoint(d.lam, mu)


def run_euclidean_sinkhorn(
    p: Problem,
    eps_marginal: float,
    max_iter: int = 1_000_000,
    trace: bool = True,
    record_iterates: bool = False,
    time_budget: float | None = None,
) -> SolveResult:
    """Alternate exact row/column block solves until the marginals fit.

    Starting from zero multipliers, even iterations update lam and odd ones
    update mu; after each half-iteration the clipped plan is recomputed and
    the run stops once ||X 1 - a||_1 + ||X^T 1 - b||_1 <= eps_marginal.
    Exhausting ``max_iter`` is reported through the converged flag, never an
    exception.  With ``record_iterates`` the multipliers of every iteration
    are kept on the result for bound checks.
    """
    if not eps_marginal > 0:
        raise ValueError("eps_marginal must be positive")
    C = np.ascontiguousarray(p.cost.entries)
    Ct = np.ascontiguousarray(C.T)
    a, b = p.a.weights, p.b.weights
    gamma = p.gamma
    n, m = p.shape

    lam = np.zeros(n)
    mu = np.zeros(m)
    taken_r = np.zeros(m, dtype=np.bool_)
    taken_c = np.zeros(n, dtype=np.bool_)
    scratch = np.empty(max(n, m))
    tracer = TraceBuilder(p, enabled=trace)
    iterates: list[tuple[np.ndarray, np.ndarray]] = []
    converged = False
    iterations = 0
    start = time.perf_counter()
    # per-iteration chunks while observing; bigger strides when running free
    chunk = 1 if (trace or record_iterates) else 512

    while iterations < max_iter and not converged:
        steps = min(chunk, max_iter - iterations)
        done, converged, _, _ = sinkhorn_chunk(
            C, Ct, a, b, gamma, eps_marginal, lam, mu, iterations, steps,
            taken_r, taken_c, scratch,
        )
        iterations += done
        if record_iterates:
            iterates.append((lam.copy(), mu.copy()))
        if trace:
            tracer.add(iterations - 1, plan_array(C, gamma, lam, mu), lam, mu)
        if time_budget is not None and time.perf_counter() - start > time_budget:
            break

    return SolveResult(
        plan=TransportPlan(plan_array(C, gamma, lam, mu)),
        dual=DualPoint(lam, mu),
        trace=tracer.records,
        converged=bool(converged),
        iterations=iterations,
        dual_iterates=iterates if record_iterates else None,
    )
