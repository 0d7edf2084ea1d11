"""Classic entropy-kernel Sinkhorn scaling, used as a comparison baseline.

Alternately rescales the rows and columns of the Gibbs kernel exp(-C/gamma)
to the target marginals.  The default log-domain implementation stays finite
for arbitrarily small gamma; the plain multiplicative mode is kept to show
how the kernel under/overflows once exp(-c/gamma) leaves the float range.
"""

from __future__ import annotations

import time

import numpy as np

from eurot.core import (
    CostMatrix,
    DualPoint,
    Measure,
    Problem,
    SolveResult,
    TraceRecord,
    TransportPlan,
    residuals_from_arrays,
    round_array,
    sparsity_fraction,
)


class EntropyNumericalError(RuntimeError):
    """Kernel scaling left the finite float range (gamma too small)."""


def _logsumexp(M: np.ndarray, axis: int) -> np.ndarray:
    """Row/column log-sum-exp that tolerates all-(-inf) slices."""
    mx = M.max(axis=axis)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.exp(M - np.expand_dims(safe, axis)).sum(axis=axis))
    return np.where(np.isfinite(mx), out, -np.inf)


def entropy_sinkhorn(
    a: Measure,
    b: Measure,
    c: CostMatrix,
    gamma: float,
    eps_marginal: float,
    max_iter: int = 1_000_000,
    trace: bool = False,
    log_domain: bool = True,
    time_budget: float | None = None,
) -> SolveResult:
    """Entropy-regularised scaling until the l1 marginal test passes.

    Returns the plan, the dual potentials of the entropic problem (set to
    zero on zero-mass coordinates, whose plan rows/columns are exactly zero),
    and a trace whose primal/dual columns refer to the entropic objective.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not eps_marginal > 0:
        raise ValueError("eps_marginal must be positive")
    av, bv = a.weights, b.weights
    C = c.entries
    n, m = C.shape
    if av.size != n or bv.size != m:
        raise ValueError("measure sizes do not match the cost matrix")

    records: list[TraceRecord] = []
    start = time.perf_counter()
    converged = False
    iterations = 0

    logK = -C / gamma
    with np.errstate(divide="ignore"):
        loga = np.log(av)
        logb = np.log(bv)

    if log_domain:
        f = np.zeros(n)
        g = np.zeros(m)
        f[av == 0] = -np.inf
        g[bv == 0] = -np.inf
        for k in range(max_iter):
            if k % 2 == 0:
                f = loga - _logsumexp(logK + g[None, :], axis=1)
            else:
                g = logb - _logsumexp(logK + f[:, None], axis=0)
            with np.errstate(invalid="ignore"):
                x = np.exp(logK + f[:, None] + g[None, :])
            x = np.nan_to_num(x, nan=0.0, posinf=np.inf)
            iterations = k + 1
            if trace:
                records.append(_entropy_record(k, start, av, bv, C, gamma, x, f, g))
            res = residuals_from_arrays(x, av, bv)
            if res.row_l1 + res.col_l1 <= eps_marginal:
                converged = True
                break
            if time_budget is not None and time.perf_counter() - start > time_budget:
                break
        lam, mu = _potentials(f, g, gamma, av, bv)
    else:
        K = np.exp(logK)
        u = np.ones(n)
        v = np.ones(m)
        for k in range(max_iter):
            with np.errstate(divide="ignore", invalid="ignore"):
                if k % 2 == 0:
                    u = np.where(av > 0, av / (K @ v), 0.0)
                else:
                    v = np.where(bv > 0, bv / (K.T @ u), 0.0)
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                raise EntropyNumericalError(
                    f"non-finite scaling at iteration {k}; gamma={gamma} is too "
                    "small for the plain kernel, use log_domain=True"
                )
            x = u[:, None] * K * v[None, :]
            iterations = k + 1
            if trace:
                with np.errstate(divide="ignore"):
                    records.append(
                        _entropy_record(k, start, av, bv, C, gamma, x, np.log(u), np.log(v))
                    )
            res = residuals_from_arrays(x, av, bv)
            if res.row_l1 + res.col_l1 <= eps_marginal:
                converged = True
                break
            if time_budget is not None and time.perf_counter() - start > time_budget:
                break
        with np.errstate(divide="ignore"):
            lam, mu = _potentials(np.log(u), np.log(v), gamma, av, bv)

    return SolveResult(
        plan=TransportPlan(x),
        dual=DualPoint(lam, mu),
        trace=records,
        converged=converged,
        iterations=iterations,
    )


def _potentials(f, g, gamma, av, bv):
    """Entropic dual multipliers from log scalings, zeroed off the support."""
    lam = np.where(av > 0, -gamma * (f + 0.5), 0.0)
    mu = np.where(bv > 0, -gamma * (g + 0.5), 0.0)
    return lam, mu


def _entropy_record(k, start, av, bv, C, gamma, x, f, g) -> TraceRecord:
    # entropic primal: <C, X> + gamma * sum x log x, with 0 log 0 = 0
    pos = x > 0
    ent = float((x[pos] * np.log(x[pos])).sum())
    primal = float(np.vdot(C, x)) + gamma * ent
    lam, mu = _potentials(f, g, gamma, av, bv)
    phi = -gamma * float(x.sum()) - float(lam @ av) - float(mu @ bv)
    rounded = round_array(x, av, bv)
    return TraceRecord(
        iteration=k,
        elapsed=time.perf_counter() - start,
        primal_f=primal,
        dual_phi=phi,
        gap=primal - phi,
        residuals=residuals_from_arrays(x, av, bv),
        unregularised_cost=float(np.vdot(C, rounded)),
        sparsity=sparsity_fraction(x),
    )
