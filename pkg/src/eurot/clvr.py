"""Randomised coordinate dual averaging with lazy rank-one updates.

Each iteration refreshes the primal from an accumulated weighted-gradient
matrix q (a prox step against the initial uniform plan), flips a fair coin to
take a scaled ascent step on one multiplier block, and folds the resulting
rank-one change into a running combination matrix z.  The answer is the
step-size-weighted average of the primal iterates, the initial plan included
with its own weight.

The z cache lags the multipliers by one iteration: iteration k folds in the
increment applied at iteration k-1 (only the block touched then is nonzero),
so z_k always reconstructs to lam_k 1^T + 1 mu_k^T.  The ``fresh_z`` mode
folds the current increment instead, and the ``printed`` step-sum fidelity
grows A by the previous step size rather than the new one; both switches
exist for comparison and are off by default.

The inner loop is jitted; coin flips are drawn in chunks from one PCG64
stream per seed, so results do not depend on the chunk size.
"""

from __future__ import annotations

import time

import numpy as np
from numba import njit

from .core import (
    DualPoint,
    Problem,
    SolveResult,
    TraceBuilder,
    TransportPlan,
)


def clvr_step_size(A_k: float, alpha_reg: float, gamma: float, dim_sum: int) -> float:
    """Next step size a_{k+1} = (1/4) sqrt((1 + gamma A_k / alpha) / (n + m))."""
    if not (A_k > 0 and alpha_reg > 0 and gamma > 0 and dim_sum > 0):
        raise ValueError("all step-size inputs must be positive")
    return 0.25 * np.sqrt((1.0 + gamma * A_k / alpha_reg) / dim_sum)


@njit(cache=True)
def _clvr_chunk(
    C, a, b, gamma, alpha_reg, eps, coins,
    lam, mu, lam_prev, mu_prev, z, q, wsum, scal,
    corrected, fresh_z,
):
    """Advance by up to ``coins.size`` iterations, mutating the state arrays.

    ``scal`` holds [a_k, A_k].  Returns (steps consumed, converged flag).
    """
    n, m = C.shape
    dim = n + m
    x = np.empty((n, m))
    row = np.empty(n)
    col = np.empty(m)
    dl = np.empty(n)
    dm = np.empty(m)
    wrow = np.empty(n)
    wcol = np.empty(m)
    x0_scaled = alpha_reg / (n * m)
    eps_sq = eps * eps

    for t in range(coins.size):
        a_k = scal[0]
        A = scal[1]
        a_next = 0.25 * np.sqrt((1.0 + gamma * A / alpha_reg) / dim)
        A_next = (A + a_next) if corrected else (A + a_k)
        denom = alpha_reg + gamma * A_next

        # primal refresh from the lazy accumulator, marginals on the fly
        for j in range(m):
            col[j] = 0.0
        for i in range(n):
            r = 0.0
            for j in range(m):
                v = x0_scaled - q[i, j]
                if v < 0.0:
                    v = 0.0
                v /= denom
                x[i, j] = v
                r += v
                col[j] += v
            row[i] = r

        # lagged increments from the previous iteration's dual step
        for i in range(n):
            dl[i] = lam[i] - lam_prev[i]
            lam_prev[i] = lam[i]
        for j in range(m):
            dm[j] = mu[j] - mu_prev[j]
            mu_prev[j] = mu[j]

        step = 2.0 * gamma * a_k
        if coins[t] < 0.5:
            for i in range(n):
                lam[i] += step * (row[i] - a[i])
        else:
            for j in range(m):
                mu[j] += step * (col[j] - b[j])

        if fresh_z:
            for i in range(n):
                dl[i] = lam[i] - lam_prev[i]
            for j in range(m):
                dm[j] = mu[j] - mu_prev[j]

        # fold the rank-one increment into z and q, refresh the average, and
        # evaluate the duality-gap stopping test in the same sweep
        cost_term = 0.0
        sq_term = 0.0
        phi_quad = 0.0
        for i in range(n):
            wr = 0.0
            for j in range(m):
                inc = dl[i] + dm[j]
                zij = z[i, j] + inc
                z[i, j] = zij
                q[i, j] += a_next * (zij + C[i, j]) + 2.0 * a_k * inc
                wij = wsum[i, j] + a_next * x[i, j]
                wsum[i, j] = wij
                w = wij / A_next
                cost_term += C[i, j] * w
                sq_term += w * w
                wr += w
                if i == 0:
                    wcol[j] = w
                else:
                    wcol[j] += w
                s = -C[i, j] - lam[i] - mu[j]
                if s > 0.0:
                    phi_quad += s * s
            wrow[i] = wr

        scal[0] = a_next
        scal[1] = A_next

        lin = 0.0
        res_sq = 0.0
        for i in range(n):
            lin += lam[i] * a[i]
            d = wrow[i] - a[i]
            res_sq += d * d
        for j in range(m):
            lin += mu[j] * b[j]
            d = wcol[j] - b[j]
            res_sq += d * d
        phi = -phi_quad / (2.0 * gamma) - lin
        f_val = cost_term + 0.5 * gamma * sq_term
        if f_val - phi <= eps and res_sq <= eps_sq:
            return t + 1, True
    return coins.size, False


#: coin flips drawn per kernel call when telemetry is off
_CHUNK = 8192


def run_clvr(
    p: Problem,
    eps: float,
    alpha_reg: float | None = None,
    seed: int = 0,
    max_iter: int = 1_000_000,
    trace: bool = True,
    fidelity: str = "corrected",
    fresh_z: bool = False,
    time_budget: float | None = None,
    return_state: bool = False,
) -> SolveResult:
    """Run the randomised coordinate method until the duality-gap test passes.

    ``alpha_reg`` (the prox weight against the uniform initial plan) defaults
    to the problem's gamma, which makes the step-size schedule dimensionless.
    Coin flips come from ``numpy.random.default_rng(seed)``, so a fixed seed
    reproduces the run bit for bit.  Stops when f(X~) - phi <= eps and the
    squared l2 marginal violations of X~ sum to at most eps^2; ``max_iter``
    or ``time_budget`` exhaustion is reported via the converged flag.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if fidelity not in ("corrected", "printed"):
        raise ValueError(f"unknown fidelity {fidelity!r}")
    corrected = fidelity == "corrected"

    C = p.cost.entries
    a, b = p.a.weights, p.b.weights
    gamma = p.gamma
    n, m = p.shape
    if alpha_reg is None:
        alpha_reg = gamma
    if not alpha_reg > 0:
        raise ValueError("alpha_reg must be positive")

    rng = np.random.default_rng(seed)
    a0 = 1.0 / (2.0 * np.sqrt(n + m))
    lam = np.zeros(n)
    mu = np.zeros(m)
    lam_prev = np.zeros(n)
    mu_prev = np.zeros(m)
    z = np.zeros((n, m))
    q = a0 * C
    x0 = np.full((n, m), 1.0 / (n * m))
    # weighted primal average; the initial plan enters with weight a_0
    wsum = a0 * x0 if corrected else np.zeros((n, m))
    scal = np.array([a0, a0])

    tracer = TraceBuilder(p, enabled=trace)
    converged = False
    iterations = 0
    start = time.perf_counter()
    chunk = 1 if trace else _CHUNK

    while iterations < max_iter and not converged:
        coins = rng.random(min(chunk, max_iter - iterations))
        done, converged = _clvr_chunk(
            C, a, b, gamma, alpha_reg, eps, coins,
            lam, mu, lam_prev, mu_prev, z, q, wsum, scal,
            corrected, fresh_z,
        )
        iterations += done
        if trace:
            tracer.add(iterations - 1, wsum / scal[1], lam, mu)
        if time_budget is not None and time.perf_counter() - start > time_budget:
            break

    state = None
    if return_state:
        state = {
            "lam": lam, "mu": mu, "lam_prev": lam_prev, "mu_prev": mu_prev,
            "z": z, "q": q, "weighted_sum": wsum,
            "a_k": float(scal[0]), "A_k": float(scal[1]),
        }
    return SolveResult(
        plan=TransportPlan(wsum / scal[1]),
        dual=DualPoint(lam, mu),
        trace=tracer.records,
        converged=converged,
        iterations=iterations,
        state=state,
    )
