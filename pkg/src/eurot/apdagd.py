"""Adaptive primal-dual accelerated gradient ascent on the transport dual.

Maintains three multiplier sequences: the main point, a dual-averaging
("primed") sequence that accumulates gradient steps, and their momentum
combination where gradients are evaluated.  The local smoothness estimate L
is adapted by a halve-then-double line search, and the primal answer is read
off as a running convex combination of the clipped plans.  The per-iteration
work (line search included) runs in a fused kernel.

Two step-rule fidelities are provided.  The default ``corrected`` mode uses
the standard dual-averaging relations (alpha solves L a^2 - a - beta = 0 and
the gradient step accumulates on the primed sequence).  The ``printed`` mode
keeps the variant equation L a^2 - a + beta = 0, which loses real roots once
beta exceeds 1/(4L) and is kept only to demonstrate that failure mode.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._kernels import MAX_DOUBLINGS, apdagd_iteration
from .core import (
    DualPoint,
    Problem,
    SolveResult,
    TraceBuilder,
    TransportPlan,
)


class LineSearchError(RuntimeError):
    """The adaptive smoothness search failed to make an acceptable step."""


@dataclass(frozen=True)
class LineSearchStep:
    """Accepted-step snapshot for post-hoc verification of the exit rule."""

    L: float
    alpha: float
    beta: float
    lam_tilde: np.ndarray
    mu_tilde: np.ndarray
    lam_new: np.ndarray
    mu_new: np.ndarray


def solve_step_coefficient(L: float, beta: float) -> float:
    """Positive root of L * alpha^2 - alpha - beta = 0."""
    if not L > 0:
        raise ValueError("L must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return (1.0 + np.sqrt(1.0 + 4.0 * L * beta)) / (2.0 * L)


def run_apdagd(
    p: Problem,
    eps: float,
    L0: float = 1.0,
    max_iter: int = 100_000,
    trace: bool = True,
    fidelity: str = "corrected",
    record_steps: bool = False,
    time_budget: float | None = None,
) -> SolveResult:
    """Run the accelerated gradient loop until the duality-gap test passes.

    Stops when f(X_k) - phi(lam_k, mu_k) <= eps and the squared l2 marginal
    violations of the averaged plan sum to at most eps^2.  ``max_iter`` or
    ``time_budget`` exhaustion is reported via the converged flag.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not L0 > 0:
        raise ValueError("L0 must be positive")
    if fidelity not in ("corrected", "printed"):
        raise ValueError(f"unknown fidelity {fidelity!r}")
    corrected = fidelity == "corrected"

    C = np.ascontiguousarray(p.cost.entries)
    a, b = p.a.weights, p.b.weights
    gamma = p.gamma
    n, m = p.shape

    L = L0
    beta = 0.0
    lam = np.zeros(n)
    mu = np.zeros(m)
    lam_prime = np.zeros(n)
    mu_prime = np.zeros(m)
    x_avg = np.zeros((n, m))
    x_buf = np.empty((n, m))
    glam = np.empty(n)
    gmu = np.empty(m)

    tracer = TraceBuilder(p, enabled=trace)
    steps: list[LineSearchStep] = []
    converged = False
    iterations = 0
    start = time.perf_counter()

    for k in range(max_iter):
        if record_steps:
            pre = (lam.copy(), mu.copy(), lam_prime.copy(), mu_prime.copy())
        L, beta, alpha, gap, res_sq, converged, status = apdagd_iteration(
            C, a, b, gamma, eps, L, beta, lam, mu, lam_prime, mu_prime,
            x_avg, x_buf, glam, gmu, corrected,
        )
        if status == 2:
            raise LineSearchError(
                "printed step equation L a^2 - a + beta = 0 has no real root "
                f"(beta={beta}, L={L}); use the corrected fidelity"
            )
        if status == 1:
            raise LineSearchError(
                f"no acceptable step after {MAX_DOUBLINGS} doublings (L={L})"
            )
        iterations = k + 1
        if record_steps:
            tau = alpha / beta
            p_lam, p_mu, p_lamp, p_mup = pre
            steps.append(
                LineSearchStep(
                    L, alpha, beta,
                    p_lam + tau * (p_lamp - p_lam),
                    p_mu + tau * (p_mup - p_mu),
                    lam.copy(), mu.copy(),
                )
            )
        tracer.add(k, x_avg, lam, mu)
        if converged:
            break
        if time_budget is not None and time.perf_counter() - start > time_budget:
            break

    return SolveResult(
        plan=TransportPlan(x_avg.copy()),
        dual=DualPoint(lam, mu),
        trace=tracer.records,
        converged=bool(converged),
        iterations=iterations,
        steps=steps if record_steps else None,
    )
