"""Domain types and dual calculus for quadratically regularised optimal transport.

The primal problem is

    min  <C, X> + (gamma/2) * ||X||_F^2
    s.t. X 1_m = a,  X^T 1_n = b,  X >= 0,

with a, b on the unit simplex and C a nonnegative cost matrix.  Dualising the
marginal constraints with multipliers (lam, mu) gives a concave, once
differentiable dual

    phi(lam, mu) = -1/(2 gamma) * ||[-C - lam 1^T - 1 mu^T]_+||_F^2
                   - <lam, a> - <mu, b>,

whose inner minimiser is the clipped plan X(lam, mu) = [-C - lam 1^T -
1 mu^T]_+ / gamma.  This module holds the value types shared by every solver,
the dual calculus (objective, gradient, plan recovery), marginal residual
metrics, the projection of an infeasible plan back onto the transportation
polytope, and a couple of closed-form bound quantities used by the test
suites.

All arithmetic is float64.  Matrix 2-norms of plans are Frobenius norms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

#: additive tolerance for "sums to one" checks on measures
SIMPLEX_ATOL = 1e-12

#: entries below this threshold count as structural zeros in sparsity reports
SPARSITY_THRESHOLD = 1e-21


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Measure:
    """A point on the unit simplex: nonnegative weights summing to one.

    Zero entries are allowed; no marginal correction is ever applied to them.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("measure weights must be a non-empty 1-d array")
        if np.any(w < 0):
            raise ValueError("measure weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"measure weights sum to {total!r}, expected 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative n-by-m transport cost matrix with a cached sup-norm."""

    entries: np.ndarray
    max_abs: float = field(init=False)

    def __post_init__(self):
        c = _frozen_array(self.entries)
        if c.ndim != 2 or c.size == 0:
            raise ValueError("cost matrix must be a non-empty 2-d array")
        if np.any(c < 0):
            raise ValueError("cost entries must be nonnegative")
        object.__setattr__(self, "entries", c)
        object.__setattr__(self, "max_abs", float(np.abs(c).max()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class Problem:
    """A regularised transport instance (a, b, C, gamma)."""

    a: Measure
    b: Measure
    cost: CostMatrix
    gamma: float

    def __post_init__(self):
        n, m = self.cost.shape
        if len(self.a) != n or len(self.b) != m:
            raise ValueError(
                f"dimension mismatch: cost is {n}x{m}, measures are "
                f"{len(self.a)} and {len(self.b)}"
            )
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape


@dataclass(frozen=True)
class DualPoint:
    """Multipliers (lam, mu) of the row and column marginal constraints."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = _frozen_array(self.lam)
        mu = _frozen_array(self.mu)
        if lam.ndim != 1 or mu.ndim != 1:
            raise ValueError("dual multipliers must be 1-d arrays")
        if not (np.isfinite(lam).all() and np.isfinite(mu).all()):
            raise ValueError("dual multipliers must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def zeros(cls, n: int, m: int) -> "DualPoint":
        return cls(np.zeros(n), np.zeros(m))


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative n-by-m mass allocation matrix."""

    entries: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.entries)
        if x.ndim != 2:
            raise ValueError("plan must be a 2-d array")
        if np.any(x < 0):
            raise ValueError("plan entries must be nonnegative")
        object.__setattr__(self, "entries", x)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def total_mass(self) -> float:
        return float(self.entries.sum())

    def row_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)


@dataclass(frozen=True)
class Residuals:
    """l1 and l2 norms of the row and column marginal violations."""

    row_l1: float
    col_l1: float
    row_l2: float
    col_l2: float

    def total_l1(self) -> float:
        return self.row_l1 + self.col_l1


@dataclass(frozen=True)
class TraceRecord:
    """Per-iteration convergence telemetry emitted by the solvers.

    ``gap`` is always ``primal_f - dual_phi``; ``unregularised_cost`` is the
    linear cost of the current plan after projection onto exact marginals;
    ``sparsity`` is the fraction of (unprojected) plan entries below
    ``SPARSITY_THRESHOLD``.
    """

    iteration: int
    elapsed: float
    primal_f: float
    dual_phi: float
    gap: float
    residuals: Residuals
    unregularised_cost: float
    sparsity: float


@dataclass
class SolveResult:
    """Outcome of one solver run: final plan and duals, telemetry, status.

    ``dual_iterates`` is only populated when a solver is asked to record its
    multiplier trajectory for bound checks.
    """

    plan: TransportPlan
    dual: DualPoint
    trace: list[TraceRecord]
    converged: bool
    iterations: int
    dual_iterates: list | None = None
    steps: list | None = None
    state: dict | None = None


# ---------------------------------------------------------------------------
# dual calculus on raw arrays (kernels shared by the solvers)
# ---------------------------------------------------------------------------


def plan_array(cost: np.ndarray, gamma: float, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Clipped closed-form plan [-C - lam 1^T - 1 mu^T]_+ / gamma."""
    slack = -cost - lam[:, None] - mu[None, :]
    np.maximum(slack, 0.0, out=slack)
    slack /= gamma
    return slack


def dual_value(cost, gamma, a, b, lam, mu) -> float:
    """Value of the concave dual phi at raw multiplier arrays."""
    slack = -cost - lam[:, None] - mu[None, :]
    np.maximum(slack, 0.0, out=slack)
    quad = float(np.vdot(slack, slack))
    return -quad / (2.0 * gamma) - float(lam @ a) - float(mu @ b)


def primal_value(cost, gamma, x) -> float:
    """Value <C, X> + (gamma/2)||X||_F^2 at a raw plan array."""
    return float(np.vdot(cost, x)) + 0.5 * gamma * float(np.vdot(x, x))


def gradient_arrays(cost, gamma, a, b, lam, mu) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of phi: marginal residuals (X 1 - a, X^T 1 - b) of the clipped plan."""
    x = plan_array(cost, gamma, lam, mu)
    return x.sum(axis=1) - a, x.sum(axis=0) - b


# ---------------------------------------------------------------------------
# public operations on domain types
# ---------------------------------------------------------------------------


def primal_objective(p: Problem, x: TransportPlan) -> float:
    """Regularised primal value <C, X> + (gamma/2)||X||_F^2."""
    if x.shape != p.shape:
        raise ValueError(f"plan shape {x.shape} does not match problem {p.shape}")
    return primal_value(p.cost.entries, p.gamma, x.entries)


def dual_objective(p: Problem, d: DualPoint) -> float:
    """Concave dual value phi(lam, mu)."""
    _check_dual_shape(p, d)
    return dual_value(p.cost.entries, p.gamma, p.a.weights, p.b.weights, d.lam, d.mu)


def recover_plan(p: Problem, d: DualPoint) -> TransportPlan:
    """Closed-form inner minimiser X(lam, mu) of the Lagrangian."""
    _check_dual_shape(p, d)
    return TransportPlan(plan_array(p.cost.entries, p.gamma, d.lam, d.mu))


def dual_gradient(p: Problem, d: DualPoint) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of phi at (lam, mu).

    Returns the pair (X(lam, mu) 1_m - a, X(lam, mu)^T 1_n - b).  phi is
    concave, so ascent steps lam + alpha * grad increase the dual value for
    small alpha, and the gradient vanishes exactly when the clipped plan has
    the prescribed marginals.
    """
    _check_dual_shape(p, d)
    return gradient_arrays(
        p.cost.entries, p.gamma, p.a.weights, p.b.weights, d.lam, d.mu
    )


def marginal_residuals(x: TransportPlan, a: Measure, b: Measure) -> Residuals:
    """l1/l2 marginal violation norms of a plan against target measures."""
    return residuals_from_arrays(x.entries, a.weights, b.weights)


def residuals_from_arrays(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> Residuals:
    row = x.sum(axis=1) - a
    col = x.sum(axis=0) - b
    return Residuals(
        row_l1=float(np.abs(row).sum()),
        col_l1=float(np.abs(col).sum()),
        row_l2=float(np.linalg.norm(row)),
        col_l2=float(np.linalg.norm(col)),
    )


def round_to_polytope(x: TransportPlan, a: Measure, b: Measure) -> TransportPlan:
    """Project a nonnegative plan onto exact marginals (a, b).

    Rows are scaled down to at most their target mass, then columns, and the
    remaining deficit is filled by a rank-one patch.  The output satisfies
    X 1 = a and X^T 1 = b up to float rounding, and moves at most
    2 * (||x 1 - a||_1 + ||x^T 1 - b||_1) in entrywise l1 distance.
    """
    return TransportPlan(round_array(x.entries, a.weights, b.weights))


def round_array(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Array kernel behind :func:`round_to_polytope`."""
    if np.any(x < 0):
        raise ValueError("plan entries must be nonnegative")
    r = x.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(r > 0, np.minimum(a / r, 1.0), 1.0)
    y = u[:, None] * x
    c = y.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(c > 0, np.minimum(b / c, 1.0), 1.0)
    y *= v[None, :]
    # deficits are nonnegative in exact arithmetic; clamp away -1ulp noise
    err_r = np.maximum(a - y.sum(axis=1), 0.0)
    err_c = np.maximum(b - y.sum(axis=0), 0.0)
    deficit = err_r.sum()
    if deficit > 0:
        y += np.outer(err_r, err_c) / deficit
    return y


def lemma1_radius(p: Problem) -> float:
    """Range bound R on the dual multipliers produced by threshold updates.

    R = ||C||_inf + gamma / min(n, m) * (1 - max_i,j {a_i, b_j}).
    """
    n, m = p.shape
    biggest_mass = max(float(p.a.weights.max()), float(p.b.weights.max()))
    return p.cost.max_abs + p.gamma / min(n, m) * (1.0 - biggest_mass)


def operator_norm(n: int, m: int) -> float:
    """2->2 norm of the stacked marginal operator X -> (X 1_m, X^T 1_n)."""
    if n < 1 or m < 1:
        raise ValueError("dimensions must be at least 1")
    return float(np.sqrt(n + m))


def sparsity_fraction(x: np.ndarray, threshold: float = SPARSITY_THRESHOLD) -> float:
    """Fraction of plan entries below ``threshold`` (structural zeros)."""
    return float((x < threshold).sum()) / x.size


def _check_dual_shape(p: Problem, d: DualPoint) -> None:
    n, m = p.shape
    if d.lam.size != n or d.mu.size != m:
        raise ValueError(
            f"dual point sizes ({d.lam.size}, {d.mu.size}) do not match "
            f"problem {n}x{m}"
        )


# ---------------------------------------------------------------------------
# trace plumbing shared by the solvers
# ---------------------------------------------------------------------------


class TraceBuilder:
    """Accumulates per-iteration telemetry for a solver run.

    When disabled it records nothing, which keeps tight solver loops free of
    the projection work each record requires.
    """

    def __init__(self, problem: Problem, enabled: bool = True):
        self.problem = problem
        self.enabled = enabled
        self.records: list[TraceRecord] = []
        self._start = time.perf_counter()

    def add(self, iteration: int, plan: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> None:
        if not self.enabled:
            return
        p = self.problem
        cost = p.cost.entries
        primal = primal_value(cost, p.gamma, plan)
        phi = dual_value(cost, p.gamma, p.a.weights, p.b.weights, lam, mu)
        rounded = round_array(plan, p.a.weights, p.b.weights)
        self.records.append(
            TraceRecord(
                iteration=iteration,
                elapsed=time.perf_counter() - self._start,
                primal_f=primal,
                dual_phi=phi,
                gap=primal - phi,
                residuals=residuals_from_arrays(plan, p.a.weights, p.b.weights),
                unregularised_cost=float(np.vdot(cost, rounded)),
                sparsity=sparsity_fraction(plan),
            )
        )
