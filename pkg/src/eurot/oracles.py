"""Slow-but-sure reference solvers used to validate the fast methods.

These are deliberately naive: a textbook transportation simplex with Bland's
anti-cycling rule, fixed-step gradient ascent on the dual, and bisection for
the scalar threshold equation.  They share no code with the solvers they
check and are only meant for desk-size instances (n*m up to a few hundred).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    CostMatrix,
    DualPoint,
    Measure,
    Problem,
    TransportPlan,
    dual_value,
    gradient_arrays,
)


@dataclass(frozen=True)
class LpSolution:
    """Exact optimum of the unregularised transport LP."""

    plan: TransportPlan
    value: float
    basis: frozenset


class PivotBudgetExceeded(RuntimeError):
    """The simplex stalled past its pivot budget (degenerate cycling guard)."""


def lp_transport_simplex(
    a: Measure, b: Measure, c: CostMatrix, max_pivots: int | None = None
) -> LpSolution:
    """Solve min <C, X> over the transportation polytope U(a, b) exactly.

    Northwest-corner initial basis, then cycle-improvement pivoting.  Entering
    cells are picked by Bland's rule (lowest (i, j) with negative reduced
    cost) so degenerate instances cannot cycle.
    """
    av = a.weights.copy()
    bv = b.weights.copy()
    C = c.entries
    n, m = C.shape
    if abs(av.sum() - bv.sum()) > 1e-12:
        raise ValueError("marginal masses must agree")
    if max_pivots is None:
        max_pivots = 2000 * (n + m)

    x = np.zeros((n, m))
    basis: list[tuple[int, int]] = []

    # northwest corner: a monotone staircase of exactly n+m-1 cells
    i = j = 0
    ra, rb = av.copy(), bv.copy()
    while True:
        amt = min(ra[i], rb[j])
        x[i, j] = amt
        basis.append((i, j))
        ra[i] -= amt
        rb[j] -= amt
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1:
            i += 1
        elif i == n - 1:
            j += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1

    for _ in range(max_pivots):
        u, v = _tree_potentials(C, basis, n, m)
        reduced = C - u[:, None] - v[None, :]
        in_basis = set(basis)
        entering = None
        for idx in np.flatnonzero((reduced < -1e-12).ravel()):
            cell = (int(idx // m), int(idx % m))
            if cell not in in_basis:
                entering = cell
                break
        if entering is None:
            value = float(np.vdot(C, x))
            return LpSolution(TransportPlan(x), value, frozenset(basis))
        cycle = _find_cycle(basis, entering)
        minus = cycle[1::2]
        theta = min(x[cell] for cell in minus)
        leaving = min(cell for cell in minus if x[cell] <= theta)
        for k, cell in enumerate(cycle):
            x[cell] += theta if k % 2 == 0 else -theta
        x[leaving] = 0.0
        basis.remove(leaving)
        basis.append(entering)
    raise PivotBudgetExceeded(f"no optimum after {max_pivots} pivots")


def _tree_potentials(C, basis, n, m):
    """Dual potentials u, v with u_i + v_j = c_ij on the basis tree."""
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    remaining = list(basis)
    while remaining:
        progressed = False
        keep = []
        for (i, j) in remaining:
            if not np.isnan(u[i]):
                v[j] = C[i, j] - u[i]
                progressed = True
            elif not np.isnan(v[j]):
                u[i] = C[i, j] - v[j]
                progressed = True
            else:
                keep.append((i, j))
        remaining = keep
        if not progressed and remaining:
            # disconnected basis forest: anchor the next component
            i0 = remaining[0][0]
            u[i0] = 0.0
    return np.nan_to_num(u), np.nan_to_num(v)


def _find_cycle(basis, entering):
    """Alternating row/column cycle through the basis closing at ``entering``.

    Returns the cycle cells starting at ``entering``; odd positions are the
    cells whose mass decreases during the pivot.
    """
    cells = set(basis) | {entering}

    def search(path, move_along_row):
        cur = path[-1]
        for cell in cells:
            if cell == cur or cell in path[1:]:
                continue
            if move_along_row and cell[0] != cur[0]:
                continue
            if not move_along_row and cell[1] != cur[1]:
                continue
            if cell == entering and len(path) >= 4 and len(path) % 2 == 0:
                return path
            if cell == entering:
                continue
            found = search(path + [cell], not move_along_row)
            if found is not None:
                return found
        return None

    cycle = search([entering], True) or search([entering], False)
    if cycle is None:
        raise RuntimeError("no pivot cycle found; basis is not a spanning tree")
    return cycle


def dual_ascent_reference(
    p: Problem, tol: float = 1e-9, max_iter: int = 20_000_000
) -> DualPoint:
    """High-precision maximiser of the dual via fixed-step gradient ascent.

    Steps by gamma/(n+m) (the inverse of the dual gradient's Lipschitz bound)
    until ||grad phi||_2 <= tol.  Supplies phi*, R2 = ||(lam*, mu*)||_2 and
    multiplier ranges for the theorem-bound tests.
    """
    C = p.cost.entries
    a, bw = p.a.weights, p.b.weights
    n, m = p.shape
    step = p.gamma / (n + m)
    lam = np.zeros(n)
    mu = np.zeros(m)
    for _ in range(max_iter):
        glam, gmu = gradient_arrays(C, p.gamma, a, bw, lam, mu)
        if np.sqrt(glam @ glam + gmu @ gmu) <= tol:
            return DualPoint(lam, mu)
        lam = lam + step * glam
        mu = mu + step * gmu
    raise RuntimeError(f"dual ascent did not reach tol={tol} in {max_iter} iterations")


def oracle_dual_value(p: Problem, d: DualPoint) -> float:
    """phi at an oracle point (convenience for bound tests)."""
    return dual_value(p.cost.entries, p.gamma, p.a.weights, p.b.weights, d.lam, d.mu)


def bisection_threshold(v: np.ndarray, target: float, iterations: int = 200) -> float:
    """Root of lam -> sum_j [-v_j - lam]_+ - target by plain bisection.

    The bracket [-max(v) - target - 1, -min(v)] always contains the leftmost
    root; 200 halvings pin it to full float precision.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty vector")
    if target < 0:
        raise ValueError("target mass must be nonnegative")
    return float(_bisect(v, float(target), iterations))


@njit(cache=True)
def _bisect(v, target, iterations):
    lo = -v.max() - target - 1.0
    hi = -v.min()
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        total = 0.0
        for j in range(v.size):
            s = -v[j] - mid
            if s > 0.0:
                total += s
        if total - target > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
