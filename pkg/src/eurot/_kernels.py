"""Fused per-iteration kernels for the accelerated solvers.

One kernel call advances one outer iteration (line search included) while
touching each n-by-m array as few times as possible; the Python wrappers in
:mod:`eurot.apdagd` and :mod:`eurot.aam` keep orchestration, telemetry and
validation.  The arithmetic is the same as the straightforward numpy
formulation, only fused.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_DOUBLINGS = 60


@njit(cache=True)
def _tilde_stats(C, a, b, gamma, lam_t, mu_t, glam, gmu):
    """Gradient and dual value at (lam_t, mu_t) without storing the plan."""
    n, m = C.shape
    sq = 0.0
    for j in range(m):
        gmu[j] = 0.0
    for i in range(n):
        row = 0.0
        li = lam_t[i]
        for j in range(m):
            v = -C[i, j] - li - mu_t[j]
            if v > 0.0:
                v /= gamma
                row += v
                gmu[j] += v
                sq += v * v
        glam[i] = row - a[i]
    lin = 0.0
    for i in range(n):
        lin += lam_t[i] * a[i]
    for j in range(m):
        gmu[j] -= b[j]
        lin += mu_t[j] * b[j]
    phi = -0.5 * gamma * sq - lin
    return phi


@njit(cache=True)
def _plan_and_value(C, a, b, gamma, lam, mu, x_out):
    """Clipped plan written into x_out plus the dual value at (lam, mu)."""
    n, m = C.shape
    sq = 0.0
    for i in range(n):
        li = lam[i]
        for j in range(m):
            v = -C[i, j] - li - mu[j]
            if v > 0.0:
                v /= gamma
                x_out[i, j] = v
                sq += v * v
            else:
                x_out[i, j] = 0.0
    lin = 0.0
    for i in range(n):
        lin += lam[i] * a[i]
    for j in range(m):
        lin += mu[j] * b[j]
    return -0.5 * gamma * sq - lin


@njit(cache=True)
def _average_and_stop(C, a, b, gamma, x_avg, x_new, w_new, w_old, phi, eps):
    """x_avg <- w_new x_new + w_old x_avg, then the duality-gap stop test."""
    n, m = C.shape
    cost = 0.0
    sq = 0.0
    col = np.zeros(m)
    res_sq = 0.0
    for i in range(n):
        row = 0.0
        for j in range(m):
            v = w_new * x_new[i, j] + w_old * x_avg[i, j]
            x_avg[i, j] = v
            cost += C[i, j] * v
            sq += v * v
            row += v
            col[j] += v
        d = row - a[i]
        res_sq += d * d
    for j in range(m):
        d = col[j] - b[j]
        res_sq += d * d
    gap = cost + 0.5 * gamma * sq - phi
    converged = gap <= eps and res_sq <= eps * eps
    return gap, res_sq, converged


@njit(cache=True)
def apdagd_iteration(
    C, a, b, gamma, eps, L, beta, lam, mu, lam_p, mu_p, x_avg, x_buf,
    glam, gmu, corrected,
):
    """One accelerated-gradient iteration with its halve-then-double search.

    Mutates the multiplier sequences and running average in place; returns
    (L_new, beta_new, alpha, gap, res_sq, converged, status) with status 0
    on success, 1 when the line search exhausted its doublings and 2 when
    the printed-mode step equation has no real root.
    """
    n = lam.size
    m = mu.size
    lam_t = np.empty(n)
    mu_t = np.empty(m)
    lam_pn = np.empty(n)
    mu_pn = np.empty(m)
    lam_n = np.empty(n)
    mu_n = np.empty(m)
    L_new = L
    beta_new = beta
    alpha = 0.0
    phi_new = 0.0
    accepted = False
    for i in range(MAX_DOUBLINGS + 1):
        L_new = 2.0 ** (i - 1) * L
        if corrected:
            alpha = (1.0 + np.sqrt(1.0 + 4.0 * L_new * beta)) / (2.0 * L_new)
        else:
            disc = 1.0 - 4.0 * L_new * beta
            if disc < 0.0:
                return L_new, beta, alpha, 0.0, 0.0, False, 2
            alpha = (1.0 + np.sqrt(disc)) / (2.0 * L_new)
        beta_new = beta + alpha
        tau = alpha / beta_new

        for r in range(n):
            lam_t[r] = lam[r] + tau * (lam_p[r] - lam[r])
        for c in range(m):
            mu_t[c] = mu[c] + tau * (mu_p[c] - mu[c])
        phi_tilde = _tilde_stats(C, a, b, gamma, lam_t, mu_t, glam, gmu)

        for r in range(n):
            base = lam_p[r] if corrected else lam[r]
            lam_pn[r] = base + alpha * glam[r]
            lam_n[r] = lam[r] + tau * (lam_pn[r] - lam[r])
        for c in range(m):
            base = mu_p[c] if corrected else mu[c]
            mu_pn[c] = base + alpha * gmu[c]
            mu_n[c] = mu[c] + tau * (mu_pn[c] - mu[c])

        phi_new = _plan_and_value(C, a, b, gamma, lam_n, mu_n, x_buf)
        linear = 0.0
        quad = 0.0
        for r in range(n):
            d = lam_n[r] - lam_t[r]
            linear += glam[r] * d
            quad += d * d
        for c in range(m):
            d = mu_n[c] - mu_t[c]
            linear += gmu[c] * d
            quad += d * d
        slack = 1e-14 * (1.0 + abs(phi_tilde))
        if phi_new >= phi_tilde + linear - 0.5 * L_new * quad - slack:
            accepted = True
            break
    if not accepted:
        return L_new, beta, alpha, 0.0, 0.0, False, 1

    tau = alpha / beta_new
    for r in range(n):
        lam[r] = lam_n[r]
        lam_p[r] = lam_pn[r]
    for c in range(m):
        mu[c] = mu_n[c]
        mu_p[c] = mu_pn[c]
    gap, res_sq, converged = _average_and_stop(
        C, a, b, gamma, x_avg, x_buf, tau, 1.0 - tau, phi_new, eps
    )
    return L_new, beta_new, alpha, gap, res_sq, converged, 0


#: give up on incremental selection past this active-set size and sort instead
_SELECT_CAP = 48


@njit(cache=True)
def _threshold_select(M, i, shift, t, taken, scratch):
    """Threshold solve for the row v_j = M[i, j] + shift[j].

    Comparison-only variant of the sort-based solve with identical output:
    the order statistics are taken ascending by repeated selection, which at
    small targets touches only the few active entries.  Large active sets
    fall back to a full sort of the row into ``scratch``.
    """
    m = shift.size
    for j in range(m):
        taken[j] = False
    # first order statistic is always active
    vmin = np.inf
    jmin = 0
    for j in range(m):
        v = M[i, j] + shift[j]
        if v < vmin:
            vmin = v
            jmin = j
    if t == 0.0:
        return -vmin
    taken[jmin] = True
    csum = vmin
    l = 1
    while l < m:
        if l >= _SELECT_CAP:
            # wide active set: sort once and finish by scanning
            for j in range(m):
                scratch[j] = M[i, j] + shift[j]
            sub = scratch[:m]
            sub.sort()
            csum = 0.0
            lam = 0.0
            for j in range(m):
                csum += sub[j]
                if (j + 1) * sub[j] - csum <= t:
                    l = j + 1
                    lam = -(t + csum) / l
            return lam
        u = np.inf
        ju = 0
        for j in range(m):
            if not taken[j]:
                v = M[i, j] + shift[j]
                if v < u:
                    u = v
                    ju = j
        # extend the active prefix while the excess still fits under t
        if l * u - csum <= t:
            taken[ju] = True
            csum += u
            l += 1
        else:
            break
    return -(t + csum) / l


@njit(cache=True)
def sinkhorn_chunk(C, Ct, a, b, gamma, eps, lam, mu, k_start, steps, taken_r, taken_c, scratch):
    """Up to ``steps`` alternating half-iterations of the threshold loop.

    Even global indices update lam (rows of C), odd ones update mu (rows of
    the transposed copy Ct).  After each half-iteration the l1 marginal
    error of the clipped plan decides termination.  Returns (consumed,
    converged, row_l1, col_l1).
    """
    n, m = C.shape
    row_l1 = np.inf
    col_l1 = np.inf
    for s in range(steps):
        k = k_start + s
        if k % 2 == 0:
            for i in range(n):
                lam[i] = _threshold_select(C, i, mu, gamma * a[i], taken_r, scratch)
        else:
            for j in range(m):
                mu[j] = _threshold_select(Ct, j, lam, gamma * b[j], taken_c, scratch)
        row_l1 = 0.0
        col_sums = np.zeros(m)
        for i in range(n):
            r = 0.0
            li = lam[i]
            for j in range(m):
                v = -C[i, j] - li - mu[j]
                if v > 0.0:
                    v /= gamma
                    r += v
                    col_sums[j] += v
            row_l1 += abs(r - a[i])
        col_l1 = 0.0
        for j in range(m):
            col_l1 += abs(col_sums[j] - b[j])
        if row_l1 + col_l1 <= eps:
            return s + 1, True, row_l1, col_l1
    return steps, False, row_l1, col_l1


@njit(cache=True)
def aam_iteration(
    C, Ct, a, b, gamma, eps, L, alpha, lam, mu, lam_p, mu_p, x_avg, x_buf,
    glam, gmu, taken_n, taken_m, scratch, corrected,
):
    """One accelerated alternating-maximisation iteration with line search.

    ``Ct`` is a contiguous transpose of C for the column-block solves;
    ``taken_n``/``taken_m`` and ``scratch`` are selection work buffers.
    Returns (L_new, alpha_new, block, gap, res_sq, converged, status) and
    mutates the sequences in place; block is 0 for the lam side, 1 for mu;
    status is 0 on success and 1 when the line search exhausted its
    doublings.
    """
    n = lam.size
    m = mu.size
    lam_t = np.empty(n)
    mu_t = np.empty(m)
    lam_n = np.empty(n)
    mu_n = np.empty(m)
    L_new = L
    alpha_new = alpha
    block = 0
    phi_new = 0.0
    grad_sq = 0.0
    accepted = False
    for i in range(MAX_DOUBLINGS + 1):
        L_new = 2.0 ** (i - 1) * L
        momentum = alpha * alpha * L
        if corrected:
            alpha_new = (1.0 + np.sqrt(1.0 + 4.0 * L_new * momentum)) / (2.0 * L_new)
        else:
            alpha_new = 1.0 / L_new + np.sqrt(
                1.0 / (4.0 * L_new * L_new) + alpha * L / L_new
            )
        t = 1.0 / (alpha_new * L_new)
        for r in range(n):
            lam_t[r] = lam[r] + t * (lam_p[r] - lam[r])
        for c in range(m):
            mu_t[c] = mu[c] + t * (mu_p[c] - mu[c])
        phi_tilde = _tilde_stats(C, a, b, gamma, lam_t, mu_t, glam, gmu)
        gl = 0.0
        for r in range(n):
            gl += glam[r] * glam[r]
        gm = 0.0
        for c in range(m):
            gm += gmu[c] * gmu[c]
        grad_sq = gl + gm

        if gl > gm:
            block = 0
            for r in range(n):
                lam_n[r] = _threshold_select(C, r, mu_t, gamma * a[r], taken_m, scratch)
            for c in range(m):
                mu_n[c] = mu_t[c]
        else:
            block = 1
            for c in range(m):
                mu_n[c] = _threshold_select(Ct, c, lam_t, gamma * b[c], taken_n, scratch)
            for r in range(n):
                lam_n[r] = lam_t[r]

        phi_new = _plan_and_value(C, a, b, gamma, lam_n, mu_n, x_buf)
        slack = 1e-14 * (1.0 + abs(phi_tilde))
        if phi_new >= phi_tilde + grad_sq / (2.0 * L_new) - slack:
            accepted = True
            break
    if not accepted:
        return L_new, alpha_new, block, 0.0, 0.0, False, 1

    # the primal average uses the plan at the extrapolated point
    phi_at_tilde_plan = _plan_and_value(C, a, b, gamma, lam_t, mu_t, x_buf)
    w_new = 1.0 / (alpha_new * L_new)
    w_old = (alpha * alpha * L) / (alpha_new * alpha_new * L_new)
    for r in range(n):
        base = lam_p[r] if corrected else lam[r]
        lam_p[r] = base + alpha_new * glam[r]
        lam[r] = lam_n[r]
    for c in range(m):
        base = mu_p[c] if corrected else mu[c]
        mu_p[c] = base + alpha_new * gmu[c]
        mu[c] = mu_n[c]
    gap, res_sq, converged = _average_and_stop(
        C, a, b, gamma, x_avg, x_buf, w_new, w_old, phi_new, eps
    )
    return L_new, alpha_new, block, gap, res_sq, converged, 0
