"""Hot numerical kernels, JIT compiled.

Two loops dominate a tracking step: the joint reflectivity/existence
coordinate update (a dense K x K solve per objective evaluation) and the
per-track smoothing sweeps over the alive history. Both are implemented here
with numba; pure-numpy references used as test oracles live in vmp.py.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


@njit(cache=True)
def _quad_logdet(e_mat, b_vec, xi, lam_p):
    """Re(b_xi^H L^-1 b_xi) and ln|L| for L = M(xi) o E + lam_p I."""
    k = xi.shape[0]
    lam = np.empty((k, k), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            if i == j:
                lam[i, j] = xi[i] * e_mat[i, j] + lam_p
            else:
                lam[i, j] = xi[i] * xi[j] * e_mat[i, j]
    chol = np.linalg.cholesky(lam)
    logdet = 0.0
    for i in range(k):
        logdet += 2.0 * np.log(chol[i, i].real)
    bx = np.empty(k, dtype=np.complex128)
    for i in range(k):
        bx[i] = xi[i] * b_vec[i]
    # forward/back substitution for lam^-1 bx
    y = np.linalg.solve(chol, bx)
    quad = 0.0
    for i in range(k):
        quad += (y[i] * np.conj(y[i])).real
    return quad, logdet


@njit(cache=True)
def _bernoulli_entropy(x):
    h = 0.0
    if 0.0 < x < 1.0:
        h = -x * np.log(x) - (1.0 - x) * np.log(1.0 - x)
    return h


@njit(cache=True)
def _xi_objective(e_mat, b_vec, xi, k_idx, t, lam_p, g_k):
    xi[k_idx] = t
    quad, logdet = _quad_logdet(e_mat, b_vec, xi, lam_p)
    return quad - logdet + _bernoulli_entropy(t) + t * g_k


@njit(cache=True)
def joint_alpha_xi(e_mat, b_vec, xi0, g_vec, lam_p, tol):
    """Coordinate-wise existence update followed by the reflectivity moments.

    e_mat: (K, K) Hermitian expected Gram matrix <S_i|Lz|S_j> with
    delta-method diagonal; b_vec: (K,) <S_i|Lz|Z>; xi0: current existence
    means; g_vec: per-object transition bonus g(xi_prev). Each coordinate is
    optimized on [0, 1] by a coarse scan plus golden section, guarded so the
    objective never decreases. Returns (xi, mu, var_diag, logdet).
    """
    k = xi0.shape[0]
    xi = xi0.copy()
    for kk in range(k):
        g_k = g_vec[kk]
        best_t = xi[kk]
        best_f = _xi_objective(e_mat, b_vec, xi, kk, best_t, lam_p, g_k)
        # bracket with a coarse scan
        n_grid = 21
        gf = best_f
        gt = best_t
        for i in range(n_grid):
            t = i / (n_grid - 1.0)
            f = _xi_objective(e_mat, b_vec, xi, kk, t, lam_p, g_k)
            if f > gf:
                gf = f
                gt = t
        lo = max(0.0, gt - 1.0 / (n_grid - 1.0))
        hi = min(1.0, gt + 1.0 / (n_grid - 1.0))
        # golden-section inside the bracket
        a, b = lo, hi
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = _xi_objective(e_mat, b_vec, xi, kk, c, lam_p, g_k)
        fd = _xi_objective(e_mat, b_vec, xi, kk, d, lam_p, g_k)
        while b - a > tol:
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = _xi_objective(e_mat, b_vec, xi, kk, c, lam_p, g_k)
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = _xi_objective(e_mat, b_vec, xi, kk, d, lam_p, g_k)
        t_gold = 0.5 * (a + b)
        f_gold = _xi_objective(e_mat, b_vec, xi, kk, t_gold, lam_p, g_k)
        if f_gold > gf:
            gf = f_gold
            gt = t_gold
        if gf > best_f:
            best_f = gf
            best_t = gt
        xi[kk] = best_t

    # final reflectivity moments at the chosen xi
    lam = np.empty((k, k), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            if i == j:
                lam[i, j] = xi[i] * e_mat[i, j] + lam_p
            else:
                lam[i, j] = xi[i] * xi[j] * e_mat[i, j]
    bx = np.empty(k, dtype=np.complex128)
    for i in range(k):
        bx[i] = xi[i] * b_vec[i]
    mu = np.linalg.solve(lam, bx)
    lam_inv = np.linalg.inv(lam)
    var = np.empty(k, dtype=np.float64)
    for i in range(k):
        var[i] = lam_inv[i, i].real
    chol = np.linalg.cholesky(lam)
    logdet = 0.0
    for i in range(k):
        logdet += 2.0 * np.log(chol[i, i].real)
    return xi, mu, var, logdet


@njit(cache=True)
def smooth_history(
    means,
    covs,
    msg_mean,
    msg_prec,
    prior_mean,
    prior_prec,
    t_mat,
    g_diag,
    zeta,
    chi,
    n_iter,
    tol,
):
    """Gauss-Seidel smoothing of one track's state beliefs with gamma updates.

    means/covs: (N, 4[,4]) beliefs, modified in place and returned.
    msg_mean/msg_prec: frozen per-step data messages (diagonal precisions).
    prior_mean/prior_prec: birth prior fused at the first step.
    Direction alternates per iteration; each iteration re-estimates the
    per-axis process-noise precision posterior from the current transitions.
    Early exit when the largest change drops below tol. Returns
    (means, covs, gamma_shape, gamma_rate, iterations_used).
    """
    n = means.shape[0]
    dim = 4
    shape = np.full(dim, 0.5 * zeta)
    rate = np.full(dim, 0.5 * chi)
    lam_bar = shape / rate
    g_inv = 1.0 / g_diag

    it_used = 0
    for it in range(n_iter):
        it_used = it + 1
        max_delta = 0.0
        if it % 2 == 0:
            order = np.arange(n)
        else:
            order = np.arange(n - 1, -1, -1)
        q_add = np.zeros((dim, dim))
        for d in range(dim):
            q_add[d, d] = g_diag[d] * g_diag[d] / lam_bar[d]
        for oi in range(n):
            node = order[oi]
            prec_tot = np.zeros((dim, dim))
            info = np.zeros(dim)
            for d in range(dim):
                prec_tot[d, d] += msg_prec[node, d]
                info[d] += msg_prec[node, d] * msg_mean[node, d]
            if node == 0:
                prec_tot += prior_prec
                info += prior_prec @ prior_mean
            if node > 0:
                pred_cov = t_mat @ covs[node - 1] @ t_mat.T + q_add
                fwd_prec = np.linalg.inv(pred_cov)
                fwd_prec = 0.5 * (fwd_prec + fwd_prec.T)
                prec_tot += fwd_prec
                info += fwd_prec @ (t_mat @ means[node - 1])
            if node < n - 1:
                nxt_cov = covs[node + 1] + q_add
                mid = np.linalg.inv(nxt_cov)
                mid = 0.5 * (mid + mid.T)
                bwd_prec = t_mat.T @ mid @ t_mat
                prec_tot += bwd_prec
                info += t_mat.T @ (mid @ means[node + 1])
            new_cov = np.linalg.inv(prec_tot)
            new_cov = 0.5 * (new_cov + new_cov.T)
            new_mean = new_cov @ info
            for d in range(dim):
                delta = abs(new_mean[d] - means[node, d])
                if delta > max_delta:
                    max_delta = delta
                for d2 in range(dim):
                    delta = abs(new_cov[d, d2] - covs[node, d, d2])
                    if delta > max_delta:
                        max_delta = delta
            means[node] = new_mean
            covs[node] = new_cov

        # gamma update from the current transition statistics
        if n >= 2:
            vdiag = np.zeros(dim)
            for node in range(n - 1):
                dmean = means[node + 1] - t_mat @ means[node]
                tct = t_mat @ covs[node] @ t_mat.T
                for d in range(dim):
                    resid = g_inv[d] * dmean[d]
                    vdiag[d] += resid * resid
                    vdiag[d] += g_inv[d] * g_inv[d] * (covs[node + 1, d, d] + tct[d, d])
            for d in range(dim):
                shape[d] = 0.5 * ((n - 1) + zeta)
                rate[d] = 0.5 * (chi + vdiag[d])
            lam_bar = shape / rate

        if max_delta < tol:
            break
    return means, covs, shape, rate, it_used
