"""Variational updates: reflectivity, existence, data-message projection,
kinematic messages, fusion, process noise, and the evidence bound.

All whitened inner products go through SteeringModel's band-restricted
operations; `zb` arguments are band views of a snapshot
(model.band_view(snapshot.data)). The joint reflectivity/existence coordinate
update also exists as a JIT kernel (_kernels.joint_alpha_xi) used by the
tracker; the numpy implementations here are the readable reference and are
compared against the kernel in the tests.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ._kernels import joint_alpha_xi
from .beliefs import (
    BeliefError,
    ExistenceBelief,
    GaussianBelief,
    GaussianMessage,
    ProcessNoiseBelief,
    ReflectivityBelief,
)
from .config import MotionModel, TrackerConfig
from .geometry import state_to_geometry
from .steering import SteeringModel


def g_transition(xi_prev: float, config: TrackerConfig) -> float:
    """Birth/survival log-odds bonus for existing at this step."""
    return xi_prev * (config.logit_ps - config.logit_pb) + config.logit_pb


def expected_gram(model: SteeringModel, states) -> np.ndarray:
    """E[<S_i|Lz|S_j>] over the state beliefs, delta method on the diagonal.

    states: sequence of GaussianBelief. Off-diagonal terms use the means only
    (first-order delta method); diagonals add Tr(cov_pos ReJ).
    """
    k = len(states)
    geoms = [state_to_geometry(s.mean[:2]) for s in states]
    e_mat = np.zeros((k, k), dtype=complex)
    for i in range(k):
        for j in range(i + 1, k):
            val = model.pair_inner(geoms[i], geoms[j])
            e_mat[i, j] = val
            e_mat[j, i] = np.conj(val)
    for i in range(k):
        rej = model.re_j(states[i].mean[:2])
        e_mat[i, i] = model.energy + float(np.sum(states[i].cov[:2, :2] * rej))
    return e_mat


def data_inner(model: SteeringModel, states, zb: np.ndarray) -> np.ndarray:
    """b_i = <S(mean_i)|Lz|Z> for each state belief."""
    out = np.zeros(len(states), dtype=complex)
    for i, s in enumerate(states):
        geom = state_to_geometry(s.mean[:2])
        out[i] = model.bra_z(geom.bearing, geom.delay, zb)
    return out


def update_alpha(
    model: SteeringModel,
    zb: np.ndarray,
    states,
    exist,
    config: TrackerConfig,
) -> ReflectivityBelief:
    """Closed-form q(alpha) given the existence means."""
    xi = np.array([e.prob for e in exist])
    k = len(xi)
    if k == 0:
        return ReflectivityBelief(mean=np.zeros(0, dtype=complex), precision=np.zeros((0, 0), dtype=complex))
    e_mat = expected_gram(model, states)
    b_vec = data_inner(model, states, zb)
    m_mat = np.outer(xi, xi)
    np.fill_diagonal(m_mat, xi)
    lam = m_mat * e_mat + config.prior_reflectivity_precision * np.eye(k)
    mu = np.linalg.solve(lam, xi * b_vec)
    return ReflectivityBelief(mean=mu, precision=lam)


def xi_objective(e_mat, b_vec, xi, k_idx, t, lam_p, g_k) -> float:
    """Existence objective for coordinate k at value t, other coords fixed."""
    xi = xi.copy()
    xi[k_idx] = t
    k = len(xi)
    m_mat = np.outer(xi, xi)
    np.fill_diagonal(m_mat, xi)
    lam = m_mat * e_mat + lam_p * np.eye(k)
    bx = xi * b_vec
    sol = np.linalg.solve(lam, bx)
    quad = float(np.real(np.vdot(bx, sol)))
    _, logdet = np.linalg.slogdet(lam)
    ent = 0.0
    if 0.0 < t < 1.0:
        ent = -t * np.log(t) - (1.0 - t) * np.log(1.0 - t)
    return quad - logdet + ent + t * g_k


def xi_argmax(e_mat, b_vec, xi, k_idx, g_k, lam_p, grid: int = 21) -> float:
    """Argmax over [0, 1] of the existence objective for one coordinate.

    Dense scan to bracket, golden section to refine; the current value and the
    endpoints compete at the end so the objective cannot decrease.
    """
    ts = np.linspace(0.0, 1.0, grid)
    vals = [xi_objective(e_mat, b_vec, xi, k_idx, t, lam_p, g_k) for t in ts]
    best = int(np.argmax(vals))
    a = ts[max(best - 1, 0)]
    b = ts[min(best + 1, grid - 1)]
    phi = 0.5 * (np.sqrt(5.0) - 1.0)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = xi_objective(e_mat, b_vec, xi, k_idx, c, lam_p, g_k)
    fd = xi_objective(e_mat, b_vec, xi, k_idx, d, lam_p, g_k)
    while b - a > 1e-6:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = xi_objective(e_mat, b_vec, xi, k_idx, c, lam_p, g_k)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = xi_objective(e_mat, b_vec, xi, k_idx, d, lam_p, g_k)
    cands = [0.0, 1.0, 0.5 * (a + b), float(xi[k_idx])]
    f_cands = [xi_objective(e_mat, b_vec, xi, k_idx, t, lam_p, g_k) for t in cands]
    return cands[int(np.argmax(f_cands))]


def update_xi(
    k_idx: int,
    model: SteeringModel,
    zb: np.ndarray,
    states,
    exist,
    xi_prev: float,
    config: TrackerConfig,
    grid: int = 201,
) -> ExistenceBelief:
    """Scalar existence update against the data, other components fixed."""
    xi = np.array([e.prob for e in exist])
    e_mat = expected_gram(model, states)
    b_vec = data_inner(model, states, zb)
    g_k = g_transition(xi_prev, config)
    t = xi_argmax(e_mat, b_vec, xi, k_idx, g_k, config.prior_reflectivity_precision, grid=grid)
    return ExistenceBelief(prob=t)


def joint_update(
    model: SteeringModel,
    zb: np.ndarray,
    states,
    exist,
    xi_prev,
    config: TrackerConfig,
):
    """Joint (alpha, xi) update via the JIT kernel.

    Returns (ExistenceBelief list, ReflectivityBelief, logdet of the
    reflectivity precision).
    """
    k = len(states)
    if k == 0:
        return [], ReflectivityBelief(np.zeros(0, dtype=complex), np.zeros((0, 0), dtype=complex)), 0.0
    e_mat = expected_gram(model, states)
    b_vec = data_inner(model, states, zb)
    xi0 = np.array([e.prob for e in exist], dtype=float)
    g_vec = np.array([g_transition(xp, config) for xp in xi_prev], dtype=float)
    xi, mu, var, logdet = joint_alpha_xi(
        np.ascontiguousarray(e_mat),
        np.ascontiguousarray(b_vec),
        xi0,
        g_vec,
        config.prior_reflectivity_precision,
        1e-6,
    )
    m_mat = np.outer(xi, xi)
    np.fill_diagonal(m_mat, xi)
    lam = m_mat * e_mat + config.prior_reflectivity_precision * np.eye(k)
    belief = ReflectivityBelief(mean=mu, precision=lam)
    return [ExistenceBelief(prob=float(x)) for x in xi], belief, float(logdet)


def joint_update_ref(model, zb, states, exist, xi_prev, config):
    """Pure-numpy reference for joint_update (coordinate scans, same order)."""
    exist = list(exist)
    for k_idx in range(len(states)):
        exist[k_idx] = update_xi(k_idx, model, zb, states, exist, xi_prev[k_idx], config, grid=21)
    alpha = update_alpha(model, zb, states, exist, config)
    return exist, alpha


# ---- data-message projection ------------------------------------------------


def projection_objective(
    model: SteeringModel,
    zb_resid: np.ndarray,
    alpha_mean: complex,
    alpha_var: float,
    xi: float,
    position,
    d_diag,
    with_grad: bool = False,
):
    """KL divergence (up to constants) of a diagonal Gaussian message.

    zb_resid is the band view of Z minus the other objects' mean
    contributions. position is the message mean (x, y); d_diag its positional
    variances. Optionally returns the gradient in (x, y, ln dx, ln dy).
    """
    w = xi * (abs(alpha_mean) ** 2 + alpha_var)
    geom = state_to_geometry(position)
    b, b_tau, b_theta = model.bra_z_derivs(geom.bearing, geom.delay, zb_resid)
    rej, drej_dx, drej_dy = model.re_j_grad(position)
    dx, dy = float(d_diag[0]), float(d_diag[1])

    val = (
        -0.5 * (np.log(dx) + np.log(dy))
        - 2.0 * xi * np.real(alpha_mean * np.conj(b))
        + w * (model.energy + dx * rej[0, 0] + dy * rej[1, 1])
    )
    if not with_grad:
        return val

    from .geometry import geometry_jacobian

    jac = geometry_jacobian(position)  # rows (tau, theta) x cols (x, y)
    grad_xy = np.zeros(2)
    for p in range(2):
        db = jac[0, p] * b_tau + jac[1, p] * b_theta
        dj = drej_dx if p == 0 else drej_dy
        grad_xy[p] = -2.0 * xi * np.real(alpha_mean * np.conj(db)) + w * (dx * dj[0, 0] + dy * dj[1, 1])
    grad_logd = np.array([-0.5 + w * dx * rej[0, 0], -0.5 + w * dy * rej[1, 1]])
    return val, grad_xy, grad_logd


def project_data_message(
    model: SteeringModel,
    zb_resid: np.ndarray,
    alpha_mean: complex,
    alpha_var: float,
    xi: float,
    init: GaussianMessage,
    config: TrackerConfig,
) -> GaussianMessage:
    """Gaussian projection of the data message, diagonal positive covariance.

    Optimizes (range, bearing, log-variances) with L-BFGS-B and analytic
    gradients; ranges/bearings are box-bounded to the supported window. Only
    the position block is informative; velocity precision is zero.
    """
    w = xi * (abs(alpha_mean) ** 2 + alpha_var)
    if w <= 0.0:
        return GaussianMessage(mean=init.mean.copy(), precision=np.zeros((4, 4)), converged=True)

    p0 = init.mean[:2]
    r0 = float(np.hypot(p0[0], p0[1]))
    th0 = float(np.arctan2(p0[0], p0[1]))
    pdiag = np.diag(init.precision)[:2]
    d0 = np.where(pdiag > 0, 1.0 / np.maximum(pdiag, 1e-30), 1.0)
    d0 = np.clip(d0, 1e-4, 1e4)

    r_max = 0.999 * model.max_range_supported
    bounds = [(0.5, r_max), (-1.45, 1.45), (np.log(1e-6), np.log(1e4))] + [(np.log(1e-6), np.log(1e4))]

    def pack_pos(z):
        r, th = z[0], z[1]
        return np.array([r * np.sin(th), r * np.cos(th)])

    def fun(z):
        pos = pack_pos(z)
        d = np.exp(z[2:])
        val, grad_xy, grad_logd = projection_objective(
            model, zb_resid, alpha_mean, alpha_var, xi, pos, d, with_grad=True
        )
        r, th = z[0], z[1]
        # d(x,y)/d(r,theta)
        jrt = np.array([[np.sin(th), r * np.cos(th)], [np.cos(th), -r * np.sin(th)]])
        grad_rt = jrt.T @ grad_xy
        return val, np.concatenate([grad_rt, grad_logd])

    z0 = np.array([np.clip(r0, 0.6, r_max - 1e-6), np.clip(th0, -1.44, 1.44), *np.log(d0)])
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": config.projection_max_iter, "gtol": config.projection_tol, "ftol": 1e-14},
    )
    pos = pack_pos(res.x)
    d = np.exp(res.x[2:])
    mean = init.mean.copy()
    mean[:2] = pos
    prec = np.zeros((4, 4))
    prec[0, 0] = 1.0 / d[0]
    prec[1, 1] = 1.0 / d[1]
    return GaussianMessage(mean=mean, precision=prec, converged=bool(res.success))


# ---- kinematic chain --------------------------------------------------------


def process_noise_cov(motion: MotionModel, noise: ProcessNoiseBelief) -> np.ndarray:
    """Covariance added per transition: G diag(1/lambda_bar) G^T (diagonal)."""
    g = motion.noise_gain_diag
    return np.diag(g**2 / noise.mean)


def kinematic_message(
    neighbor: GaussianBelief,
    direction: str,
    motion: MotionModel,
    noise: ProcessNoiseBelief,
) -> GaussianMessage:
    """Chain message through one transition, neighbor uncertainty included."""
    t_mat = motion.transition
    q_add = process_noise_cov(motion, noise)
    if direction == "forward":
        mean = t_mat @ neighbor.mean
        cov = t_mat @ neighbor.cov @ t_mat.T + q_add
        return GaussianMessage.from_moments(mean=mean, cov=cov)
    if direction == "backward":
        mid = np.linalg.inv(neighbor.cov + q_add)
        mid = 0.5 * (mid + mid.T)
        prec = t_mat.T @ mid @ t_mat
        mean = np.linalg.solve(t_mat, neighbor.mean)
        return GaussianMessage(mean=mean, precision=prec)
    raise ValueError(f"unknown direction {direction!r}")


def fuse_gaussian_messages(messages) -> GaussianBelief:
    """Product of Gaussian factors; total precision must be positive definite."""
    if not messages:
        raise BeliefError("cannot fuse an empty message list")
    dim = len(messages[0].mean)
    prec = np.zeros((dim, dim))
    info = np.zeros(dim)
    for m in messages:
        prec += m.precision
        info += m.precision @ m.mean
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    return GaussianBelief(mean=cov @ info, cov=cov)


def update_process_noise(
    beliefs,
    motion: MotionModel,
    zeta: float,
    chi: float,
) -> ProcessNoiseBelief:
    """Gamma posterior on per-axis process-noise precision from transitions."""
    n = len(beliefs)
    if n < 2:
        return ProcessNoiseBelief.prior(zeta, chi)
    t_mat = motion.transition
    g_inv = 1.0 / motion.noise_gain_diag
    vdiag = np.zeros(4)
    for i in range(n - 1):
        dmean = g_inv * (beliefs[i + 1].mean - t_mat @ beliefs[i].mean)
        vdiag += dmean**2
        vdiag += g_inv**2 * (
            np.diag(beliefs[i + 1].cov) + np.diag(t_mat @ beliefs[i].cov @ t_mat.T)
        )
    shape = np.full(4, 0.5 * ((n - 1) + zeta))
    rate = 0.5 * (chi + vdiag)
    return ProcessNoiseBelief(shape=shape, rate=rate)


def transition_vstat(belief_a: GaussianBelief, belief_b: GaussianBelief, motion: MotionModel) -> np.ndarray:
    """Full V matrix for one transition a -> b (used by the moment tests)."""
    t_mat = motion.transition
    g_inv = np.diag(1.0 / motion.noise_gain_diag)
    resid = g_inv @ (belief_b.mean - t_mat @ belief_a.mean)
    return (
        np.outer(resid, resid)
        + g_inv @ belief_b.cov @ g_inv.T
        + g_inv @ t_mat @ belief_a.cov @ t_mat.T @ g_inv.T
    )


# ---- evidence bound ---------------------------------------------------------


def compute_elbo(
    model: SteeringModel,
    zb: np.ndarray,
    states,
    exist,
    xi_prev,
    config: TrackerConfig,
    alpha_belief: ReflectivityBelief | None = None,
) -> float:
    """Evidence lower bound up to data-only constants.

    With alpha_belief omitted, q(alpha) is taken at its optimum (zero KL). An
    empty model returns 0 by convention.
    """
    k = len(states)
    if k == 0:
        return 0.0
    xi = np.array([e.prob for e in exist], dtype=float)
    lam_p = config.prior_reflectivity_precision
    e_mat = expected_gram(model, states)
    b_vec = data_inner(model, states, zb)
    m_mat = np.outer(xi, xi)
    np.fill_diagonal(m_mat, xi)
    lam = m_mat * e_mat + lam_p * np.eye(k)
    bx = xi * b_vec
    sol = np.linalg.solve(lam, bx)
    quad = float(np.real(np.vdot(bx, sol)))
    _, logdet = np.linalg.slogdet(lam)
    ln_g = quad - logdet + k * np.log(lam_p)

    total = ln_g
    for i in range(k):
        t = xi[i]
        if 0.0 < t < 1.0:
            total += -t * np.log(t) - (1.0 - t) * np.log(1.0 - t)
        total += t * g_transition(xi_prev[i], config)

    if alpha_belief is not None:
        mu_t = sol
        d = alpha_belief.mean - mu_t
        p_inv = np.linalg.inv(alpha_belief.precision)
        _, logdet_p = np.linalg.slogdet(alpha_belief.precision)
        kl = float(
            np.real(np.trace(lam @ p_inv))
            + np.real(np.vdot(d, lam @ d))
            - k
            + logdet_p
            - logdet
        )
        total -= kl
    return float(total)
