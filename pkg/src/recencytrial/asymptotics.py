"""Design-time (analytic) variances of the log incidence estimators and of Z.

Two random vectors appear here. The Kassanjee and active-arm estimators are
smooth functions of

    W = (N_R - frr_hat N+, N+, mdri_hat - frr_hat T, N_event, N_enroll)

so the log incidence ratio has delta-method variance ``d' cov(W) d``. When
the assay properties are known exactly, the Z statistic is a smooth function
of ``W* = (W1, W2, W4, W5, N_R)``, whose covariance divided by N does not
depend on N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .domain import DesignContext, HypothesisSpec
from .errors import InfeasibleContextError, UnsupportedContextError, ValidationError

W_LABELS = ("W1", "W2", "W3", "W4", "W5")
W_STAR_LABELS = ("W1", "W2", "W4", "W5", "W6")


@dataclass(frozen=True)
class GammaComponents:
    """Per-screened-subject variance components.

    ``V0 = gamma00 / N + gamma01`` and ``V1 = gamma1 / N``; ``gamma01`` is the
    floor contributed by uncertainty in the assay properties.
    """

    gamma00: float
    gamma01: float
    gamma1: float


@dataclass(frozen=True)
class WCovariance:
    """``cov(W*) / N`` as a read-only 5x5 array with labels."""

    matrix: np.ndarray
    labels: Tuple[str, ...] = W_STAR_LABELS

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def quad(self, weights) -> float:
        w = np.asarray(weights, dtype=float)
        return float(w @ self.matrix @ w)

    def is_psd(self, tol: float = 1e-10) -> bool:
        return is_positive_semidefinite(self.matrix, tol)


def semidefinite_cholesky(matrix, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L' = matrix`` for a PSD matrix.

    Pivots within ``tol * max(diag)`` of zero are treated as exact zeros,
    which requires the rest of that column to vanish as well. Raises
    ValueError when the matrix is not symmetric positive semidefinite.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, rtol=0, atol=tol * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not square and symmetric")
    scale = max(float(np.max(np.diag(a))), 0.0) or 1.0
    eps = tol * scale
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -eps:
            raise ValueError(f"negative pivot {pivot:.3g} at index {j}")
        if pivot <= eps:
            rest = a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
            if np.any(np.abs(rest) > math.sqrt(eps) * math.sqrt(scale)):
                raise ValueError(f"zero pivot with nonzero column at index {j}")
            continue
        L[j, j] = math.sqrt(pivot)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_semidefinite(matrix, tol: float = 1e-10) -> bool:
    try:
        semidefinite_cholesky(matrix, tol)
    except ValueError:
        return False
    return True


def p_recent(ctx: DesignContext) -> float:
    """Probability that an HIV-positive screenee tests recent."""
    a = ctx.assay
    p = ctx.prevalence_p
    pr = a.frr + ctx.lambda0 * (1 - p) / p * a.window_excess
    if not (0 < pr < 1):
        raise InfeasibleContextError(f"recency probability P_R = {pr:.6g} is outside (0, 1)")
    return pr


def gamma_components(ctx: DesignContext, lambda1: float) -> GammaComponents:
    if not lambda1 > 0:
        raise ValidationError(f"lambda1 must be positive, got {lambda1}")
    a = ctx.assay
    p, r, tau = ctx.prevalence_p, ctx.enroll_rate_r, ctx.followup_tau
    pr = p_recent(ctx)
    excess = pr - a.frr
    var_frr, var_mdri = a.frr_sd ** 2, a.mdri_sd ** 2
    gamma00 = (pr * (1 - pr) / excess ** 2 + 1 / (1 - p) + (1 - p) * var_frr / excess ** 2) / p
    gamma01 = (var_mdri / a.window_excess ** 2
               + var_frr * (a.mdri - pr * a.cutoff_T) ** 2 / (excess ** 2 * a.window_excess ** 2))
    gamma1 = 1 / (lambda1 * (1 - p) * r * tau)
    return GammaComponents(gamma00, gamma01, gamma1)


def v0_analytic(ctx: DesignContext, n_screened: float) -> float:
    """Asymptotic variance of log lambda0_hat with ``n_screened`` screenees."""
    g = gamma_components(ctx, ctx.lambda0)
    return g.gamma00 / n_screened + g.gamma01


def v1_analytic(ctx: DesignContext, lambda1: float, n_screened: float) -> float:
    return gamma_components(ctx, lambda1).gamma1 / n_screened


def full_w_covariance(ctx: DesignContext, lambda1: float, n_screened: float) -> np.ndarray:
    """``cov(W)`` at sample size ``n_screened``, assay uncertainty included.

    Not divided by N: the FRR uncertainty makes ``var(W1)`` quadratic in N.
    """
    a = ctx.assay
    N = float(n_screened)
    p, r = ctx.prevalence_p, ctx.enroll_rate_r
    mu = lambda1 * ctx.followup_tau
    pr = p_recent(ctx)
    excess = pr - a.frr
    vb, vo, T = a.frr_sd ** 2, a.mdri_sd ** 2, a.cutoff_T
    q = 1 - r + p * r
    c = np.zeros((5, 5))
    c[0, 0] = N * p * (pr * (1 - pr) + (1 - p) * excess ** 2 + vb * (1 - p + N * p))
    c[1, 1] = N * p * (1 - p)
    c[2, 2] = vo + vb * T ** 2
    c[3, 3] = N * (1 - p) * r * mu * (1 + mu * p * r + mu * (1 - r))
    c[4, 4] = N * (1 - p) * r * q
    c[0, 1] = N * p * (1 - p) * excess
    c[0, 2] = N * p * vb * T
    c[0, 3] = -N * p * (1 - p) * excess * r * mu
    c[0, 4] = -N * p * (1 - p) * excess * r
    c[1, 3] = -N * p * (1 - p) * r * mu
    c[1, 4] = -N * p * (1 - p) * r
    c[3, 4] = N * (1 - p) * r * q * mu
    # W3 (assay estimates) is independent of the counts
    return np.triu(c) + np.triu(c, 1).T


def log_ratio_gradient(ctx: DesignContext, lambda1: float, n_screened: float) -> np.ndarray:
    """Gradient of ``log lambda1_hat - log lambda0_hat`` in W at E(W).

    The first three entries act on the screening block (W1, W2, W3), the
    last two on the trial block (W4, W5).
    """
    a = ctx.assay
    N = float(n_screened)
    p, r = ctx.prevalence_p, ctx.enroll_rate_r
    pr = p_recent(ctx)
    return np.array([
        -1 / (N * p * (pr - a.frr)),
        -1 / (N * (1 - p)),
        1 / a.window_excess,
        1 / (N * (1 - p) * r * ctx.followup_tau * lambda1),
        -1 / (N * (1 - p) * r),
    ])


def log_ratio_variance_parts(ctx: DesignContext, lambda1: float,
                             n_screened: float) -> Tuple[float, float, float]:
    """``(V0, V1, CV)`` from the delta method on W.

    V0 and V1 are the quadratic forms of the screening and trial blocks; CV
    is twice the cross-block form (the asymptotic covariance term), which
    vanishes identically.
    """
    c = full_w_covariance(ctx, lambda1, n_screened)
    d = log_ratio_gradient(ctx, lambda1, n_screened)
    s, t = slice(0, 3), slice(3, 5)
    v0 = float(d[s] @ c[s, s] @ d[s])
    v1 = float(d[t] @ c[t, t] @ d[t])
    cv = float(2 * d[s] @ c[s, t] @ d[t])
    return v0, v1, cv


def w_covariance(ctx: DesignContext, lambda1: float) -> WCovariance:
    """``cov(W*) / N`` for known assay properties.

    Raises
    ------
    UnsupportedContextError
        If the assay has nonzero MDRI or FRR uncertainty.
    """
    a = ctx.assay
    if a.mdri_rse != 0 or a.frr_rse != 0:
        raise UnsupportedContextError(
            "cov(W*) is defined for known assay properties; use ctx.without_assay_uncertainty()")
    p, r = ctx.prevalence_p, ctx.enroll_rate_r
    mu = lambda1 * ctx.followup_tau
    pr = p_recent(ctx)
    excess = pr - a.frr
    q = 1 - r + p * r
    pq = p * (1 - p)
    # index order: W1, W2, W4, W5, W6
    c = np.zeros((5, 5))
    c[0, 0] = p * (pr * (1 - pr) + (1 - p) * excess ** 2)
    c[1, 1] = pq
    c[2, 2] = (1 - p) * r * mu * (1 + mu * p * r + mu * (1 - r))
    c[3, 3] = (1 - p) * r * q
    c[4, 4] = p * pr * (1 - p * pr)
    c[0, 1] = pq * excess
    c[0, 2] = -pq * excess * r * mu
    c[0, 3] = -pq * excess * r
    c[0, 4] = p * pr * (1 - pr) + pq * excess * pr
    c[1, 2] = -pq * r * mu
    c[1, 3] = -pq * r
    c[1, 4] = pq * pr
    c[2, 3] = (1 - p) * r * q * mu
    c[2, 4] = -pq * pr * r * mu
    c[3, 4] = -pq * pr * r
    return WCovariance(np.triu(c) + np.triu(c, 1).T)


def _z_weight_parts(ctx: DesignContext, lambda1: float):
    """Scaled gradients of the Z numerator and of its variance estimate in W*."""
    a = ctx.assay
    p, r, tau = ctx.prevalence_p, ctx.enroll_rate_r, ctx.followup_tau
    pr = p_recent(ctx)
    excess = pr - a.frr
    events = (1 - p) * r * tau * lambda1
    d_num = np.array([-1 / (p * excess), -1 / (1 - p), 1 / events, -1 / ((1 - p) * r), 0.0])
    # d/dN+ of 1/N+ + 1/(N - N+) contributes -1/p^2 + 1/(1-p)^2
    d_var = np.array([
        -2 * pr * (1 - pr) / (p ** 2 * excess ** 3),
        pr ** 2 / (p ** 2 * excess ** 2) - 1 / p ** 2 + 1 / (1 - p) ** 2,
        -1 / events ** 2,
        0.0,
        (1 - 2 * pr) / (p ** 2 * excess ** 2),
    ])
    b_tilde = pr * (1 - pr) / (p * excess ** 2) + 1 / (p * (1 - p)) + 1 / events
    return d_num, d_var, b_tilde


def z_gradient_weights(ctx: DesignContext, true_ratio: float, r0: float) -> np.ndarray:
    """``sqrt(N)`` times the gradient of Z in W* at E(W*), for true ratio ``true_ratio``.

    Assay uncertainty in ``ctx`` is ignored.
    """
    ctx0 = ctx.without_assay_uncertainty()
    d_num, d_var, b = _z_weight_parts(ctx0, ctx0.lambda0 * true_ratio)
    shift = math.log(true_ratio) - math.log(r0)
    return d_num / math.sqrt(b) - shift / (2 * b ** 1.5) * d_var


def z_variance(ctx: DesignContext, true_ratio: float, r0: float) -> float:
    """Asymptotic variance of Z when the true incidence ratio is ``true_ratio``.

    Computed with the assay properties treated as known; equals 1 when
    ``true_ratio == r0``.
    """
    ctx0 = ctx.without_assay_uncertainty()
    vw = w_covariance(ctx0, ctx0.lambda0 * true_ratio)
    return vw.quad(z_gradient_weights(ctx0, true_ratio, r0))


def v_r1(ctx: DesignContext, hyp: HypothesisSpec) -> float:
    """Asymptotic variance of Z under the alternative ``R = hyp.r1``."""
    return z_variance(ctx, hyp.r1, hyp.r0)


def expected_z_mean(ctx: DesignContext, hyp: HypothesisSpec, n_screened: float) -> float:
    """Approximate mean of Z under the alternative at screening size ``n_screened``."""
    lambda1 = ctx.lambda0 * hyp.r1
    var = v0_analytic(ctx, n_screened) + v1_analytic(ctx, lambda1, n_screened)
    return hyp.log_gap / math.sqrt(var)
