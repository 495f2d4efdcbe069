"""Screening sample size, power and the detectability floor."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .asymptotics import (expected_z_mean, gamma_components, p_recent, v0_analytic,
                          v1_analytic, v_r1)
from .domain import DesignContext, HypothesisSpec, normal_cdf
from .errors import InfeasibleDesignError, ValidationError


@dataclass(frozen=True)
class DesignReport:
    """Expected screening and trial counts at a given screening size.

    Counts are expectations under the alternative (true ratio ``r1``).
    ``n_exact`` is the real-valued solution of the sample-size equation when
    the report comes from :func:`sample_size`, else None.
    """

    n_screened: int
    followup_tau: float
    expected_n_positive: float
    expected_n_recent: float
    expected_n_enrolled: float
    expected_n_events: float
    feasible: bool
    v_r1: float
    z_mean_h1: float
    power: float
    n_exact: float | None = None


def _z_sum(ctx: DesignContext, hyp: HypothesisSpec) -> tuple[float, float]:
    vr1 = v_r1(ctx, hyp)
    zsum = hyp.z_alpha + math.sqrt(vr1) * hyp.z_beta
    if zsum <= 0:
        raise ValidationError(
            f"z_(1-alpha/2) + sqrt(V_R1) z_beta = {zsum:.4g} <= 0; target power too low")
    return vr1, zsum


def _denominator(ctx: DesignContext, hyp: HypothesisSpec, zsum: float) -> float:
    g = gamma_components(ctx, ctx.lambda0 * hyp.r1)
    return (hyp.log_gap / zsum) ** 2 - g.gamma01


def detectability_floor(ctx: DesignContext, hyp: HypothesisSpec) -> float:
    """Boundary on log R1 beyond which no screening size reaches the target power.

    The design is attainable only when ``log(hyp.r1)`` lies strictly below
    the returned value. Assay uncertainty keeps ``var(log R_hat)`` above
    ``gamma01`` for every N, so alternatives too close to ``r0`` cannot be
    detected. With known assay properties the floor is ``log r0`` itself.
    ``V_R1`` is evaluated at the queried ``hyp.r1``.
    """
    _, zsum = _z_sum(ctx, hyp)
    g = gamma_components(ctx, ctx.lambda0 * hyp.r1)
    return math.log(hyp.r0) - math.sqrt(g.gamma01) * zsum


def power_at_n(ctx: DesignContext, hyp: HypothesisSpec, n_screened: float) -> float:
    """Approximate power of the two-sided Wald test with ``n_screened`` screenees."""
    if not n_screened >= 1:
        raise ValidationError(f"n_screened must be >= 1, got {n_screened}")
    mean = abs(expected_z_mean(ctx, hyp, n_screened))
    return normal_cdf((mean - hyp.z_alpha) / math.sqrt(v_r1(ctx, hyp)))


def design_report(ctx: DesignContext, hyp: HypothesisSpec, n_screened: int,
                  n_exact: float | None = None) -> DesignReport:
    p, r, tau = ctx.prevalence_p, ctx.enroll_rate_r, ctx.followup_tau
    pr = p_recent(ctx)
    vr1, zsum = _z_sum(ctx, hyp)
    enrolled = n_screened * (1 - p) * r
    return DesignReport(
        n_screened=n_screened,
        followup_tau=tau,
        expected_n_positive=n_screened * p,
        expected_n_recent=n_screened * p * pr,
        expected_n_enrolled=enrolled,
        expected_n_events=tau * ctx.lambda0 * hyp.r1 * enrolled,
        feasible=_denominator(ctx, hyp, zsum) > 0,
        v_r1=vr1,
        z_mean_h1=expected_z_mean(ctx, hyp, n_screened),
        power=power_at_n(ctx, hyp, n_screened),
        n_exact=n_exact,
    )


def sample_size(ctx: DesignContext, hyp: HypothesisSpec) -> DesignReport:
    """Total screening size needed for power ``hyp.power_beta`` against ``hyp.r1``.

    Solves for N in ``(gamma00 + gamma1) / N + gamma01 = (log gap / (z_a + sqrt(V_R1) z_b))^2``
    and rounds up.

    Raises
    ------
    InfeasibleDesignError
        If the right-hand side does not exceed ``gamma01``; the exception
        carries the detectability floor as ``boundary``.
    """
    lambda1 = ctx.lambda0 * hyp.r1
    _, zsum = _z_sum(ctx, hyp)
    denom = _denominator(ctx, hyp, zsum)
    if denom <= 0:
        floor = detectability_floor(ctx, hyp)
        raise InfeasibleDesignError(
            f"power {hyp.power_beta} is unattainable at R1 = {hyp.r1}: log R1 = "
            f"{math.log(hyp.r1):.4f} must be below the detectability floor {floor:.4f} "
            f"(R1 < {math.exp(floor):.4f})",
            boundary=floor, log_r1=math.log(hyp.r1))
    g = gamma_components(ctx, lambda1)
    n_exact = (g.gamma00 + g.gamma1) / denom
    return design_report(ctx, hyp, math.ceil(n_exact), n_exact=n_exact)


def log_ratio_variance(ctx: DesignContext, hyp: HypothesisSpec, n_screened: float) -> float:
    """``V0 + V1`` at the alternative."""
    return v0_analytic(ctx, n_screened) + v1_analytic(ctx, ctx.lambda0 * hyp.r1, n_screened)
