"""Point and variance estimators for screening and active-arm incidence.

The array functions (``kassanjee_incidence``, ``kassanjee_log_variance``)
accept scalars or numpy arrays and are shared with the Monte Carlo engine;
the object-level functions wrap them with validation and typed errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .domain import (AssayProperties, HypothesisSpec, ScreeningCounts, TrialCounts,
                     standard_normal_quantile)
from .errors import (DegenerateCountsError, DegenerateVarianceError, NonPositiveEstimateError,
                     ValidationError, ZeroEstimateError)

METHODS = ("perfect", "snapshot", "kassanjee", "active_arm")


@dataclass(frozen=True)
class IncidenceEstimate:
    """An incidence estimate and the estimated variance of its logarithm.

    ``log_variance`` is None for the perfect-recency estimator, which has no
    variance estimator attached.
    """

    value: float
    log_variance: Optional[float]
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown estimator method {self.method!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValidationError(f"incidence estimate must be positive, got {self.value}")
        if self.log_variance is not None and not (self.log_variance >= 0):
            raise ValidationError(f"log_variance must be >= 0, got {self.log_variance}")


@dataclass(frozen=True)
class EfficacyResult:
    ratio_hat: float
    rho_hat: float
    log_ratio_variance: float
    ci_rho: Tuple[float, float]
    z_value: float
    reject: bool
    confidence: float


def kassanjee_incidence(n_total, n_positive, n_recent, frr, mdri, cutoff_T):
    """Cross-sectional incidence ``(N_R - frr N+) / (N- (mdri - frr T))``.

    No validation; works elementwise on arrays.
    """
    n_negative = n_total - n_positive
    return (n_recent - frr * n_positive) / (n_negative * (mdri - frr * cutoff_T))


def kassanjee_log_variance(n_total, n_positive, n_recent, frr, mdri, cutoff_T,
                           frr_sd, mdri_sd, legacy_inctools_variance=False):
    """Estimated variance of the log Kassanjee incidence.

    Sum of five terms: binomial recency term, prevalence term, FRR-variance
    term scaled by the HIV+/HIV- split, MDRI-variance term and the FRR cross
    term. ``legacy_inctools_variance`` drops the third term, which the
    ``inctools`` R package omits.
    """
    n_negative = n_total - n_positive
    adjusted = n_recent - n_positive * frr
    window = mdri - frr * cutoff_T
    var_frr = frr_sd ** 2
    out = (n_recent * (n_positive - n_recent) / (n_positive * adjusted ** 2)
           + n_total / (n_positive * n_negative)
           + mdri_sd ** 2 / window ** 2
           + var_frr * ((n_positive * mdri - n_recent * cutoff_T) / (adjusted * window)) ** 2)
    if not legacy_inctools_variance:
        out = out + var_frr * n_positive * n_negative / (n_total * adjusted ** 2)
    return out


def _require_negatives(counts: ScreeningCounts) -> None:
    if counts.n_negative <= 0:
        raise DegenerateCountsError("no HIV-negative subjects screened (N- = 0)")


def lambda0_perfect(counts: ScreeningCounts, cutoff_T: float) -> IncidenceEstimate:
    """Incidence under a perfectly accurate recency test, ``N_R / (N- T)``."""
    if not cutoff_T > 0:
        raise ValidationError(f"cutoff_T must be positive, got {cutoff_T}")
    _require_negatives(counts)
    if counts.n_recent == 0:
        raise ZeroEstimateError("no recent infections observed; log-incidence undefined")
    value = counts.n_recent / (counts.n_negative * cutoff_T)
    return IncidenceEstimate(value, None, "perfect")


def lambda0_snapshot(counts: ScreeningCounts, assay: AssayProperties) -> IncidenceEstimate:
    """Snapshot estimator ``N_R / (mdri N-)`` ignoring false recents.

    The attached variance is the FRR-free form ``1/N_R + 1/N- + rse_mdri^2``.
    """
    _require_negatives(counts)
    if counts.n_recent == 0:
        raise ZeroEstimateError("no recent infections observed; log-incidence undefined")
    value = counts.n_recent / (counts.n_negative * assay.mdri)
    log_var = float(kassanjee_log_variance(counts.n_total, counts.n_positive, counts.n_recent,
                                           0.0, assay.mdri, assay.cutoff_T, 0.0, assay.mdri_sd))
    return IncidenceEstimate(value, log_var, "snapshot")


def lambda0_kassanjee(counts: ScreeningCounts, assay: AssayProperties,
                      legacy_inctools_variance: bool = False) -> IncidenceEstimate:
    """Counterfactual incidence from screening counts, adjusted for false recents.

    Parameters
    ----------
    counts : ScreeningCounts
    assay : AssayProperties
        Estimated MDRI and FRR with their relative standard errors.
    legacy_inctools_variance : bool
        Drop the FRR-variance binomial term, for comparison with ``inctools``.

    Returns
    -------
    IncidenceEstimate
        ``value`` is the point estimate, ``log_variance`` the estimated
        variance of its logarithm.

    Raises
    ------
    DegenerateCountsError
        If no subjects are HIV-positive or none are HIV-negative.
    NonPositiveEstimateError
        If ``N_R <= frr * N+``: too few recents to exceed the expected
        number of false recents.
    """
    _require_negatives(counts)
    if counts.n_positive == 0:
        raise DegenerateCountsError("no HIV-positive subjects screened (N+ = 0)")
    if counts.n_recent - assay.frr * counts.n_positive <= 0:
        raise NonPositiveEstimateError(
            f"N_R = {counts.n_recent} does not exceed expected false recents "
            f"frr * N+ = {assay.frr * counts.n_positive:.4g}")
    args = (counts.n_total, counts.n_positive, counts.n_recent,
            assay.frr, assay.mdri, assay.cutoff_T)
    value = float(kassanjee_incidence(*args))
    log_var = float(kassanjee_log_variance(*args, assay.frr_sd, assay.mdri_sd,
                                           legacy_inctools_variance=legacy_inctools_variance))
    return IncidenceEstimate(value, log_var, "kassanjee")


def lambda1_active_arm(trial: TrialCounts) -> IncidenceEstimate:
    """On-treatment incidence ``N_event / (tau N_enrolled)`` with log-variance ``1/N_event``."""
    if trial.n_events == 0:
        raise ZeroEstimateError("no events in the active arm; log-scale inference undefined")
    value = trial.n_events / (trial.followup_tau * trial.n_enrolled)
    return IncidenceEstimate(value, 1.0 / trial.n_events, "active_arm")


def efficacy_test(l0: IncidenceEstimate, l1: IncidenceEstimate, hyp: HypothesisSpec,
                  confidence: float = 0.95) -> EfficacyResult:
    """Wald test of ``H0: R = hyp.r0`` on the log incidence-ratio scale.

    Also returns the ``confidence``-level interval for the efficacy
    ``rho = 1 - R``. The null is rejected when ``|Z| > z_{1 - alpha/2}``.
    """
    for est in (l0, l1):
        if est.log_variance is None or not math.isfinite(est.log_variance):
            raise ValidationError(f"{est.method} estimate has no finite log-variance")
    variance = l0.log_variance + l1.log_variance
    if variance <= 0:
        raise DegenerateVarianceError("log-ratio variance is zero")
    se = math.sqrt(variance)
    ratio = l1.value / l0.value
    z_value = (math.log(ratio) - math.log(hyp.r0)) / se
    zc = standard_normal_quantile((1 + confidence) / 2)
    ci = (1 - ratio * math.exp(zc * se), 1 - ratio * math.exp(-zc * se))
    return EfficacyResult(
        ratio_hat=ratio,
        rho_hat=1 - ratio,
        log_ratio_variance=variance,
        ci_rho=ci,
        z_value=z_value,
        reject=bool(abs(z_value) > hyp.z_alpha),
        confidence=confidence,
    )


def log_ratio_z(lambda0_hat, lambda1_hat, v0_hat, v1_hat, r0):
    """Elementwise Z statistic; used by the simulator on replicate arrays."""
    return (np.log(lambda1_hat / lambda0_hat) - math.log(r0)) / np.sqrt(v0_hat + v1_hat)
