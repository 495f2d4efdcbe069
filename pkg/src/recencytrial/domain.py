"""Validated value types for recency-based incidence designs.

All durations are in years and all rates are per person-year. Prevalence at
the start of the recency window is taken equal to prevalence at screening
(constant prevalence), so there is no separate field for it.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, replace
from statistics import NormalDist
from typing import Optional

from .errors import DomainError, ValidationError

DAYS_PER_YEAR = 365.25

_STD_NORMAL = NormalDist()


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def standard_normal_quantile(c: float) -> float:
    """Return ``z_c``, the ``c``-quantile of the standard normal distribution.

    Raises
    ------
    DomainError
        If ``c`` is not strictly between 0 and 1.
    """
    c = float(c)
    if not (0.0 < c < 1.0) or math.isnan(c):
        raise DomainError(f"quantile level must lie in (0, 1), got {c!r}")
    if c == 0.5:
        return 0.0
    return _STD_NORMAL.inv_cdf(c)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def _finite(*values: float) -> bool:
    return all(isinstance(v, numbers.Real) and math.isfinite(v) for v in values)


def _coerce_counts(obj, names) -> None:
    # frozen dataclass: normalise numpy integers to int in place
    for name in names:
        v = getattr(obj, name)
        _require(isinstance(v, numbers.Integral) and not isinstance(v, bool),
                 f"{name} must be an integer, got {v!r}")
        object.__setattr__(obj, name, int(v))


@dataclass(frozen=True)
class AssayProperties:
    """Recency-test summaries at cutoff ``cutoff_T``.

    Parameters
    ----------
    cutoff_T : float
        Recency cutoff in years.
    mdri : float
        Mean duration of recent infection, in years.
    mdri_rse : float
        Relative standard error of the MDRI estimate (fraction).
    frr : float
        False-recent rate (probability).
    frr_rse : float
        Relative standard error of the FRR estimate (fraction).
    """

    cutoff_T: float
    mdri: float
    mdri_rse: float
    frr: float
    frr_rse: float

    def __post_init__(self):
        _require(_finite(self.cutoff_T, self.mdri, self.mdri_rse, self.frr, self.frr_rse),
                 "assay properties must be finite numbers")
        _require(self.cutoff_T > 0, f"cutoff_T must be positive, got {self.cutoff_T}")
        _require(0 < self.mdri < self.cutoff_T,
                 f"mdri must lie in (0, cutoff_T={self.cutoff_T}), got {self.mdri}")
        _require(0 <= self.frr < 1, f"frr must lie in [0, 1), got {self.frr}")
        _require(self.mdri_rse >= 0, f"mdri_rse must be >= 0, got {self.mdri_rse}")
        _require(self.frr_rse >= 0, f"frr_rse must be >= 0, got {self.frr_rse}")
        _require(self.window_excess > 0,
                 f"mdri - frr * cutoff_T must be positive, got {self.window_excess}")

    @classmethod
    def from_days(cls, cutoff_T: float, mdri_days: float, mdri_rse: float,
                  frr: float, frr_rse: float) -> "AssayProperties":
        """Build from an MDRI given in days (365.25 days per year)."""
        return cls(cutoff_T=cutoff_T, mdri=mdri_days / DAYS_PER_YEAR,
                   mdri_rse=mdri_rse, frr=frr, frr_rse=frr_rse)

    @property
    def mdri_sd(self) -> float:
        return self.mdri_rse * self.mdri

    @property
    def frr_sd(self) -> float:
        return self.frr_rse * self.frr

    @property
    def mdri_days(self) -> float:
        return self.mdri * DAYS_PER_YEAR

    @property
    def window_excess(self) -> float:
        """``mdri - frr * cutoff_T``, the denominator term of the estimator."""
        return self.mdri - self.frr * self.cutoff_T

    def without_uncertainty(self) -> "AssayProperties":
        return replace(self, mdri_rse=0.0, frr_rse=0.0)


@dataclass(frozen=True)
class PopulationStratum:
    """One region of a multi-site screening population.

    ``assay`` is None when the recency-test properties for the stratum's
    subtype are unknown; such strata still contribute to pooled incidence and
    prevalence.
    """

    name: str
    proportion: float
    incidence: float
    prevalence: float
    subtype: str = ""
    assay: Optional[AssayProperties] = None

    def __post_init__(self):
        _require(_finite(self.proportion, self.incidence, self.prevalence),
                 f"stratum {self.name!r}: numeric fields must be finite")
        _require(0 < self.proportion <= 1,
                 f"stratum {self.name!r}: proportion must lie in (0, 1], got {self.proportion}")
        _require(self.incidence > 0,
                 f"stratum {self.name!r}: incidence must be positive, got {self.incidence}")
        _require(0 < self.prevalence < 1,
                 f"stratum {self.name!r}: prevalence must lie in (0, 1), got {self.prevalence}")


@dataclass(frozen=True)
class DesignContext:
    """Pooled design inputs: counterfactual incidence, prevalence, enrollment and follow-up.

    The epidemiological conditions that make the cross-sectional estimate a
    valid counterfactual (constant incidence and prevalence, screening
    independent of HIV status, ...) are assumptions of the user, not checked.
    """

    lambda0: float
    prevalence_p: float
    enroll_rate_r: float
    followup_tau: float
    assay: AssayProperties

    def __post_init__(self):
        _require(_finite(self.lambda0, self.prevalence_p, self.enroll_rate_r, self.followup_tau),
                 "design context fields must be finite numbers")
        _require(self.lambda0 > 0, f"lambda0 must be positive, got {self.lambda0}")
        _require(0 < self.prevalence_p < 1,
                 f"prevalence_p must lie in (0, 1), got {self.prevalence_p}")
        _require(0 < self.enroll_rate_r <= 1,
                 f"enroll_rate_r must lie in (0, 1], got {self.enroll_rate_r}")
        _require(self.followup_tau > 0, f"followup_tau must be positive, got {self.followup_tau}")
        _require(isinstance(self.assay, AssayProperties), "assay must be AssayProperties")

    def with_tau(self, tau: float) -> "DesignContext":
        return replace(self, followup_tau=tau)

    def without_assay_uncertainty(self) -> "DesignContext":
        return replace(self, assay=self.assay.without_uncertainty())


@dataclass(frozen=True)
class ScreeningCounts:
    """Screening outcome: ``n_total`` screened, ``n_positive`` HIV+, ``n_recent`` test-recent."""

    n_total: int
    n_positive: int
    n_recent: int

    def __post_init__(self):
        _coerce_counts(self, ("n_total", "n_positive", "n_recent"))
        _require(0 <= self.n_recent <= self.n_positive <= self.n_total,
                 "counts must satisfy 0 <= n_recent <= n_positive <= n_total, got "
                 f"({self.n_recent}, {self.n_positive}, {self.n_total})")

    @property
    def n_negative(self) -> int:
        return self.n_total - self.n_positive


@dataclass(frozen=True)
class TrialCounts:
    n_enrolled: int
    n_events: int
    followup_tau: float

    def __post_init__(self):
        _coerce_counts(self, ("n_enrolled", "n_events"))
        _require(self.n_enrolled >= 1, f"n_enrolled must be >= 1, got {self.n_enrolled}")
        _require(self.n_events >= 0, f"n_events must be >= 0, got {self.n_events}")
        _require(_finite(self.followup_tau) and self.followup_tau > 0,
                 f"followup_tau must be positive, got {self.followup_tau}")


@dataclass(frozen=True)
class HypothesisSpec:
    """Test of H0: R = r0 against the specific alternative H1: R = r1 < r0.

    ``alpha`` is the two-sided significance level and ``power_beta`` the
    target power.
    """

    r0: float
    r1: float
    alpha: float = 0.05
    power_beta: float = 0.9

    def __post_init__(self):
        _require(_finite(self.r0, self.r1, self.alpha, self.power_beta),
                 "hypothesis fields must be finite numbers")
        _require(0 < self.r1 < self.r0, f"need 0 < r1 < r0, got r1={self.r1}, r0={self.r0}")
        _require(0 < self.alpha < 1, f"alpha must lie in (0, 1), got {self.alpha}")
        _require(0 < self.power_beta < 1, f"power_beta must lie in (0, 1), got {self.power_beta}")

    @property
    def log_gap(self) -> float:
        """``log r1 - log r0`` (negative)."""
        return math.log(self.r1) - math.log(self.r0)

    @property
    def z_alpha(self) -> float:
        return standard_normal_quantile(1 - self.alpha / 2)

    @property
    def z_beta(self) -> float:
        return standard_normal_quantile(self.power_beta)
