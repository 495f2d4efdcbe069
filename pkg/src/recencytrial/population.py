"""Pool multi-region strata into a single design context."""

from __future__ import annotations

import math
from typing import Sequence

from .domain import AssayProperties, DesignContext, PopulationStratum
from .errors import ValidationError

# Published strata tables list proportions rounded to 0.1%; their totals can be
# off by a few tenths of a percent.
PROPORTION_TOLERANCE = 0.005


def pool_strata(strata: Sequence[PopulationStratum], enroll_rate: float, followup_tau: float,
                frr_rse_default: float, cutoff_T: float,
                proportion_tol: float = PROPORTION_TOLERANCE) -> DesignContext:
    """Proportion-weighted design context for a mixed screening population.

    Incidence and prevalence are averaged over all strata. MDRI, MDRI RSE
    and FRR are averaged over the strata with known assay properties only,
    with their weights renormalised. The FRR RSE is a single pooled knob,
    ``frr_rse_default``.

    Proportions must sum to 1 within ``proportion_tol``; they are
    renormalised to sum exactly to 1 before pooling. No intermediate value
    is rounded.
    """
    strata = list(strata)
    if not strata:
        raise ValidationError("at least one stratum is required")
    total = math.fsum(s.proportion for s in strata)
    if abs(total - 1) > proportion_tol:
        raise ValidationError(
            f"stratum proportions sum to {total:.6g}, expected 1 (tolerance {proportion_tol})")
    weights = [s.proportion / total for s in strata]
    lambda0 = math.fsum(w * s.incidence for w, s in zip(weights, strata))
    prevalence = math.fsum(w * s.prevalence for w, s in zip(weights, strata))

    known = [(w, s.assay) for w, s in zip(weights, strata) if s.assay is not None]
    if not known:
        raise ValidationError("no stratum has recency-assay properties")
    w_known = math.fsum(w for w, _ in known)
    mdri = math.fsum(w * a.mdri for w, a in known) / w_known
    mdri_rse = math.fsum(w * a.mdri_rse for w, a in known) / w_known
    frr = math.fsum(w * a.frr for w, a in known) / w_known

    assay = AssayProperties(cutoff_T=cutoff_T, mdri=mdri, mdri_rse=mdri_rse,
                            frr=frr, frr_rse=frr_rse_default)
    return DesignContext(lambda0=lambda0, prevalence_p=prevalence, enroll_rate_r=enroll_rate,
                         followup_tau=followup_tau, assay=assay)
