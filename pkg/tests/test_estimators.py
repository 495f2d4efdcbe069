import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recencytrial.asymptotics import p_recent, v0_analytic
from recencytrial.domain import (AssayProperties, DesignContext, HypothesisSpec,
                                 ScreeningCounts, TrialCounts)
from recencytrial.errors import (DegenerateCountsError, DegenerateVarianceError,
                                 NonPositiveEstimateError, ValidationError, ZeroEstimateError)
from recencytrial.estimators import (IncidenceEstimate, efficacy_test, kassanjee_log_variance,
                                     lambda0_kassanjee, lambda0_perfect, lambda0_snapshot,
                                     lambda1_active_arm)


def oracle_incidence(n, npos, nrec, frr, mdri, T):
    n, npos, nrec, frr, mdri, T = map(F, (n, npos, nrec, frr, mdri, T))
    return (nrec - frr * npos) / ((n - npos) * (mdri - frr * T))


def oracle_v0(n, npos, nrec, frr, mdri, T, sd_frr, sd_mdri, legacy=False):
    """Five-term variance estimator of log lambda0_hat, in exact rationals."""
    n, npos, nrec, frr, mdri, T, vb, vo = map(F, (n, npos, nrec, frr, mdri, T, sd_frr, sd_mdri))
    vb, vo = vb * vb, vo * vo
    nneg = n - npos
    adj = nrec - npos * frr
    win = mdri - frr * T
    terms = [
        nrec * (npos - nrec) / (npos * adj ** 2),
        n / (npos * nneg),
        vb * npos * (n - npos) / (n * adj ** 2),
        vo / win ** 2,
        vb * ((npos * mdri - nrec * T) / (adj * win)) ** 2,
    ]
    if legacy:
        del terms[2]
    return sum(terms)


COUNTS = ScreeningCounts(2000, 300, 30)
ASSAY = AssayProperties(cutoff_T=2.0, mdri=0.3862, mdri_rse=0.1, frr=0.015, frr_rse=0.25)

# frozen from the rational oracles above
KASSANJEE_VALUE = 0.042111173498034817
KASSANJEE_V0 = 0.05773681428580409
KASSANJEE_V0_LEGACY = 0.05773129957992174


def test_frozen_values_match_oracles():
    args = (2000, 300, 30, 0.015, 0.3862, 2.0)
    sds = (0.015 * 0.25, 0.3862 * 0.1)
    assert float(oracle_incidence(*args)) == pytest.approx(KASSANJEE_VALUE, rel=1e-15)
    assert float(oracle_v0(*args, *sds)) == pytest.approx(KASSANJEE_V0, rel=1e-15)
    assert float(oracle_v0(*args, *sds, legacy=True)) == pytest.approx(KASSANJEE_V0_LEGACY,
                                                                       rel=1e-15)


def test_kassanjee_example():
    est = lambda0_kassanjee(COUNTS, ASSAY)
    assert est.method == "kassanjee"
    assert est.value == pytest.approx(KASSANJEE_VALUE, rel=1e-13)
    assert round(est.value, 4) == 0.0421
    assert est.log_variance == pytest.approx(KASSANJEE_V0, rel=1e-13)
    legacy = lambda0_kassanjee(COUNTS, ASSAY, legacy_inctools_variance=True)
    assert legacy.value == est.value
    assert legacy.log_variance == pytest.approx(KASSANJEE_V0_LEGACY, rel=1e-13)


def test_perfect_and_snapshot_examples():
    assert lambda0_perfect(COUNTS, 2.0).value == pytest.approx(30 / 3400)
    assert lambda0_perfect(COUNTS, 2.0).log_variance is None
    assert lambda0_perfect(ScreeningCounts(2, 1, 1), 1.0).value == 1.0
    a = AssayProperties(2.0, 0.386, 0.0, 0.0, 0.0)
    snap = lambda0_snapshot(COUNTS, a)
    assert snap.value == pytest.approx(30 / (0.386 * 1700))
    assert round(snap.value, 5) == 0.04572
    with pytest.raises(ZeroEstimateError):
        lambda0_perfect(ScreeningCounts(100, 0, 0), 2.0)
    with pytest.raises(DegenerateCountsError):
        lambda0_snapshot(ScreeningCounts(10, 10, 1), a)


def test_kassanjee_errors():
    with pytest.raises(NonPositiveEstimateError):
        lambda0_kassanjee(ScreeningCounts(2000, 300, 4), ASSAY)
    with pytest.raises(DegenerateCountsError):
        lambda0_kassanjee(ScreeningCounts(2000, 0, 0), ASSAY)
    with pytest.raises(DegenerateCountsError):
        lambda0_kassanjee(ScreeningCounts(300, 300, 30), ASSAY)


def test_frr_free_reduction_of_variance():
    a = AssayProperties(2.0, 0.3862, 0.1, 0.0, 0.0)
    est = lambda0_kassanjee(COUNTS, a)
    nneg = 1700
    expected = 1 / 30 - 1 / 300 + 2000 / (300 * nneg) + 0.1 ** 2
    assert est.log_variance == pytest.approx(expected, rel=1e-13)
    # the same as 1/N_R + 1/N- + rse^2
    assert est.log_variance == pytest.approx(1 / 30 + 1 / nneg + 0.01, rel=1e-13)
    assert est.value == lambda0_snapshot(COUNTS, a).value


def test_active_arm():
    est = lambda1_active_arm(TrialCounts(1439, 9, 1.0))
    assert est.value == pytest.approx(9 / 1439)
    assert round(est.value, 6) == 0.006254
    assert est.log_variance == pytest.approx(1 / 9)
    unit = lambda1_active_arm(TrialCounts(1, 1, 1.0))
    assert unit.value == 1.0 and unit.log_variance == 1.0
    with pytest.raises(ZeroEstimateError):
        lambda1_active_arm(TrialCounts(100, 0, 2.0))


def test_efficacy_example():
    l0 = IncidenceEstimate(0.04212, 0.05, "kassanjee")
    l1 = IncidenceEstimate(0.006254, 0.11111, "active_arm")
    res = efficacy_test(l0, l1, HypothesisSpec(0.5, 0.15))
    ratio = 0.006254 / 0.04212
    assert res.ratio_hat == pytest.approx(ratio)
    assert res.z_value == pytest.approx((math.log(ratio) - math.log(0.5)) / math.sqrt(0.16111))
    assert round(res.z_value, 4) == -3.0249
    assert res.reject
    lo, hi = res.ci_rho
    assert lo < res.rho_hat < hi
    se = math.sqrt(0.16111)
    assert lo == pytest.approx(1 - ratio * math.exp(1.959963984540054 * se))


def test_efficacy_null_identity_and_errors():
    l0 = IncidenceEstimate(0.02, 0.1, "kassanjee")
    res = efficacy_test(l0, IncidenceEstimate(0.02, 0.1, "active_arm"), HypothesisSpec(1.0, 0.5))
    assert res.z_value == 0.0 and res.rho_hat == 0.0
    with pytest.raises(DegenerateVarianceError):
        efficacy_test(IncidenceEstimate(0.02, 0.0, "kassanjee"),
                      IncidenceEstimate(0.01, 0.0, "active_arm"), HypothesisSpec(0.5, 0.1))
    with pytest.raises(ValidationError):
        efficacy_test(lambda0_perfect(COUNTS, 2.0), IncidenceEstimate(0.01, 0.1, "active_arm"),
                      HypothesisSpec(0.5, 0.1))


def test_ci_collapses_and_widens():
    l1 = IncidenceEstimate(0.01, 0.0, "active_arm")
    h = HypothesisSpec(0.5, 0.1)
    widths = []
    for v in (1e-14, 0.01, 0.1, 1.0):
        res = efficacy_test(IncidenceEstimate(0.04, v, "kassanjee"), l1, h)
        widths.append(res.ci_rho[1] - res.ci_rho[0])
    assert widths[0] < 1e-6
    assert all(a < b for a, b in zip(widths, widths[1:]))


counts_strategy = st.integers(2, 10 ** 6).flatmap(
    lambda n: st.integers(1, n - 1).flatmap(
        lambda npos: st.tuples(st.just(n), st.just(npos), st.integers(1, npos))))


@given(counts_strategy, st.floats(0.01, 1.9))
def test_reduction_chain(counts, mdri):
    c = ScreeningCounts(*counts)
    a = AssayProperties(2.0, mdri, 0.1, 0.0, 0.0)
    assert lambda0_kassanjee(c, a).value == lambda0_snapshot(c, a).value
    assert lambda0_snapshot(c, a).value == lambda0_perfect(c, mdri).value


def test_reduction_chain_1000_vectors():
    # snapshot with window = cutoff is the perfect estimator; cutoff must exceed
    # the MDRI in AssayProperties, so we pass the window as the perfect cutoff
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(2, 10 ** 6))
        npos = int(rng.integers(1, n))
        nrec = int(rng.integers(1, npos + 1))
        c = ScreeningCounts(n, npos, nrec)
        mdri = float(rng.uniform(0.05, 1.9))
        a = AssayProperties(2.0, mdri, float(rng.uniform(0, 0.3)), 0.0, 0.0)
        assert lambda0_kassanjee(c, a).value == lambda0_snapshot(c, a).value
        assert lambda0_snapshot(c, a).value == lambda0_perfect(c, mdri).value


@given(st.floats(0.005, 0.2), st.floats(0.02, 0.6), st.floats(0.1, 0.9),
       st.floats(0.0, 0.04), st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.integers(100, 10 ** 7))
def test_v0_hat_at_expected_counts_matches_analytic(lam, p, mdri_frac, frr, rse_m, rse_f, n):
    a = AssayProperties(2.0, 2.0 * mdri_frac, rse_m, frr, rse_f)
    ctx = DesignContext(lam, p, 0.85, 1.0, a)
    try:
        pr = p_recent(ctx)
    except ValidationError:
        return
    v_hat = kassanjee_log_variance(n, n * p, n * p * pr, a.frr, a.mdri, a.cutoff_T,
                                   a.frr_sd, a.mdri_sd)
    assert v_hat == pytest.approx(v0_analytic(ctx, n), rel=1e-10)


@given(counts_strategy, st.floats(0.0, 0.05), st.floats(0.1, 1.5), st.floats(0.0, 0.5),
       st.floats(0.0, 0.5))
def test_variance_matches_rational_oracle(counts, frr, mdri, rse_m, rse_f):
    n, npos, nrec = counts
    if nrec - frr * npos <= 0 or mdri - 2 * frr <= 0:
        return
    got = kassanjee_log_variance(n, npos, nrec, frr, mdri, 2.0, frr * rse_f, mdri * rse_m)
    want = float(oracle_v0(n, npos, nrec, frr, mdri, 2.0, frr * rse_f, mdri * rse_m))
    assert got == pytest.approx(want, rel=1e-9)


def test_homogeneity_in_window():
    a = AssayProperties(2.0, 0.3862, 0.1, 0.015, 0.25)
    base = lambda0_kassanjee(COUNTS, a).value
    w = a.window_excess
    a2 = AssayProperties(2.0, 2 * w + 0.015 * 2.0, 0.1, 0.015, 0.25)
    assert lambda0_kassanjee(COUNTS, a2).value == pytest.approx(base / 2, rel=1e-14)
