import dataclasses
import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from recencytrial.domain import DAYS_PER_YEAR, AssayProperties, PopulationStratum
from recencytrial.errors import ValidationError
from recencytrial.population import pool_strata

# region, proportion %, incidence %, prevalence %, (mdri days, mdri rse %, frr %) or None
TABLE = [
    ("US-Black", "18.5", "5.9", "15", (142, 10, "1.5")),
    ("US-Other", "18.7", "1.3", "15", (142, 10, "1.5")),
    ("Brazil", "17.5", "5", "15", (142, 10, "1.5")),
    ("Peru", "18.2", "3.5", "15", (142, 10, "1.5")),
    ("Buenos Aires", "7.3", "6.4", "15", (142, 10, "1.5")),
    ("Cape Town", "3.3", "4.7", "25", (118, 7, "1.0")),
    ("Bangkok", "9.1", "5.2", "15", None),
    ("Chiang Mai", "3.1", "8.2", "15", None),
    ("Hanoi", "4.4", "4", "15", None),
]


def oracle_pool():
    """Exact weighted sums over the table, renormalising the proportions."""
    w = [F(row[1]) for row in TABLE]
    total = sum(w)
    lam = sum(wi * F(row[2]) for wi, row in zip(w, TABLE)) / total / 100
    p = sum(wi * F(row[3]) for wi, row in zip(w, TABLE)) / total / 100
    known = [(wi, row[4]) for wi, row in zip(w, TABLE) if row[4]]
    wk = sum(wi for wi, _ in known)
    mdri_days = sum(wi * a[0] for wi, a in known) / wk
    rse = sum(wi * a[1] for wi, a in known) / wk / 100
    frr = sum(wi * F(a[2]) for wi, a in known) / wk / 100
    return lam, p, mdri_days, rse, frr


def test_config_pooling_matches_oracle(msm_ctx):
    lam, p, mdri_days, rse, frr = oracle_pool()
    assert msm_ctx.lambda0 == pytest.approx(float(lam), rel=1e-14)
    assert msm_ctx.prevalence_p == pytest.approx(float(p), rel=1e-14)
    assert msm_ctx.assay.mdri == pytest.approx(float(mdri_days) / DAYS_PER_YEAR, rel=1e-14)
    assert msm_ctx.assay.mdri_rse == pytest.approx(float(rse), rel=1e-14)
    assert msm_ctx.assay.frr == pytest.approx(float(frr), rel=1e-14)
    assert msm_ctx.assay.frr_rse == 0.25
    assert msm_ctx.enroll_rate_r == 0.85


def test_quoted_summaries(msm_ctx):
    assert round(msm_ctx.lambda0 * 100, 2) == 4.37
    assert round(msm_ctx.prevalence_p * 100, 2) == 15.33
    assert round(msm_ctx.assay.mdri_days) == 141
    assert round(msm_ctx.assay.mdri_rse, 2) == 0.10
    assert round(msm_ctx.assay.frr * 100, 2) == 1.48


def test_unrounded_prevalence_regression(msm_ctx):
    # 2000 * 0.15 = 300 would miss the tabulated 306.7
    assert 2000 * msm_ctx.prevalence_p == pytest.approx(306.593, abs=1e-3)


def _stratum(name="s", prop=1.0, lam=0.03, p=0.2, assay=True):
    a = AssayProperties.from_days(2.0, 130, 0.08, 0.012, 0.25) if assay else None
    return PopulationStratum(name, prop, lam, p, "B", a)


def test_single_stratum_passthrough():
    s = _stratum()
    ctx = pool_strata([s], 0.9, 1.0, 0.25, 2.0)
    assert (ctx.lambda0, ctx.prevalence_p) == (0.03, 0.2)
    assert ctx.assay.mdri == s.assay.mdri and ctx.assay.frr == s.assay.frr
    twin = pool_strata([_stratum("a", 0.5), _stratum("b", 0.5)], 0.9, 1.0, 0.25, 2.0)
    assert twin.lambda0 == pytest.approx(0.03) and twin.assay.mdri == pytest.approx(s.assay.mdri)


def test_errors():
    with pytest.raises(ValidationError):
        pool_strata([], 0.9, 1.0, 0.25, 2.0)
    with pytest.raises(ValidationError, match="proportions"):
        pool_strata([_stratum(prop=0.9)], 0.9, 1.0, 0.25, 2.0)
    with pytest.raises(ValidationError, match="assay"):
        pool_strata([_stratum(assay=False)], 0.9, 1.0, 0.25, 2.0)


def test_table_total_within_tolerance(msm_cfg):
    assert sum(s.proportion for s in msm_cfg.strata) == pytest.approx(1.001)


strata_lists = st.lists(
    st.tuples(st.floats(0.1, 1.0), st.floats(0.001, 0.2), st.floats(0.01, 0.6), st.booleans()),
    min_size=1, max_size=8).filter(lambda xs: any(x[3] for x in xs))


def _build(xs):
    total = sum(x[0] for x in xs)
    return [_stratum(f"s{i}", x[0] / total, x[1], x[2], x[3]) for i, x in enumerate(xs)]


@given(strata_lists)
def test_convexity(xs):
    strata = _build(xs)
    ctx = pool_strata(strata, 0.9, 1.0, 0.25, 2.0)
    lams = [s.incidence for s in strata]
    ps = [s.prevalence for s in strata]
    assert min(lams) * (1 - 1e-12) <= ctx.lambda0 <= max(lams) * (1 + 1e-12)
    assert min(ps) * (1 - 1e-12) <= ctx.prevalence_p <= max(ps) * (1 + 1e-12)


@given(strata_lists, st.randoms())
def test_permutation_invariance(xs, rnd):
    strata = _build(xs)
    shuffled = strata[:]
    rnd.shuffle(shuffled)
    a = pool_strata(strata, 0.9, 1.0, 0.25, 2.0)
    b = pool_strata(shuffled, 0.9, 1.0, 0.25, 2.0)
    assert a.lambda0 == pytest.approx(b.lambda0, rel=1e-14)
    assert a.prevalence_p == pytest.approx(b.prevalence_p, rel=1e-14)
    assert a.assay.mdri == pytest.approx(b.assay.mdri, rel=1e-14)
