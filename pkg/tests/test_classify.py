import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdsar.classify import (
    S,
    T,
    UNCERTAIN,
    Thresholds,
    classify_basic,
    classify_confidence,
    confusion,
    empirical_cdf,
    kolmogorov_distance,
    thresholds_all_q,
    thresholds_fixed_q,
)

samples = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60)


def test_basic():
    assert classify_basic(0.1) == T
    assert classify_basic(-0.1) == S
    assert classify_basic(0.0) == S


def test_confidence():
    th = Thresholds(-1.0, 1.0, 0.05)
    assert classify_confidence(0.0, th) == UNCERTAIN
    assert classify_confidence(1.5, th) == T
    assert classify_confidence(-1.5, th) == S
    collapsed = Thresholds(1.0, -1.0, 0.05, collapsed=True, l_star=0.0)
    for l in (-0.5, 0.0, 0.5, 3.0):
        assert classify_confidence(l, collapsed) == classify_basic(l)
    with pytest.raises(ValueError):
        Thresholds(1.0, -1.0, 0.05)
    with pytest.raises(ValueError):
        Thresholds(1.0, -1.0, 0.05, collapsed=True, l_star=2.0)


def test_cdf_single_and_errors():
    c = empirical_cdf([2.0])
    assert c(2.0) == 0.0
    assert c(np.nextafter(2.0, 3.0)) == 1.0
    with pytest.raises(ValueError):
        empirical_cdf([])
    with pytest.raises(ValueError):
        empirical_cdf([1.0, math.nan])


@given(samples, st.lists(st.floats(-2e3, 2e3), min_size=2, max_size=30))
def test_cdf_monotone_and_bounded(xs, probes):
    c = empirical_cdf(xs)
    v = c(np.sort(probes))
    assert np.all(np.diff(v) >= 0)
    assert np.all((v >= 0) & (v <= 1))


def test_cdf_normal_draws():
    x = np.random.default_rng(0).standard_normal(100_000)
    assert abs(empirical_cdf(x)(0.0) - 0.5) <= 0.005


def test_quantile_convention():
    c = empirical_cdf(np.arange(1.0, 21.0))
    assert c.quantile(0.05) == 1.0
    assert c.quantile(0.95) == 19.0
    assert c.quantile(0.051) == 2.0


def test_separated_samples_collapse():
    s = empirical_cdf(np.linspace(-10, -5, 50))
    t = empirical_cdf(np.linspace(5, 10, 50))
    th = thresholds_fixed_q(s, t, 0.05)
    assert th.collapsed
    assert -5 < th.l_star < 5
    assert th.l_plus <= th.l_star <= th.l_minus


def test_identical_samples_wide_band():
    x = np.random.default_rng(1).normal(size=400)
    c = empirical_cdf(x)
    th = thresholds_fixed_q(c, c, 0.05)
    assert not th.collapsed
    assert th.l_minus == c.quantile(0.05)
    assert th.l_plus == c.quantile(0.95)


def test_fixed_q_guarantee_on_training_sample():
    rng = np.random.default_rng(5)
    ls, lt = rng.normal(-1, 1, 1000), rng.normal(1, 1, 1000)
    cs, ct = empirical_cdf(ls), empirical_cdf(lt)
    th = thresholds_fixed_q(cs, ct, 0.05)
    cm = confusion(ls, lt, th)
    assert abs(cm.r_t - 0.05) <= 1 / 1000 + 1e-12
    assert abs(cm.r_s - 0.05) <= 1 / 1000 + 1e-12
    # uncertain rates from the cdf identities
    assert cm.r2_t == pytest.approx(ct(th.l_plus) + (np.sum(lt == th.l_plus) / 1000) - cm.r_t, abs=1e-12)
    assert cm.r2_s == pytest.approx(1 - cm.r_s - cs(th.l_minus), abs=1e-12)


def test_all_q_reduction_and_monotonicity():
    rng = np.random.default_rng(7)
    cdfs = {}
    for q in (0.2, 0.5, 0.8):
        cdfs[q] = (empirical_cdf(rng.normal(-q, 1, 300)), empirical_cdf(rng.normal(q, 1, 300)))
    single = thresholds_all_q({0.5: cdfs[0.5]}, 0.05)
    assert single == thresholds_fixed_q(*cdfs[0.5], 0.05)
    two = thresholds_all_q({q: cdfs[q] for q in (0.5, 0.8)}, 0.05)
    three = thresholds_all_q(cdfs, 0.05)
    assert three.l_minus <= two.l_minus
    assert three.l_plus >= two.l_plus
    with pytest.raises(ValueError):
        thresholds_all_q({}, 0.05)
    with pytest.raises(ValueError):
        thresholds_fixed_q(*cdfs[0.5], 1.0)
    with pytest.raises(ValueError):
        thresholds_fixed_q(*cdfs[0.5], 0.0)


def test_confusion_basic_identities():
    rng = np.random.default_rng(9)
    ls, lt = rng.normal(-0.5, 1, 500), rng.normal(0.5, 1, 500)
    cm = confusion(ls, lt)
    assert cm.r_t == empirical_cdf(lt)(0.0) + np.mean(lt == 0.0)
    assert cm.r_s == pytest.approx(1 - empirical_cdf(ls)(np.nextafter(0.0, 1.0)))
    assert not cm.extended
    rows = cm.rows()
    assert rows["input_s"]["s"] + rows["input_s"]["t"] == 1.0


def test_confusion_extended_rows_sum_to_one():
    cm = confusion([-2.0, 0.0, 2.0], [1.0, 3.0], Thresholds(-1.0, 1.5, 0.05))
    for row in cm.rows().values():
        assert sum(row.values()) == pytest.approx(1.0)
    always = confusion([1.0, 2.0], [3.0], lambda l: UNCERTAIN)
    assert always.r2_s == always.r2_t == 1.0
    assert always.r_s == always.r_t == 0.0
    with pytest.raises(ValueError):
        confusion([], [1.0])


def test_kolmogorov_distance():
    a = empirical_cdf([0.0, 1.0])
    b = empirical_cdf([5.0, 6.0])
    assert kolmogorov_distance(a, b) == 1.0
    assert kolmogorov_distance(a, a) == 0.0
