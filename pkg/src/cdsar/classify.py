"""Classifiers on the discriminant l, empirical cdfs, thresholds, confusion matrices."""

import math
from dataclasses import dataclass

import numpy as np

S, T, UNCERTAIN = "s", "t", "uncertain"


def classify_basic(l):
    """'t' if l > 0 else 's'."""
    return T if l > 0 else S


@dataclass(frozen=True)
class Thresholds:
    l_minus: float
    l_plus: float
    p: float
    collapsed: bool = False
    l_star: float = None

    def __post_init__(self):
        if not self.collapsed and not self.l_minus < self.l_plus:
            raise ValueError("uncollapsed thresholds need l_minus < l_plus")
        if self.collapsed:
            if self.l_star is None or not (self.l_plus <= self.l_star <= self.l_minus):
                raise ValueError("collapsed thresholds need l_star in [l_plus, l_minus]")

    def to_record(self):
        return {
            "l_minus": self.l_minus,
            "l_plus": self.l_plus,
            "p": self.p,
            "collapsed": self.collapsed,
            "l_star": self.l_star,
        }


def classify_confidence(l, th):
    """Three-way verdict with an uncertain band between l_minus and l_plus."""
    if th.collapsed:
        return T if l > th.l_star else S
    if l > th.l_plus:
        return T
    if l < th.l_minus:
        return S
    return UNCERTAIN


def classify_basic_array(l):
    return np.where(np.asarray(l) > 0, T, S)


def classify_confidence_array(l, th):
    l = np.asarray(l)
    if th.collapsed:
        return np.where(l > th.l_star, T, S)
    out = np.full(l.shape, UNCERTAIN, dtype=object)
    out[l > th.l_plus] = T
    out[l < th.l_minus] = S
    return out.astype(str)


class EmpiricalCdf:
    """cdf(x) = #{l_i < x} / n over a finite sample (strict inequality)."""

    def __init__(self, samples):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("empirical cdf needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("cdf samples must be finite")
        self.sorted = x
        self.n = x.size

    def __call__(self, x):
        return np.searchsorted(self.sorted, x, side="left") / self.n

    def quantile(self, p):
        """Lower empirical quantile: the order statistic at 1-based index ceil(p n)."""
        k = max(1, int(math.ceil(p * self.n - 1e-12)))
        return float(self.sorted[min(k, self.n) - 1])


def empirical_cdf(samples):
    return EmpiricalCdf(samples)


def kolmogorov_distance(cdf_a, cdf_b):
    xs = np.concatenate([cdf_a.sorted, cdf_b.sorted])
    xs = np.concatenate([xs, np.nextafter(xs, np.inf)])
    return float(np.max(np.abs(cdf_a(xs) - cdf_b(xs))))


def _bisect(pred, lo, hi, iters=200):
    # smallest x in [lo, hi] with pred(x) true, pred monotone false -> true
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _balance_point(cdf_s, cdf_t):
    """Solve cdf_s(x) + cdf_t(x) = 1 by bisection; midpoint of the root set."""
    lo = min(cdf_s.sorted[0], cdf_t.sorted[0])
    hi = max(cdf_s.sorted[-1], cdf_t.sorted[-1])
    hi = np.nextafter(hi, np.inf)

    def g(x):
        return cdf_s(x) + cdf_t(x) - 1.0

    left = _bisect(lambda x: g(x) >= 0, lo, hi)
    right = _bisect(lambda x: g(x) > 0, lo, hi)
    if right < left:
        right = left
    return 0.5 * (left + right)


def _finish(l_minus, l_plus, p, cdf_s, cdf_t):
    if l_minus < l_plus:
        return Thresholds(l_minus, l_plus, p)
    l_star = min(max(_balance_point(cdf_s, cdf_t), l_plus), l_minus)
    return Thresholds(l_minus, l_plus, p, collapsed=True, l_star=l_star)


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"error level p must lie in (0, 1), got {p!r}")


def thresholds_fixed_q(cdf_s, cdf_t, p):
    """l_minus from the t-ensemble p-quantile, l_plus from the s-ensemble (1-p)-quantile."""
    _check_p(p)
    return _finish(cdf_t.quantile(p), cdf_s.quantile(1.0 - p), p, cdf_s, cdf_t)


def thresholds_all_q(cdfs_by_q, p):
    """Contrast-independent thresholds.

    ``cdfs_by_q`` maps q -> (cdf_s, cdf_t). l_minus is the smallest and
    l_plus the largest per-contrast threshold. If they collapse, l_star
    balances the cdfs pooled over all contrasts.
    """
    _check_p(p)
    if not cdfs_by_q:
        raise ValueError("need at least one contrast level")
    l_minus = min(ct.quantile(p) for _, ct in cdfs_by_q.values())
    l_plus = max(cs.quantile(1.0 - p) for cs, _ in cdfs_by_q.values())
    pooled_s = EmpiricalCdf(np.concatenate([cs.sorted for cs, _ in cdfs_by_q.values()]))
    pooled_t = EmpiricalCdf(np.concatenate([ct.sorted for _, ct in cdfs_by_q.values()]))
    return _finish(l_minus, l_plus, p, pooled_s, pooled_t)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Outcome frequencies per input model.

    Basic form fills r_s, r_t; extended form also r2_s, r2_t (uncertain
    rates), with r_s, r_t then counting wrong verdicts only.
    """

    r_s: float
    r_t: float
    n_s: int
    n_t: int
    r2_s: float = None
    r2_t: float = None

    @property
    def extended(self):
        return self.r2_s is not None

    def rows(self):
        if not self.extended:
            return {
                "input_s": {"s": 1.0 - self.r_s, "t": self.r_s},
                "input_t": {"s": self.r_t, "t": 1.0 - self.r_t},
            }
        return {
            "input_s": {"s": 1.0 - self.r_s - self.r2_s, "t": self.r_s, UNCERTAIN: self.r2_s},
            "input_t": {"s": self.r_t, "t": 1.0 - self.r_t - self.r2_t, UNCERTAIN: self.r2_t},
        }


def confusion(l_s, l_t, classifier=None):
    """Confusion matrix from l samples of an s-ensemble and a t-ensemble.

    ``classifier`` is None (basic rule), a Thresholds object, or any
    callable mapping l to 's', 't' or 'uncertain'.
    """
    l_s = np.asarray(l_s, dtype=float)
    l_t = np.asarray(l_t, dtype=float)
    if l_s.size == 0 or l_t.size == 0:
        raise ValueError("both ensembles must be nonempty")
    if classifier is None:
        out_s, out_t = classify_basic_array(l_s), classify_basic_array(l_t)
        extended = False
    elif isinstance(classifier, Thresholds):
        out_s = classify_confidence_array(l_s, classifier)
        out_t = classify_confidence_array(l_t, classifier)
        extended = True
    else:
        out_s = np.array([classifier(x) for x in l_s])
        out_t = np.array([classifier(x) for x in l_t])
        extended = True
    r_s = float(np.mean(out_s == T))
    r_t = float(np.mean(out_t == S))
    if not extended:
        return ConfusionMatrix(r_s, r_t, l_s.size, l_t.size)
    return ConfusionMatrix(
        r_s, r_t, l_s.size, l_t.size,
        r2_s=float(np.mean(out_s == UNCERTAIN)),
        r2_t=float(np.mean(out_t == UNCERTAIN)),
    )
