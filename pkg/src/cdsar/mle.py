"""Gaussian likelihood of sampled images and its constrained maximization.

The likelihood of one ambiguity line is evaluated in its complex form,

    log p(z) = -N log(pi) - log det C - z^H C^{-1} z,   C = sum_a w_a H_a,

which is identical to the real 2N-dimensional Gaussian density of the
interleaved (Re, Im) vector with covariance built from the 2x2 blocks.

Fitting runs a box-projected Nelder-Mead simplex in log-weights. Many
datasets are fitted at once, each with its own simplex; every arithmetic
step is elementwise per dataset, so a dataset's result does not depend on
which other datasets share its batch.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cdsar.statmodel import (
    ContrastSpec,
    WeightVector,
    check_model,
    line_kernels,
    weights_from_contrast,
)

LOG_PI = math.log(math.pi)

FLOOR_REL = 1e-12
CEIL_REL = 1e8
FTOL = 1e-9
XTOL = 1e-5
MAX_EVALS = 2000
N_STARTS = 5
START_Q = (0.1, 0.5)
START_P_N = 0.1
SIMPLEX_STEP = 0.75
BLOCK = 2048

# fixed perturbation offsets (log-space) for the random restarts
_PERTURB = np.random.default_rng(0x5EED).normal(0.0, 1.0, size=(N_STARTS, 3))


@dataclass(frozen=True)
class FitResult:
    model: str
    max_log_likelihood: float
    weights: WeightVector
    n_evals: int = 0
    restarts: int = N_STARTS
    converged: bool = True
    at_bound: tuple = (False, False, False)
    start_spread: float = 0.0

    def to_record(self):
        return {
            "model": self.model,
            "max_log_likelihood": self.max_log_likelihood,
            "w_b": self.weights.w_b,
            "w_n": self.weights.w_n,
            "w_x": self.weights.w_x,
            "n_evals": self.n_evals,
            "restarts": self.restarts,
            "converged": self.converged,
            "at_bound": list(self.at_bound),
            "start_spread": self.start_spread,
        }


@dataclass(frozen=True)
class DiscriminationResult:
    fit_s: FitResult
    fit_t: FitResult
    l: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "l", self.fit_t.max_log_likelihood - self.fit_s.max_log_likelihood
        )

    def to_record(self):
        return {"l": self.l, "fit_s": self.fit_s.to_record(), "fit_t": self.fit_t.to_record()}


# sufficient statistics and batched likelihood --------------------------------


def as_samples(data):
    """Accept ImageDataset, Ensemble, or array; return complex (B, L, N)."""
    if hasattr(data, "samples"):
        data = data.samples
    arr = np.asarray(data, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError("samples must have shape (lines, per_line) or (batch, lines, per_line)")
    return arr


class _Kernels:
    """Kernel entries laid out for fast batched evaluation."""

    def __init__(self, hb, hn, hx):
        self.h = np.stack([hb, hn, hx])  # (3, L, N, N)
        self.n_lines = hb.shape[0]
        self.n = hb.shape[-1]
        if self.n == 2:
            self.a = self.h[:, :, 0, 0].real.copy()
            self.d = self.h[:, :, 1, 1].real.copy()
            self.b_re = self.h[:, :, 0, 1].real.copy()
            self.b_im = self.h[:, :, 0, 1].imag.copy()
        self.mean_diag = np.real(np.einsum("klii->k", self.h)) / (self.n_lines * self.n)


class _Stats:
    """Per-line second-moment statistics of the data, S = z z^H."""

    def __init__(self, samples):
        self.samples = samples
        self.n_batch, self.n_lines, self.n = samples.shape
        if self.n == 2:
            z1 = samples[:, :, 0]
            z2 = samples[:, :, 1]
            self.s11 = np.abs(z1) ** 2
            self.s22 = np.abs(z2) ** 2
            s21 = z2 * np.conj(z1)
            self.s21_re = s21.real
            self.s21_im = s21.imag
        self.power = np.mean(np.abs(samples) ** 2, axis=(1, 2))

    def take(self, idx):
        out = _Stats.__new__(_Stats)
        out.samples = self.samples[idx]
        out.n_batch, out.n_lines, out.n = out.samples.shape
        if self.n == 2:
            out.s11 = self.s11[idx]
            out.s22 = self.s22[idx]
            out.s21_re = self.s21_re[idx]
            out.s21_im = self.s21_im[idx]
        out.power = self.power[idx]
        return out


def _loglik_batch(w, st, kern):
    """Log-likelihood for weights w (B, 3) against stats of B datasets."""
    n_tot = st.n_lines * st.n
    if st.n == 2:
        wb, wn, wx = w[:, 0:1], w[:, 1:2], w[:, 2:3]
        a = wb * kern.a[0] + wn * kern.a[1] + wx * kern.a[2]
        d = wb * kern.d[0] + wn * kern.d[1] + wx * kern.d[2]
        br = wb * kern.b_re[0] + wn * kern.b_re[1] + wx * kern.b_re[2]
        bi = wb * kern.b_im[0] + wn * kern.b_im[1] + wx * kern.b_im[2]
        det = a * d - (br * br + bi * bi)
        ok = det > 4e-16 * a * d
        det_safe = np.where(ok, det, 1.0)
        quad = (d * st.s11 + a * st.s22 - 2.0 * (br * st.s21_re - bi * st.s21_im)) / det_safe
        per_line = np.log(det_safe) + quad
        total = -(n_tot * LOG_PI + per_line.sum(axis=1))
        bad = ~ok.all(axis=1)
        if bad.any():
            total = np.where(bad, -np.inf, total)
        return total
    c = np.einsum("bk,klij->blij", w.astype(complex), kern.h)
    out = np.empty(w.shape[0])
    for i in range(w.shape[0]):
        out[i] = _loglik_dense(st.samples[i], c[i])
    return out


def _loglik_dense(z, c):
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        return -np.inf
    logdet = 2.0 * np.sum(np.log(np.real(np.diagonal(chol, axis1=-2, axis2=-1))))
    y = np.linalg.solve(chol, z[..., None])[..., 0]
    quad = np.sum(np.abs(y) ** 2)
    return float(-(z.size * LOG_PI + logdet + quad))


def _kernels_for(grid, model, profile):
    hb, hn, hx = line_kernels(grid, check_model(model), profile)
    return _Kernels(hb, hn, hx)


def log_likelihood(dataset, grid, w, model, profile):
    """Gaussian log-likelihood of one dataset; -inf if a covariance is singular."""
    samples = as_samples(dataset)
    if samples.shape[1:] != (grid.n_lines, grid.n_per_line):
        raise ValueError("dataset does not match grid")
    kern = _kernels_for(grid, model, profile)
    return float(_loglik_batch(w.as_array()[None], _Stats(samples), kern)[0])


# batched Nelder-Mead ------------------------------------------------------------


@dataclass
class BatchFit:
    """Fits of many datasets under one model, as parallel arrays."""

    model: str
    loglik: np.ndarray
    weights: np.ndarray
    n_evals: np.ndarray
    converged: np.ndarray
    at_bound: np.ndarray
    start_spread: np.ndarray

    def __len__(self):
        return self.loglik.shape[0]

    def result(self, i):
        w = self.weights[i]
        return FitResult(
            model=self.model,
            max_log_likelihood=float(self.loglik[i]),
            weights=WeightVector(float(w[0]), float(w[1]), float(w[2])),
            n_evals=int(self.n_evals[i]),
            restarts=N_STARTS,
            converged=bool(self.converged[i]),
            at_bound=tuple(bool(x) for x in self.at_bound[i]),
            start_spread=float(self.start_spread[i]),
        )

    @staticmethod
    def concat(parts):
        return BatchFit(
            parts[0].model,
            *[np.concatenate([getattr(p, f) for p in parts]) for f in
              ("loglik", "weights", "n_evals", "converged", "at_bound", "start_spread")],
        )


def _initial_guess(st, kern, q):
    w0 = weights_from_contrast(ContrastSpec(START_P_N, q)).as_array()
    model_power = float(w0 @ kern.mean_diag)
    scale = st.power_eff / model_power
    return np.log(w0[None, :] * scale[:, None])


def _nelder_mead(x0, st, kern, lo, hi):
    """Minimize -loglik from starting points x0 (B, 3) in log-space.

    Returns best points, best values (of -loglik), eval counts, converged.
    """
    B, dim = x0.shape
    nv = dim + 1

    def f(x, idx):
        val = -_loglik_batch(np.exp(x), st.take(idx), kern)
        return np.where(np.isfinite(val), val, np.inf)

    all_idx = np.arange(B)
    simplex = np.empty((B, nv, dim))
    simplex[:, 0] = x0
    for k in range(dim):
        v = x0.copy()
        v[:, k] += SIMPLEX_STEP
        simplex[:, k + 1] = np.clip(v, lo[:, None], hi[:, None])
    fs = np.empty((B, nv))
    for k in range(nv):
        fs[:, k] = f(simplex[:, k], all_idx)
    nfev = np.full(B, nv)
    best_x = simplex[:, 0].copy()
    best_f = fs[:, 0].copy()

    def record(idx, x, fx):
        better = fx < best_f[idx]
        if better.any():
            best_f[idx[better]] = fx[better]
            best_x[idx[better]] = x[better]

    for k in range(nv):
        record(all_idx, simplex[:, k], fs[:, k])

    active = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        order = np.argsort(fs[idx], axis=1, kind="stable")
        sx = np.take_along_axis(simplex[idx], order[:, :, None], axis=1)
        sf = np.take_along_axis(fs[idx], order, axis=1)
        simplex[idx] = sx
        fs[idx] = sf

        fspread = sf[:, -1] - sf[:, 0]
        xspread = np.max(np.abs(sx - sx[:, :1]), axis=(1, 2))
        done = (fspread <= FTOL * np.maximum(1.0, np.abs(sf[:, 0]))) & (xspread <= XTOL)
        done |= ~np.isfinite(sf[:, 0])
        converged[idx[done]] = np.isfinite(sf[done, 0])
        out_of_budget = nfev[idx] >= MAX_EVALS
        stop = done | out_of_budget
        active[idx[stop]] = False
        keep = ~stop
        idx, sx, sf = idx[keep], sx[keep], sf[keep]
        if idx.size == 0:
            break
        lo_i = lo[idx][:, None]
        hi_i = hi[idx][:, None]

        cen = sx[:, :-1].mean(axis=1)
        worst = sx[:, -1]
        xr = np.clip(cen + (cen - worst), lo_i, hi_i)
        fr = f(xr, idx)
        nfev[idx] += 1
        record(idx, xr, fr)

        new_x = np.empty_like(xr)
        new_f = np.empty_like(fr)
        accept = np.zeros(idx.size, dtype=bool)

        exp_m = fr < sf[:, 0]
        if exp_m.any():
            j = np.flatnonzero(exp_m)
            xe = np.clip(cen[j] + 2.0 * (cen[j] - worst[j]), lo_i[j], hi_i[j])
            fe = f(xe, idx[j])
            nfev[idx[j]] += 1
            record(idx[j], xe, fe)
            use_e = fe < fr[j]
            new_x[j] = np.where(use_e[:, None], xe, xr[j])
            new_f[j] = np.where(use_e, fe, fr[j])
            accept[j] = True

        refl_m = ~exp_m & (fr < sf[:, -2])
        new_x[refl_m] = xr[refl_m]
        new_f[refl_m] = fr[refl_m]
        accept |= refl_m

        shrink = np.zeros(idx.size, dtype=bool)
        out_m = ~exp_m & ~refl_m & (fr < sf[:, -1])
        if out_m.any():
            j = np.flatnonzero(out_m)
            xc = np.clip(cen[j] + 0.5 * (xr[j] - cen[j]), lo_i[j], hi_i[j])
            fc = f(xc, idx[j])
            nfev[idx[j]] += 1
            record(idx[j], xc, fc)
            ok = fc <= fr[j]
            new_x[j[ok]] = xc[ok]
            new_f[j[ok]] = fc[ok]
            accept[j[ok]] = True
            shrink[j[~ok]] = True

        in_m = ~exp_m & ~refl_m & ~out_m
        if in_m.any():
            j = np.flatnonzero(in_m)
            xc = np.clip(cen[j] + 0.5 * (worst[j] - cen[j]), lo_i[j], hi_i[j])
            fc = f(xc, idx[j])
            nfev[idx[j]] += 1
            record(idx[j], xc, fc)
            ok = fc < sf[j, -1]
            new_x[j[ok]] = xc[ok]
            new_f[j[ok]] = fc[ok]
            accept[j[ok]] = True
            shrink[j[~ok]] = True

        if accept.any():
            j = np.flatnonzero(accept)
            simplex[idx[j], -1] = new_x[j]
            fs[idx[j], -1] = new_f[j]

        if shrink.any():
            j = np.flatnonzero(shrink)
            g = idx[j]
            base = simplex[g, :1]
            pts = base + 0.5 * (simplex[g, 1:] - base)
            simplex[g, 1:] = pts
            for k in range(1, nv):
                fk = f(simplex[g, k], g)
                fs[g, k] = fk
                record(g, simplex[g, k], fk)
            nfev[g] += nv - 1

    return best_x, best_f, nfev, converged


def _fit_stats(st, kern, model):
    B = st.n_batch
    power = st.power.copy()
    power[~(power > 0)] = 1.0
    st.power_eff = power
    lo = np.log(FLOOR_REL * power)
    hi = np.log(CEIL_REL * power)

    starts_f = np.empty((B, N_STARTS))
    best_x = None
    best_f = np.full(B, np.inf)
    total_evals = np.zeros(B, dtype=np.int64)
    conv_best = np.zeros(B, dtype=bool)
    for k in range(N_STARTS):
        if k < len(START_Q):
            x0 = _initial_guess(st, kern, START_Q[k])
        else:
            x0 = best_x + _PERTURB[k]
        x0 = np.clip(x0, lo[:, None], hi[:, None])
        bx, bf, nfev, conv = _nelder_mead(x0, st, kern, lo, hi)
        starts_f[:, k] = bf
        total_evals += nfev
        if best_x is None:
            best_x, best_f, conv_best = bx, bf, conv
        else:
            better = bf < best_f
            best_x = np.where(better[:, None], bx, best_x)
            best_f = np.where(better, bf, best_f)
            conv_best = np.where(better, conv, conv_best)

    w = np.exp(best_x)
    at_bound = best_x <= lo[:, None] + 1e-9 * np.maximum(1.0, np.abs(lo[:, None])) + 1e-6
    finite = np.isfinite(starts_f)
    spread = np.where(
        finite.all(axis=1),
        np.max(np.where(finite, starts_f, -np.inf), axis=1) - best_f,
        np.inf,
    )
    return BatchFit(model, -best_f, w, total_evals, conv_best, at_bound, spread)


def _fit_block(args):
    samples, grid, model, profile, hx_override = args
    if hx_override is None:
        kern = _kernels_for(grid, model, profile)
    else:
        kern = _Kernels(*hx_override)
    return _fit_stats(_Stats(samples), kern, model)


def fit_many(data, grid, model, profile, jobs=1, kernels=None):
    """Maximize the likelihood of every dataset in ``data`` under ``model``.

    Datasets are processed in fixed blocks of BLOCK consecutive members, so
    results are bit-identical for any ``jobs``. ``kernels`` optionally
    overrides the (H_b, H_n, H_x) kernel matrices.
    """
    check_model(model)
    samples = as_samples(data)
    if samples.shape[1:] != (grid.n_lines, grid.n_per_line):
        raise ValueError("datasets do not match grid")
    if samples.shape[0] == 0:
        raise ValueError("no datasets to fit")
    tasks = [
        (samples[i : i + BLOCK], grid, model, profile, kernels)
        for i in range(0, samples.shape[0], BLOCK)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_fit_block, tasks))
    else:
        parts = [_fit_block(t) for t in tasks]
    return BatchFit.concat(parts)


def maximize_likelihood(dataset, grid, model, profile):
    """Best-found maximum of the log-likelihood over nonnegative weights."""
    return fit_many(dataset, grid, model, profile).result(0)


@dataclass
class BatchDiscrimination:
    fit_s: BatchFit
    fit_t: BatchFit

    @property
    def l(self):
        return self.fit_t.loglik - self.fit_s.loglik

    def __len__(self):
        return len(self.fit_s)

    def result(self, i):
        return DiscriminationResult(self.fit_s.result(i), self.fit_t.result(i))


def discriminate_many(data, grid, profile, jobs=1):
    return BatchDiscrimination(
        fit_many(data, grid, "s", profile, jobs=jobs),
        fit_many(data, grid, "t", profile, jobs=jobs),
    )


def discriminant(dataset, grid, profile):
    """Fit both models and return l = log p_t - log p_s."""
    return discriminate_many(dataset, grid, profile).result(0)

