"""Image correlation kernels of the scatterer models and covariance assembly.

Coordinates are dimensionless: ``zeta`` labels an ambiguity line and ``psi``
runs along it. Only the products sigma_a^2 * K_a enter the image statistics,
so the three per-model unknowns are carried as nonnegative weights
(w_b, w_n, w_x) where ``x`` is ``s`` or ``t`` depending on the model.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from cdsar.special import _GL_NODES, _GL_WEIGHTS, phi_marginal_array, sinc_array

MODELS = ("s", "t")
ZETA_MIN_DEFAULT = 3.0 * math.pi

_QUAD_TOL = 1e-10
_MAX_REFINE = 8


class CovarianceError(ArithmeticError):
    """Assembled covariance is not positive semidefinite beyond round-off."""


def check_model(model):
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    return model


@dataclass(frozen=True)
class DelayProfile:
    """Reflectivity weight F as a function of dimensionless delay.

    ``kind="indicator"`` is 1 on [0, zeta_max]. ``kind="tabulated"`` linearly
    interpolates ``values`` at nodes ``nodes`` and vanishes outside them.
    """

    kind: str = "indicator"
    zeta_max: float = 5.0 * math.pi
    nodes: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "indicator":
            if not (self.zeta_max >= 0 and math.isfinite(self.zeta_max)):
                raise ValueError(f"zeta_max must be finite and >= 0, got {self.zeta_max!r}")
        elif self.kind == "tabulated":
            nodes = tuple(float(x) for x in self.nodes)
            values = tuple(float(x) for x in self.values)
            if len(nodes) != len(values) or len(nodes) < 2:
                raise ValueError("tabulated profile needs matching nodes/values, at least 2")
            if any(b <= a for a, b in zip(nodes, nodes[1:])):
                raise ValueError("profile nodes must be strictly increasing")
            if nodes[0] < 0:
                raise ValueError("profile must vanish at negative delays (causality)")
            if any(v < 0 or not math.isfinite(v) for v in values):
                raise ValueError("profile values must be finite and nonnegative")
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "zeta_max", nodes[-1])
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def indicator(cls, zeta_max):
        return cls("indicator", float(zeta_max))

    @classmethod
    def tabulated(cls, nodes, values):
        return cls("tabulated", 0.0, tuple(nodes), tuple(values))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "indicator":
            return np.where((u >= 0.0) & (u <= self.zeta_max), 1.0, 0.0)
        return np.interp(u, self.nodes, self.values, left=0.0, right=0.0)

    def is_zero(self):
        if self.kind == "indicator":
            return False
        return all(v == 0.0 for v in self.values)

    def base_edges(self):
        if self.kind == "indicator":
            return np.array([0.0, self.zeta_max])
        return np.asarray(self.nodes)


@dataclass(frozen=True)
class ContrastSpec:
    p_n: float = 0.1
    q: float = 0.5

    def __post_init__(self):
        if not self.p_n >= 0:
            raise ValueError(f"p_n must be >= 0, got {self.p_n!r}")
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"contrast q must lie in [0, 1), got {self.q!r}")


@dataclass(frozen=True)
class WeightVector:
    w_b: float
    w_n: float
    w_x: float

    def __post_init__(self):
        for name in ("w_b", "w_n", "w_x"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")

    def as_array(self):
        return np.array([self.w_b, self.w_n, self.w_x])

    @property
    def total(self):
        return self.w_b + self.w_n + self.w_x


@dataclass(frozen=True)
class LineGrid:
    """Ambiguity lines and the psi samples taken on each of them.

    All lines carry the same number of samples.
    """

    kappa: float
    zeta_lines: tuple
    psi_samples: tuple = field(default=None)

    def __post_init__(self):
        zl = tuple(float(z) for z in self.zeta_lines)
        if not zl:
            raise ValueError("line grid has no lines")
        if self.psi_samples is None:
            ps = tuple((z, -z) for z in zl)
        else:
            ps = tuple(tuple(float(p) for p in row) for row in self.psi_samples)
        if len(ps) != len(zl):
            raise ValueError("need one psi row per line")
        if len({len(r) for r in ps}) != 1 or len(ps[0]) == 0:
            raise ValueError("every line must carry the same, nonzero number of samples")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa!r}")
        object.__setattr__(self, "zeta_lines", zl)
        object.__setattr__(self, "psi_samples", ps)

    @property
    def n_lines(self):
        return len(self.zeta_lines)

    @property
    def n_per_line(self):
        return len(self.psi_samples[0])

    @property
    def zeta(self):
        return np.asarray(self.zeta_lines)

    @property
    def psi(self):
        return np.asarray(self.psi_samples)


def make_line_grid(kappa, zeta_max, zeta_min=ZETA_MIN_DEFAULT):
    """Lines zeta_m = pi*m within [zeta_min, zeta_max], samples psi = +/- zeta_m.

    When ``zeta_max`` is below ``zeta_min`` the window falls back to the
    single largest line pi*m <= zeta_max (m >= 1).
    """
    eps = 1e-9
    m_lo = math.ceil(zeta_min / math.pi - eps)
    m_hi = math.floor(zeta_max / math.pi + eps)
    if m_hi < 1:
        raise ValueError(f"zeta_max={zeta_max!r} is below the first line at pi")
    if m_hi < m_lo:
        m_lo = m_hi
    return LineGrid(kappa, tuple(math.pi * m for m in range(m_lo, m_hi + 1)))


# kernels ------------------------------------------------------------------


def _weighted_sinc2_integral(zeta, profile, g=None):
    """(1/pi) int F^2(u) sinc^2(zeta - u) g(u) du for an array of zeta.

    ``g`` maps the node array u to an array broadcastable to
    (len(zeta), len(u)). Composite Gauss-Legendre over supp F, refined by
    panel doubling until successive estimates agree to _QUAD_TOL.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    edges = profile.base_edges()
    lengths = np.diff(edges)
    if lengths.size == 0 or np.all(lengths <= 0) or profile.is_zero():
        return np.zeros(zeta.shape, dtype=complex)

    def estimate(width):
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            n = max(1, int(math.ceil((b - a) / width)))
            pieces.append(np.linspace(a, b, n + 1))
        e = np.unique(np.concatenate(pieces))
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        f2 = profile(u) ** 2
        base = f2 * wts
        s2 = sinc_array(zeta[:, None] - u[None, :]) ** 2
        integrand = s2 * base[None, :]
        if g is not None:
            integrand = integrand * g(u)
        return integrand.sum(axis=1) / math.pi

    width = 1.0
    prev = estimate(width)
    for _ in range(_MAX_REFINE):
        width /= 2.0
        cur = estimate(width)
        if np.max(np.abs(cur - prev)) < _QUAD_TOL:
            return cur
        prev = cur
    return prev


def kernel_h_b(zeta, psi, psi_p, kappa):
    return complex(phi_marginal_array(kappa * (psi - psi_p) / 2.0))


def kernel_h_n(zeta, psi, psi_p):
    return 1.0 if psi == psi_p else 0.0


def kernel_h_t(zeta, psi, psi_p, kappa, profile):
    a = phi_marginal_array(kappa * (zeta + psi) / 2.0)
    b = phi_marginal_array(kappa * (zeta + psi_p) / 2.0)
    factor = _weighted_sinc2_integral([zeta], profile)[0].real
    return complex(a * np.conj(b) * factor)


def _h_s_many(zeta, psi, psi_p, kappa, profile):
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    c1 = kappa * (zeta + np.asarray(psi, dtype=float)) / 2.0
    c2 = kappa * (zeta + np.asarray(psi_p, dtype=float)) / 2.0
    c1 = np.broadcast_to(c1, zeta.shape)
    c2 = np.broadcast_to(c2, zeta.shape)

    def g(u):
        ku = kappa * u[None, :]
        return phi_marginal_array(c1[:, None] - ku) * np.conj(
            phi_marginal_array(c2[:, None] - ku)
        )

    return _weighted_sinc2_integral(zeta, profile, g)


def kernel_h_s(zeta, psi, psi_p, kappa, profile):
    return complex(_h_s_many([zeta], [psi], [psi_p], kappa, profile)[0])


def h_t_factor(zeta, profile):
    """The delay-mass factor (1/pi) int F^2 sinc^2(zeta - u) du, vectorized."""
    return _weighted_sinc2_integral(zeta, profile).real


# per-line kernel matrices --------------------------------------------------


@functools.lru_cache(maxsize=256)
def line_kernels(grid, model, profile):
    """Complex kernel matrices (H_b, H_n, H_x) of shape (L, N, N) each.

    Cached on (grid, model, profile); arrays are read-only.
    """
    check_model(model)
    L, N = grid.n_lines, grid.n_per_line
    zeta = grid.zeta
    psi = grid.psi
    kappa = grid.kappa

    d = psi[:, :, None] - psi[:, None, :]
    hb = phi_marginal_array(kappa * d / 2.0)
    hn = np.broadcast_to(np.eye(N, dtype=complex), (L, N, N)).copy()

    if model == "t":
        a = phi_marginal_array(kappa * (zeta[:, None] + psi) / 2.0)
        fac = h_t_factor(zeta, profile)
        hx = a[:, :, None] * np.conj(a[:, None, :]) * fac[:, None, None]
    else:
        iu, ju = np.triu_indices(N)
        zz = np.repeat(zeta, iu.size)
        p1 = psi[:, iu].ravel()
        p2 = psi[:, ju].ravel()
        vals = _h_s_many(zz, p1, p2, kappa, profile).reshape(L, iu.size)
        hx = np.zeros((L, N, N), dtype=complex)
        hx[:, iu, ju] = vals
        hx[:, ju, iu] = np.conj(vals)

    for h in (hb, hx):
        idx = np.arange(N)
        h[:, idx, idx] = h[:, idx, idx].real
        h.setflags(write=False)
    hn.setflags(write=False)
    return hb, hn, hx


def normalizers(cfg):
    """Return (K_b, K_t, K_s) for a RadarConfig."""
    n2t2 = cfg.N**2 * cfg.tau**2
    k = cfg.k0theta
    k_b = n2t2 * (cfg.omega0 / (cfg.B * k)) / (k * cfg.phiT) * math.pi**2
    k_t = n2t2 * (2.0 / cfg.B) * math.pi
    k_s = n2t2 * (cfg.omega0 / (cfg.B * k)) * math.pi
    return k_b, k_t, k_s


def weights_from_contrast(spec, total_power=1.0):
    """Weights with w_b + w_n + w_x = total_power realizing (p_n, q)."""
    if not total_power > 0:
        raise ValueError(f"total_power must be positive, got {total_power!r}")
    if not spec.q < 1.0:
        raise ValueError("contrast q must be < 1")
    w_x = spec.q * total_power
    w_b = (1.0 - spec.q) * total_power / (1.0 + spec.p_n)
    w_n = spec.p_n * w_b
    return WeightVector(w_b, w_n, w_x)


def contrasts_from_weights(w):
    """Inverse of weights_from_contrast: returns (p_n, q)."""
    p_n = w.w_n / w.w_b if w.w_b > 0 else math.inf
    return p_n, w.w_x / w.total


def complex_to_real_cov(c):
    """Real 2N x 2N covariance of interleaved (Re, Im) pairs for complex C.

    Each 2x2 block is (1/2) [[Re C, -Im C], [Im C, Re C]].
    """
    c = np.asarray(c)
    n = c.shape[-1]
    out = np.empty(c.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = 0.5 * c.real
    out[..., 1::2, 1::2] = 0.5 * c.real
    out[..., 0::2, 1::2] = -0.5 * c.imag
    out[..., 1::2, 0::2] = 0.5 * c.imag
    return out


def psd_repair(m, rel_tol=1e-10, jitter=1e-12):
    """Check symmetric ``m`` (..., n, n) for PSD; add tiny jitter if marginal.

    Raises CovarianceError when an eigenvalue is below -rel_tol * trace.
    """
    m = np.array(m, dtype=float, copy=True)
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    ev = np.linalg.eigvalsh(m)
    tr = np.trace(m, axis1=-2, axis2=-1)
    lo = ev[..., 0]
    if np.any(lo < -rel_tol * np.abs(tr)):
        raise CovarianceError(
            f"covariance not PSD: min eigenvalue {lo.min():.3e}, trace {tr.max():.3e}"
        )
    bad = lo < 0
    if np.any(bad):
        eye = np.eye(m.shape[-1])
        m[bad] += (jitter * tr[bad])[:, None, None] * eye
    return m


@dataclass(frozen=True)
class CovarianceModel:
    """Per-line covariances for one weight vector and model.

    ``complex_cov`` has shape (L, N, N); ``real_cov`` (L, 2N, 2N) is the
    interleaved real form actually used for sampling and likelihoods.
    """

    grid: LineGrid
    model: str
    weights: WeightVector
    complex_cov: np.ndarray
    real_cov: np.ndarray

    @property
    def matrices(self):
        return list(self.real_cov)


def assemble_complex(grid, w, model, profile):
    hb, hn, hx = line_kernels(grid, check_model(model), profile)
    return w.w_b * hb + w.w_n * hn + w.w_x * hx


def assemble_covariance(grid, w, model, profile):
    c = assemble_complex(grid, w, model, profile)
    m = psd_repair(complex_to_real_cov(c))
    return CovarianceModel(grid, model, w, c, m)
