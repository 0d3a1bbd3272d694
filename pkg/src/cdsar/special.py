"""Special functions behind the coordinate-delay PSF.

The aperture function is

    Phi(v1, v2) = int_{-1/2}^{1/2} exp(2i v1 s) exp(i v2 s^2) ds

with the closed-form marginal Phi(0, v2) = (C(t) + i sign(v2) S(t)) / t,
t = sqrt(|v2| / 2pi), where C and S are the Fresnel integrals with the
pi/2 kernel convention, C(t) = int_0^t cos(pi u^2 / 2) du.
"""

import math

import numpy as np
from scipy import special as _sp

_GL_ORDER = 12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fresnel(t):
    """Return the Fresnel integrals ``(C(t), S(t))`` in the pi/2 convention."""
    s, c = _sp.fresnel(float(t))
    return float(c), float(s)


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    x = float(x)
    if x == 0.0:
        return 1.0
    return math.sin(x) / x


def sinc_array(x):
    # np.sinc is the normalized one
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def phi_marginal_array(v2):
    """Vectorized Phi(0, v2) via Fresnel integrals."""
    v2 = np.asarray(v2, dtype=float)
    t = np.sqrt(np.abs(v2) / (2.0 * np.pi))
    s, c = _sp.fresnel(t)
    safe_t = np.where(t == 0.0, 1.0, t)
    out = (c + 1j * np.sign(v2) * s) / safe_t
    return np.where(t == 0.0, 1.0 + 0.0j, out)


def phi_marginal(v2):
    """Phi(0, v2) from the Fresnel closed form; Phi(0, 0) = 1."""
    v2 = float(v2)
    if v2 == 0.0:
        return 1.0 + 0.0j
    t = math.sqrt(abs(v2) / (2.0 * math.pi))
    c, s = fresnel(t)
    return complex(c, math.copysign(1.0, v2) * s) / t


def _phi_panels(v1, v2, n_panels):
    edges = np.linspace(-0.5, 0.5, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return complex(np.sum(w * np.exp(1j * (2.0 * v1 * s + v2 * s * s))))


def phi(v1, v2, tol=1e-10, max_panels=1 << 16):
    """Evaluate Phi(v1, v2) by composite Gauss-Legendre quadrature.

    The starting panel count scales with the number of oscillations across
    the unit interval; panels are doubled until two successive estimates
    agree to ``tol``.
    """
    v1 = float(v1)
    v2 = float(v2)
    n = int(math.ceil(1.0 + (abs(v1) + abs(v2)) / math.pi))
    prev = _phi_panels(v1, v2, n)
    while n < max_panels:
        n *= 2
        cur = _phi_panels(v1, v2, n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


def golden_section_min(f, a, b, tol=1e-10, max_iter=200):
    """Minimize a unimodal scalar function on [a, b]; returns the abscissa."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def first_phi_minimum(lo=15.0, hi=30.0):
    """Location b_Phi of the first local minimum of |Phi(0, .)| (about 23)."""
    return golden_section_min(lambda v: abs(phi_marginal(v)), lo, hi)
