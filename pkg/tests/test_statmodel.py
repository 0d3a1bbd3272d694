import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cdsar.psf import RadarConfig
from cdsar.special import first_phi_minimum, phi_marginal, sinc
from cdsar.statmodel import (
    ContrastSpec,
    CovarianceError,
    DelayProfile,
    LineGrid,
    WeightVector,
    assemble_complex,
    assemble_covariance,
    complex_to_real_cov,
    contrasts_from_weights,
    kernel_h_b,
    kernel_h_n,
    kernel_h_s,
    kernel_h_t,
    line_kernels,
    make_line_grid,
    normalizers,
    psd_repair,
    weights_from_contrast,
)

PI = math.pi
F5 = DelayProfile.indicator(5 * PI)
ZERO = DelayProfile.tabulated([0.0, 1.0], [0.0, 0.0])


def sinc2_mass(zeta, zmax):
    f = lambda u: sinc(zeta - u) ** 2
    pts = [zeta] if 0 < zeta < zmax else None
    return integrate.quad(f, 0, zmax, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)[0] / PI


def h_s_oracle(zeta, psi, psi_p, kappa, zmax):
    def g(u, part):
        v = sinc(zeta - u) ** 2 * phi_marginal(kappa * (zeta + psi) / 2 - kappa * u) * np.conj(
            phi_marginal(kappa * (zeta + psi_p) / 2 - kappa * u)
        )
        return v.real if part == 0 else v.imag

    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=1000)
    re = integrate.quad(g, 0, zmax, args=(0,), **kw)[0]
    im = integrate.quad(g, 0, zmax, args=(1,), **kw)[0]
    return complex(re, im) / PI


# profiles and grids -------------------------------------------------------


def test_profile_indicator_and_tabulated():
    assert np.array_equal(F5(np.array([-0.1, 0.0, 5 * PI, 5 * PI + 0.1])), [0, 1, 1, 0])
    tab = DelayProfile.tabulated([0.0, 2.0, 4.0], [1.0, 0.5, 0.0])
    assert tab.zeta_max == 4.0
    assert tab(1.0) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        DelayProfile.tabulated([-1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        DelayProfile.tabulated([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(ValueError):
        DelayProfile.tabulated([0.0, 0.0], [1.0, 1.0])


def test_make_line_grid():
    g = make_line_grid(2.5, 5 * PI)
    assert g.zeta_lines == pytest.approx((3 * PI, 4 * PI, 5 * PI))
    assert g.psi_samples[0] == pytest.approx((3 * PI, -3 * PI))
    assert g.n_per_line == 2
    # window below zeta_min falls back to the largest admissible line
    assert make_line_grid(2.5, 2 * PI).zeta_lines == pytest.approx((2 * PI,))
    with pytest.raises(ValueError):
        make_line_grid(2.5, 0.5)
    with pytest.raises(ValueError):
        LineGrid(1.0, (PI, 2 * PI), ((0.0, 1.0), (0.0,)))


# kernels ------------------------------------------------------------------


def test_h_b_cases():
    assert kernel_h_b(PI, 2.0, 2.0, 2.5) == 1.0
    b = first_phi_minimum()
    kappa, zeta = 2.5, b / 2.5
    assert abs(kernel_h_b(zeta, zeta, -zeta, kappa)) == pytest.approx(abs(phi_marginal(b)), abs=1e-15)


@given(st.floats(0, 30), st.floats(-30, 30), st.floats(-30, 30), st.floats(0, 5))
def test_h_b_hermitian(zeta, p1, p2, kappa):
    assert kernel_h_b(zeta, p1, p2, kappa) == pytest.approx(np.conj(kernel_h_b(zeta, p2, p1, kappa)), abs=1e-14)


def test_h_n():
    assert kernel_h_n(1.0, 2.0, 2.0) == 1.0
    assert kernel_h_n(1.0, 2.0, -2.0) == 0.0


def test_h_t_diagonal_oracle():
    z = 3 * PI
    ref = integrate.quad(lambda v: sinc(v) ** 2, -2 * PI, 3 * PI, points=[0.0], epsabs=1e-14)[0] / PI
    assert kernel_h_t(z, -z, -z, 2.5, F5) == pytest.approx(ref, abs=1e-10)
    assert ref == pytest.approx(sinc2_mass(z, 5 * PI), abs=1e-12)


def test_h_t_zero_profile_and_pair_product():
    assert kernel_h_t(3 * PI, 1.0, 2.0, 2.5, ZERO) == 0.0
    a = kernel_h_t(4 * PI, 4 * PI, -4 * PI, 2.5, F5)
    b = kernel_h_t(4 * PI, -4 * PI, 4 * PI, 2.5, F5)
    assert abs((a * b).imag) < 1e-15
    assert (a * b).real == pytest.approx(abs(a) ** 2, rel=1e-12)


def test_h_s_generic_oracle():
    z = 4 * PI
    val = kernel_h_s(z, z, -z, 2.5, F5)
    assert abs(val - h_s_oracle(z, z, -z, 2.5, 5 * PI)) <= 1e-8


@pytest.mark.parametrize("psi,psi_p", [(3 * PI, 3 * PI), (-3 * PI, 3 * PI), (1.0, -2.5)])
def test_h_s_more_oracles(psi, psi_p):
    z = 3 * PI
    assert abs(kernel_h_s(z, psi, psi_p, 1.3, F5) - h_s_oracle(z, psi, psi_p, 1.3, 5 * PI)) <= 1e-8


def test_h_s_degenerate():
    assert kernel_h_s(3 * PI, 1.0, 2.0, 2.5, ZERO) == 0.0
    z = 3 * PI
    assert kernel_h_s(z, 1.0, -7.0, 0.0, F5) == pytest.approx(kernel_h_t(z, 1.0, -7.0, 0.0, F5), abs=1e-13)
    assert kernel_h_s(z, 1.0, -7.0, 0.0, F5).real == pytest.approx(sinc2_mass(z, 5 * PI), abs=1e-10)


@pytest.mark.parametrize("model", ["s", "t"])
def test_line_kernels_structure(model):
    grid = make_line_grid(2.5, 6 * PI)
    hb, hn, hx = line_kernels(grid, model, DelayProfile.indicator(6 * PI))
    for h in (hb, hn, hx):
        assert h.shape == (4, 2, 2)
        assert np.array_equal(h, np.conj(np.swapaxes(h, 1, 2)))
        assert not h.flags.writeable
    assert np.array_equal(hn, np.broadcast_to(np.eye(2), hn.shape))
    z = grid.zeta[1]
    ref = kernel_h_s(z, z, -z, 2.5, DelayProfile.indicator(6 * PI)) if model == "s" else \
        kernel_h_t(z, z, -z, 2.5, DelayProfile.indicator(6 * PI))
    assert hx[1, 0, 1] == pytest.approx(ref, abs=1e-12)


# weights and covariance ----------------------------------------------------


def test_weights_from_contrast():
    w = weights_from_contrast(ContrastSpec(0.0, 0.0))
    assert (w.w_b, w.w_n, w.w_x) == (1.0, 0.0, 0.0)
    w = weights_from_contrast(ContrastSpec(0.1, 0.5))
    assert w.w_x == 0.5
    assert w.w_b == pytest.approx(0.5 / 1.1, abs=1e-16)
    assert w.w_n == pytest.approx(0.05 / 1.1, abs=1e-16)
    with pytest.raises(ValueError):
        ContrastSpec(0.1, 1.0)
    with pytest.raises(ValueError):
        WeightVector(-1.0, 0.0, 0.0)


@given(st.floats(0, 5), st.floats(0, 0.99), st.floats(1e-3, 1e3))
def test_contrast_round_trip(p_n, q, total):
    w = weights_from_contrast(ContrastSpec(p_n, q), total)
    assert w.total == pytest.approx(total, rel=1e-12)
    pn2, q2 = contrasts_from_weights(w)
    assert pn2 == pytest.approx(p_n, abs=1e-12)
    assert q2 == pytest.approx(q, abs=1e-12)


def test_real_form_matches_complex():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    c = a @ a.conj().T
    m = complex_to_real_cov(c)
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    x = np.empty(6)
    x[0::2], x[1::2] = z.real, z.imag
    # z^H C^{-1} z equals (1/2) x^T M^{-1} x, and det M = det(C)^2 / 4^N
    assert np.vdot(z, np.linalg.solve(c, z)).real == pytest.approx(0.5 * x @ np.linalg.solve(m, x), rel=1e-12)
    assert np.linalg.det(m) == pytest.approx(abs(np.linalg.det(c)) ** 2 / 4**3, rel=1e-10)


def test_pure_noise_and_background_blocks():
    grid = make_line_grid(2.5, 5 * PI)
    cov = assemble_covariance(grid, WeightVector(0.0, 1.0, 0.0), "t", F5)
    assert np.allclose(cov.real_cov, 0.5 * np.eye(4))
    cov = assemble_covariance(grid, WeightVector(1.0, 0.0, 0.0), "s", F5)
    for m, z in enumerate(grid.zeta):
        ph = phi_marginal(2.5 * z)
        blk = cov.real_cov[m]
        assert np.allclose(blk[:2, :2], 0.5 * np.eye(2))
        assert np.allclose(blk[0:2, 2:4], 0.5 * np.array([[ph.real, -ph.imag], [ph.imag, ph.real]]), atol=1e-15)


def test_models_differ_only_in_target_term():
    grid = make_line_grid(2.5, 5 * PI)
    w = WeightVector(0.4, 0.05, 0.3)
    cs = assemble_complex(grid, w, "s", F5)
    ct = assemble_complex(grid, w, "t", F5)
    hx_s = line_kernels(grid, "s", F5)[2]
    hx_t = line_kernels(grid, "t", F5)[2]
    assert np.allclose(cs - ct, 0.3 * (hx_s - hx_t), atol=1e-15)


@given(st.floats(0.05, 5), st.integers(1, 8), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2),
       st.sampled_from(["s", "t"]))
@settings(max_examples=25, deadline=None)
def test_covariance_psd(kappa, m_max, wb, wn, wx, model):
    zmax = max(3, m_max) * PI
    grid = make_line_grid(kappa, zmax)
    cov = assemble_covariance(grid, WeightVector(wb, wn, wx), model, DelayProfile.indicator(zmax))
    m = cov.real_cov
    assert np.array_equal(m, np.swapaxes(m, 1, 2))
    ev = np.linalg.eigvalsh(m)
    tr = np.trace(m, axis1=1, axis2=2)
    assert np.all(ev[:, 0] >= -1e-10 * np.maximum(tr, 1e-300))


def test_psd_repair():
    m = np.array([[[1.0, 0.0], [0.0, -1e-14]]])
    out = psd_repair(m)
    assert np.linalg.eigvalsh(out)[0, 0] >= 0
    with pytest.raises(CovarianceError):
        psd_repair(np.array([[[1.0, 0.0], [0.0, -0.5]]]))


def test_normalizers():
    cfg = RadarConfig(omega0=2 * PI * 1e10, B=2 * PI * 1e8, tau=1e-5, phiT=0.158, theta=PI / 4, N=100)
    kb, kt, ks = normalizers(cfg)
    k = cfg.k0theta
    n2t2 = (cfg.N * cfg.tau) ** 2
    assert kt == pytest.approx(n2t2 * 2 * PI / cfg.B, rel=1e-14)
    assert ks == pytest.approx(n2t2 * PI * cfg.omega0 / (cfg.B * k), rel=1e-14)
    assert kb / ks == pytest.approx(PI / (k * cfg.phiT), rel=1e-12)
    cfg2 = RadarConfig(cfg.omega0, cfg.B, cfg.tau, cfg.phiT, cfg.theta, 2 * cfg.N)
    assert np.allclose(np.array(normalizers(cfg2)) / np.array([kb, kt, ks]), 4.0)
