"""Speckled image simulation: sampled datasets, ensembles, and image fields."""

import math
from dataclasses import dataclass, field

import numpy as np

from cdsar.statmodel import (
    ContrastSpec,
    LineGrid,
    assemble_covariance,
    check_model,
    complex_to_real_cov,
    line_kernels,
    psd_repair,
    weights_from_contrast,
)

MODEL_TAGS = {"s": 0, "t": 1}
DEFAULT_Q_GRID = tuple(round(0.1 * k, 1) for k in range(10))


@dataclass(frozen=True)
class ImageDataset:
    """Complex image samples, one row of ``N`` values per ambiguity line.

    ``model``, ``q`` and ``seed`` record how the data were generated; the
    discriminator never looks at them.
    """

    samples: np.ndarray
    model: str = None
    q: float = None
    seed: int = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim != 2:
            raise ValueError("dataset samples must be a (lines, per_line) array")
        object.__setattr__(self, "samples", arr)

    @property
    def n_lines(self):
        return self.samples.shape[0]

    def line_vector(self, m):
        """Real interleaved vector (Re I_m1, Im I_m1, Re I_m2, ...)."""
        z = self.samples[m]
        out = np.empty(2 * z.size)
        out[0::2] = z.real
        out[1::2] = z.imag
        return out

    def real_vector(self):
        return np.concatenate([self.line_vector(m) for m in range(self.n_lines)])

    def check_grid(self, grid):
        if self.samples.shape != (grid.n_lines, grid.n_per_line):
            raise ValueError(
                f"dataset shape {self.samples.shape} does not match grid "
                f"({grid.n_lines}, {grid.n_per_line})"
            )


def member_seed(master_seed, model, index):
    """Stable 64-bit seed for ensemble member ``index``."""
    ss = np.random.SeedSequence([int(master_seed), MODEL_TAGS[check_model(model)], int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_seed(master_seed, *keys):
    """Stable 64-bit child seed from a master seed and integer keys."""
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sampling_factor(real_cov):
    """A with A A^T = M via symmetric eigendecomposition; shape (..., n, n)."""
    ev, vec = np.linalg.eigh(real_cov)
    ev = np.clip(ev, 0.0, None)
    return vec * np.sqrt(ev)[..., None, :]


def _draw(factor, normals):
    # factor (L, 2N, 2N), normals (..., L, 2N) -> complex (..., L, N)
    r = np.einsum("lij,...lj->...li", factor, normals)
    return r[..., 0::2] + 1j * r[..., 1::2]


def simulate_dataset(grid, w, model, profile, seed):
    """One sampled dataset drawn from the model covariance, deterministic in ``seed``."""
    cov = assemble_covariance(grid, w, model, profile)
    factor = sampling_factor(cov.real_cov)
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((grid.n_lines, 2 * grid.n_per_line))
    return ImageDataset(_draw(factor, normals), model=model, seed=int(seed))


@dataclass(frozen=True)
class EnsembleSpec:
    """What to simulate: model, grid, delay profile, and contrast setting.

    With ``q_choices`` set, each member draws its contrast uniformly from it;
    otherwise every member uses ``contrast.q``.
    """

    grid: LineGrid
    model: str
    profile: object
    contrast: ContrastSpec = field(default_factory=ContrastSpec)
    q_choices: tuple = None
    total_power: float = 1.0

    def __post_init__(self):
        check_model(self.model)
        if self.q_choices is not None:
            qs = tuple(float(q) for q in self.q_choices)
            if not qs:
                raise ValueError("q_choices must be nonempty")
            for q in qs:
                ContrastSpec(self.contrast.p_n, q)
            object.__setattr__(self, "q_choices", qs)

    def weights(self, q):
        return weights_from_contrast(ContrastSpec(self.contrast.p_n, q), self.total_power)


@dataclass
class Ensemble:
    """Array-backed ensemble; indexing yields ImageDataset members."""

    spec: EnsembleSpec
    master_seed: int
    samples: np.ndarray
    q: np.ndarray
    seeds: np.ndarray

    def __len__(self):
        return self.samples.shape[0]

    def __getitem__(self, i):
        return ImageDataset(
            self.samples[i], model=self.spec.model, q=float(self.q[i]), seed=int(self.seeds[i])
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def grid(self):
        return self.spec.grid


def simulate_ensemble(spec, size, master_seed):
    if size < 1:
        raise ValueError(f"ensemble size must be >= 1, got {size!r}")
    grid = spec.grid
    n_re = 2 * grid.n_per_line
    seeds = np.array([member_seed(master_seed, spec.model, i) for i in range(size)], dtype=np.uint64)
    q = np.empty(size)
    normals = np.empty((size, grid.n_lines, n_re))
    for i in range(size):
        rng = np.random.default_rng(int(seeds[i]))
        if spec.q_choices is None:
            q[i] = spec.contrast.q
        else:
            q[i] = spec.q_choices[rng.integers(len(spec.q_choices))]
        normals[i] = rng.standard_normal((grid.n_lines, n_re))

    samples = np.empty((size, grid.n_lines, grid.n_per_line), dtype=complex)
    for qv in np.unique(q):
        cov = assemble_covariance(grid, spec.weights(float(qv)), spec.model, spec.profile)
        factor = sampling_factor(cov.real_cov)
        sel = q == qv
        samples[sel] = _draw(factor, normals[sel])
    return Ensemble(spec, int(master_seed), samples, q, seeds)


# image fields -------------------------------------------------------------


def _axis(lo_hi, step):
    lo, hi = float(lo_hi[0]), float(lo_hi[1])
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if hi < lo:
        raise ValueError(f"empty range {lo_hi!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def expectation_map(model, w, profile, kappa, zeta_range, psi_range, step):
    """Mean intensity sum_a w_a H_a(zeta, psi, psi) on a lattice.

    Returns (zeta_axis, psi_axis, values) with values[i, j] at
    (zeta_axis[i], psi_axis[j]).
    """
    zeta_ax = _axis(zeta_range, step)
    psi_ax = _axis(psi_range, step)
    grid = LineGrid(kappa, tuple(zeta_ax), tuple(tuple(psi_ax) for _ in zeta_ax))
    return zeta_ax, psi_ax, _diag_intensity(grid, w, model, profile)


def _diag_intensity(grid, w, model, profile):
    from cdsar.statmodel import _h_s_many, h_t_factor
    from cdsar.special import phi_marginal_array

    check_model(model)
    zeta = grid.zeta
    psi = grid.psi
    kappa = grid.kappa
    if w.w_x == 0.0:
        hx = np.zeros(psi.shape)
    elif model == "t":
        a = phi_marginal_array(kappa * (zeta[:, None] + psi) / 2.0)
        hx = np.abs(a) ** 2 * h_t_factor(zeta, profile)[:, None]
    else:
        zz = np.repeat(zeta, psi.shape[1])
        pp = psi.ravel()
        hx = _h_s_many(zz, pp, pp, kappa, profile).real.reshape(psi.shape)
    return w.w_b + w.w_n + w.w_x * hx


def simulate_image_field(model, w, profile, kappa, zeta_range, psi_range, seed=0, size=None):
    """Speckle realization(s) on a pi-step (zeta, psi) lattice.

    Lines (fixed zeta) are drawn independently; samples along a line are
    correlated through the model kernels. Returns (zeta_axis, psi_axis,
    field) where field has shape (n_zeta, n_psi), or (size, n_zeta, n_psi)
    when ``size`` is given.
    """
    zeta_ax = _axis(zeta_range, math.pi)
    psi_ax = _axis(psi_range, math.pi)
    grid = LineGrid(kappa, tuple(zeta_ax), tuple(tuple(psi_ax) for _ in zeta_ax))
    hb, hn, hx = line_kernels(grid, check_model(model), profile)
    c = w.w_b * hb + w.w_n * hn + w.w_x * hx
    factor = sampling_factor(psd_repair(complex_to_real_cov(c)))
    rng = np.random.default_rng(seed)
    shape = (grid.n_lines, 2 * grid.n_per_line)
    if size is None:
        return zeta_ax, psi_ax, _draw(factor, rng.standard_normal(shape))
    return zeta_ax, psi_ax, _draw(factor, rng.standard_normal((int(size),) + shape))


def anisotropy_ratio(zeta_ax, psi_ax, values):
    """Delay-to-range second-moment ratio of the region above half maximum.

    Range-like and delay-like coordinates are a = (zeta + psi)/2 and
    b = (zeta - psi)/2. Ratios above 1 mean the bright region is elongated
    along delay; below 1, along range.
    """
    z, p = np.meshgrid(zeta_ax, psi_ax, indexing="ij")
    mask = values >= 0.5 * values.max()
    a = 0.5 * (z + p)[mask]
    b = 0.5 * (z - p)[mask]
    wts = values[mask]
    wts = wts / wts.sum()
    var_a = np.sum(wts * (a - np.sum(wts * a)) ** 2)
    var_b = np.sum(wts * (b - np.sum(wts * b)) ** 2)
    return var_b / var_a
