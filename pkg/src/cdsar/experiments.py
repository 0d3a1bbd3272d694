"""Experiment runners behind the CLI subcommands.

Each runner takes a resolved ExperimentConfig and an output directory,
writes its files, and returns a dict with the in-memory results. Every file
embeds the resolved config and master seed; nothing time- or host-dependent
is written, so reruns are byte-identical.
"""

import math
import os

import numpy as np

from cdsar import __version__
from cdsar.classify import (
    classify_basic_array,
    classify_confidence_array,
    confusion,
    empirical_cdf,
    kolmogorov_distance,
    thresholds_all_q,
    thresholds_fixed_q,
    Thresholds,
)
from cdsar.io import (
    read_datasets_csv,
    read_json_container,
    datasets_from_payload,
    ensemble_payload,
    write_csv,
    write_datasets_csv,
    write_json_container,
    write_jsonl,
)
from cdsar.mle import discriminate_many
from cdsar.montecarlo import (
    EnsembleSpec,
    anisotropy_ratio,
    derive_seed,
    expectation_map,
    simulate_ensemble,
    simulate_image_field,
)
from cdsar.special import first_phi_minimum, phi_marginal_array
from cdsar.statmodel import (
    ContrastSpec,
    DelayProfile,
    WeightVector,
    make_line_grid,
    weights_from_contrast,
)

RESOLVED_KZ = 20.0

# seed roles: disjoint streams for training, held-out evaluation, and the
# single-shot simulate/discriminate commands
ROLE_TRAIN, ROLE_EVAL, ROLE_SIMULATE, ROLE_DISCRIMINATE = 0, 1, 2, 3


def meta_for(cfg, command, **extra):
    meta = {"tool": "cdsar", "version": __version__, "command": command,
            "seed": cfg.seed, "config": cfg.to_dict()}
    meta.update(extra)
    return meta


def setting(cfg, kappa=None, zeta_max=None):
    """(grid, profile) for the config, optionally overriding kappa / zeta_max."""
    kappa = cfg.kappa if kappa is None else kappa
    zeta_max = cfg.zeta_max if zeta_max is None else zeta_max
    return make_line_grid(kappa, zeta_max, cfg.zeta_min), DelayProfile.indicator(zeta_max)


def _ensure_dir(out):
    os.makedirs(out, exist_ok=True)
    return out


def l_samples(cfg, grid, profile, role, q_values, size, jobs=1, cell=0):
    """{q: (l_s, l_t)} for independent ensembles per (model, q).

    All cells are fitted in one batch; per-dataset fits do not depend on
    batch composition, so this only saves optimizer overhead.
    """
    parts = []
    for qi, q in enumerate(q_values):
        seed = derive_seed(cfg.seed, cell, role, qi)
        for model in ("s", "t"):
            spec = EnsembleSpec(grid, model, profile, ContrastSpec(cfg.p_n, q))
            parts.append(simulate_ensemble(spec, size, seed).samples)
    l = discriminate_many(np.concatenate(parts), grid, profile, jobs=jobs).l
    l = l.reshape(len(q_values), 2, size)
    return {float(q): (l[k, 0], l[k, 1]) for k, q in enumerate(q_values)}


def train_thresholds(cfg, grid, profile, jobs=1, cell=0):
    """All-q thresholds from training ensembles; also returns the l samples."""
    ls = l_samples(cfg, grid, profile, ROLE_TRAIN, cfg.q_grid, cfg.train_size, jobs, cell)
    cdfs = {q: (empirical_cdf(a), empirical_cdf(b)) for q, (a, b) in ls.items()}
    return thresholds_all_q(cdfs, cfg.p), ls


def crossing_value(cfg, param, b_phi):
    """Sweep value at which kappa * zeta_max equals b_phi."""
    if param == "kappa":
        return b_phi / cfg.zeta_max
    return b_phi / cfg.kappa


# psf-table ------------------------------------------------------------------


def run_psf_table(cfg, out, v2_max=100.0, v2_step=0.25):
    _ensure_dir(out)
    v2 = -v2_max + v2_step * np.arange(int(round(2 * v2_max / v2_step)) + 1)
    ph = phi_marginal_array(v2)
    b_phi = first_phi_minimum()
    meta = meta_for(cfg, "psf-table", b_phi=b_phi)
    write_csv(
        os.path.join(out, "phi_marginal.csv"),
        ("v2", "abs_phi", "re", "im"),
        zip(v2, np.abs(ph), ph.real, ph.imag),
        meta,
    )
    w = WeightVector(0.0, 0.0, 1.0)
    rows = []
    maps = []
    for k, (zeta_max, kappa) in enumerate(cfg.psf_rows):
        prof = DelayProfile.indicator(zeta_max)
        half = zeta_max + 2.0 * math.pi
        zr, pr = (-2.0 * math.pi, half), (-half, half)
        za, pa, it = expectation_map("t", w, prof, kappa, zr, pr, cfg.map_step)
        _, _, is_ = expectation_map("s", w, prof, kappa, zr, pr, cfg.map_step)
        kz = kappa * zeta_max
        info = {
            "row": k, "zeta_max": zeta_max, "kappa": kappa, "kappa_zeta_max": kz,
            "resolved": bool(kz >= RESOLVED_KZ),
            "anisotropy_t": float(anisotropy_ratio(za, pa, it)),
            "anisotropy_s": float(anisotropy_ratio(za, pa, is_)),
        }
        rows.append(info)
        z, p = np.meshgrid(za, pa, indexing="ij")
        write_csv(
            os.path.join(out, f"map_row{k}.csv"),
            ("zeta", "psi", "intensity_t", "intensity_s"),
            zip(z.ravel(), p.ravel(), it.ravel(), is_.ravel()),
            meta_for(cfg, "psf-table", b_phi=b_phi, row=info),
        )
        maps.append((za, pa, it, is_))
    write_csv(
        os.path.join(out, "psf_rows.csv"),
        ("row", "zeta_max", "kappa", "kappa_zeta_max", "resolved", "anisotropy_t", "anisotropy_s"),
        ([r[c] for c in ("row", "zeta_max", "kappa", "kappa_zeta_max", "resolved",
                         "anisotropy_t", "anisotropy_s")] for r in rows),
        meta,
    )
    return {"v2": v2, "phi": ph, "rows": rows, "maps": maps, "b_phi": b_phi}


# simulate -------------------------------------------------------------------


def run_simulate(cfg, out, field_half_width=None):
    """Ensembles of both models at cfg.q, plus one image field per model."""
    _ensure_dir(out)
    grid, profile = setting(cfg)
    seed = derive_seed(cfg.seed, 0, ROLE_SIMULATE, 0)
    meta = meta_for(cfg, "simulate", grid={"kappa": grid.kappa, "zeta_lines": list(grid.zeta_lines)})
    ensembles = {}
    for model in ("s", "t"):
        ens = simulate_ensemble(EnsembleSpec(grid, model, profile, ContrastSpec(cfg.p_n, cfg.q)),
                                cfg.eval_size, seed)
        ensembles[model] = ens
        write_datasets_csv(os.path.join(out, f"ensemble_{model}.csv"), ens, grid, meta)
    write_json_container(
        os.path.join(out, "ensembles.json"), "ensemble", meta,
        {m: ensemble_payload(e) for m, e in ensembles.items()},
    )
    w = weights_from_contrast(ContrastSpec(cfg.p_n, cfg.q))
    hw = cfg.zeta_max + 3.0 * math.pi if field_half_width is None else field_half_width
    fields = {}
    for model in ("s", "t"):
        za, pa, f = simulate_image_field(
            model, w, profile, cfg.kappa, (math.pi, hw), (-hw, hw),
            seed=derive_seed(cfg.seed, 0, ROLE_SIMULATE, 1 + (model == "t")),
        )
        fields[model] = (za, pa, f)
        z, p = np.meshgrid(za, pa, indexing="ij")
        write_csv(
            os.path.join(out, f"field_{model}.csv"),
            ("zeta", "psi", "re", "im", "intensity"),
            zip(z.ravel(), p.ravel(), f.real.ravel(), f.imag.ravel(), (np.abs(f) ** 2).ravel()),
            meta,
        )
    return {"grid": grid, "ensembles": ensembles, "fields": fields}


# thresholds -----------------------------------------------------------------


def run_thresholds(cfg, out, jobs=1):
    """Train all-q thresholds; write them, the training cdfs, and held-out confusion per q."""
    _ensure_dir(out)
    grid, profile = setting(cfg)
    th, train = train_thresholds(cfg, grid, profile, jobs)
    meta = meta_for(cfg, "thresholds")
    write_json_container(os.path.join(out, "thresholds.json"), "thresholds", meta, th.to_record())

    cdf_rows = []
    per_q = []
    for q, (ls, lt) in train.items():
        cs, ct = empirical_cdf(ls), empirical_cdf(lt)
        fq = thresholds_fixed_q(cs, ct, cfg.p)
        per_q.append((q, fq.l_minus, fq.l_plus, fq.collapsed, kolmogorov_distance(cs, ct)))
        for model, c in (("s", cs), ("t", ct)):
            for k, x in enumerate(c.sorted):
                cdf_rows.append((q, model, x, (k + 1) / c.n))
    write_csv(os.path.join(out, "cdf.csv"), ("q", "model", "l", "cdf"), cdf_rows, meta)
    write_csv(
        os.path.join(out, "thresholds_by_q.csv"),
        ("q", "l_minus_q", "l_plus_q", "collapsed_q", "kolmogorov"),
        per_q, meta,
    )

    held = l_samples(cfg, grid, profile, ROLE_EVAL, cfg.q_grid, cfg.eval_size, jobs)
    ev_rows = []
    for q, (ls, lt) in held.items():
        b = confusion(ls, lt)
        c = confusion(ls, lt, th)
        ev_rows.append((q, b.r_s, b.r_t, c.r_s, c.r2_s, c.r_t, c.r2_t, c.n_s, c.n_t))
    write_csv(
        os.path.join(out, "evaluation.csv"),
        ("q", "r_s", "r_t", "rp_s", "rpp_s", "rp_t", "rpp_t", "n_s", "n_t"),
        ev_rows, meta,
    )
    return {"thresholds": th, "train": train, "held_out": held, "evaluation": ev_rows}


def load_thresholds(path):
    meta, rec = read_json_container(path, "thresholds")
    return Thresholds(**rec)


# discriminate ---------------------------------------------------------------


def load_datasets(path, grid):
    if path.endswith(".json"):
        _, payload = read_json_container(path, "ensemble")
        if isinstance(payload, dict):
            items = [ds for m in sorted(payload) for ds in datasets_from_payload(path, payload[m])]
        else:
            items = datasets_from_payload(path, payload)
        for ds in items:
            ds.check_grid(grid)
        return items
    _, items = read_datasets_csv(path, grid)
    return items


def run_discriminate(cfg, out, dataset_path=None, thresholds_path=None, jobs=1):
    """Discriminate datasets from a file, or an inline simulation of both models at cfg.q."""
    _ensure_dir(out)
    grid, profile = setting(cfg)
    if dataset_path is not None:
        datasets = load_datasets(dataset_path, grid)
        samples = np.stack([d.samples for d in datasets])
        truth = [d.model for d in datasets]
        qs = [d.q for d in datasets]
    else:
        seed = derive_seed(cfg.seed, 0, ROLE_DISCRIMINATE, 0)
        parts = []
        truth, qs = [], []
        for model in ("s", "t"):
            ens = simulate_ensemble(
                EnsembleSpec(grid, model, profile, ContrastSpec(cfg.p_n, cfg.q)), cfg.eval_size, seed
            )
            parts.append(ens.samples)
            truth += [model] * len(ens)
            qs += list(ens.q)
        samples = np.concatenate(parts)
    if thresholds_path is not None:
        th = load_thresholds(thresholds_path)
    else:
        th, _ = train_thresholds(cfg, grid, profile, jobs)

    res = discriminate_many(samples, grid, profile, jobs=jobs)
    l = res.l
    basic = classify_basic_array(l)
    conf = classify_confidence_array(l, th)
    records = []
    for i in range(len(res)):
        r = res.result(i).to_record()
        r.update({
            "index": i, "true_model": truth[i], "q": None if qs[i] is None else float(qs[i]),
            "label_basic": str(basic[i]), "label_confidence": str(conf[i]),
        })
        records.append(r)
    meta = meta_for(cfg, "discriminate", thresholds=th.to_record(), dataset=dataset_path)
    write_jsonl(os.path.join(out, "results.jsonl"), records, meta)

    summary = []
    groups = sorted({t or "" for t in truth})
    for g in groups + ["all"]:
        sel = np.array([g == "all" or (t or "") == g for t in truth])
        n = int(sel.sum())
        summary.append((
            g or "unknown", n,
            float(np.mean(basic[sel] == "s")), float(np.mean(basic[sel] == "t")),
            float(np.mean(conf[sel] == "s")), float(np.mean(conf[sel] == "t")),
            float(np.mean(conf[sel] == "uncertain")),
            float(np.mean(l[sel])), float(np.median(l[sel])),
        ))
    write_csv(
        os.path.join(out, "summary.csv"),
        ("true_model", "n", "basic_s", "basic_t", "conf_s", "conf_t", "conf_uncertain",
         "mean_l", "median_l"),
        summary, meta,
    )
    return {"result": res, "l": l, "basic": basic, "confidence": conf,
            "thresholds": th, "truth": truth, "summary": summary}


# sweep ----------------------------------------------------------------------

SWEEP_COLUMNS = (
    "param", "value", "kappa", "zeta_max", "kappa_zeta_max", "q",
    "r_s", "r_t", "rp_s", "rpp_s", "rp_t", "rpp_t",
    "l_minus", "l_plus", "collapsed", "n_s", "n_t",
)


def run_sweep(cfg, out, jobs=1):
    """Train all-q thresholds per sweep value; held-out confusion at each eval q."""
    if cfg.sweep is None or not cfg.sweep.values:
        raise ValueError("sweep requires a nonempty sweep spec in the config")
    _ensure_dir(out)
    param = cfg.sweep.param
    b_phi = first_phi_minimum()
    rows = []
    for k, v in enumerate(cfg.sweep.values):
        kappa = v if param == "kappa" else cfg.kappa
        zeta_max = v if param == "zeta_max" else cfg.zeta_max
        grid, profile = setting(cfg, kappa, zeta_max)
        th, _ = train_thresholds(cfg, grid, profile, jobs, cell=k)
        held = l_samples(cfg, grid, profile, ROLE_EVAL, cfg.eval_q, cfg.eval_size, jobs, cell=k)
        for q, (ls, lt) in held.items():
            b = confusion(ls, lt)
            c = confusion(ls, lt, th)
            rows.append((
                param, v, kappa, zeta_max, kappa * zeta_max, q,
                b.r_s, b.r_t, c.r_s, c.r2_s, c.r_t, c.r2_t,
                th.l_minus, th.l_plus, th.collapsed, c.n_s, c.n_t,
            ))
    meta = meta_for(cfg, "sweep", b_phi=b_phi, crossing={param: crossing_value(cfg, param, b_phi)})
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows, meta)
    return {"rows": rows, "b_phi": b_phi, "crossing": crossing_value(cfg, param, b_phi)}
