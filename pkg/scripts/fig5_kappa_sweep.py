"""Confusion rates against kappa at fixed zeta_max."""

from _common import parse

from cdsar.experiments import SWEEP_COLUMNS, run_sweep

args, cfg = parse("kappa_sweep.yaml", "results/fig5", __doc__)
res = run_sweep(cfg, args.out, jobs=args.jobs)
print(f"b_Phi crossing at kappa = {res['crossing']:.4f}")
keep = ("value", "q", "r_s", "r_t", "rp_s", "rpp_s", "rp_t", "rpp_t")
idx = [SWEEP_COLUMNS.index(c) for c in keep]
print("  ".join(f"{c:>7s}" for c in keep))
for r in res["rows"]:
    print("  ".join(f"{r[i]:7.3f}" for i in idx))
