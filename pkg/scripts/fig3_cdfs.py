"""Training cdfs of l per contrast, all-q thresholds, and held-out confusion rates."""

from _common import parse

from cdsar.experiments import run_thresholds

args, cfg = parse("default.yaml", "results/fig3", __doc__)
res = run_thresholds(cfg, args.out, jobs=args.jobs)
th = res["thresholds"]
print(f"thresholds: l- = {th.l_minus:.4f}, l+ = {th.l_plus:.4f}, collapsed = {th.collapsed}")
print("  q    r_s    r_t    r'_s   r''_s  r'_t   r''_t")
for row in res["evaluation"]:
    print("  ".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in row[:7]))
