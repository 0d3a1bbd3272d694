"""Speckled image fields and sample ensembles for both models at the configured contrast."""

import numpy as np
from _common import parse

from cdsar.experiments import run_simulate

args, cfg = parse("default.yaml", "results/fig2", __doc__)
for q in (0.8, 0.5, 0.2):
    res = run_simulate(cfg.replace(q=q, p_n=0.0), f"{args.out}/q{q}")
    for m, (za, pa, f) in res["fields"].items():
        print(f"q={q} model={m}: field {f.shape}, mean |I|^2 = {np.mean(np.abs(f) ** 2):.3f}")
