"""|Phi(0, v2)| and mean target intensity maps for three (zeta_max, kappa) rows."""

from _common import parse

from cdsar.experiments import run_psf_table

args, cfg = parse("psf_table.yaml", "results/fig1", __doc__)
res = run_psf_table(cfg, args.out)
print(f"b_Phi = {res['b_phi']:.6f}")
print("row  zeta_max/pi  kappa  kappa*zeta_max  resolved  anisotropy_t  anisotropy_s")
for r in res["rows"]:
    print(f"{r['row']:3d}  {r['zeta_max'] / 3.141592653589793:11.2f}  {r['kappa']:5.2f}  "
          f"{r['kappa_zeta_max']:14.2f}  {str(r['resolved']):8s}  {r['anisotropy_t']:12.3f}  "
          f"{r['anisotropy_s']:12.3f}")
