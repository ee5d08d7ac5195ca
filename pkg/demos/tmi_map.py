"""Sign of the tripartite mutual information across a coarse triangle grid."""

from clonenet.sweep import SweepConfig, run_sweep

cfg = SweepConfig(topology="triangle", alpha_min=0.05, alpha_max=0.95, alpha_count=7,
                  d_min=0.01, d_count=7, compute_finner=False, compute_tmi=True)
recs, _ = run_sweep(cfg)

ds = sorted({r.d for r in recs})
print("alpha^2 \\ d " + " ".join(f"{d:7.3f}" for d in ds))
for a2 in sorted({r.alpha_sq for r in recs}):
    row = [r.tmi for r in recs if r.alpha_sq == a2]
    print(f"{a2:10.3f}  " + " ".join(f"{v:+7.3f}" for v in row))
