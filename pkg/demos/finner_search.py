"""Search for Finner-inequality violations on a bilocal network."""

from clonenet.finner import SearchOptions, search_violation
from clonenet.netbuild import build

net = build("bilocal_local", 0.5, 0.1)
opts = SearchOptions(starts=5, max_iters=300, seed=2)
orig = search_violation(net, "original", opts)
mod = search_violation(net, "modified", opts, extra_starts=[orig.best_setting])

for res in (orig, mod):
    print(f"{res.variant.value:9s} best ratio {res.best_ratio:.6f} (computational basis {res.computational_ratio:.6f})")
print("best setting theta:", [round(t, 4) for t in orig.best_setting.theta])
