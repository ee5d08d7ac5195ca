"""Which qubit pairs of each cloned network are entangled, and which reduced states coincide."""

from clonenet.netbuild import build, pair_entanglement_map, pair_equality_classes, topology_d_max, usable

for topo in ("bilocal_local", "bilocal_nonlocal", "triangle_nonlocal"):
    d = 0.3 * topology_d_max(topo)
    net = build(topo, 0.5, d)
    print(f"{topo} at alpha^2=0.5, d={d:.4f}  usable={usable(net)}")
    for pc in pair_entanglement_map(net):
        print(f"  pair {pc.pair}: negativity {pc.negativity:.5f}")
    print("  equal reduced states:", pair_equality_classes(net))
