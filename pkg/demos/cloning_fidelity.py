"""Clone fidelity across the machine parameter, and where it stops depending on the input."""

import numpy as np

from clonenet.cloner import MachineSpec, clone_fidelity, d_max, universal_parameter

PLUS = np.array([1, 1]) / np.sqrt(2)
ZERO = np.array([1, 0])


def main():
    for copies in (2, 3):
        top = d_max(2, copies)
        print(f"qubit 1 -> {copies}, d in [0, {top:.4f}]")
        for d in np.linspace(0, top, 6):
            spec = MachineSpec(2, copies, float(d))
            print(f"  d={d:.4f}  F(|0>)={clone_fidelity(spec, ZERO):.6f}  F(|+>)={clone_fidelity(spec, PLUS):.6f}")
        pt = universal_parameter(2, copies)
        print(f"  input-independent at d={pt.d:.6f}: F={pt.fidelity:.9f} (spread {pt.spread:.1e})")


if __name__ == "__main__":
    main()
