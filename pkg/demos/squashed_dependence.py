"""Squashed-entanglement upper bounds and the triangle dependence at a few amplitudes.

Slow: every point runs several large optimisations.
"""

import numpy as np

from clonenet.entmeas import Bipartition, EsqOptions, squashed_upper
from clonenet.sweep import dependence_curve

p = 0.7
bell = np.zeros((4, 4))
bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
werner = p * bell + (1 - p) * np.eye(4) / 4
res = squashed_upper(werner, Bipartition([0], [1]), EsqOptions(restarts=2))
print(f"Werner p={p}: E_sq <= {res.estimate:.5f} (trivial bound {res.trivial_bound:.5f})")

for pt in dependence_curve(0.1, 3, EsqOptions(restarts=2, max_iters=400)):
    print(f"alpha={pt.alpha:.2f}  E(A|BC)={pt.e_a_bc:.4f}  E(A|B)={pt.e_a_b:.4f}  E(A|C)={pt.e_a_c:.4f}  D={pt.value:.4f}")
