"""
A witness for the point smoother's stall
========================================

The witness is a tent in x placed on one fine row that carries no coarse
vertices.  The coarse space cannot see it and the point smoother barely
damps it, so the rate approaches 1 like 1 - C (eps + h^2).

"""

import numpy as np

from anisomg.verify import check_lower_bound

rows = check_lower_bound(4, epsilons=(1.0, 1e-2, 1e-4, 1e-8), levels=(2, 3, 4), rates=True)

print(f"{'eps':>8} {'level':>5} {'R(eps+h^2)':>11} {'rate':>8} {'1-10(eps+h^2)':>14}")
for r in rows:
    print(f"{r.epsilon:8.0e} {r.level:5d} {r.R_scaled:11.4f} {r.measured_rate:8.4f} "
          f"{1 - 10 * (r.epsilon + r.h**2):14.4f}")

###############################################################################
# R (eps + h^2) hardly moves while eps spans eight decades.
scaled = np.array([r.R_scaled for r in rows])
print("spread of R(eps+h^2):", scaled.max() / scaled.min())
