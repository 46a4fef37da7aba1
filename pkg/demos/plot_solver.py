"""
The two-level cycle as a solver
===============================

Run the cycle on f = 1 and watch the residual.  The per-step reduction for
line smoothing barely depends on eps.

"""

import math

import numpy as np
import matplotlib.pyplot as plt

from anisomg import build_case, solve
from anisomg.assembly import DofMap, assemble_mass

fig, ax = plt.subplots()
for eps in (1e-2, 1e-4, 1e-6, 1e-8):
    op = build_case(4, math.pi / 6, 3, eps, "line-gs")
    dofs = DofMap.from_mesh(op.fine_mesh)
    b = assemble_mass(op.fine_mesh, dofs) @ np.ones(dofs.n)
    x, its, hist = solve(op, b, tol=1e-10)
    print(f"eps={eps:.0e}: {its} iterations")
    ax.semilogy(hist, label=f"eps={eps:.0e}")
ax.set_xlabel("iteration")
ax.set_ylabel("relative residual")
ax.legend()
plt.show()
