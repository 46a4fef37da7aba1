"""
Strips and their blocks
=======================

The line smoother groups DOFs into overlapping horizontal bands.  Each band
comes from a hat function of y, and the hats sum to one.

"""

import math

import numpy as np
import matplotlib.pyplot as plt

from anisomg import MeshSpec, build_rotated_uniform, build_strips, refine_regular
from anisomg.assembly import DofMap

coarse = build_rotated_uniform(MeshSpec(4, math.pi / 6))
fine, _ = refine_regular(coarse)
dofs = DofMap.from_mesh(fine)
strips = build_strips(fine, dofs)
print("strips:", strips.L + 2, "width:", strips.width)
print("blocks per DOF:", np.bincount(strips.block_count()))

###############################################################################
# The hats at a few heights, and their sum.
y = np.linspace(strips.y_min, strips.y_max, 400)
total = sum(strips.theta(i, y) for i in strips.indices)
print("max |sum - 1|:", np.abs(total - 1).max())

###############################################################################
# Colour the DOFs of every other block on top of the mesh.
fig, ax = plt.subplots(figsize=(6, 6))
ax.triplot(fine.vertices[:, 0], fine.vertices[:, 1], fine.triangles, lw=0.3, color="0.6")
xy = fine.vertices[dofs.vertices]
for i, b in enumerate(strips.blocks[::2]):
    ax.plot(xy[b, 0], xy[b, 1], "o", ms=3)
ax.set_aspect("equal")
plt.show()
