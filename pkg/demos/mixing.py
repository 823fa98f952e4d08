"""Where does each defect's ms = 0 state stop being pure?

Scans the field at 54.7 deg from each species' own axis (the angle between
the NV axis and the hBN normal) and reports the first field at which the
|0>_z weight of the ms = 0 branch drops below 0.9, in both manifolds.
"""

import numpy as np

from hybridspin import Manifold, load_species, mixing_scan

grid = np.arange(0.0, 150.0 + 1e-9, 0.5)

print(f"{'species':8s} {'manifold':8s} {'B(|a|^2 < 0.9) / mT':>22s}")
for name in ("nv", "vb"):
    sp = load_species(name)
    for m in Manifold:
        first = mixing_scan(sp, 54.7, grid, m).first_field_below(0.9)
        print(f"{name:8s} {m.value:8s} {first:22.1f}")

print("\nNV GS purity along the scan:")
table = mixing_scan(load_species("nv"), 54.7, grid[::20], Manifold.GS)
for b, a in zip(table.b_mt, table.alpha2):
    print(f"  {b:6.1f} mT  {a.max():.4f}")
