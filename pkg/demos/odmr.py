"""ODMR of both species with the field along the boron-vacancy axis.

Prints each species' ground-state lines and their mixing-reduced contrast,
then the deepest dips of the combined synthetic spectrum.
"""

import numpy as np

from hybridspin import FieldConfig, load_species
from hybridspin.odmr import species_lines, synthesize_spectrum

nv, vb = load_species("nv"), load_species("vb")
grid = np.linspace(500.0, 6500.0, 6001)

for b in (10.0, 50.0, 93.0):
    field = FieldConfig.at_angle(b, 0.0, vb.axis)
    lines = []
    print(f"B = {b:g} mT along the hBN normal")
    for sp in (nv, vb):
        sl = species_lines(sp, field, base_contrast=0.1, linewidth_fwhm=10.0)
        lines += sl
        for line in sl:
            print(f"  {sp.name:3s} {line.center:9.2f} MHz  contrast {line.contrast:.4f}")
    spec = synthesize_spectrum(lines, grid)
    dips = np.argsort(spec.signal)[:1]
    print(f"  deepest dip {spec.frequency_grid[dips[0]]:.0f} MHz at {1 - spec.signal[dips[0]]:.4f}\n")
