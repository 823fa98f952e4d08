"""From a fitted coupling to an areal spin density.

Uses the bundled implantation-like depth profile and the standoff calibrated
for it, then shows how the estimate scales with the coupling and how the
coupling falls off with standoff.
"""

import json
from pathlib import Path

import numpy as np

from hybridspin import LayeredProfile, coupling_from_profile, dipolar_constant, estimate_density
from hybridspin.dipolar import read_depth_profile

data = Path(__file__).resolve().parent.parent / "tests" / "data"
geom = json.loads((data / "hbn1_geometry.json").read_text())
shape = read_depth_profile(data / geom["profile"]).normalized()
standoff = geom["nv_standoff_nm"]

print(f"dipolar constant {dipolar_constant():.4f} mT nm^3")
print(f"standoff {standoff:.3f} nm, profile mean depth {shape.depths @ shape.densities:.2f} nm\n")

for b in (40.0, 78.0, 156.0):
    rho, sigma = estimate_density(b, 5.0, shape, standoff)
    print(f"b = {b:5.1f}(5) kHz  ->  rho = {rho:.5f}({sigma:.5f}) nm^-2")

print("\ncoupling of a 0.01 nm^-2 sheet vs. distance")
for h in (2.0, 5.0, 10.0, 20.0):
    print(f"  {h:5.1f} nm  b = {coupling_from_profile(LayeredProfile.single(h, 0.01)).b:8.2f} kHz")
