"""DEER on a single boron-vacancy sheet.

Compares the Hahn echo with DEER on an unpolarized bath, then sweeps the
bath polarization: a polarized bath adds a static field that makes the
probe coherence precess, visible when T2 is long and hidden when it is short.
"""

import numpy as np

from hybridspin import LayeredProfile
from hybridspin.deer import BathSpec, DeerConfig, deer_decay_rate, deer_signal, hahn_envelope, hahn_signal, oscillation_frequency, sample_bath

sheet = LayeredProfile.single(0.34, 0.01)

spec = BathSpec(sheet, nv_standoff=10.0)
cfg = DeerConfig(np.linspace(0.0, 10.0, 51), t2=2.6, n_samples=1000, seed=3)
print(f"Hahn decay rate {deer_decay_rate(hahn_signal(spec, cfg)):.3f} /us")
print(f"DEER decay rate {deer_decay_rate(deer_signal(spec, cfg)):.3f} /us (p = 0)\n")

t = np.linspace(0.0, 30.0, 121)
far = BathSpec(sheet, nv_standoff=19.66)
# a typical configuration: median |sum of couplings| over 15 draws
draws = [sample_bath(far, s) for s in range(15)]
seed = int(np.argsort([abs(b.couplings.sum()) for b in draws])[7])
bath = draws[seed]
print(f"bath at 20 nm (seed {seed}): {len(bath)} spins, sum of couplings {bath.couplings.sum():.2f} kHz")
for t2 in (2.6, 12.0):
    alive = hahn_envelope(t, t2) >= 0.1
    print(f"\nT2 = {t2} us, envelope above 0.1 up to {t[alive][-1]:.2f} us")
    for p in (0.0, 0.25, 0.5, 1.0):
        sig = deer_signal(BathSpec(sheet, polarization=p, nv_standoff=19.66), DeerConfig(t, t2=t2, seed=seed), bath=bath)
        neg = t[np.flatnonzero((sig.coherence < 0) & alive)]
        first = f"{neg[0]:.2f} us" if neg.size else "none"
        print(f"  p = {p:4.2f}  f = {1e3 * oscillation_frequency(sig):6.2f} kHz  first negative value before decay: {first}")
