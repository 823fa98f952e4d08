"""Cross-relaxation T1 spectroscopy of the NV near a boron-vacancy layer.

Generates a noisy rate-versus-f_plus scan around the crossing, fits the
Lorentzian model back, and evaluates T1 on resonance and at 24.8 mT along
the NV axis, where the two species are detuned by several linewidths.
"""

import numpy as np

from hybridspin import FieldConfig, Manifold, RelaxModel, RelaxometryPoint, fit_relaxometry, load_species, relaxation_rate, transition_frequencies
from hybridspin.relaxometry import detuning, rate_at_detuning

true = RelaxModel(b=78.0, gamma_total=160.0, baseline_rate=0.24, f_center=3315.6)
f = np.linspace(true.f_center - 400.0, true.f_center + 400.0, 50)
rng = np.random.default_rng(1)
rate = relaxation_rate(true, f) * (1 + 0.05 * rng.standard_normal(f.size))

fit = fit_relaxometry([RelaxometryPoint(float(x), float(y)) for x, y in zip(f, rate)])
err = np.sqrt(np.diag(fit.covariance))
for name, v, e in zip(("b / kHz", "Gamma / MHz", "baseline / ms^-1", "f_center / MHz"), fit.model.params, err):
    print(f"{name:18s} {v:10.3f} +/- {e:.3f}")

nv, vb = load_species("nv"), load_species("vb")
field = FieldConfig.at_angle(24.8, 0.0, nv.axis)
f_nv = transition_frequencies(nv, field, Manifold.GS)[1]
f_vb = transition_frequencies(vb, field, Manifold.GS)[0]
print(f"\nT1 on resonance   {1 / rate_at_detuning(fit.model, 0.0):.3f} ms")
print(f"T1 at 24.8 mT     {1 / rate_at_detuning(fit.model, detuning(f_nv, f_vb)):.3f} ms (f_NV+ {f_nv:.1f}, f_VB- {f_vb:.1f} MHz)")
