# %% [markdown]
# Fitting the power law P(s) = alpha * s^beta + P_static to measured operating points.
# For each processor the fit minimizes the mean absolute percentage error (MAPE).

# %%
import numpy as np

from dvfsched import bundled_processor, fit_power_model, mape
from dvfsched.power import critical_speed, least_squares_fit

for name in ("xscale", "powerpc405lp"):
    spec = bundled_processor(name)
    pm = fit_power_model(spec.samples, spec.p_idle, spec.f_max, spec.s_min, spec.name)
    ls = least_squares_fit(spec.samples, spec.p_idle, spec.f_max, spec.s_min, spec.name)
    print(f"{spec.name}: alpha={pm.alpha:.2f} beta={pm.beta:.4f} Ps={pm.p_static:.4f}")
    print(f"  MAPE {mape(pm, spec.samples):.4f}%  (least-squares seed {mape(ls, spec.samples):.4f}%)")

    # %%
    # measured vs fitted at every level
    for smp in spec.samples:
        print(f"  s={float(smp.speed):.2f}  measured {smp.active_power:7.1f}  fitted {pm.active_power(smp.speed):7.1f}")

    # %%
    # the speed that minimizes energy per unit of work
    s = np.linspace(float(pm.s_min), 1, 5)
    print("  energy/work:", np.round([pm.energy_per_work(x) for x in s], 1))
    print(f"  critical speed {critical_speed(pm):.4f}")
