"""
Where the nearly-linear construction exists
===========================================

The construction needs r below 9 - 4 sqrt(5) and a final angle whose cosine
is negative enough.  This script maps the admissible region and shows why a
target of cos(theta0) = -0.5 is out of reach at r = 0.02.
"""

import numpy as np

from collapse_lab.nearlinear import (NoConstruction, build_construction, critical_existence_restitution,
                                     critical_stability_restitution, existence_threshold, stability_threshold)

print(f"existence needs  r < 7 - 4 sqrt(3) = {critical_existence_restitution():.10f}")
print(f"stability needs  r < 9 - 4 sqrt(5) = {critical_stability_restitution():.10f}")

print("\n    r      -cos needed (existence)   -cos needed (stability)")
for r in (0.001, 0.005, 0.01, 0.02, 0.04, 0.05, 0.055):
    print(f"{r:7.3f}   {existence_threshold(r):.6f}                  {stability_threshold(r):.6f}")

# %%
# Sweep -cos(theta0) at r = 0.02 and try to build the datum.
print("\n-cos(theta0)  result")
for c in np.linspace(0.5, 1.0, 6):
    try:
        zk = build_construction(0.02, cos_theta0=-c)
        print(f"  {c:.2f}       ok, delta_x = {zk.delta_x:.2e}")
    except NoConstruction as exc:
        print(f"  {c:.2f}       {exc}")
