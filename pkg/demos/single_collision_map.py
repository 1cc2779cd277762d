"""
The single-collision map
========================

Between two collisions nothing happens except free flight, so the whole
dynamics reduces to a map from one pre-collision configuration to the next.
Here we check that map against the event-driven engine and look at the
parameter zeta that decides whether the next collision happens at all.
"""

import numpy as np

from collapse_lab.core import RelativeConfig, from_relative_frame, to_relative_frame
from collapse_lab.engine import Limits, run
from collapse_lab.mapping import apply_map, swap_roles, zk_parameter

# particle 1 just bounced off 0; particle 2 approaches from the other side
c = -0.8
cfg = RelativeConfig(2, (1.0, 0.0), (0.3, 0.05), 1e-3, (c, np.sqrt(1 - c * c)), (-0.5 * c, -0.5 * np.sqrt(1 - c * c)))
z = zk_parameter(cfg)
print(f"zeta = {z.zeta:.6e}  (the 0-2 collision happens because zeta < 1)")

step = apply_map(cfg, 0.3)
print(f"tau = {step.tau:.6e}, eta2 after = {step.eta2_post:.6e}")

# %%
# The same collision with the engine, starting from actual positions.
out = run(from_relative_frame(cfg), 0.3, Limits(max_collisions=1, collapse=None))
got = to_relative_frame(out.final_state, 0, 2, 1)
want = swap_roles(step.output)
err = max(np.abs(np.subtract(getattr(want, k), getattr(got, k))).max() for k in ("omega1", "w1", "omega2", "w2"))
print(f"engine collision time = {float(out.events[0].time):.6e}, map vs engine max error = {err:.1e}")

# %%
# With a large enough tangential velocity zeta crosses 1 and particle 2
# misses particle 0 altogether.
for t in (0.0, 2.0, 20.0, 200.0):
    w2 = tuple(np.multiply(-0.5, cfg.omega2) + t * np.array([-cfg.omega2[1], cfg.omega2[0]]))
    z = zk_parameter(RelativeConfig(2, cfg.omega1, cfg.w1, cfg.gap, cfg.omega2, w2)).zeta
    print(f"tangential speed {t:6.1f}: zeta = {z:.4f}  -> {'collision' if z < 1 else 'miss'}")
