"""
A nearly-linear collapse, collision by collision
================================================

Three spheres, restitution r = 0.02.  Particle 0 sits between 1 and 2 and
is hit alternately from each side.  We build the explicit initial datum,
run the exact event-driven simulation in high precision and check the
recursion conditions at every collision.
"""

import gmpy2

from collapse_lab.analysis import convergence_report
from collapse_lab.nearlinear import build_construction, required_precision, run_construction

# The construction only exists when -cos(theta0) is above the stability
# threshold 2 r^(1/3) (1 + r^(1/3)) / (1 + r); at r = 0.02 that is 0.677.
zk = build_construction(0.02, cos_theta0=-0.9, delta_theta=0.05)
print(f"phi-  = {zk.phi_minus:.6f}   (attracting fixed point of the ratio map)")
print(f"C_eta = {zk.C_eta:.6f}   (per-collision contraction of eta_c)")
print(f"eta_bar = {zk.eta_bar:.3e}, delta_x = {zk.delta_x:.3e}")

# %%
# The gaps shrink geometrically, so doubles run out after a handful of
# collisions.  The precision is sized from the contraction rate.
bits = required_precision(zk, 500)
print(f"\nworking precision for 500 collisions: {bits} bits")

res = run_construction(zk, seed=7, n_collisions=500)
out, cert = res.outcome, res.certificate
print(f"termination: {out.termination} after {len(out.events)} collisions")
print("order of the first eight collisions:", [f"{i}{j}" for i, j in (ev.pair for ev in out.events[:8])])

# %%
# Every condition of the recursion holds at every step.
print(f"\ncertificate clean: {cert.clean}  (checked {cert.n_checked} collisions)")
print(f"final cos angle: {float(cert.final_cos_angle):.6f}, target -0.9 +/- 0.05")

with gmpy2.context(gmpy2.get_context(), precision=res.precision):
    for n in (0, 100, 200, 300, 400):
        print(f"  n = {n:3d}   eta_c = {float(cert.eta_c_n[n]): .3e}   zeta = {float(cert.zeta_n[n]):.3e}")

# %%
# The collision times accumulate: the total time converges while the
# normal velocities decay at the linearised rate.
rep = convergence_report(out.events, out.states)
print(f"\nfitted decay rate of eta: {rep.eta_decay_rate:.4f}")
print(f"bound max((1+r)/2 |cos|, r) = {max(0.51 * 0.9, 0.02):.4f}")
print(f"collapse time estimate t* = {float(rep.tau_star_estimate):.15f}")
print(f"time of the last collision = {float(out.events[-1].time):.15f}")
