"""
Linearised triangular collapse
==============================

If the three particles end up colliding in the cyclic order 01, 02, 12 they
approach an equilateral contact triangle.  One period then acts on the
relative velocities through the product of three collision matrices.  Its
restriction to the triangle plane is a 4x4 matrix with one eigenvalue 1 and
three eigenvalues inside the unit disc.
"""

import numpy as np

from collapse_lab.triangular import (closed_form_restricted, iterate_cone_exit, numeric_characteristic_polynomial,
                                     restricted_matrix, spectrum)

np.set_printoptions(precision=5, suppress=True)

r = 0.5
M = restricted_matrix(r).matrix
print("restricted period matrix at r = 0.5:\n", M)
print("max difference to the closed form:", np.abs(M - closed_form_restricted(r)).max())
print("characteristic polynomial from minors:", np.round(numeric_characteristic_polynomial(M), 12))

# %%
# The spectrum: a negative real root between -r and -r^3, and a complex pair
# whose modulus sits between |lambda0| and 1.
print("\n     r     lambda0     |lambda+|    all bounds")
for r in (0.01, 0.05, 0.2, 0.5, 0.9, 0.999):
    s = spectrum(r)
    print(f"{r:6.3f}  {s.lambda0: .6f}  {abs(s.lambda_plus):.6f}    {s.all_bounds_ok}")

# %%
# Start inside the admissibility cone C2 and iterate the linear map.  The
# iterates spiral into the eigenline of lambda = 1 and leave the cone early.
it = iterate_cone_exit((-1.0, 0.0, -1.0, 1.0), r=0.05, max_iter=60)
print(f"\nleft C2 at step {it.exit_index}")
print(f"contraction of the distance to the eigenline: {it.rate:.4f}")
print(f"|lambda+| at r = 0.05: {abs(spectrum(0.05).lambda_plus):.4f}")
