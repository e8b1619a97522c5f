"""
Error exponents and phase curves from the closed forms.

Prints the Hamming exponent at the best threshold (error ~ p^exponent) for several methods on a
two-by-two block design, and the exact-recovery boundary h_ER(theta).
"""
import numpy as np

from fdrlab import MethodSpec, phase_curves, RHO0
from fdrlab.theory import min_hamming_exponent

RHO, THETA = 0.5, 0.2
methods = {
    "lasso": MethodSpec("lassopath_prototype", "block2", RHO),
    "ols": MethodSpec("ols_prototype", "block2", RHO),
    "knockoff-ci": MethodSpec("knockoff_ci", "block2", RHO),
    "knockoff-ec": MethodSpec("knockoff_ec", "block2", RHO),
    "mirror": MethodSpec("gm_sgm", "block2", RHO),
}
print(f"rho0 = {RHO0:.6f}")
print("r     " + "".join(f"{k:>13s}" for k in methods))
for r in (1.0, 2.0, 4.0, 6.0):
    row = [min_hamming_exponent(m, THETA, r) for m in methods.values()]
    print(f"{r:4.1f}  " + "".join(f"{v:13.4f}" for v in row))

thetas = np.linspace(0.1, 0.9, 5)
for name, m in methods.items():
    pc = phase_curves(m, thetas)
    print(f"h_ER {name:12s}" + " ".join(f"{v:7.3f}" for v in pc.h_er))
