"""Mittag-Leffler functions: closed forms, reductions and the negative axis.

    python demos/mittag_leffler_tour.py
"""
from __future__ import annotations

import numpy as np
from scipy.special import erfcx

from fraccount.specialfn import MLSpec, ml, mittag_leffler, multivariate_ml

# E_{1,1}(z) = e^z and E_{2,1}(z) = cosh(sqrt(z))
z = np.array([-3.0, -1.0, 0.5, 2.0])
print("E_1(z) - exp(z):       ", mittag_leffler(z, 1.0) - np.exp(z))
print("E_2(z) - cosh(sqrt z): ", mittag_leffler(z[2:], 2.0) - np.cosh(np.sqrt(z[2:])))

# E_{1/2}(-x) = erfcx(x); the plain series cancels badly here, so the
# evaluator switches to a contour integral and reports what it did
for x in (1.0, 10.0, 40.0):
    res = ml(MLSpec(0.5, 1.0, (), (-x,)))
    print(f"E_1/2(-{x:>4}) = {res.value:.15e}  erfcx = {erfcx(x):.15e}  converged={res.converged}")

# equal arguments collapse: E^{g1,g2}(z, z) = E^{g1+g2}(z)
a = multivariate_ml([-0.7, -0.7], 0.6, 1.2, [1.5, 2.0])
b = mittag_leffler(-0.7, 0.6, 1.2, 3.5)
print(f"bivariate collapse: {a:.15f} vs {b:.15f}")

# relaxation curves E_nu(-t^nu) decay like a power law for nu < 1
t = np.array([0.1, 1.0, 10.0, 100.0])
for nu in (0.3, 0.6, 1.0):
    print(f"nu={nu}: E_nu(-t^nu) =", np.array2string(mittag_leffler(-(t**nu), nu), precision=5))
