"""Sample the subordinator H and read off its inverse, the random clock L.

    python demos/clock_paths.py
"""
from __future__ import annotations

import numpy as np

from fraccount.processes import TimeChangeParams, inverse_clock_laplace
from fraccount.subordinators import first_passage, inverse_at, sample_composite_path, stable_pair

rng = np.random.default_rng(3)
spec = stable_pair(0.25, 1.0)

path = sample_composite_path(spec, 2.0, 0.01, rng)
print(f"one path of H: {path.values.size} grid points, H(2) = {path.values[-1]:.3f}")
for t in (0.5, 1.0, 2.0):
    if path.values[-1] >= t:
        print(f"  L({t}) = {inverse_at(path, t):.4f}")

# E exp(-gamma L(t)) by simulation and in closed form
nu, lam, gamma, t = 0.25, 1.0, 0.5, 1.0
L = first_passage(spec, t, 20_000, 1e-3, 50.0, rng)
v = np.exp(-gamma * L)
exact = inverse_clock_laplace(TimeChangeParams.stable_pair(nu, lam), gamma, t)
print(f"E exp(-{gamma} L({t})): simulated {v.mean():.4f} +- {v.std() / np.sqrt(v.size):.4f}, closed form {exact:.4f}")

# duality: P{L(t) < x} = P{H(x) > t}
x = float(np.median(L))
H = spec.increments(x, 20_000, rng)
print(f"P(L(1) < {x:.3f}) = {(L < x).mean():.4f}, P(H({x:.3f}) > 1) = {(H > t).mean():.4f}")
