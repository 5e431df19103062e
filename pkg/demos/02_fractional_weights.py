"""What one bootstrap member of the ensemble actually sees.

Every run gets a training weight -ln(u) and a validation weight -ln(1-u)
from the same uniform draw. A run that the training fit leans on is nearly
ignored when the model size is chosen, and vice versa. Averaging many such
members gives a smooth predictor plus a per-point spread.

Run:  python demos/02_fractional_weights.py
"""

import numpy as np
from scipy.stats import spearmanr

from svemwmt import FactorSpec, parse_terms, sample_points, svem_fit, svem_predict
from svemwmt.weights import draw_weight_pair

wp = draw_weight_pair(8, seed=1, iteration=0)
print("run  train w  valid w")
for i, (a, b) in enumerate(zip(wp.train, wp.valid)):
    print(f"{i:>3}  {a:7.3f}  {b:7.3f}")
print(f"rank correlation: {spearmanr(wp.train, wp.valid)[0]:.0f}\n")

specs = [FactorSpec("temp", "continuous", 20, 80), FactorSpec("time", "continuous", 1, 9)]
terms = parse_terms(["Intercept", "temp", "time", "temp*time", "temp*temp", "time*time"], specs)
X = sample_points(specs, 12, seed=4)
rng = np.random.default_rng(0)
t = (X["temp"] - 50) / 30
y = 3 + 2 * t - 1.5 * t**2 + rng.normal(0, 0.3, len(X))

model = svem_fit(X, y, specs, terms, "fs", n_boot=200, seed=7)
sizes = [int(np.count_nonzero(m.coefficients)) for m in model.members]
print(f"terms kept per member: min {min(sizes)}, median {int(np.median(sizes))}, max {max(sizes)}")

grid = sample_points(specs, 5, seed=9)
pred = svem_predict(model, grid)
for (_, row), f, s in zip(grid.iterrows(), pred.f_hat, pred.s_hat):
    print(f"temp {row.temp:5.1f}  time {row.time:4.1f}   f = {f:6.3f}  spread = {s:.3f}")
