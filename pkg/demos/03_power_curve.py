"""How often does the test notice an effect of a given size?

Simulate a 16-run face-centred central composite design with response
beta*(x1 + x2 + x1*x2) + N(0, 1), run the SVEM whole-model test and the
classical full-quadratic F test, and count rejections at 0.05. At beta = 0 the
rate estimates the type I error.

This is a quick look with 40 trials per point. ``svemwmt simulate --full``
gives the careful version.

Run:  python demos/03_power_curve.py
"""

import os

from svemwmt.simulation import power_curve
from svemwmt.whole_model import TestSettings

tab = power_curve(1, [0.0, 0.75, 1.5], ("svem_fs", "anova_full"), trials=40,
                  settings=TestSettings(n_perm=30, n_point=200, n_boot=50), seed=3,
                  n_jobs=os.cpu_count() or 1)
tab["power"] = tab.rejections / tab.trials
print(tab.pivot(index="beta", columns="method", values="power").round(3).to_string())
