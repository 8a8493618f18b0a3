"""Robust style aggregation with the geometric median.

A reference clip yields one style vector per window.  Outlying windows pull
the mean around but barely move the geometric median.
"""

import numpy as np

from exprgan import inference

rng = np.random.default_rng(0)
styles = rng.normal(0, 0.1, size=(40, 16)) + 1.0
styles[:4] += 25.0  # a few corrupted windows

median, history = inference.weiszfeld(styles)
print("mean distance from the clean centre:  ", np.linalg.norm(styles.mean(0) - 1.0).round(3))
print("median distance from the clean centre:", np.linalg.norm(median - 1.0).round(3))
print(f"{len(history) - 1} Weiszfeld iterations, objective {history[0]:.3f} -> {history[-1]:.3f}")
assert all(b <= a for a, b in zip(history, history[1:]))

# the classic triangle where the median is not a data point
pts = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 1.0]])
print("triangle median:", inference.geometric_median(pts).round(4))

# a data point can be optimal too; Weiszfeld stops there instead of dividing by zero
pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
print("cross median:", inference.geometric_median(pts))
