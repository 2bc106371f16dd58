"""Frequency sets that should fail, and how the numerical checks see it.

Run: python demos/negative_controls.py
"""

import numpy as np

from rieszsplit.analysis import (Polynomial, completeness_residual, gram_trend,
                                 integers_without_zero, kadec_sets, lee_set)

one = Polynomial((1.0,))

first, second = kadec_sets(2000)
print("two sets that each work for length 1/2; their union on length 1:")
for g in gram_trend(np.concatenate([first, second]), 1.0, (64, 128, 256, 512, 1024)):
    print(f"  n={g.n:5d}  smallest Gram eigenvalue {g.lambda_min:.4f}")
for part in (first, second):
    g = gram_trend(part, 0.5, (256, 1024))
    print(f"  a single set on length 1/2: {g[0].lambda_min:.4f} -> {g[1].lambda_min:.4f}")

z0 = integers_without_zero(2000)
print("integers without 0, distance of the constant 1 from their span:",
      [round(completeness_residual(z0, 1.0, one, n), 12) for n in (64, 256, 1024)])

lam = lee_set(4000)
print("even integers shifted on the negative side, on [1/2, 1):",
      [round(completeness_residual(lam, 0.5, one, n, offset=0.5), 4) for n in (64, 256, 1024)])
