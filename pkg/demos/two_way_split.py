"""Split Z + 1/2 between intervals of lengths 1/sqrt2 and 1 - 1/sqrt2.

Run: python demos/two_way_split.py
"""

import numpy as np

from rieszsplit.avdonin import check_riesz_hypothesis
from rieszsplit.compose import PartitionSpec, build_partition
from rieszsplit.lattice import Window
from rieszsplit.numerics import parse_scalar

spec = PartitionSpec((parse_scalar("sqrt2inv"), parse_scalar("1-sqrt2inv")), K=1)
result = build_partition(spec, Window.of(-6, 25))

for m, b in zip(result.maps, result.lengths):
    t = np.sort(m.targets)
    shown = t[(t >= -6) & (t < 25)]
    print(f"{m.label} (length {float(b):.6f}): m + 1/2 for m in {shown.tolist()}")
    check = check_riesz_hypothesis(m, b)
    print(f"  block average displacement {check.epsilon_hat:.3g} "
          f"< {check.threshold:.3g}: {check.passed}")

ok, msg = result.check_partition()
print(f"disjoint and covering the window: {ok} ({msg})")
