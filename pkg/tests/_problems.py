"""Random block problems drawn from the same setting the stage driver uses."""

from fractions import Fraction

import numpy as np

from rieszsplit.avdonin import FrequencyMap
from rieszsplit.numerics import ExactScalar, golden, sqrt2inv
from rieszsplit.rearrange import block_problems, smallest_block
from rieszsplit.rounding import build_pair


def random_stage(rng, half_width=6000):
    """A rounding pair into (Z+1/2)/c and a jittered outer map from there into Z+1/2."""
    kind = rng.integers(0, 3)
    if kind == 0:
        p, q, r = (int(x) for x in rng.integers(1, 12, size=3))
        total = Fraction(p + q, p + q + r)
        a = total * Fraction(p, p + q)
    else:
        base = sqrt2inv() if kind == 1 else golden()
        total = base
        a = ExactScalar(Fraction(int(rng.integers(1, 12)), 20))
    total = total if isinstance(total, ExactScalar) else ExactScalar(total)
    a = a if isinstance(a, ExactScalar) else ExactScalar(a)
    one = ExactScalar(Fraction(1))
    outer, _, _ = build_pair(total, one - total, total=one)
    sigma = outer.realize(-half_width, half_width)
    t = sigma.targets.copy()
    for _ in range(int(rng.integers(0, 2000))):
        i = int(rng.integers(0, len(t) - 1))
        t[i], t[i + 1] = t[i + 1], t[i]
    sigma = FrequencyMap(sigma.source, sigma.target, sigma.first_index, t)
    phi, psi, period = build_pair(a, total - a, total=total)
    return phi, psi, sigma, period


def random_problems(count, seed=0, delta=None):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        phi, psi, sigma, period = random_stage(rng)
        d = delta if delta is not None else float(rng.choice([1 / 16, 1 / 48, 1 / 192]))
        M_hat = max(sigma.displacement_bound, 1 / (2 * float(phi.target.a)))
        K0 = smallest_block(M_hat, phi.target.a, d, period)
        problems = block_problems(phi, psi, sigma, K0)
        take = rng.permutation(len(problems))[:25]
        out.extend(problems[i] for i in take)
    return out[:count]
