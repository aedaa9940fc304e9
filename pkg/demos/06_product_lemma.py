"""
The product inequality, by enumeration
======================================

For independent pairs (u_i, v_i) on finite supports,

    E|prod u - prod v|^p <= k^p C^(1-1/k) D^(1/k)

with C the largest pk-th moment of any u_i or v_i and D the largest pk-th
moment of u_i - v_i.  Everything here is computed exactly.
"""

import numpy as np

from pathsens import LemmaInstance, lemma_trials, product_lemma_check

# two deterministic factors: u = (2, 2), v = (1, 1)
point = np.array([[1.0, 2.0, 1.0]])  # (probability, u, v)
chk = product_lemma_check(LemmaInstance(2, (point, point)))
print("worked instance: lhs=%g rhs=%g holds=%s" % chk)

for k in (1, 2, 3, 4):
    for p in (2, 4):
        ratios = [c.lhs / c.rhs for _, _, c in lemma_trials(k, p, 500, seed=1) if c.rhs > 0]
        print("k=%d p=%d  worst lhs/rhs over 500 instances: %.4f" % (k, p, max(ratios)))
