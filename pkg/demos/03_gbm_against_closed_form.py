"""
GBM: Euler-Maruyama against the exact solution
==============================================

For geometric Brownian motion S and dS/dtheta are known in closed form on
the same Brownian path.  The RMS sup error of the scheme should scale like
h^(1/2).
"""

import math

from pathsens import SimConfig, closed_form_error_levels, loglog_fit

cfg = SimConfig(theta=0.05, S0=1.0, T=1.0, N=16)
recs = closed_form_error_levels("gbm", cfg, 2, 10_000, range(3, 9),
                                quantities=("state", "tangent1"), base_seed=3)

for q in ("state", "tangent1"):
    sub = [r for r in recs if r.quantity == q]
    rms = [math.sqrt(r.estimate) for r in sub]
    for r, e in zip(sub, rms):
        print("%-8s h=%-9.5g rms=%.4e" % (q, r.h, e))
    print("%-8s slope %.3f (expect 0.5)\n" % (q, loglog_fit([r.h for r in sub], rms)[0]))
