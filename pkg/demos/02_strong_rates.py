"""
Strong convergence of the tangent processes
===========================================

Coupled fine/coarse paths share their Brownian increments, so the level
difference sup|fine - coarse| measures the strong error.  Its second moment
should fall like h for S, dS and ddS alike.
"""

from pathsens import SimConfig, fit_rate, strong_error_levels

cfg = SimConfig(theta=0.1, S0=1.0, T=1.0, N=16)
# coarse levels are still pre-asymptotic; start at level 3 (h = 2^-7)
records = strong_error_levels("trig", cfg, 2, 10_000, range(3, 9), base_seed=11)

for q in ("state", "tangent1", "tangent2"):
    recs = [r for r in records if r.quantity == q]
    print(q)
    for r in recs:
        print("  h=%-10.6g E[sup|diff|^2]=%.4e  se=%.1e" % (r.h, r.estimate, r.std_error))
    fit = fit_rate(recs)
    print("  slope %.3f +/- %.3f   (expect 1)\n" % (fit.slope, fit.slope_ci_halfwidth))
