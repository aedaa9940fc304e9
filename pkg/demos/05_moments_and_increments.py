"""
Sup moments and increments in time
==================================

Two ingredients of the convergence argument, estimated directly:
E[sup|dS|^p] stays bounded as the grid is refined, and
E|dS_(t0+d) - dS_t0|^2 grows linearly in the gap d.

The grid maximum only sees the path at grid points, so on coarse grids it
sits below the finer-grid value.  The gap shrinks like h^(1/2).
"""

from pathsens import SimConfig, loglog_fit, sup_moments, time_increment_moments

base = SimConfig(theta=0.1, S0=1.0, T=1.0)
print("E[sup|dS|^p]")
for N in (16, 64, 256, 1024):
    ests = sup_moments("trig", base.with_(N=N), (2, 4, 8), 20_000, ("tangent1",), base_seed=N)
    print("  N=%-5d " % N + "  ".join("p=%d %.4e+-%.1e" % (m.p, m.estimate, m.std_error) for m in ests))

deltas = (2.0**-6, 2.0**-5, 2.0**-4, 2.0**-3, 2.0**-2)
moms = time_increment_moments("trig", base.with_(N=256), 0.25, deltas, 2, 20_000, base_seed=9)
print("\nE|dS(0.25+d) - dS(0.25)|^2")
for m in moms:
    print("  d=%-9.6g %.4e" % (m.delta, m.estimate))
print("  slope %.3f (expect 1)" % loglog_fit(deltas, [m.estimate for m in moms])[0])
