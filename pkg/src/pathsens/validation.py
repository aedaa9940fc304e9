"""Deterministic consistency checks on the discrete scheme.

* jet route vs explicit recursions (same paths, componentwise);
* Richardson ratios of central finite differences against dS and ddS.

A finite-difference error is only informative when it clears the rounding
noise of the bumped simulations.  That noise is estimated per grid point
as ``c_k * u * sqrt(n+1) * max_{m<=n} |S_m| / eps**k`` (u the unit
roundoff, k the derivative order, c_1 = 4, c_2 = 16); the constants bound
the noise actually observed on all built-in models with some margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import SimConfig, simulate_batch, simulate_batch_jet
from .models import get_model
from .oracle import fd_second, fd_tangent
from .paths import sample_block

UNIT_ROUNDOFF = float(np.finfo(np.float64).eps)
_NOISE_CONST = {1: 4.0, 2: 16.0}


@dataclass(frozen=True)
class CheckResult:
    name: str
    model_id: str
    low: float
    high: float
    lower: float
    upper: float
    n_checked: int
    passed: bool
    note: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        s = (f"{verdict} {self.name} [{self.model_id}] observed [{self.low:.6g}, {self.high:.6g}] "
             f"allowed [{self.lower:.6g}, {self.upper:.6g}] over {self.n_checked} values")
        return s + (f" ({self.note})" if self.note else "")


def normwise_relative_difference(x, y, axis=-1):
    """max |x - y| / max(|x|, |y|) along ``axis``; 0 where both are zero."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    num = np.max(np.abs(x - y), axis=axis)
    den = np.maximum(np.max(np.abs(x), axis=axis), np.max(np.abs(y), axis=axis))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def jet_explicit_check(model, config: SimConfig, n_paths, base_seed=0, tol=1e-10):
    """Largest relative gap between the jet and explicit routes over all paths.

    The relative difference is taken per path and per component series
    (S, dS, ddS) in the max norm over the grid.
    """
    model = get_model(model)
    cfg = config.with_(order=2)
    dW = sample_block(base_seed, 0, n_paths, cfg.N, cfg.h)
    explicit = simulate_batch(model, cfg, dW)
    jet = simulate_batch_jet(model, cfg, dW)
    rel = normwise_relative_difference(explicit, jet, axis=1)
    worst = float(np.max(rel))
    return CheckResult(f"jet-vs-explicit N={cfg.N}", model.model_id, 0.0, worst, 0.0, tol,
                       int(rel.size), worst <= tol)


def noise_floor(S_grid, eps, k):
    """Rounding-noise estimate of a k-th order central difference per grid point."""
    S_grid = np.asarray(S_grid, dtype=np.float64)
    n = np.arange(S_grid.shape[-1])
    running = np.maximum.accumulate(np.abs(S_grid), axis=-1)
    return _NOISE_CONST[k] * UNIT_ROUNDOFF * np.sqrt(n + 1) * running / eps**k


def richardson_ratios(model, config: SimConfig, dW, k, eps=(1e-3, 1e-4), guard=10.0):
    """Error ratios |FD(eps0) - X| / |FD(eps1) - X| where FD(eps1) clears the noise.

    X is dS (k = 1) or ddS (k = 2) from the explicit recursion.  Returns the
    ratios at qualifying grid points (t = 0 excluded) and the number of
    candidate points.
    """
    model = get_model(model)
    cfg = config.with_(order=2)
    grid = simulate_batch(model, cfg, dW)
    fd = fd_tangent if k == 1 else fd_second
    exact = grid[..., k]
    e0 = np.abs(fd(model, cfg, dW, eps[0]) - exact)
    e1 = np.abs(fd(model, cfg, dW, eps[1]) - exact)
    ok = e1 > guard * noise_floor(grid[..., 0], eps[1], k)
    ok[..., 0] = False
    return e0[ok] / e1[ok], int(ok[..., 1:].size)


def richardson_check(model, config: SimConfig, n_paths, k, base_seed=0,
                     eps=(1e-3, 1e-4), band=(50.0, 200.0), guard=10.0,
                     require_points=False):
    """All qualifying Richardson ratios must fall inside ``band``.

    With ``require_points`` the check also fails when no grid point clears
    the noise guard; otherwise such a check passes vacuously and says so.
    """
    model = get_model(model)
    dW = sample_block(base_seed, 0, n_paths, config.N, config.h)
    ratios, candidates = richardson_ratios(model, config, dW, k, eps, guard)
    name = f"fd-{'tangent' if k == 1 else 'second'} eps={eps[0]:g}/{eps[1]:g} N={config.N}"
    if ratios.size == 0:
        note = f"no grid point above {guard:g}x noise floor out of {candidates}"
        return CheckResult(name, model.model_id, math.nan, math.nan, band[0], band[1], 0,
                           not require_points, note)
    lo, hi = float(ratios.min()), float(ratios.max())
    return CheckResult(name, model.model_id, lo, hi, band[0], band[1], int(ratios.size),
                       band[0] <= lo and hi <= band[1], f"{ratios.size} of {candidates} points above noise floor")


def validate(model, config: SimConfig, n_paths, base_seed=0):
    """Jet/explicit agreement and both Richardson checks for one model."""
    n_fd = min(n_paths, 200)
    return [
        jet_explicit_check(model, config, n_paths, base_seed),
        richardson_check(model, config, n_fd, 1, base_seed),
        richardson_check(model, config, n_fd, 2, base_seed),
    ]
