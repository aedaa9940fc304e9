"""Independent ground truths for the engine.

* the geometric Brownian motion closed form and its theta-derivative;
* central finite differences of the discrete scheme in theta with the
  Brownian increments held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import SimConfig, simulate_batch
from .models import get_model
from .paths import IncrementGrid


@dataclass(frozen=True, eq=False)
class ClosedFormPath:
    t: np.ndarray
    S: np.ndarray
    dS: np.ndarray


def gbm_closed_form(theta, sigma, S0, W, times) -> ClosedFormPath:
    """S_t = S0 exp((theta - sigma^2/2) t + sigma W_t) and dS_t/dtheta = t S_t.

    ``W`` and ``times`` may carry leading batch dimensions as long as their
    shapes agree.
    """
    W = np.asarray(W, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if W.shape[-1:] != times.shape[-1:]:
        raise ValueError(f"W has {W.shape[-1:]} points but times has {times.shape[-1:]}")
    if not S0 > 0:
        raise ValueError(f"S0 must be positive, got {S0}")
    S = S0 * np.exp((theta - 0.5 * sigma * sigma) * times + sigma * W)
    return ClosedFormPath(np.broadcast_to(times, S.shape), S, times * S)


def default_bump(theta):
    return 1e-4 * max(1.0, abs(theta))


def _state_grids(model, config, increments, thetas):
    dW = increments.increments if isinstance(increments, IncrementGrid) else increments
    cfg = config.with_(order=0)
    return [simulate_batch(model, cfg.with_(theta=th), dW)[..., 0] for th in thetas]


def fd_tangent(model, config: SimConfig, increments, eps=None):
    """(S(theta+eps) - S(theta-eps)) / (2 eps) on every grid point.

    ``increments`` is an :class:`IncrementGrid` (result has shape (N+1,)) or
    a (m, N) block (result (m, N+1)).
    """
    model = get_model(model)
    eps = default_bump(config.theta) if eps is None else eps
    if not eps > 0:
        raise ValueError(f"bump must be positive, got {eps}")
    up, down = _state_grids(model, config, increments, (config.theta + eps, config.theta - eps))
    fd = (up - down) / (2.0 * eps)
    return fd[0] if isinstance(increments, IncrementGrid) else fd


def fd_second(model, config: SimConfig, increments, eps=None):
    """(S(theta+eps) - 2 S(theta) + S(theta-eps)) / eps^2 on every grid point."""
    model = get_model(model)
    eps = default_bump(config.theta) if eps is None else eps
    if not eps > 0:
        raise ValueError(f"bump must be positive, got {eps}")
    th = config.theta
    up, mid, down = _state_grids(model, config, increments, (th + eps, th, th - eps))
    fd = (up - 2.0 * mid + down) / (eps * eps)
    return fd[0] if isinstance(increments, IncrementGrid) else fd
