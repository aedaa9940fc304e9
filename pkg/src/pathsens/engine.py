"""Euler-Maruyama recursions for the state and its theta-sensitivities.

The explicit recursions live in one compiled function, :func:`_step`, shared
by the single-step API, the grid-recording batch kernel and the coupled
coarse/fine kernels used for Monte Carlo.  :func:`simulate_path_jet` is the
independent route: it runs the plain state recursion in :class:`Jet2`
arithmetic using the model's per-partial numpy callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import DivergenceError
from .models import ModelCoefficients, get_model
from .paths import IncrementGrid, coarsen
from .taylor import Jet2, jet_apply_coeff

__all__ = [
    "SimConfig", "PathState", "PathResult", "em_step", "simulate_path",
    "simulate_coupled", "simulate_path_jet", "simulate_batch",
    "simulate_batch_jet", "coupled_batch", "sup_abs_batch",
]


@dataclass(frozen=True)
class SimConfig:
    """Parameter value, initial data and grid for one simulation.

    ``N`` is the number of steps on [0, T]; the studies in
    :mod:`pathsens.analysis` treat it as the level-0 baseline.
    """

    theta: float = 0.1
    S0: float = 1.0
    dS0: float = 0.0
    ddS0: float = 0.0
    T: float = 1.0
    N: int = 16
    order: int = 2

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {self.order}")

    @property
    def h(self):
        return self.T / self.N

    def with_(self, **changes):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)


class PathState(NamedTuple):
    S: float
    dS: float = 0.0
    ddS: float = 0.0


@dataclass(frozen=True, eq=False)
class PathResult:
    t: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    ddS: np.ndarray

    @property
    def N(self):
        return len(self.t) - 1

    @property
    def sup_abs(self):
        """(max |S|, max |dS|, max |ddS|) over the grid."""
        return (float(np.max(np.abs(self.S))), float(np.max(np.abs(self.dS))),
                float(np.max(np.abs(self.ddS))))

    def state(self, n):
        return PathState(float(self.S[n]), float(self.dS[n]), float(self.ddS[n]))


# -- compiled core ---------------------------------------------------------

@njit(cache=True, nogil=True)
def _step(c, S, dS, ddS, h, dW, order):
    a, a_t, a_s, a_tt, a_ts, a_ss, b, b_t, b_s, b_tt, b_ts, b_ss = c
    S1 = S + a * h + b * dW
    dS1 = dS
    ddS1 = ddS
    if order >= 1:
        dS1 = dS + (a_t + a_s * dS) * h + (b_t + b_s * dS) * dW
    if order >= 2:
        ddS1 = (ddS + (a_tt + 2.0 * a_ts * dS + a_ss * dS * dS + a_s * ddS) * h
                + (b_tt + 2.0 * b_ts * dS + b_ss * dS * dS + b_s * ddS) * dW)
    return S1, dS1, ddS1


@njit(cache=True, nogil=True)
def _finite3(x, y, z):
    return math.isfinite(x) and math.isfinite(y) and math.isfinite(z)


@njit(cache=True, nogil=True)
def _grid_kernel(kernel, consts, theta, S0, dS0, ddS0, h, dW, order, out):
    m, N = dW.shape
    fail = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        S, dS, ddS = S0, dS0, ddS0
        out[i, 0, 0] = S
        out[i, 0, 1] = dS
        out[i, 0, 2] = ddS
        for n in range(N):
            c = kernel(theta, S, consts)
            S, dS, ddS = _step(c, S, dS, ddS, h, dW[i, n], order)
            if not _finite3(S, dS, ddS):
                fail[i] = n
                break
            out[i, n + 1, 0] = S
            out[i, n + 1, 1] = dS
            out[i, n + 1, 2] = ddS
    return fail


@njit(cache=True, nogil=True)
def _sup_kernel(kernel, consts, theta, S0, dS0, ddS0, h, dW, order, sup, last):
    m, N = dW.shape
    fail = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        S, dS, ddS = S0, dS0, ddS0
        m0, m1, m2 = abs(S), abs(dS), abs(ddS)
        for n in range(N):
            c = kernel(theta, S, consts)
            S, dS, ddS = _step(c, S, dS, ddS, h, dW[i, n], order)
            if not _finite3(S, dS, ddS):
                fail[i] = n
                break
            m0 = max(m0, abs(S))
            m1 = max(m1, abs(dS))
            m2 = max(m2, abs(ddS))
        sup[i, 0] = m0
        sup[i, 1] = m1
        sup[i, 2] = m2
        last[i, 0] = S
        last[i, 1] = dS
        last[i, 2] = ddS
    return fail


@njit(cache=True, nogil=True)
def _coupled_kernel(kernel, consts, theta, S0, dS0, ddS0, h, dW, order, supdiff, fine_last, coarse_last):
    m, N = dW.shape
    fail = np.full(m, -1, dtype=np.int64)
    h2 = 2.0 * h
    for i in range(m):
        fS, fdS, fddS = S0, dS0, ddS0
        cS, cdS, cddS = S0, dS0, ddS0
        d0 = 0.0
        d1 = 0.0
        d2 = 0.0
        for k in range(N // 2):
            w0 = dW[i, 2 * k]
            w1 = dW[i, 2 * k + 1]
            c = kernel(theta, fS, consts)
            fS, fdS, fddS = _step(c, fS, fdS, fddS, h, w0, order)
            c = kernel(theta, fS, consts)
            fS, fdS, fddS = _step(c, fS, fdS, fddS, h, w1, order)
            c = kernel(theta, cS, consts)
            cS, cdS, cddS = _step(c, cS, cdS, cddS, h2, w0 + w1, order)
            if not (_finite3(fS, fdS, fddS) and _finite3(cS, cdS, cddS)):
                fail[i] = 2 * k
                break
            d0 = max(d0, abs(fS - cS))
            d1 = max(d1, abs(fdS - cdS))
            d2 = max(d2, abs(fddS - cddS))
        supdiff[i, 0] = d0
        supdiff[i, 1] = d1
        supdiff[i, 2] = d2
        fine_last[i, 0] = fS
        fine_last[i, 1] = fdS
        fine_last[i, 2] = fddS
        coarse_last[i, 0] = cS
        coarse_last[i, 1] = cdS
        coarse_last[i, 2] = cddS
    return fail


def _raise_on_fail(fail, path_offset=None):
    bad = np.flatnonzero(fail >= 0)
    if bad.size:
        i = int(bad[0])
        raise DivergenceError(fail[i], None if path_offset is None else path_offset + i)


def _args(model, config):
    return (model.kernel, model.consts, float(config.theta), float(config.S0),
            float(config.dS0), float(config.ddS0))


def _as_block(dW):
    dW = np.asarray(dW, dtype=np.float64)
    if dW.ndim == 1:
        dW = dW[None, :]
    return np.ascontiguousarray(dW)


# -- public API ------------------------------------------------------------

def em_step(model, theta, state, h, dW, order=2, step=0) -> PathState:
    """One explicit step with coefficients frozen at the pre-step state.

    ``step`` only labels a :class:`DivergenceError`.
    """
    if not h > 0:
        raise ValueError(f"timestep must be positive, got {h}")
    model = get_model(model)
    state = PathState(*state)
    c = model.coefficients(theta, state.S)
    out = _step(c, float(state.S), float(state.dS), float(state.ddS), float(h), float(dW), int(order))
    if not all(math.isfinite(v) for v in out):
        raise DivergenceError(step)
    return PathState(*out)


def simulate_batch(model, config: SimConfig, dW, path_offset=None):
    """Grid values for many paths; ``dW`` has shape (m, N).

    Returns an array of shape (m, N+1, 3) holding S, dS, ddS.
    """
    model = get_model(model)
    dW = _as_block(dW)
    if dW.shape[1] != config.N:
        raise ValueError(f"expected {config.N} increments per path, got {dW.shape[1]}")
    out = np.empty((dW.shape[0], config.N + 1, 3))
    fail = _grid_kernel(*_args(model, config), config.h, dW, config.order, out)
    _raise_on_fail(fail, path_offset)
    return out


def _check_grid(config, increments):
    if increments.N != config.N:
        raise ValueError(f"grid has {increments.N} steps, config expects {config.N}")
    if not math.isclose(increments.h, config.h, rel_tol=1e-12):
        raise ValueError(f"grid timestep {increments.h} does not match T/N = {config.h}")


def _result(config, grid):
    t = np.arange(config.N + 1) * config.h
    return PathResult(t, grid[:, 0].copy(), grid[:, 1].copy(), grid[:, 2].copy())


def simulate_path(model, config: SimConfig, increments: IncrementGrid) -> PathResult:
    _check_grid(config, increments)
    grid = simulate_batch(model, config, increments.increments)[0]
    return _result(config, grid)


def simulate_coupled(model, config: SimConfig, fine: IncrementGrid):
    """Fine path on ``fine`` and coarse path on its pairwise-summed grid."""
    if fine.N % 2:
        raise ValueError(f"coupled simulation needs an even step count, got {fine.N}")
    fine_res = simulate_path(model, config, fine)
    coarse_res = simulate_path(model, config.with_(N=config.N // 2), coarsen(fine))
    return fine_res, coarse_res


def simulate_batch_jet(model, config: SimConfig, dW, path_offset=None):
    """Jet-arithmetic counterpart of :func:`simulate_batch`.

    Runs S+ = S + a(Theta, S) h + b(Theta, S) dW with Theta = (theta, 1, 0),
    vectorised over the rows of ``dW``.
    """
    model = get_model(model)
    dW = _as_block(dW)
    m, N = dW.shape
    if N != config.N:
        raise ValueError(f"expected {config.N} increments per path, got {N}")
    h = config.h
    theta = float(config.theta)
    ones = np.ones(m)
    x = Jet2(config.S0 * ones, config.dS0 * ones, config.ddS0 * ones)
    out = np.empty((m, N + 1, 3))
    out[:, 0, 0], out[:, 0, 1], out[:, 0, 2] = x.astuple()
    for n in range(N):
        # overflow surfaces as DivergenceError below
        with np.errstate(over="ignore", invalid="ignore"):
            a = jet_apply_coeff(model, "drift", theta, x)
            b = jet_apply_coeff(model, "diffusion", theta, x)
            x = x + a * h + b * dW[:, n]
        if not x.isfinite():
            bad = ~(np.isfinite(x.v0) & np.isfinite(x.v1) & np.isfinite(x.v2))
            i = int(np.flatnonzero(bad)[0])
            raise DivergenceError(n, None if path_offset is None else path_offset + i)
        out[:, n + 1, 0], out[:, n + 1, 1], out[:, n + 1, 2] = x.astuple()
    return out


def simulate_path_jet(model, config: SimConfig, increments: IncrementGrid) -> PathResult:
    _check_grid(config, increments)
    grid = simulate_batch_jet(model, config, increments.increments)[0]
    return _result(config, grid)


def sup_abs_batch(model, config: SimConfig, dW, path_offset=None):
    """Per-path grid sup of |S|, |dS|, |ddS| and terminal values, each (m, 3)."""
    model = get_model(model)
    dW = _as_block(dW)
    if dW.shape[1] != config.N:
        raise ValueError(f"expected {config.N} increments per path, got {dW.shape[1]}")
    m = dW.shape[0]
    sup = np.empty((m, 3))
    last = np.empty((m, 3))
    fail = _sup_kernel(*_args(model, config), config.h, dW, config.order, sup, last)
    _raise_on_fail(fail, path_offset)
    return sup, last


def coupled_batch(model, config: SimConfig, dW, path_offset=None):
    """Coupled fine (N steps) / coarse (N/2 steps) simulation of many paths.

    Returns ``(supdiff, fine_last, coarse_last)``, each of shape (m, 3):
    the sup over coarse grid points of |fine - coarse| for S, dS, ddS and
    the terminal values on both levels.
    """
    model = get_model(model)
    dW = _as_block(dW)
    m, N = dW.shape
    if N != config.N:
        raise ValueError(f"expected {config.N} increments per path, got {N}")
    if N % 2:
        raise ValueError(f"coupled simulation needs an even step count, got {N}")
    supdiff = np.empty((m, 3))
    fine_last = np.empty((m, 3))
    coarse_last = np.empty((m, 3))
    fail = _coupled_kernel(*_args(model, config), config.h, dW, config.order,
                           supdiff, fine_last, coarse_last)
    _raise_on_fail(fail, path_offset)
    return supdiff, fine_last, coarse_last
