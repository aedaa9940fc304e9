"""Reproducible Brownian increments on uniform grids.

Every path owns its own generator, keyed by ``(base_seed, path_index)``
through numpy's ``SeedSequence`` hash, so a path's increments never depend
on how many other paths were drawn before it or on which worker drew them.

Increments are rounded to the dyadic lattice ``2**-LATTICE_BITS``.  With
|W| far below ``2**(52 - LATTICE_BITS)`` every partial sum of increments is
then exact in double precision, which is what makes coarse/fine coupling
exact rather than exact-up-to-rounding.  The rounding perturbs each draw by
at most ``2**-(LATTICE_BITS + 1)`` (about 1e-10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LATTICE_BITS = 32
_SCALE = float(2**LATTICE_BITS)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    path_index: int

    def __post_init__(self):
        for name in ("base_seed", "path_index"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")


@dataclass(frozen=True, eq=False)
class IncrementGrid:
    """N Brownian increments with timestep h; increment n ~ N(0, h)."""

    h: float
    increments: np.ndarray

    def __post_init__(self):
        inc = np.ascontiguousarray(self.increments, dtype=np.float64)
        if inc.ndim != 1:
            raise ValueError("increments must be one-dimensional")
        if not self.h > 0:
            raise ValueError(f"timestep must be positive, got {self.h}")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def N(self):
        return len(self.increments)

    @property
    def T(self):
        return self.N * self.h

    def __len__(self):
        return self.N


def derive_seed(base_seed, *keys):
    """Hash ``base_seed`` and integer keys into a fresh 64-bit seed."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def path_generator(seed: SeedSpec) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed.base_seed), spawn_key=(int(seed.path_index),))
    return np.random.Generator(np.random.PCG64(ss))


def _check_grid_args(N, h):
    if int(N) != N or N < 1:
        raise ValueError(f"step count must be a positive integer, got {N}")
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"timestep must be positive and finite, got {h}")


def _quantise(x):
    return np.rint(x * _SCALE) / _SCALE


def _draw(seed, N, h, out):
    gen = path_generator(seed)
    gen.standard_normal(out=out)
    out *= math.sqrt(h)
    out[:] = _quantise(out)


def sample_increments(seed: SeedSpec, N: int, h: float) -> IncrementGrid:
    _check_grid_args(N, h)
    out = np.empty(int(N))
    _draw(seed, N, h, out)
    return IncrementGrid(float(h), out)


def sample_block(base_seed, start, count, N, h):
    """Increments for paths ``start .. start+count-1`` as a (count, N) array.

    Row i equals ``sample_increments(SeedSpec(base_seed, start + i), N, h)``.
    """
    _check_grid_args(N, h)
    out = np.empty((int(count), int(N)))
    for i in range(int(count)):
        _draw(SeedSpec(base_seed, start + i), N, h, out[i])
    return out


def coarsen_array(dW):
    """Pairwise sums along the last axis (a view-free copy)."""
    dW = np.asarray(dW)
    if dW.shape[-1] % 2:
        raise ValueError(f"cannot coarsen an odd number of steps ({dW.shape[-1]})")
    return dW[..., 0::2] + dW[..., 1::2]


def coarsen(fine: IncrementGrid) -> IncrementGrid:
    return IncrementGrid(2.0 * fine.h, coarsen_array(fine.increments))


def cumulative(grid) -> np.ndarray:
    """W at t_n = n*h for n = 1..N."""
    inc = grid.increments if isinstance(grid, IncrementGrid) else np.asarray(grid, dtype=np.float64)
    return np.cumsum(inc, axis=-1)
