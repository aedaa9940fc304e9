"""Second-order jets in a single parameter theta.

A :class:`Jet2` holds (f, df/dtheta, d2f/dtheta2) with the raw second
derivative (not divided by 2).  Components may be floats or numpy arrays
of equal shape, in which case a jet carries many paths at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import DIFFUSION, DRIFT, get_model


@dataclass(frozen=True)
class Jet2:
    v0: float
    v1: float = 0.0
    v2: float = 0.0

    @classmethod
    def constant(cls, c):
        return cls(c, 0.0 * c, 0.0 * c)

    @classmethod
    def variable(cls, x):
        """The independent variable seeded at x: (x, 1, 0)."""
        return cls(x, 1.0 + 0.0 * x, 0.0 * x)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.v0 + other.v0, self.v1 + other.v1, self.v2 + other.v2)
        return Jet2(self.v0 + other, self.v1, self.v2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v0, -self.v1, -self.v2)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return jet_mul(self, other)
        return Jet2(self.v0 * other, self.v1 * other, self.v2 * other)

    __rmul__ = __mul__

    def isfinite(self):
        return bool(np.all(np.isfinite(self.v0)) and np.all(np.isfinite(self.v1))
                    and np.all(np.isfinite(self.v2)))

    def astuple(self):
        return (self.v0, self.v1, self.v2)


def jet_mul(x: Jet2, y: Jet2) -> Jet2:
    """Leibniz rule truncated at second order."""
    return Jet2(
        x.v0 * y.v0,
        x.v0 * y.v1 + x.v1 * y.v0,
        x.v0 * y.v2 + 2.0 * x.v1 * y.v1 + x.v2 * y.v0,
    )


def jet_apply_coeff(model, which, theta, x: Jet2) -> Jet2:
    """Compose f(Theta, X) where Theta = (theta, 1, 0) is the seeded parameter.

    Chain rule at second order::

        v1 = f_t + f_s x1
        v2 = f_tt + 2 f_ts x1 + f_ss x1^2 + f_s x2
    """
    model = get_model(model)
    if which not in (DRIFT, DIFFUSION):
        raise ValueError(f"which must be 'drift' or 'diffusion', got {which!r}")
    s = x.v0
    f = model.partial(which, 0, 0)(theta, s)
    ft = model.partial(which, 1, 0)(theta, s)
    fs = model.partial(which, 0, 1)(theta, s)
    ftt = model.partial(which, 2, 0)(theta, s)
    fts = model.partial(which, 1, 1)(theta, s)
    fss = model.partial(which, 0, 2)(theta, s)
    x1, x2 = x.v1, x.v2
    return Jet2(
        f,
        ft + fs * x1,
        ftt + 2.0 * fts * x1 + fss * x1 * x1 + fs * x2,
    )
