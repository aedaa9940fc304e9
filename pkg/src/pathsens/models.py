"""Registry of parametric scalar SDE models.

A model supplies the drift a(theta, S) and diffusion b(theta, S) together
with every partial derivative of total order <= 2 in (theta, S).  Each
partial is available two ways:

* as a numpy-aware callable ``f(theta, S)`` (``ModelCoefficients.partial``),
  used by :func:`eval_partial` and by the jet arithmetic in
  :mod:`pathsens.taylor`;
* through a fused numba kernel ``kernel(theta, S, consts)`` returning all
  twelve values at once, used by the compiled Euler-Maruyama loops.

Both are written out analytically; finite differences are only ever used
as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np
from numba import njit

from .errors import RegistryError, UnsupportedOrderError

DRIFT = "drift"
DIFFUSION = "diffusion"

#: (theta-order, S-order) pairs in the order the fused kernel returns them,
#: first for the drift and then for the diffusion.
PARTIAL_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@dataclass(frozen=True)
class DerivativeBounds:
    """Uniform bounds on all partials of order >= 1.

    ``None`` means no such bound exists (the model lies outside the
    bounded-derivative assumptions, e.g. GBM where da/dtheta = S).
    """

    L_a: float | None
    L_b: float | None


@dataclass(frozen=True)
class ModelInfo:
    model_id: str
    parameters: Mapping[str, float]
    description: str


@dataclass(frozen=True, eq=False)
class ModelCoefficients:
    model_id: str
    fixed_constants: Mapping[str, float]
    partials: Mapping[tuple, Callable]
    kernel: Callable
    bounds: DerivativeBounds = DerivativeBounds(None, None)
    description: str = ""
    consts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        missing = [
            (which, i, j)
            for which in (DRIFT, DIFFUSION)
            for i, j in PARTIAL_ORDERS
            if (which, i, j) not in self.partials
        ]
        if missing:
            raise ValueError(f"model {self.model_id!r} lacks partials {missing}")
        object.__setattr__(self, "fixed_constants", MappingProxyType(dict(self.fixed_constants)))
        object.__setattr__(self, "partials", MappingProxyType(dict(self.partials)))
        consts = np.array(list(self.fixed_constants.values()) or [0.0], dtype=np.float64)
        consts.setflags(write=False)
        object.__setattr__(self, "consts", consts)

    def partial(self, which, i, j):
        _check_order(which, i, j)
        return self.partials[(which, i, j)]

    def coefficients(self, theta, S):
        """All twelve partials at a point, in kernel order."""
        return self.kernel(float(theta), float(S), self.consts)

    def __repr__(self):
        consts = ", ".join(f"{k}={v!r}" for k, v in self.fixed_constants.items())
        return f"ModelCoefficients({self.model_id}{', ' if consts else ''}{consts})"


def _check_order(which, i, j):
    if which not in (DRIFT, DIFFUSION):
        raise ValueError(f"which must be 'drift' or 'diffusion', got {which!r}")
    if i < 0 or j < 0:
        raise ValueError("derivative orders must be non-negative")
    if i + j > 2:
        raise UnsupportedOrderError(f"total derivative order {i + j} > 2 is not supported")


def _const(value):
    # 0*(theta + S) keeps array broadcasting for vectorised evaluation
    return lambda theta, S: value + 0.0 * (theta + S)


# -- geometric Brownian motion: a = theta*S, b = sigma*S -------------------

@njit(cache=True, nogil=True)
def _gbm_kernel(theta, S, c):
    sigma = c[0]
    return (theta * S, S, theta, 0.0, 1.0, 0.0,
            sigma * S, 0.0, sigma, 0.0, 0.0, 0.0)


def gbm(sigma=0.2):
    partials = {
        (DRIFT, 0, 0): lambda theta, S: theta * S,
        (DRIFT, 1, 0): lambda theta, S: S + 0.0 * theta,
        (DRIFT, 0, 1): lambda theta, S: theta + 0.0 * S,
        (DRIFT, 2, 0): _const(0.0),
        (DRIFT, 1, 1): _const(1.0),
        (DRIFT, 0, 2): _const(0.0),
        (DIFFUSION, 0, 0): lambda theta, S: sigma * S + 0.0 * theta,
        (DIFFUSION, 1, 0): _const(0.0),
        (DIFFUSION, 0, 1): _const(sigma),
        (DIFFUSION, 2, 0): _const(0.0),
        (DIFFUSION, 1, 1): _const(0.0),
        (DIFFUSION, 0, 2): _const(0.0),
    }
    return ModelCoefficients(
        "gbm", {"sigma": float(sigma)}, partials, _gbm_kernel,
        DerivativeBounds(None, None),
        "geometric Brownian motion dS = theta*S dt + sigma*S dW; closed form "
        "available; da/dtheta = S is unbounded",
    )


# -- trig: a = sin(theta + S), b = 0.5 + 0.25*cos(theta - S) ---------------

@njit(cache=True, nogil=True)
def _trig_kernel(theta, S, c):
    sp = math.sin(theta + S)
    cp = math.cos(theta + S)
    sm = math.sin(theta - S)
    cm = math.cos(theta - S)
    return (sp, cp, cp, -sp, -sp, -sp,
            0.5 + 0.25 * cm, -0.25 * sm, 0.25 * sm,
            -0.25 * cm, 0.25 * cm, -0.25 * cm)


def trig():
    partials = {
        (DRIFT, 0, 0): lambda theta, S: np.sin(theta + S),
        (DRIFT, 1, 0): lambda theta, S: np.cos(theta + S),
        (DRIFT, 0, 1): lambda theta, S: np.cos(theta + S),
        (DRIFT, 2, 0): lambda theta, S: -np.sin(theta + S),
        (DRIFT, 1, 1): lambda theta, S: -np.sin(theta + S),
        (DRIFT, 0, 2): lambda theta, S: -np.sin(theta + S),
        (DIFFUSION, 0, 0): lambda theta, S: 0.5 + 0.25 * np.cos(theta - S),
        (DIFFUSION, 1, 0): lambda theta, S: -0.25 * np.sin(theta - S),
        (DIFFUSION, 0, 1): lambda theta, S: 0.25 * np.sin(theta - S),
        (DIFFUSION, 2, 0): lambda theta, S: -0.25 * np.cos(theta - S),
        (DIFFUSION, 1, 1): lambda theta, S: 0.25 * np.cos(theta - S),
        (DIFFUSION, 0, 2): lambda theta, S: -0.25 * np.cos(theta - S),
    }
    return ModelCoefficients(
        "trig", {}, partials, _trig_kernel,
        DerivativeBounds(1.0, 0.25),
        "a = sin(theta+S), b = 0.5 + 0.25*cos(theta-S); all derivatives bounded",
    )


# -- additive noise: a = theta, b = beta -----------------------------------

@njit(cache=True, nogil=True)
def _additive_kernel(theta, S, c):
    return (theta, 1.0, 0.0, 0.0, 0.0, 0.0,
            c[0], 0.0, 0.0, 0.0, 0.0, 0.0)


def additive(beta=1.0):
    partials = {
        (DRIFT, 0, 0): lambda theta, S: theta + 0.0 * S,
        (DRIFT, 1, 0): _const(1.0),
        (DRIFT, 0, 1): _const(0.0),
        (DRIFT, 2, 0): _const(0.0),
        (DRIFT, 1, 1): _const(0.0),
        (DRIFT, 0, 2): _const(0.0),
        (DIFFUSION, 0, 0): _const(float(beta)),
        (DIFFUSION, 1, 0): _const(0.0),
        (DIFFUSION, 0, 1): _const(0.0),
        (DIFFUSION, 2, 0): _const(0.0),
        (DIFFUSION, 1, 1): _const(0.0),
        (DIFFUSION, 0, 2): _const(0.0),
    }
    return ModelCoefficients(
        "additive", {"beta": float(beta)}, partials, _additive_kernel,
        DerivativeBounds(1.0, 0.0),
        "a = theta, b = beta; Euler-Maruyama is exact at grid points",
    )


_FACTORIES = {"gbm": gbm, "trig": trig, "additive": additive}
_DEFAULTS = {"gbm": {"sigma": 0.2}, "trig": {}, "additive": {"beta": 1.0}}
_CACHE: dict = {}


def register(model_id, factory, defaults=None):
    """Add a model factory; ``factory(**params)`` must return ModelCoefficients."""
    _FACTORIES[model_id] = factory
    _DEFAULTS[model_id] = dict(defaults or {})
    _CACHE.pop(model_id, None)


def get_model(model_id, **params) -> ModelCoefficients:
    if isinstance(model_id, ModelCoefficients):
        return model_id
    try:
        factory = _FACTORIES[model_id]
    except KeyError:
        raise RegistryError(f"unknown model {model_id!r}; known: {sorted(_FACTORIES)}") from None
    unknown = set(params) - set(_DEFAULTS[model_id])
    if unknown:
        raise ValueError(f"model {model_id!r} has no parameters {sorted(unknown)}")
    if not params:
        if model_id not in _CACHE:
            _CACHE[model_id] = factory()
        return _CACHE[model_id]
    return factory(**params)


def list_models():
    out = []
    for model_id in _FACTORIES:
        m = get_model(model_id)
        out.append(ModelInfo(model_id, MappingProxyType(dict(_DEFAULTS[model_id])), m.description))
    return out


def eval_partial(model, which, i, j, theta, S):
    """d^{i+j} f / dtheta^i dS^j at (theta, S), f the drift or diffusion."""
    model = get_model(model)
    return model.partial(which, i, j)(theta, S)


def derivative_bounds(model) -> DerivativeBounds:
    return get_model(model).bounds
