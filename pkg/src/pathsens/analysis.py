"""Monte Carlo studies: strong-error moments, rates, sup-moments, MLMC.

All studies fan paths out in fixed-size chunks whose layout depends only on
``(n_paths, N)``.  Per-path results land in slot arrays indexed by path
number and are reduced with numpy's pairwise summation, so every estimate
is identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .engine import SimConfig, coupled_batch, simulate_batch, sup_abs_batch
from .errors import InsufficientDataError, TooLargeError
from .models import get_model
from .oracle import gbm_closed_form
from .paths import derive_seed, sample_block

QUANTITIES = ("state", "tangent1", "tangent2")
_COLUMN = {q: i for i, q in enumerate(QUANTITIES)}
_ORDER = {"state": 0, "tangent1": 1, "tangent2": 2}

_CHUNK_ELEMS = 1 << 20
MAX_LEMMA_SUPPORT = 10**6


@dataclass(frozen=True)
class LevelRecord:
    level: int
    h: float
    p: float
    quantity: str
    estimate: float
    std_error: float
    n_paths: int


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    slope_ci_halfwidth: float
    records: tuple
    excluded: tuple = ()


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    quantity: str
    estimate: float
    std_error: float
    h: float
    n_paths: int


@dataclass(frozen=True)
class MLMCLevel:
    level: int
    h: float
    mean_dP: float
    var_dP: float
    n_paths: int


@dataclass(frozen=True)
class IncrementMoment:
    delta: float
    p: float
    quantity: str
    estimate: float
    std_error: float
    n_paths: int


class LemmaCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True, eq=False)
class LemmaInstance:
    """k independent factors, each a finite joint law of (u_i, v_i).

    ``supports[i]`` is a sequence of (probability, u, v) triples.
    """

    p: float
    supports: tuple = field(default_factory=tuple)

    def __post_init__(self):
        sup = []
        for i, triples in enumerate(self.supports):
            arr = np.asarray(triples, dtype=np.float64).reshape(-1, 3)
            if arr.shape[0] == 0:
                raise ValueError(f"factor {i} has empty support")
            if np.any(arr[:, 0] <= 0):
                raise ValueError(f"factor {i} has non-positive probabilities")
            if not math.isclose(arr[:, 0].sum(), 1.0, rel_tol=0, abs_tol=1e-12):
                raise ValueError(f"probabilities of factor {i} sum to {arr[:, 0].sum()}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"factor {i} has non-finite values")
            arr.setflags(write=False)
            sup.append(arr)
        if not sup:
            raise ValueError("need at least one factor")
        if self.p < 2:
            raise ValueError(f"moment order must be >= 2, got {self.p}")
        object.__setattr__(self, "supports", tuple(sup))

    @property
    def k(self):
        return len(self.supports)


# -- path fan-out ----------------------------------------------------------

def default_workers():
    return os.cpu_count() or 1


def _chunks(n_paths, N):
    size = max(1, min(n_paths, _CHUNK_ELEMS // max(N, 1)))
    return [(s, min(size, n_paths - s)) for s in range(0, n_paths, size)]


def _fan_out(task, n_paths, N, h, seed, workers=None):
    """Run ``task(dW, start)`` over all chunks and stitch the results by slot."""
    if n_paths < 1:
        raise ValueError(f"need at least one path, got {n_paths}")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")

    def run(chunk):
        start, count = chunk
        return task(sample_block(seed, start, count, N, h), start)

    chunks = _chunks(n_paths, N)
    if workers == 1 or len(chunks) == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, chunks))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return mean, se


def _check_quantities(quantities):
    for q in quantities:
        if q not in _COLUMN:
            raise ValueError(f"unknown quantity {q!r}; expected one of {QUANTITIES}")


def _as_tuple(x):
    return tuple(x) if isinstance(x, (list, tuple)) else (x,)


def level_steps(config: SimConfig, level):
    """Fine step count N0 * 2**level for baseline N0 = config.N."""
    if level < 0:
        raise ValueError(f"level must be non-negative, got {level}")
    return config.N * 2**int(level)


# -- strong error between consecutive levels -------------------------------

def strong_error_levels(model, config: SimConfig, p, n_paths, levels,
                        quantities=QUANTITIES, base_seed=0, workers=None):
    """E[sup |fine - coarse|^p] over coarse grid points, per level.

    One coupled simulation per level serves every requested quantity and
    moment order.  Returns LevelRecords ordered by (level, quantity, p).
    """
    model = get_model(model)
    ps = _as_tuple(p)
    quantities = _as_tuple(quantities)
    _check_quantities(quantities)
    if any(q < 2 for q in ps):
        raise ValueError("moment order p must be >= 2")
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    order = max(_ORDER[q] for q in quantities)
    records = []
    for level in levels:
        N = level_steps(config, level)
        if N % 2:
            raise ValueError(f"fine step count {N} at level {level} is odd")
        cfg = config.with_(N=N, order=order)

        def task(dW, start, cfg=cfg):
            return (coupled_batch(model, cfg, dW, path_offset=start)[0],)

        (supdiff,) = _fan_out(task, n_paths, N, cfg.h, derive_seed(base_seed, level), workers)
        for q in quantities:
            col = supdiff[:, _COLUMN[q]]
            for pp in ps:
                est, se = _mean_se(col**pp)
                records.append(LevelRecord(int(level), cfg.h, pp, q, est, se, int(n_paths)))
    return records


def estimate_strong_error(model, config: SimConfig, p, n_paths, level,
                          quantity="tangent1", base_seed=0, workers=None) -> LevelRecord:
    return strong_error_levels(model, config, p, n_paths, [level], (quantity,),
                               base_seed, workers)[0]


def closed_form_error_levels(model, config: SimConfig, p, n_paths, levels,
                             quantities=("state",), base_seed=0, workers=None):
    """E[sup_n |EM - exact|^p] for GBM, the exact path driven by the same W."""
    model = get_model(model)
    if model.model_id != "gbm":
        raise ValueError("a closed-form reference exists only for the gbm model")
    quantities = _as_tuple(quantities)
    _check_quantities(quantities)
    if "tangent2" in quantities:
        raise ValueError("the closed form provides S and dS only")
    ps = _as_tuple(p)
    sigma = model.fixed_constants["sigma"]
    order = max(_ORDER[q] for q in quantities)
    records = []
    for level in levels:
        N = level_steps(config, level)
        cfg = config.with_(N=N, order=order)
        times = np.arange(N + 1) * cfg.h

        def task(dW, start, cfg=cfg, times=times):
            grid = simulate_batch(model, cfg, dW, path_offset=start)
            W = np.zeros((dW.shape[0], N + 1))
            W[:, 1:] = np.cumsum(dW, axis=1)
            exact = gbm_closed_form(cfg.theta, sigma, cfg.S0, W, times)
            out = np.empty((dW.shape[0], 2))
            out[:, 0] = np.max(np.abs(grid[..., 0] - exact.S), axis=1)
            out[:, 1] = np.max(np.abs(grid[..., 1] - exact.dS), axis=1) if order else 0.0
            return (out,)

        (err,) = _fan_out(task, n_paths, N, cfg.h, derive_seed(base_seed, level), workers)
        for q in quantities:
            col = err[:, _COLUMN[q]]
            for pp in ps:
                est, se = _mean_se(col**pp)
                records.append(LevelRecord(int(level), cfg.h, pp, q, est, se, int(n_paths)))
    return records


# -- rate regression -------------------------------------------------------

def loglog_fit(x, y):
    """Least-squares line through (log2 x, log2 y).

    Returns (slope, intercept, r_squared, slope_ci_halfwidth) with a 95%
    t-interval on the slope.
    """
    lx = np.log2(np.asarray(x, dtype=np.float64))
    ly = np.log2(np.asarray(y, dtype=np.float64))
    n = len(lx)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points, got {n}")
    res = stats.linregress(lx, ly)
    half = float(stats.t.ppf(0.975, n - 2) * res.stderr)
    return float(res.slope), float(res.intercept), float(res.rvalue**2), half


def fit_rate(records: Sequence[LevelRecord]) -> RateFit:
    records = tuple(records)
    keys = {(r.p, r.quantity) for r in records}
    if len(keys) > 1:
        raise ValueError(f"records mix (p, quantity) combinations: {sorted(keys)}")
    usable = tuple(r for r in records if r.estimate > 0 and math.isfinite(r.estimate))
    excluded = tuple(r for r in records if r not in usable)
    if len(usable) < 3:
        raise InsufficientDataError(
            f"{len(usable)} records with positive estimates; need at least 3")
    slope, intercept, r2, half = loglog_fit([r.h for r in usable], [r.estimate for r in usable])
    return RateFit(slope, intercept, r2, half, usable, excluded)


# -- sup moments -----------------------------------------------------------

def sup_moments(model, config: SimConfig, p, n_paths, quantities=QUANTITIES,
                base_seed=0, workers=None):
    """E[(sup_n |quantity_n|)^p] on the grid of ``config``."""
    model = get_model(model)
    ps = _as_tuple(p)
    quantities = _as_tuple(quantities)
    _check_quantities(quantities)
    if any(q < 2 for q in ps):
        raise ValueError("moment order p must be >= 2")
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    cfg = config.with_(order=max(config.order, max(_ORDER[q] for q in quantities)))

    def task(dW, start):
        return (sup_abs_batch(model, cfg, dW, path_offset=start)[0],)

    (sup,) = _fan_out(task, n_paths, cfg.N, cfg.h, base_seed, workers)
    out = []
    for q in quantities:
        col = sup[:, _COLUMN[q]]
        for pp in ps:
            est, se = _mean_se(col**pp)
            out.append(MomentEstimate(pp, q, est, se, cfg.h, int(n_paths)))
    return out


def estimate_sup_moment(model, config: SimConfig, p, n_paths, quantity="tangent1",
                        base_seed=0, workers=None) -> MomentEstimate:
    return sup_moments(model, config, p, n_paths, (quantity,), base_seed, workers)[0]


def time_increment_moments(model, config: SimConfig, t0, deltas, p, n_paths,
                           quantity="tangent1", base_seed=0, workers=None):
    """E[|X_{t0+delta} - X_{t0}|^p] for each delta; t0 and t0+delta on the grid."""
    model = get_model(model)
    _check_quantities((quantity,))
    h = config.h
    n0 = t0 / h
    idx = []
    for d in deltas:
        n1 = (t0 + d) / h
        if not (float(n0).is_integer() and float(n1).is_integer()) or n1 > config.N or d <= 0:
            raise ValueError(f"t0={t0} and t0+delta={t0 + d} must be grid points in (0, T]")
        idx.append(int(n1))
    n0 = int(n0)
    cfg = config.with_(order=max(config.order, _ORDER[quantity]))
    col = _COLUMN[quantity]

    def task(dW, start):
        grid = simulate_batch(model, cfg, dW, path_offset=start)[..., col]
        return (grid[:, idx] - grid[:, [n0]],)

    (diff,) = _fan_out(task, n_paths, cfg.N, h, base_seed, workers)
    out = []
    for j, d in enumerate(deltas):
        est, se = _mean_se(np.abs(diff[:, j]) ** p)
        out.append(IncrementMoment(float(d), p, quantity, est, se, int(n_paths)))
    return out


# -- multilevel variance table ---------------------------------------------

def _payoff_state(S, dS):
    return S


def _payoff_tangent(S, dS):
    return dS


PAYOFFS = ("state", "tangent", "call")


def make_payoff(name, strike=1.0) -> Callable:
    if callable(name):
        return name
    if name == "state":
        return _payoff_state
    if name == "tangent":
        return _payoff_tangent
    if name == "call":
        return lambda S, dS: np.maximum(S - strike, 0.0) * dS
    raise ValueError(f"unknown payoff {name!r}; expected one of {PAYOFFS}")


def mlmc_variance_table(model, config: SimConfig, payoff, levels, n_paths,
                        base_seed=0, workers=None, strike=None):
    """Mean and variance of P(fine) - P(coarse) per level on coupled paths."""
    model = get_model(model)
    f = make_payoff(payoff, config.S0 if strike is None else strike)
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    rows = []
    for level in levels:
        N = level_steps(config, level)
        if N % 2:
            raise ValueError(f"fine step count {N} at level {level} is odd")
        cfg = config.with_(N=N, order=max(config.order, 1))

        def task(dW, start, cfg=cfg):
            _, fine, coarse = coupled_batch(model, cfg, dW, path_offset=start)
            return (f(fine[:, 0], fine[:, 1]) - f(coarse[:, 0], coarse[:, 1]),)

        (dP,) = _fan_out(task, n_paths, N, cfg.h, derive_seed(base_seed, level), workers)
        rows.append(MLMCLevel(int(level), cfg.h, float(np.mean(dP)),
                              float(np.var(dP, ddof=1)), int(n_paths)))
    return rows


# -- product lemma ---------------------------------------------------------

def product_lemma_check(instance: LemmaInstance) -> LemmaCheck:
    """Exact E|prod u - prod v|^p against k^p C_{pk}^{1-1/k} D_{pk}^{1/k}."""
    k, p = instance.k, instance.p
    size = math.prod(len(s) for s in instance.supports)
    if size > MAX_LEMMA_SUPPORT:
        raise TooLargeError(f"product support has {size} atoms (limit {MAX_LEMMA_SUPPORT})")
    prob = np.ones(1)
    U = np.ones(1)
    V = np.ones(1)
    for s in instance.supports:
        prob = np.outer(prob, s[:, 0]).ravel()
        U = np.outer(U, s[:, 1]).ravel()
        V = np.outer(V, s[:, 2]).ravel()
    lhs = float(np.sum(prob * np.abs(U - V) ** p))
    pk = p * k
    C = max(max(float(np.sum(s[:, 0] * np.abs(s[:, 1]) ** pk)),
                float(np.sum(s[:, 0] * np.abs(s[:, 2]) ** pk))) for s in instance.supports)
    D = max(float(np.sum(s[:, 0] * np.abs(s[:, 1] - s[:, 2]) ** pk)) for s in instance.supports)
    rhs = float(k**p * C ** (1.0 - 1.0 / k) * D ** (1.0 / k))
    return LemmaCheck(lhs, rhs, bool(lhs <= rhs * (1.0 + 1e-12)))


def random_lemma_instance(rng: np.random.Generator, k, p, max_support=4, bound=3.0):
    supports = []
    for _ in range(k):
        n = int(rng.integers(1, max_support + 1))
        probs = rng.dirichlet(np.ones(n))
        probs /= probs.sum()
        uv = rng.uniform(-bound, bound, size=(n, 2))
        supports.append(np.column_stack([probs, uv]))
    return LemmaInstance(p, tuple(supports))


def lemma_trials(k, p, trials, seed=0, max_support=4):
    """Yield (trial, instance, check) for randomised instances."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k), int(p))))
    for trial in range(int(trials)):
        inst = random_lemma_instance(rng, k, p, max_support)
        yield trial, inst, product_lemma_check(inst)

