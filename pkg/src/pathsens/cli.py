"""Command-line front end.

    pathsens <subcommand> [options]

Subcommands: models, simulate, converge, moments, mlmc, validate, lemma.
Every option may also come from ``--config FILE`` holding ``key = value``
lines (``#`` starts a comment); flags given on the command line win.

Exit status: 0 success, 1 failed validation, 2 usage error, 3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass

from . import analysis
from .engine import SimConfig, simulate_path
from .errors import DivergenceError, InsufficientDataError, RegistryError
from .models import derivative_bounds, get_model, list_models
from .paths import SeedSpec, derive_seed, sample_increments
from .validation import richardson_check, validate

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

SUBCOMMANDS = ("models", "simulate", "converge", "moments", "mlmc", "validate", "lemma")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    model: str = "trig"
    theta: float = 0.1
    S0: float = 1.0
    dS0: float = 0.0
    ddS0: float = 0.0
    T: float = 1.0
    N: int = 16
    levels: tuple = (0, 1, 2, 3, 4)
    p: tuple = (2,)
    paths: int = 10_000
    seed: int = 0
    quantity: str = "tangent1"
    output: str = "-"
    eps: float | None = None
    workers: int = os.cpu_count() or 1
    reference: str = "level"
    payoff: str = "tangent"
    strike: float | None = None
    path_index: int = 0
    k: int = 2
    trials: int = 1000
    sigma: float | None = None
    beta: float | None = None

    def sim_config(self, order=2):
        return SimConfig(self.theta, self.S0, self.dS0, self.ddS0, self.T, self.N, order)

    def model_params(self):
        return {k: v for k, v in (("sigma", self.sigma), ("beta", self.beta)) if v is not None}


# -- value parsing ---------------------------------------------------------

def _number(text, kind=float):
    try:
        v = kind(text)
    except (TypeError, ValueError):
        raise UsageError(f"malformed number {text!r}") from None
    if kind is float and not math.isfinite(v):
        raise UsageError(f"non-finite number {text!r}")
    return v


def _positive(kind):
    def conv(text):
        v = _number(text, kind)
        if v <= 0:
            raise UsageError(f"expected a positive value, got {text!r}")
        return v
    return conv


def _nonneg_int(text):
    v = _number(text, int)
    if v < 0:
        raise UsageError(f"expected a non-negative integer, got {text!r}")
    return v


def _levels(text):
    lo, sep, hi = str(text).partition("..")
    if not sep:
        v = _nonneg_int(lo)
        return (v,)
    a, b = _nonneg_int(lo), _nonneg_int(hi)
    if b < a:
        raise UsageError(f"empty level range {text!r}")
    return tuple(range(a, b + 1))


def _orders(text):
    out = []
    for part in str(text).split(","):
        v = _number(part.strip(), float)
        if v < 2:
            raise UsageError(f"moment order must be >= 2, got {part!r}")
        out.append(int(v) if v.is_integer() else v)
    return tuple(out)


def _choice(options):
    def conv(text):
        if text not in options:
            raise UsageError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return conv


_CONVERTERS = {
    "model": str,
    "theta": float,
    "S0": float,
    "dS0": float,
    "ddS0": float,
    "T": _positive(float),
    "N": _positive(int),
    "levels": _levels,
    "p": _orders,
    "paths": _positive(int),
    "seed": _nonneg_int,
    "quantity": _choice(analysis.QUANTITIES + ("all",)),
    "output": str,
    "eps": _positive(float),
    "workers": _positive(int),
    "reference": _choice(("level", "exact")),
    "payoff": _choice(analysis.PAYOFFS),
    "strike": float,
    "path_index": _nonneg_int,
    "k": _positive(int),
    "trials": _positive(int),
    "sigma": float,
    "beta": float,
}


def _convert(key, text):
    conv = _CONVERTERS[key]
    if conv is float:
        return _number(text, float)
    return conv(text)


def read_config_file(path):
    """Parse ``key = value`` lines; unknown keys are rejected."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    S = argparse.SUPPRESS
    add("--config", metavar="FILE", default=S, help="key = value file; flags override it")
    add("--model", default=S, help="model id (default trig)")
    add("--theta", default=S, help="parameter value (default 0.1)")
    add("--S0", default=S, help="initial state (default 1)")
    add("--dS0", default=S, help="initial first sensitivity (default 0)")
    add("--ddS0", default=S, help="initial second sensitivity (default 0)")
    add("--T", default=S, help="final time (default 1)")
    add("--N", default=S, help="step count; baseline N0 for level studies (default 16)")
    add("--levels", default=S, help="level range a..b, fine N = N0*2**level (default 0..4)")
    add("--p", default=S, help="moment order(s), comma separated (default 2)")
    add("--paths", default=S, help="Monte Carlo paths (default 10000)")
    add("--seed", default=S, help="base seed (default 0)")
    add("--quantity", default=S, help="state, tangent1, tangent2 or all (default tangent1)")
    add("--output", "-o", default=S, help="CSV destination (default stdout)")
    add("--eps", default=S, help="finite-difference bump (validate)")
    add("--workers", default=S, help="worker threads; never changes results")
    add("--reference", default=S, help="converge: 'level' (coupled) or 'exact' (gbm closed form)")
    add("--payoff", default=S, help="mlmc payoff: state, tangent or call (default tangent)")
    add("--strike", default=S, help="strike K of the call payoff (default S0)")
    add("--path-index", dest="path_index", default=S, help="simulate: which path (default 0)")
    add("--k", default=S, help="lemma: number of factors (default 2)")
    add("--trials", default=S, help="lemma: random instances (default 1000)")
    add("--sigma", default=S, help="gbm volatility (default 0.2)")
    add("--beta", default=S, help="additive-model diffusion (default 1)")

    parser = argparse.ArgumentParser(prog="pathsens", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    helps = {
        "models": "list built-in models",
        "simulate": "one path: t,S,dS,ddS",
        "converge": "strong error per level and fitted rate",
        "moments": "E[sup|X|^p] per timestep",
        "mlmc": "level-difference mean and variance",
        "validate": "jet vs explicit and finite-difference checks",
        "lemma": "product-lemma inequality on random instances",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_config(argv, config_file=None) -> RunConfig:
    """Defaults < config file < command-line flags.  Raises UsageError."""
    parser = build_parser()
    ns = vars(_parse_args(parser, argv))
    sub = ns.pop("subcommand")
    values = {}
    path = ns.pop("config", None) or config_file
    if path:
        values.update(read_config_file(path))
    for key, text in ns.items():
        values[key] = _convert(key, text)
    cfg = RunConfig(sub, **values)
    _check(cfg)
    return cfg


def _parse_args(parser, argv):
    # argparse reports its own errors by exiting with status 2
    err = io.StringIO()
    old, sys.stderr = sys.stderr, err
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            raise UsageError(err.getvalue().strip().splitlines()[-1]) from None
        sys.stderr = old
        sys.stderr.write(err.getvalue())
        raise
    finally:
        sys.stderr = old


def _check(cfg: RunConfig):
    try:
        model = get_model(cfg.model)
    except RegistryError as exc:
        raise UsageError(str(exc)) from None
    try:
        get_model(cfg.model, **cfg.model_params())
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    try:
        cfg.sim_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.subcommand in ("converge", "mlmc"):
        if (cfg.N * 2 ** cfg.levels[0]) % 2:
            raise UsageError(f"fine step count N*2**level must be even (N={cfg.N}, level {cfg.levels[0]})")
        if cfg.paths < 2:
            raise UsageError("need at least 2 paths")
    if cfg.subcommand == "converge":
        if cfg.reference == "exact" and model.model_id != "gbm":
            raise UsageError("--reference exact needs --model gbm")
        if cfg.reference == "exact" and cfg.quantity in ("tangent2", "all"):
            raise UsageError("the closed form provides state and tangent1 only")
    if cfg.subcommand == "moments" and cfg.paths < 2:
        raise UsageError("need at least 2 paths")


# -- output ----------------------------------------------------------------

def fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


class _Table:
    def __init__(self, header):
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, *values):
        self.writer.writerow([fmt(v) for v in values])

    def emit(self, path):
        text = self.buf.getvalue()
        if path in ("-", ""):
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(path, "w", newline="") as fh:
                fh.write(text)


def _note(msg):
    print(msg, file=sys.stderr)


# -- subcommands -----------------------------------------------------------

def _quantities(cfg):
    return analysis.QUANTITIES if cfg.quantity == "all" else (cfg.quantity,)


def run_models(cfg):
    t = _Table(["model_id", "parameters", "L_a", "L_b", "description"])
    for info in list_models():
        b = derivative_bounds(info.model_id)
        params = ";".join(f"{k}={fmt(float(v))}" for k, v in info.parameters.items())
        t.row(info.model_id, params, b.L_a, b.L_b, info.description)
    t.emit(cfg.output)
    return EXIT_OK


def run_simulate(cfg):
    model = get_model(cfg.model, **cfg.model_params())
    sim = cfg.sim_config()
    inc = sample_increments(SeedSpec(cfg.seed, cfg.path_index), sim.N, sim.h)
    res = simulate_path(model, sim, inc)
    t = _Table(["t", "S", "dS", "ddS"])
    for n in range(res.N + 1):
        t.row(float(res.t[n]), float(res.S[n]), float(res.dS[n]), float(res.ddS[n]))
    t.emit(cfg.output)
    return EXIT_OK


def run_converge(cfg):
    model = get_model(cfg.model, **cfg.model_params())
    quantities = _quantities(cfg)
    study = analysis.closed_form_error_levels if cfg.reference == "exact" else analysis.strong_error_levels
    records = study(model, cfg.sim_config(), cfg.p, cfg.paths, cfg.levels,
                    quantities, cfg.seed, cfg.workers)
    t = _Table(["level", "h", "p", "quantity", "estimate", "std_error", "n_paths"])
    for r in records:
        t.row(r.level, r.h, r.p, r.quantity, r.estimate, r.std_error, r.n_paths)
    t.emit(cfg.output)
    for q in quantities:
        for p in cfg.p:
            recs = [r for r in records if r.quantity == q and r.p == p]
            try:
                fit = analysis.fit_rate(recs)
            except InsufficientDataError as exc:
                _note(f"{q} p={fmt(p)}: no rate ({exc})")
                continue
            extra = f" excluded {len(fit.excluded)} zero-estimate levels" if fit.excluded else ""
            _note(f"{q} p={fmt(p)}: slope={fit.slope:.4f} +/- {fit.slope_ci_halfwidth:.4f} "
                  f"(95% CI) r2={fit.r_squared:.4f}; strong order {fit.slope / p:.4f}{extra}")
    return EXIT_OK


def run_moments(cfg):
    model = get_model(cfg.model, **cfg.model_params())
    base = cfg.sim_config()
    t = _Table(["h", "p", "quantity", "estimate", "std_error"])
    for level in cfg.levels:
        sim = base.with_(N=analysis.level_steps(base, level))
        for m in analysis.sup_moments(model, sim, cfg.p, cfg.paths, _quantities(cfg),
                                      derive_seed(cfg.seed, level), cfg.workers):
            t.row(m.h, m.p, m.quantity, m.estimate, m.std_error)
    t.emit(cfg.output)
    return EXIT_OK


def run_mlmc(cfg):
    model = get_model(cfg.model, **cfg.model_params())
    rows = analysis.mlmc_variance_table(model, cfg.sim_config(), cfg.payoff, cfg.levels,
                                        cfg.paths, cfg.seed, cfg.workers, cfg.strike)
    t = _Table(["level", "h", "mean_dP", "var_dP", "n_paths"])
    for r in rows:
        t.row(r.level, r.h, r.mean_dP, r.var_dP, r.n_paths)
    t.emit(cfg.output)
    usable = [r for r in rows if r.var_dP > 0]
    if len(usable) >= 3:
        slope = analysis.loglog_fit([r.h for r in usable], [r.var_dP for r in usable])[0]
        _note(f"variance slope in h: {slope:.4f}")
    return EXIT_OK


def run_validate(cfg):
    model = get_model(cfg.model, **cfg.model_params())
    checks = validate(model, cfg.sim_config(), cfg.paths, cfg.seed)
    if cfg.eps is not None:
        for k in (1, 2):
            checks.append(richardson_check(model, cfg.sim_config(), min(cfg.paths, 200), k,
                                           cfg.seed, eps=(10 * cfg.eps, cfg.eps)))
    t = _Table(["check", "model", "low", "high", "lower", "upper", "n_checked", "passed"])
    for c in checks:
        t.row(c.name, c.model_id, c.low, c.high, c.lower, c.upper, c.n_checked, c.passed)
        _note(c.line())
    t.emit(cfg.output)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


def run_lemma(cfg):
    t = _Table(["trial", "k", "p", "lhs", "rhs", "holds"])
    ok = True
    for p in cfg.p:
        for trial, _, res in analysis.lemma_trials(cfg.k, p, cfg.trials, cfg.seed):
            t.row(trial, cfg.k, p, res.lhs, res.rhs, res.holds)
            ok &= res.holds
    t.emit(cfg.output)
    return EXIT_OK if ok else EXIT_FAILED


_DISPATCH = {
    "models": run_models,
    "simulate": run_simulate,
    "converge": run_converge,
    "moments": run_moments,
    "mlmc": run_mlmc,
    "validate": run_validate,
    "lemma": run_lemma,
}


def dispatch(cfg: RunConfig) -> int:
    try:
        return _DISPATCH[cfg.subcommand](cfg)
    except DivergenceError as exc:
        _note(f"pathsens: divergence: {exc}")
        return EXIT_DIVERGED


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else list(argv))
    except UsageError as exc:
        _note(f"pathsens: error: {exc}")
        return EXIT_USAGE
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
