import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathsens import analysis as A
from pathsens.engine import SimConfig
from pathsens.errors import DivergenceError, InsufficientDataError, TooLargeError


def _records(fn, hs, p=2, quantity="tangent1"):
    return [A.LevelRecord(i, h, p, quantity, fn(h), 0.0, 100) for i, h in enumerate(hs)]


HS = [2.0**-k for k in range(4, 10)]


def test_fit_linear_data():
    fit = A.fit_rate(_records(lambda h: h, HS))
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.slope_ci_halfwidth == pytest.approx(0.0, abs=1e-10)


def test_fit_quadratic_data():
    fit = A.fit_rate(_records(lambda h: 4 * h**2, HS))
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1e3))
def test_fit_recovers_power_law(expo, scale):
    fit = A.fit_rate(_records(lambda h: scale * h**expo, HS))
    assert fit.slope == pytest.approx(expo, abs=1e-12)


def test_fit_excludes_zero_estimates():
    recs = _records(lambda h: h, HS[:4]) + [A.LevelRecord(9, 2.0**-12, 2, "tangent1", 0.0, 0.0, 100)]
    fit = A.fit_rate(recs)
    assert len(fit.records) == 4 and len(fit.excluded) == 1
    assert fit.excluded[0].level == 9


def test_fit_needs_three_records():
    with pytest.raises(InsufficientDataError):
        A.fit_rate(_records(lambda h: h, HS[:2]))
    with pytest.raises(InsufficientDataError):
        A.fit_rate(_records(lambda h: 0.0, HS))


def test_fit_rejects_mixed_records():
    recs = _records(lambda h: h, HS[:3]) + _records(lambda h: h, HS[:3], p=4)
    with pytest.raises(ValueError):
        A.fit_rate(recs)


def test_fit_ci_covers_noisy_slope():
    rng = np.random.default_rng(1)
    recs = _records(lambda h: h * math.exp(rng.normal(0, 0.05)), HS)
    fit = A.fit_rate(recs)
    assert abs(fit.slope - 1.0) <= fit.slope_ci_halfwidth + 0.05
    assert fit.slope_ci_halfwidth > 0


# -- strong error --------------------------------------------------------------

DYADIC = SimConfig(theta=0.25, S0=0.0, N=16)


def test_additive_strong_error_is_zero():
    recs = A.strong_error_levels("additive", DYADIC, (2, 4), 200, range(0, 4))
    assert all(r.estimate == 0.0 and r.std_error == 0.0 for r in recs)
    assert len(recs) == 4 * 3 * 2


def test_additive_strong_error_tiny_for_non_dyadic_theta():
    recs = A.strong_error_levels("additive", SimConfig(theta=0.3, S0=0.0), 2, 200, range(0, 3))
    assert max(r.estimate for r in recs) < 1e-25


def test_single_level_record():
    r = A.estimate_strong_error("trig", SimConfig(), 2, 400, 1, "tangent1", base_seed=3)
    assert r.level == 1 and r.h == 1 / 32 and r.p == 2 and r.n_paths == 400
    assert r.estimate > 0 and r.std_error > 0


def test_trig_tangent_error_halves_per_level():
    # below level 5 (h = 1/512) the ratio is still visibly above 2
    a, b = A.strong_error_levels("trig", SimConfig(), 2, 4000, (5, 6), ("tangent1",), base_seed=5)
    ratio = a.estimate / b.estimate
    # delta method for the ratio of independent estimates
    se = ratio * math.hypot(a.std_error / a.estimate, b.std_error / b.estimate)
    assert abs(ratio - 2.0) <= 3 * se


def test_gbm_state_error_against_closed_form_halves():
    a, b = A.closed_form_error_levels("gbm", SimConfig(theta=0.05), 2, 4000, (2, 3), base_seed=5)
    ratio = a.estimate / b.estimate
    se = ratio * math.hypot(a.std_error / a.estimate, b.std_error / b.estimate)
    assert abs(ratio - 2.0) <= 3 * se


def test_closed_form_levels_only_for_gbm():
    with pytest.raises(ValueError):
        A.closed_form_error_levels("trig", SimConfig(), 2, 10, [0])
    with pytest.raises(ValueError):
        A.closed_form_error_levels("gbm", SimConfig(), 2, 10, [0], ("tangent2",))


def test_strong_error_argument_checks():
    with pytest.raises(ValueError):
        A.strong_error_levels("trig", SimConfig(), 1, 10, [0])
    with pytest.raises(ValueError):
        A.strong_error_levels("trig", SimConfig(), 2, 1, [0])
    with pytest.raises(ValueError):
        A.strong_error_levels("trig", SimConfig(N=3), 2, 10, [0])
    with pytest.raises(ValueError):
        A.strong_error_levels("trig", SimConfig(), 2, 10, [0], ("volatility",))


def test_divergence_reports_path_index():
    cfg = SimConfig(theta=1e3, T=200.0, N=200)
    with pytest.raises(DivergenceError) as exc:
        A.strong_error_levels("gbm", cfg, 2, 5, [0], ("state",))
    assert exc.value.path_index == 0


@pytest.mark.parametrize("study", ["strong", "moments", "mlmc", "exact"])
def test_results_independent_of_worker_count(study, monkeypatch):
    # small chunks so several workers really share the work
    monkeypatch.setattr(A, "_CHUNK_ELEMS", 256)
    runs = []
    for workers in (1, 3, 8):
        if study == "strong":
            out = A.strong_error_levels("trig", SimConfig(), (2, 4), 300, (0, 1), base_seed=9, workers=workers)
        elif study == "moments":
            out = A.sup_moments("trig", SimConfig(N=32), (2, 8), 300, base_seed=9, workers=workers)
        elif study == "mlmc":
            out = A.mlmc_variance_table("trig", SimConfig(), "call", (0, 1), 300, base_seed=9, workers=workers)
        else:
            out = A.closed_form_error_levels("gbm", SimConfig(), 2, 300, (0, 1), base_seed=9, workers=workers)
        runs.append(out)
    assert runs[0] == runs[1] == runs[2]


def test_chunk_layout_depends_only_on_size():
    assert A._chunks(10, 2**20) == [(i, 1) for i in range(10)]
    assert A._chunks(5, 16) == [(0, 5)]
    assert sum(c for _, c in A._chunks(1000, 4096)) == 1000


# -- sup moments ----------------------------------------------------------------

def test_additive_sup_tangent_is_T():
    m = A.estimate_sup_moment("additive", SimConfig(T=2.0, N=32), 3, 100)
    assert m.estimate == 8.0 and m.std_error == 0.0
    assert m.h == 1 / 16


def test_trig_sup_moments_finite_and_bounded():
    ests = [A.estimate_sup_moment("trig", SimConfig(N=16 * 2**k), 8, 2000, base_seed=k).estimate
            for k in range(4)]
    assert all(0 < e < 1 for e in ests)


def test_gbm_sup_state_moment_matches_closed_form():
    cfg = SimConfig(theta=0.05, N=256)
    em = A.estimate_sup_moment("gbm", cfg, 2, 4000, "state", base_seed=4)
    # same estimator applied to the exact path on the same Brownian increments
    from pathsens.oracle import gbm_closed_form
    from pathsens.paths import sample_block
    dW = sample_block(4, 0, 4000, 256, cfg.h)
    W = np.concatenate([np.zeros((4000, 1)), np.cumsum(dW, axis=1)], axis=1)
    exact = gbm_closed_form(0.05, 0.2, 1.0, W, np.arange(257) * cfg.h).S
    x = np.max(np.abs(exact), axis=1) ** 2
    est, se = x.mean(), x.std(ddof=1) / math.sqrt(len(x))
    assert abs(em.estimate - est) <= 3 * math.hypot(em.std_error, se)


def test_time_increment_moments_and_grid_check():
    cfg = SimConfig(N=64)
    out = A.time_increment_moments("trig", cfg, 0.25, [1 / 64, 1 / 16], 2, 500)
    assert [o.delta for o in out] == [1 / 64, 1 / 16]
    assert out[0].estimate < out[1].estimate
    with pytest.raises(ValueError):
        A.time_increment_moments("trig", cfg, 0.25, [1 / 100], 2, 10)
    with pytest.raises(ValueError):
        A.time_increment_moments("trig", cfg, 0.25, [1.0], 2, 10)


# -- MLMC -------------------------------------------------------------------------

@pytest.mark.parametrize("payoff", ["state", "tangent", "call"])
def test_additive_mlmc_variance_zero(payoff):
    rows = A.mlmc_variance_table("additive", DYADIC, payoff, range(0, 4), 200)
    assert all(r.var_dP == 0.0 and r.mean_dP == 0.0 for r in rows)


def test_mlmc_rows():
    rows = A.mlmc_variance_table("trig", SimConfig(), "tangent", (0, 1, 2), 500)
    assert [r.level for r in rows] == [0, 1, 2]
    assert [r.h for r in rows] == [1 / 16, 1 / 32, 1 / 64]
    assert all(r.var_dP > 0 and r.n_paths == 500 for r in rows)


def test_mlmc_callable_payoff_and_bad_name():
    rows = A.mlmc_variance_table("trig", SimConfig(), lambda S, dS: S + dS, (0,), 50)
    assert rows[0].var_dP > 0
    with pytest.raises(ValueError):
        A.mlmc_variance_table("trig", SimConfig(), "digital", (0,), 50)


def test_gbm_state_mlmc_variance_decays():
    rows = A.mlmc_variance_table("gbm", SimConfig(theta=0.05), "state", range(1, 6), 4000, base_seed=2)
    slope = A.loglog_fit([r.h for r in rows], [r.var_dP for r in rows])[0]
    assert 0.7 <= slope <= 1.3


# -- product lemma ----------------------------------------------------------------

def test_lemma_single_factor_is_equality():
    inst = A.LemmaInstance(3, ([(0.25, 1.0, -1.0), (0.75, 2.0, 0.5)],))
    lhs, rhs, holds = A.product_lemma_check(inst)
    assert lhs == rhs and holds
    assert lhs == pytest.approx(0.25 * 8 + 0.75 * 1.5**3)


def test_lemma_worked_instance():
    inst = A.LemmaInstance(2, ([(1.0, 2.0, 1.0)], [(1.0, 2.0, 1.0)]))
    lhs, rhs, holds = A.product_lemma_check(inst)
    assert lhs == 9.0 and rhs == 16.0 and holds


def test_lemma_identical_factors():
    inst = A.LemmaInstance(2, ([(0.5, 1.0, 1.0), (0.5, -2.0, -2.0)], [(1.0, 3.0, 3.0)]))
    res = A.product_lemma_check(inst)
    assert res.lhs == 0.0 and res.holds


def test_lemma_enumeration_matches_brute_force():
    rng = np.random.default_rng(0)
    inst = A.random_lemma_instance(rng, 3, 2)
    total = 0.0
    import itertools
    for atoms in itertools.product(*inst.supports):
        pr = math.prod(a[0] for a in atoms)
        total += pr * abs(math.prod(a[1] for a in atoms) - math.prod(a[2] for a in atoms)) ** 2
    assert A.product_lemma_check(inst).lhs == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("p", [2, 4])
def test_lemma_random_instances(k, p):
    results = [res for _, _, res in A.lemma_trials(k, p, 170, seed=k * 10 + p)]
    assert all(r.holds for r in results)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.sampled_from([2, 3, 4]),
       st.lists(st.tuples(st.floats(0.01, 1), st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=4))
def test_lemma_holds_hypothesis(k, p, atoms):
    w = np.array([a[0] for a in atoms])
    base = [(pi / w.sum(), u, v) for pi, (_, u, v) in zip(w, atoms)]
    # factor i uses a shifted copy of the same atoms
    supports = tuple([(pr, u + 0.5 * i, v - 0.25 * i) for pr, u, v in base] for i in range(k))
    assert A.product_lemma_check(A.LemmaInstance(p, supports)).holds


def test_lemma_instance_validation():
    with pytest.raises(ValueError):
        A.LemmaInstance(2, ([(0.5, 1.0, 1.0)],))
    with pytest.raises(ValueError):
        A.LemmaInstance(2, ([(-0.5, 1.0, 1.0), (1.5, 0.0, 0.0)],))
    with pytest.raises(ValueError):
        A.LemmaInstance(1, ([(1.0, 1.0, 1.0)],))
    with pytest.raises(ValueError):
        A.LemmaInstance(2, ())


def test_lemma_too_large():
    support = [(0.01, float(i), 0.0) for i in range(100)]
    inst = A.LemmaInstance(2, tuple([support] * 4))
    with pytest.raises(TooLargeError):
        A.product_lemma_check(inst)
