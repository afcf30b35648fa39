import math

import numpy as np
import pytest

from betaframe.duals import TRUNCATE, build_scheme
from betaframe.errors import BadEps, BadShape, OddSize, TooLarge
from betaframe.frames import gaussian_frame, hsc_frame
from betaframe.lab import (
    derived_seed,
    gauss_norm_event,
    gaussian_decay_experiment,
    gaussian_small_ball_bound,
    hsc_distortion_bound,
    hsc_experiment,
    mc_distortion,
    optimal_params_check,
    pipeline_errors,
    rect_case_bound,
    rng_for,
    sample_ball,
    square_case_bound,
    svtail_experiment,
    synthesis_distortion_brute,
    tail_bound_A1,
    volumetric_bound,
)
from betaframe.noise_shaping import Alphabet


def test_sample_ball_modes():
    X = sample_ball(3, 101, 7)
    assert X.shape == (101, 3)
    norms = np.linalg.norm(X, axis=1)
    assert norms[0] == 0.0
    np.testing.assert_allclose(norms[1:51], 1.0, atol=1e-15)
    assert np.all(norms <= 1.0 + 1e-15)
    np.testing.assert_array_equal(X, sample_ball(3, 101, 7))
    np.testing.assert_allclose(np.linalg.norm(sample_ball(2, 20, 1, "sphere"), axis=1), 1.0)
    assert np.all(np.linalg.norm(sample_ball(4, 50, 1, "ball"), axis=1) <= 1.0)
    with pytest.raises(ValueError):
        sample_ball(2, 5, 0, "cube")


def test_streams_are_independent_and_stable():
    a = rng_for(1, 2, 3).random(4)
    np.testing.assert_array_equal(a, rng_for(1, 2, 3).random(4))
    assert not np.array_equal(a, rng_for(1, 3, 2).random(4))
    assert derived_seed(5, 1) == derived_seed(5, 1) != derived_seed(5, 2)
    assert 0 <= derived_seed(5, 1) < 2**64


def test_brute_oracle_hand_value():
    x = np.array([1.0, 1.0]) / math.sqrt(2)
    assert synthesis_distortion_brute(np.eye(2), Alphabet(2, 1.0), [x]) == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    assert synthesis_distortion_brute(np.eye(2), Alphabet(2, 1.0), [[1.0, 1.0]]) == 0.0


def test_brute_oracle_limit():
    with pytest.raises(TooLarge):
        synthesis_distortion_brute(np.ones((1, 22)), Alphabet(2, 1.0), [[0.0]])


def test_volumetric_bound():
    assert volumetric_bound(2, 8, 2) == 2.0**-4
    assert volumetric_bound(4, 3, 1) == 4.0**-3


def test_tail_bound_A1_value():
    tb = tail_bound_A1(6, 2, 0.1)
    expected = (10 + 8 * math.sqrt(math.log(10))) ** 2 * math.exp(3) * 1e-4
    assert tb.value == pytest.approx(expected, rel=1e-13)
    assert tb.viable
    assert not tail_bound_A1(3, 2, 0.5).viable


def test_tail_bound_A1_errors():
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(BadEps):
            tail_bound_A1(6, 2, eps)
    with pytest.raises(BadShape):
        tail_bound_A1(2, 2, 0.1)


def test_tail_bound_A1_monotone_in_eps():
    for l, k in [(6, 2), (8, 3), (12, 2), (5, 4)]:
        eps = np.linspace(1e-4, 0.3, 400)
        vals = np.array([tail_bound_A1(l, k, e).value for e in eps])
        viable = vals < 1.0
        assert np.all(np.diff(vals[viable]) > 0)


def test_small_ball_and_theory_bounds():
    assert gaussian_small_ball_bound(4, 1.0) == 1.0
    assert gaussian_small_ball_bound(4, 0.5) == pytest.approx(0.5**4 * math.exp(0.75 * 2))
    b, p = square_case_bound(16, 2, 2, 0.5)
    assert b == pytest.approx(8 * math.e * 64 * 2.0**-4)
    assert 0 < p < 1
    b, p = rect_case_bound(30, 2, 3, 2, 0.5)
    assert b == pytest.approx(16 * math.e * 30**1.5 / 3 * 2.0**-5)
    assert hsc_distortion_bound(12, 4) == pytest.approx(math.sqrt(2 * math.e) * 12 * 4.0**-6)
    assert hsc_distortion_bound(2, 2) == pytest.approx(math.sqrt(2 * math.e))


def test_pipeline_unquantized_is_exact():
    S = build_scheme(gaussian_frame(20, 3, 1), 3, 2, mode=TRUNCATE)
    err, _ = pipeline_errors(S, sample_ball(3, 200, 0), unquantized=True)
    assert err.max() <= 1e-9


def test_mc_distortion_below_bound_and_deterministic():
    S = build_scheme(hsc_frame(12), 2, 4, mu_policy=1.0)
    a = mc_distortion(S, 2000, 3)
    assert a == mc_distortion(S, 2000, 3)
    assert a.n_samples + a.n_skipped == 2000
    assert a.sup_error <= S.error_bound()
    assert a.mean_error <= a.sup_error


def test_pipeline_dominates_synthesis_oracle():
    X = sample_ball(2, 30, 11)
    for m in (2, 3, 4, 5, 6):
        S = build_scheme(gaussian_frame(m, 2, m), 2, 2, beta=1.5)
        pipe, ok = pipeline_errors(S, X)
        synth = synthesis_distortion_brute(S.dual.matrix, S.alphabet, X[ok])
        assert pipe[ok].max() >= synth - 1e-12


def test_svtail_square_and_tall():
    r = svtail_experiment(3, 3, 0.1, 20_000, 0)
    assert r.bound == 0.1 and r.bound_A1 is None
    assert r.empirical_prob <= r.bound + 4 * r.binomial_sd
    r = svtail_experiment(6, 2, 0.1, 20_000, 0)
    assert r.bound_P43 is None
    assert r.bound == pytest.approx(tail_bound_A1(6, 2, 0.1).value)
    assert r.empirical_prob <= r.bound
    assert r == svtail_experiment(6, 2, 0.1, 20_000, 0)
    with pytest.raises(BadShape):
        svtail_experiment(2, 3, 0.1, 10, 0)


def test_norm_event_is_rare():
    assert gauss_norm_event(8, 2, 2000, 0) == 0.0
    # the event does occur for a smaller radius, which checks the counter
    assert gauss_norm_event(1, 1, 20_000, 0) > 0.0


def test_hsc_experiment_rows():
    rows = hsc_experiment([4, 8], [2, 3], 500, 0)
    assert len(rows) == 4
    assert all(r["ok"] for r in rows)
    assert all(r["sup_error"] <= r["hsc_bound"] for r in rows)
    with pytest.raises(OddSize):
        hsc_experiment([5], [2], 10, 0)


def test_optimal_params_check():
    out = optimal_params_check(3.0, 1.0, 4)
    assert out["ok"]
    assert out["boundary_residual"] <= 1e-12
    assert out["objective_at_optimum"] == pytest.approx(1 / 27, rel=1e-14)


def test_decay_experiment_small_and_thread_independent():
    kw = dict(k=2, L=2, m_list=[8, 16], frames_per_m=4, x_per_frame=50, seed=3)
    a = gaussian_decay_experiment(**kw, threads=1)
    b = gaussian_decay_experiment(**kw, threads=3)
    assert a.rows == b.rows and a.rate == b.rate
    assert a.violations == 0
    assert a.target_rate == 0.5
    assert a.rows[1]["median_sup_error"] < a.rows[0]["median_sup_error"]
    r = gaussian_decay_experiment(k=2, L=2, m_list=[12, 18], l_policy="rect", eta=0.5, frames_per_m=3, x_per_frame=20)
    assert r.rows[0]["l"] == 3
    with pytest.raises(ValueError):
        gaussian_decay_experiment(k=2, L=2, m_list=[8], l_policy="wide")
