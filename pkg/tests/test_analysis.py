import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coadapt.analysis import (
    BORDERLINE,
    NON_CONVERGENT,
    STABLE,
    CheckpointRecord,
    FeaturePair,
    MetricTrace,
    classify,
    coadaptation_trace_test,
    full_gradient_implicit_reg,
    implicit_reg_value,
    label_noise_matrices,
    lyapunov_iterate,
    lyapunov_sigma,
    mean_cosine,
    mean_feature_dot,
    simulate_linear_td,
    simulate_linear_td_batch,
    srank,
    stability_spectrum,
    support_spectral_radius,
    td_matrix,
)
from coadapt.exceptions import DomainError, NumericError, ShapeError, StabilityError


def pair(phi, phi_next, gamma=0.9):
    return FeaturePair(np.atleast_2d(phi), np.atleast_2d(phi_next), gamma)


def test_feature_pair_validation():
    with pytest.raises(ShapeError):
        pair(np.ones((2, 3)), np.ones((3, 2)))
    with pytest.raises(NumericError):
        pair([[np.nan]], [[1.0]])
    with pytest.raises(DomainError):
        pair([[1.0]], [[1.0]], gamma=1.5)


def test_mean_feature_dot_examples():
    assert mean_feature_dot(pair(np.eye(3), np.eye(3))) == 1.0
    assert mean_feature_dot(pair([[1.0, 0.0]], [[0.0, 1.0]])) == 0.0
    assert mean_feature_dot(pair([[1.0, 2.0], [3.0, 4.0]], [[0.0, 1.0], [5.0, 6.0]])) == 20.5


def test_mean_cosine_examples():
    assert mean_cosine(pair([[1.0, 2.0]], [[2.0, 4.0]])) == pytest.approx(1.0)
    assert mean_cosine(pair([[1.0, 2.0]], [[-1.0, -2.0]])) == pytest.approx(-1.0)
    assert mean_cosine(pair([[1.0, 0.0]], [[1.0, 1.0]])) == pytest.approx(1 / math.sqrt(2))


def test_mean_cosine_skips_zero_rows_and_rejects_all_zero():
    value, used = mean_cosine(pair([[1.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [1.0, 1.0]]), return_count=True)
    assert (value, used) == (1.0, 1)
    with pytest.raises(DomainError):
        mean_cosine(pair(np.zeros((2, 2)), np.ones((2, 2))))


def test_cosine_and_dot_scaling(rng):
    phi, nxt = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    scales = rng.uniform(0.1, 5.0, size=(6, 1))
    assert mean_cosine(pair(phi * scales, nxt)) == pytest.approx(mean_cosine(pair(phi, nxt)))
    assert mean_feature_dot(pair(3.0 * phi, nxt)) == pytest.approx(3.0 * mean_feature_dot(pair(phi, nxt)))


def test_srank_examples():
    assert srank(np.eye(100), 0.01) == 99
    assert srank(np.outer(np.arange(1.0, 6.0), np.ones(4)), 0.3) == 1
    assert srank(np.diag([10.0, 1.0, 1.0]), 0.01) == 3
    assert srank(np.zeros((4, 3))) == 0
    with pytest.raises(DomainError):
        srank(np.eye(2), 1.5)


def test_trace_test_examples():
    assert not coadaptation_trace_test(pair([[1.0, 2.0]], [[1.0, 2.0]]))
    assert coadaptation_trace_test(pair([[1.0]], [[2.0]]))


def test_spectrum_examples():
    perm = np.eye(5)[[1, 2, 3, 4, 0]]
    rep = stability_spectrum(FeaturePair(np.eye(5), perm, 0.9))
    assert rep.verdict == STABLE and rep.min_real_part >= 0.1 - 1e-12
    rep = stability_spectrum(pair([[1.0]], [[2.0]]))
    assert rep.verdict == NON_CONVERGENT and rep.trace_condition_holds
    assert rep.eigenvalues[0] == pytest.approx(-0.8)
    assert "verdict: non_convergent" in rep.summary_lines()


def test_classify_rules():
    assert classify(np.array([1.0, 2.0 + 1j, 2.0 - 1j]), 1e-9) == STABLE
    assert classify(np.array([1.0, -1.0]), 1e-9) == NON_CONVERGENT
    assert classify(np.array([1.0, 1j, -1j]), 1e-9) == NON_CONVERGENT
    assert classify(np.array([1.0, 0.0]), 1e-9) == BORDERLINE


def test_td_matrix_trace_identity(rng):
    p = pair(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), 0.7)
    m = td_matrix(p)
    expected = np.sum(p.phi**2) - 0.7 * np.sum(p.phi * p.phi_next)
    assert np.trace(m) == pytest.approx(expected)


def test_simulation_examples():
    sim = simulate_linear_td(FeaturePair(np.eye(2), np.eye(2), 0.9), np.zeros(2), 0.1, 100)
    assert np.all(sim.final_weights == 0.0)
    sim = simulate_linear_td(pair([[1.0]], [[0.5]]), [1.0], 0.1, 2000)
    assert sim.converged and not sim.diverged
    assert sim.final_weights[0] == pytest.approx(1.0 / 0.55, rel=1e-9)
    sim = simulate_linear_td(pair([[1.0]], [[2.0]]), [1.0], 0.1, 400)
    assert sim.diverged and not sim.converged


def test_simulation_rejects_bad_arguments():
    with pytest.raises(DomainError):
        simulate_linear_td(pair([[1.0]], [[0.5]]), [1.0], 0.0, 10)
    with pytest.raises(ShapeError):
        simulate_linear_td(pair([[1.0]], [[0.5]]), [1.0, 2.0], 0.1, 10)


def test_lyapunov_examples():
    sol = lyapunov_sigma(np.eye(1), np.eye(1), 0.1)
    assert abs(sol.sigma[0, 0] - 0.01 / 0.19) < 1e-9
    zero = lyapunov_sigma(np.eye(3), np.zeros((3, 3)), 0.1)
    assert np.all(zero.sigma == 0.0)


def test_lyapunov_random_contractive(rng):
    for _ in range(10):
        q = rng.normal(size=(4, 4))
        g = q @ q.T + 0.5 * np.eye(4) + 0.3 * (rng.normal(size=(4, 4)) - rng.normal(size=(4, 4)))
        b = rng.normal(size=(4, 4))
        m = b @ b.T
        eta = 0.5 / np.linalg.norm(g, 2)
        if support_spectral_radius(g, m, eta) >= 1:
            continue
        s = lyapunov_sigma(g, m, eta).sigma
        a = np.eye(4) - eta * g
        assert np.linalg.norm(a @ s @ a.T + eta**2 * m - s) < 1e-8
        assert np.allclose(s, s.T, atol=1e-10)
        assert np.linalg.eigvalsh(s).min() > -1e-10


def test_lyapunov_rejects_non_contractive():
    with pytest.raises(StabilityError):
        lyapunov_sigma(-np.eye(2), np.eye(2), 0.1)
    with pytest.raises(DomainError):
        lyapunov_sigma(np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]), 0.1)


def test_lyapunov_iterate_raises_on_growth():
    with pytest.raises(NumericError):
        lyapunov_iterate(-10 * np.eye(2), np.eye(2), 1.0, 200)
    s = lyapunov_iterate(np.eye(1), np.eye(1), 0.1, 500)
    assert s[0, 0] == pytest.approx(0.01 / 0.19)


def test_implicit_reg_examples(rng):
    phi = rng.normal(size=(5, 3))
    p0 = FeaturePair(phi, np.zeros_like(phi), 0.9)
    assert implicit_reg_value(p0) == pytest.approx(np.sum(phi**2))
    p = FeaturePair(phi, rng.normal(size=(5, 3)), 0.9)
    assert implicit_reg_value(p, sigma=np.eye(3)) == pytest.approx(implicit_reg_value(p), abs=1e-12)


def test_implicit_reg_permutation_lower_bound(rng):
    for _ in range(20):
        phi = rng.normal(size=(7, 4))
        p = FeaturePair(phi, phi[rng.permutation(7)], 0.9)
        assert implicit_reg_value(p) >= 0.1 * np.sum(phi**2) - 1e-12


def test_implicit_reg_lyapunov_form(rng):
    phi = rng.normal(size=(6, 2))
    p = FeaturePair(phi, 0.2 * phi, 0.9)
    g, m = label_noise_matrices(p)
    s = lyapunov_sigma(g, m, 0.01).sigma
    assert implicit_reg_value(p, "lyapunov", eta=0.01) == pytest.approx(implicit_reg_value(p, s))
    with pytest.raises(DomainError):
        implicit_reg_value(p, "lyapunov")


def test_full_gradient_form_matches_features(rng):
    phi, nxt = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert full_gradient_implicit_reg(phi, nxt, 0.5) == pytest.approx(implicit_reg_value(FeaturePair(phi, nxt, 0.5)))


def _record(step, **kw):
    base = dict(loss=0.5, mean_q=1.0, feat_dot=2.0, cosine=0.1, srank=3, eval_return=math.nan, r_td=-1.5)
    base.update(kw)
    return CheckpointRecord(step, **base)


def test_trace_csv_round_trip(tmp_path):
    tr = MetricTrace(metadata={"a": 1})
    tr.append(_record(10))
    tr.append(_record(20, loss=0.1 + 0.2, diverged=True))
    path = tmp_path / "t.csv"
    text = tr.to_csv(path)
    back = MetricTrace.from_csv(path)
    assert back.metadata == {"a": 1}
    assert back.to_csv() == text
    assert back.records[1].loss == 0.1 + 0.2 and back.diverged
    assert text.splitlines()[1] == "step,loss,mean_q,feat_dot,cosine,srank,eval_return,r_td,diverged"


def test_trace_rejects_non_increasing_steps():
    tr = MetricTrace()
    tr.append(_record(5))
    with pytest.raises(DomainError):
        tr.append(_record(5))


def test_trace_parse_error_names_line():
    text = "step,loss,mean_q,feat_dot,cosine,srank,eval_return,r_td,diverged\n1,0,0,0,0,1,0,0,0\n2,x,0,0,0,1,0,0,0\n"
    with pytest.raises(ValueError, match="line 3"):
        MetricTrace.from_csv(text)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 6), st.floats(0.01, 100.0), st.integers(0, 10_000))
def test_srank_invariances(n, d, scale, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, d))
    assert srank(a) == srank(a[rng.permutation(n)]) == srank(scale * a)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.sampled_from([0.5, 0.9, 0.99]), st.integers(0, 10_000))
def test_trace_condition_implies_not_stable(n, d, gamma, seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(n, d))
    p = FeaturePair(phi, rng.uniform(0.5, 2.5) * phi + 0.3 * rng.normal(size=(n, d)), gamma)
    rep = stability_spectrum(p)
    if rep.trace_condition_holds:
        assert rep.verdict != STABLE
        assert rep.min_real_part <= rep.tol


def test_simulation_misses_only_slow_stable_modes():
    # Row-permuted pairs put eigenvalues near zero; within a fixed horizon
    # the oracle can then miss convergence, but only for slow Stable cases.
    rng = np.random.default_rng(21)
    pairs, rewards, reports = [], [], []
    for _ in range(120):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, n + 1))
        phi = rng.normal(size=(n, d))
        p = FeaturePair(phi, phi[rng.permutation(n)], float(rng.choice([0.5, 0.9, 0.99])))
        rep = stability_spectrum(p)
        if rep.verdict != BORDERLINE:
            pairs.append(p)
            rewards.append(rng.normal(size=n))
            reports.append(rep)
    sims = simulate_linear_td_batch(pairs, rewards, 1e-3, 50_000)
    for rep, sim in zip(reports, sims):
        if (rep.verdict == STABLE) != sim.converged:
            # A quarter of the usual horizon widens the slow band fourfold.
            assert rep.verdict == STABLE and rep.min_real_part < 0.2
            assert sim.errors[-1] <= sim.errors[len(sim.errors) // 2]
