import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coadapt.exceptions import NumericError, ShapeError
from coadapt.numerics import (
    MlpParams,
    adam_step,
    central_difference,
    eig_complex,
    finite_diff_grad,
    hessenberg,
    init_mlp,
    mlp_backward,
    mlp_forward,
    sgd_step,
    svd_values,
)


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


def test_eig_matches_lapack_on_random_matrices(rng):
    for n in (1, 2, 3, 5, 8, 13):
        for _ in range(5):
            a = rng.normal(size=(n, n))
            ours = eig_complex(a)
            ref = np.linalg.eigvals(a)
            ref = ref[np.lexsort((-ref.imag, -ref.real))]
            assert np.allclose(ours, ref, atol=1e-9)


def test_eig_rotation_is_purely_imaginary():
    ev = eig_complex(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert np.allclose(ev, [1j, -1j])


def test_eig_sorted_by_real_part(rng):
    ev = eig_complex(rng.normal(size=(9, 9)))
    assert np.all(np.diff(ev.real) <= 1e-12)


def test_hessenberg_is_similar_and_upper_hessenberg(rng):
    a = rng.normal(size=(7, 7))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0.0)
    assert np.isclose(np.trace(h), np.trace(a))
    assert np.allclose(np.sort_complex(np.linalg.eigvals(h)), np.sort_complex(np.linalg.eigvals(a)))


def test_eig_rejects_non_square():
    with pytest.raises(ShapeError):
        eig_complex(np.zeros((2, 3)))


@pytest.mark.parametrize("shape", [(1, 1), (5, 3), (3, 5), (10, 10), (64, 7)])
def test_svd_values_match_lapack(rng, shape):
    a = rng.normal(size=shape)
    assert np.allclose(svd_values(a), np.linalg.svd(a, compute_uv=False), atol=1e-10)


def test_svd_values_of_rank_deficient_matrix(rng):
    a = np.outer(rng.normal(size=6), rng.normal(size=4))
    sv = svd_values(a)
    assert sv.shape == (4,)
    assert np.allclose(sv[1:], 0.0, atol=1e-12)


@pytest.mark.parametrize("head_mode", ["state_multihead", "state_action_scalar"])
def test_backward_matches_finite_differences(rng, head_mode):
    params = init_mlp([4, 6, 5, 3], rng, head_mode)
    x = rng.normal(size=(3, 4))
    up = rng.normal(size=(3, 3))
    fu = rng.normal(size=(3, 5))
    exact = mlp_backward(params, x, up, fu)
    approx = finite_diff_grad(params, x, up, feature_upstream=fu)
    assert _rel_err(exact.flatten(), approx.flatten()) < 1e-6


def test_forward_single_vector_and_batch_agree(rng):
    params = init_mlp([3, 4, 2], rng)
    x = rng.normal(size=(5, 3))
    q, f = mlp_forward(params, x)
    q0, f0 = mlp_forward(params, x[0])
    assert q.shape == (5, 2) and f.shape == (5, 4)
    assert np.allclose(q[0], q0, rtol=1e-14, atol=1e-14) and np.allclose(f[0], f0, rtol=1e-14, atol=1e-14)


def test_output_is_affine_in_features(rng):
    params = init_mlp([3, 8, 8, 2], rng)
    q, f = mlp_forward(params, rng.normal(size=(4, 3)))
    assert np.allclose(q, f @ params.weights[-1] + params.biases[-1])


def test_forward_rejects_wrong_width(rng):
    with pytest.raises(ShapeError):
        mlp_forward(init_mlp([3, 4, 2], rng), np.zeros(5))


def test_params_validate_shapes():
    with pytest.raises(ShapeError):
        MlpParams((np.zeros((2, 3)), np.zeros((4, 1))), (np.zeros(3), np.zeros(1)), "state_multihead")


def test_flatten_round_trip(rng):
    params = init_mlp([3, 4, 2], rng)
    again = params.unflatten(params.flatten())
    assert again.equals(params)


def test_central_difference_scalar_and_vector():
    assert central_difference(lambda t: t**3, 2.0) == pytest.approx(12.0, rel=1e-8)
    g = central_difference(lambda v: float(np.sum(v**2)), np.array([1.0, -2.0]))
    assert np.allclose(g, [2.0, -4.0])


def test_sgd_on_floats_and_params(rng):
    assert sgd_step(1.0, 2.0, 0.1) == pytest.approx(0.8)
    params = init_mlp([2, 3, 1], rng)
    grads = mlp_backward(params, np.ones(2), np.ones(1))
    moved = sgd_step(params, grads, 0.0)
    assert moved.equals(params)


def test_adam_minimises_quadratic():
    w, state = 0.0, None
    for _ in range(2000):
        w, state = adam_step(w, 2.0 * (w - 5.0), state, lr=0.05)
    assert w == pytest.approx(5.0, abs=1e-3)


def test_optimizers_reject_non_finite_gradients():
    with pytest.raises(NumericError):
        sgd_step(np.ones(2), np.array([1.0, np.nan]), 0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_singular_values_are_sorted_and_norm_preserving(rows, cols, seed):
    a = np.random.default_rng(seed).normal(size=(rows, cols))
    sv = svd_values(a)
    assert np.all(np.diff(sv) <= 1e-12)
    assert np.isclose(np.sum(sv**2), np.sum(a**2))
