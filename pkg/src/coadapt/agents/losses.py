"""Loss heads and explicit regularizers.

Each function returns its value together with the derivatives with respect
to its array inputs, so the trainer can chain them into network backprop.
"""

import numpy as np

from coadapt.analysis.lyapunov import lyapunov_iterate
from coadapt.exceptions import ConfigError, DomainError, ShapeError

__all__ = [
    "huber",
    "logsumexp",
    "cql_penalty",
    "sample_simplex",
    "rem_combine",
    "rem_loss",
    "dr3_penalty",
    "label_noise_penalty",
]


def huber(x, delta=1.0):
    """Elementwise Huber loss and its derivative."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) <= delta
    value = np.where(small, 0.5 * x * x, delta * (np.abs(x) - 0.5 * delta))
    grad = np.where(small, x, delta * np.sign(x))
    return value, grad


def logsumexp(q, axis=-1):
    q = np.asarray(q, dtype=np.float64)
    top = np.max(q, axis=axis, keepdims=True)
    return np.squeeze(top, axis=axis) + np.log(np.sum(np.exp(q - top), axis=axis))


def cql_penalty(q_row, data_action, alpha):
    """``alpha * (logsumexp(q_row) - q_row[data_action])`` and its gradient.

    ``q_row`` may be a single row ``(n_actions,)`` or a batch
    ``(batch, n_actions)`` with one data action per row; batches return the
    mean penalty and the gradient of that mean.
    """
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    q = np.asarray(q_row, dtype=np.float64)
    single = q.ndim == 1
    q2 = q[None, :] if single else q
    acts = np.atleast_1d(np.asarray(data_action, dtype=np.int64))
    if acts.shape != (q2.shape[0],):
        raise ShapeError("need one data action per row")
    rows = np.arange(q2.shape[0])
    lse = logsumexp(q2, axis=1)
    value = alpha * float(np.mean(lse - q2[rows, acts]))
    soft = np.exp(q2 - lse[:, None])
    grad = soft
    grad[rows, acts] -= 1.0
    grad *= alpha / q2.shape[0]
    return value, (grad[0] if single else grad)


def sample_simplex(rng, k):
    """Uniform draw from the probability simplex via normalised exponentials."""
    e = rng.exponential(size=k)
    return e / e.sum()


def _check_simplex(weights):
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("REM weights must be a probability vector")
    return w


def rem_combine(head_values, weights):
    """Convex combination over the head axis (axis 1 of ``(batch, K, ...)``)."""
    w = _check_simplex(weights)
    head_values = np.asarray(head_values, dtype=np.float64)
    if head_values.shape[1] != w.shape[0]:
        raise ShapeError("one weight per head required")
    return np.tensordot(head_values, w, axes=([1], [0]))


def rem_loss(head_q, targets, weights, loss="huber"):
    """Mean REM regression loss between the combined prediction and ``targets``.

    ``head_q`` is ``(batch, K)``, the per-head Q at the data action;
    ``targets`` are already built from the identically weighted target heads.
    Returns ``(value, d value / d head_q)``.
    """
    head_q = np.asarray(head_q, dtype=np.float64)
    w = _check_simplex(weights)
    pred = head_q @ w
    err = pred - np.asarray(targets, dtype=np.float64)
    if loss == "huber":
        val, dval = huber(err)
    elif loss == "squared":
        val, dval = err * err, 2.0 * err
    else:
        raise ConfigError(f"unknown REM loss {loss!r}")
    n = head_q.shape[0]
    return float(val.mean()), np.outer(dval / n, w)


def dr3_penalty(phi, phi_next, stop_grad_second=False):
    """Summed feature dot products ``sum_i <phi_i, phi'_i>`` with gradients.

    Returns ``(value, d/d phi, d/d phi_next)``; the last is zero when
    ``stop_grad_second`` is set.
    """
    phi = np.asarray(phi, dtype=np.float64)
    phi_next = np.asarray(phi_next, dtype=np.float64)
    if phi.shape != phi_next.shape:
        raise ShapeError(f"phi {phi.shape} and phi_next {phi_next.shape} differ")
    value = float(np.einsum("ij,ij->", phi, phi_next))
    grad_next = np.zeros_like(phi) if stop_grad_second else phi.copy()
    return value, phi_next.copy(), grad_next


def label_noise_penalty(phi, phi_next, gamma, eta, iters, sigma=None):
    """Generalised dot products ``sum_i phi_i^T S phi'_i`` for the label-noise covariance.

    ``S`` comes from ``iters`` steps of the Lyapunov recursion with
    ``G = sum_i phi_i (phi_i - gamma phi'_i)^T`` and
    ``M = sum_i phi_i phi_i^T`` (the last-layer gradients of Q, per head),
    and is held constant for differentiation. Pass ``sigma`` to override it.
    Returns ``(value, d/d phi, d/d phi_next, S)``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    phi_next = np.asarray(phi_next, dtype=np.float64)
    if phi.shape != phi_next.shape:
        raise ShapeError(f"phi {phi.shape} and phi_next {phi_next.shape} differ")
    if iters < 1:
        raise DomainError("iters must be >= 1")
    if sigma is None:
        g = phi.T @ (phi - gamma * phi_next)
        m = phi.T @ phi
        sigma = lyapunov_iterate(g, m, eta, iters)
    sigma = np.asarray(sigma, dtype=np.float64)
    value = float(np.einsum("ij,jk,ik->", phi, sigma, phi_next))
    return value, phi_next @ sigma.T, phi @ sigma, sigma
