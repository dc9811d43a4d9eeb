"""Feature co-adaptation diagnostics and the implicit regularizer value."""

import numpy as np

from coadapt.analysis.lyapunov import lyapunov_sigma
from coadapt.exceptions import DomainError
from coadapt.numerics.linalg import as_matrix, svd_values

__all__ = [
    "mean_feature_dot",
    "mean_cosine",
    "srank",
    "label_noise_matrices",
    "implicit_reg_value",
    "full_gradient_implicit_reg",
]


def mean_feature_dot(pair):
    """Average of ``<phi_i, phi'_i>`` over rows."""
    if pair.n < 1:
        raise DomainError("need at least one row")
    return float(np.einsum("ij,ij->", pair.phi, pair.phi_next) / pair.n)


def mean_cosine(pair, return_count=False):
    """Average cosine similarity of aligned rows, skipping rows with a zero vector.

    With ``return_count=True`` returns ``(mean, rows_used)``.
    """
    na = np.linalg.norm(pair.phi, axis=1)
    nb = np.linalg.norm(pair.phi_next, axis=1)
    valid = (na > 0) & (nb > 0)
    if not valid.any():
        raise DomainError("cosine similarity is undefined: every row pair has a zero vector")
    dots = np.einsum("ij,ij->i", pair.phi[valid], pair.phi_next[valid])
    cos = np.clip(dots / (na[valid] * nb[valid]), -1.0, 1.0)
    value = float(cos.mean())
    return (value, int(valid.sum())) if return_count else value


def srank(features, delta=0.01):
    """Smallest k whose top-k singular values hold a ``1 - delta`` share of the total.

    A zero matrix has srank 0.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    sv = svd_values(as_matrix(features, "features"))
    total = sv.sum()
    if total == 0.0:
        return 0
    frac = np.cumsum(sv) / total
    # Guard the comparison against rounding in the cumulative sum.
    return int(np.argmax(frac >= (1.0 - delta) - 1e-12) + 1)


def label_noise_matrices(pair):
    """Pseudo-Hessian ``G`` and label-noise covariance ``M`` in feature coordinates.

    ``G = sum_i phi_i (phi_i - gamma phi'_i)^T`` and ``M = sum_i phi_i phi_i^T``.
    """
    g = pair.phi.T @ (pair.phi - pair.gamma * pair.phi_next)
    m = pair.phi.T @ pair.phi
    return g, m


def implicit_reg_value(pair, sigma="identity", eta=None, **lyapunov_kwargs):
    """Last-layer value of the TD implicit regularizer.

    ``sum_i phi_i^T S phi_i - gamma * sum_i phi_i^T S phi'_i`` where ``S``
    is the identity (``sigma="identity"``), an explicit ``(d, d)`` matrix,
    or the Lyapunov fixed point for label noise (``sigma="lyapunov"``,
    which needs ``eta``). Evaluation only.
    """
    phi, phi_next = pair.phi, pair.phi_next
    if isinstance(sigma, str):
        if sigma == "identity":
            first = np.einsum("ij,ij->", phi, phi)
            second = np.einsum("ij,ij->", phi, phi_next)
            return float(first - pair.gamma * second)
        if sigma != "lyapunov":
            raise DomainError(f"unknown sigma choice {sigma!r}")
        if eta is None:
            raise DomainError("the Lyapunov choice needs a step size eta")
        g, m = label_noise_matrices(pair)
        sigma = lyapunov_sigma(g, m, eta, **lyapunov_kwargs).sigma
    s = as_matrix(sigma, "sigma")
    if s.shape != (pair.dim, pair.dim):
        raise DomainError(f"sigma must be {pair.dim}x{pair.dim}")
    first = np.einsum("ij,jk,ik->", phi, s, phi)
    second = np.einsum("ij,jk,ik->", phi, s, phi_next)
    return float(first - pair.gamma * second)


def full_gradient_implicit_reg(grads, next_grads, gamma):
    """Identity-covariance regularizer on full parameter gradients.

    ``grads`` and ``next_grads`` are ``(n, n_params)`` per-example gradients
    of ``Q(s_i, a_i)`` and ``Q(s'_i, a'_i)``; practical only for small nets.
    """
    grads = as_matrix(grads, "grads")
    next_grads = as_matrix(next_grads, "next_grads")
    return float(np.einsum("ij,ij->", grads, grads) - gamma * np.einsum("ij,ij->", grads, next_grads))
