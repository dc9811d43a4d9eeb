"""Fixed point of the discrete Lyapunov recursion ``S <- A S A^T + eta^2 M``."""

from typing import NamedTuple

import numpy as np

from coadapt.exceptions import DomainError, NumericError, StabilityError
from coadapt.numerics.linalg import as_matrix, eig_complex

__all__ = ["LyapunovSolution", "lyapunov_sigma", "lyapunov_iterate", "support_spectral_radius"]


class LyapunovSolution(NamedTuple):
    sigma: np.ndarray
    residual: float
    iterations: int


def _check_inputs(G, M):
    G = as_matrix(G, "G")
    M = as_matrix(M, "M")
    d = G.shape[0]
    if G.shape != (d, d) or M.shape != (d, d):
        raise DomainError(f"G {G.shape} and M {M.shape} must be square and equal-sized")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise DomainError("M must be symmetric")
    return G, M


def support_spectral_radius(G, M, eta):
    """Spectral radius of ``I - eta G`` compressed onto the range of ``M``.

    Returns 0 when ``M`` is zero.
    """
    G, M = _check_inputs(G, M)
    evals, evecs = np.linalg.eigh(M)
    top = float(np.max(np.abs(evals))) if evals.size else 0.0
    if top == 0.0:
        return 0.0
    if evals.min() < -1e-10 * top:
        raise DomainError("M must be positive semi-definite")
    basis = evecs[:, evals > 1e-12 * top]
    a = np.eye(G.shape[0]) - eta * G
    compressed = basis.T @ a @ basis
    return float(np.max(np.abs(eig_complex(compressed))))


def _step(sigma, a, noise):
    nxt = a @ sigma @ a.T + noise
    return 0.5 * (nxt + nxt.T)


def lyapunov_iterate(G, M, eta, iters, growth_cap=1e12):
    """Run exactly ``iters`` steps of the recursion from zero.

    Used when a fixed small number of steps is wanted (per-gradient-step
    penalties); raises ``NumericError`` if the iterate blows up.
    """
    G = np.asarray(G, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    a = np.eye(G.shape[0]) - eta * G
    noise = eta * eta * M
    sigma = np.zeros_like(M)
    cap = growth_cap * max(1.0, float(np.linalg.norm(noise)))
    for _ in range(iters):
        sigma = _step(sigma, a, noise)
        if not np.isfinite(sigma).all() or np.linalg.norm(sigma) > cap:
            raise NumericError("Lyapunov recursion is growing; use a smaller lyapunov_lr")
    return sigma


def lyapunov_sigma(G, M, eta, tol=1e-12, max_iter=1_000_000, check=True):
    """Solve ``S = (I - eta G) S (I - eta G)^T + eta^2 M`` by fixed-point iteration.

    Parameters
    ----------
    G : (d, d) array
        Pseudo-Hessian; need not be symmetric.
    M : (d, d) array
        Symmetric positive semi-definite noise covariance.
    eta : float
        Step size.
    tol : float
        Stop when the Frobenius norm of the equation residual falls below this.
    check : bool
        Verify up front that ``I - eta G`` contracts on the range of ``M``.

    Returns
    -------
    LyapunovSolution
        ``(sigma, residual, iterations)``.

    Raises
    ------
    StabilityError
        If the recursion is not contractive on the support of ``M``.
    NumericError
        If ``max_iter`` is reached before ``tol``.
    """
    G, M = _check_inputs(G, M)
    if eta <= 0:
        raise DomainError("eta must be positive")
    if check:
        rho = support_spectral_radius(G, M, eta)
        if rho >= 1.0:
            raise StabilityError(
                f"I - eta*G has spectral radius {rho:.6g} >= 1 on the support of M; "
                "the pseudo-Hessian needs eigenvalues with positive real part"
            )
    a = np.eye(G.shape[0]) - eta * G
    noise = eta * eta * M
    sigma = np.zeros_like(M)
    for it in range(max_iter + 1):
        nxt = _step(sigma, a, noise)
        # Residual of the current iterate is exactly the size of the next update.
        residual = float(np.linalg.norm(nxt - sigma))
        if residual < tol:
            return LyapunovSolution(sigma, residual, it)
        if not np.isfinite(residual):
            raise StabilityError("Lyapunov recursion diverged")
        sigma = nxt
    raise NumericError(f"Lyapunov recursion did not reach tol={tol} in {max_iter} iterations")
