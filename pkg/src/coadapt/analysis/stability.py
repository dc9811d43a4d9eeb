"""Convergence of linear TD on fixed features.

Linear TD with features ``phi`` (rows ``phi(s_i, a_i)``) and ``phi_next``
(rows ``phi(s'_i, a'_i)``) iterates ``w <- w - eta * (M w - b)`` with
``M = phi^T (phi - gamma phi_next)`` and ``b = phi^T r``. It converges for
small step sizes exactly when every eigenvalue of ``M`` has positive real
part. A dot-product condition on the features forces ``trace(M) <= 0``,
which rules that out.
"""

from dataclasses import dataclass

import numpy as np

from coadapt.exceptions import DomainError, ShapeError
from coadapt.numerics.linalg import as_matrix, eig_complex

__all__ = [
    "FeaturePair",
    "StabilityReport",
    "SimulationResult",
    "td_matrix",
    "coadaptation_trace_test",
    "stability_spectrum",
    "simulate_linear_td",
    "simulate_linear_td_batch",
]

STABLE = "stable"
NON_CONVERGENT = "non_convergent"
BORDERLINE = "borderline"


@dataclass(frozen=True, eq=False)
class FeaturePair:
    """Features at the two ends of each Bellman backup, plus the discount."""

    phi: np.ndarray
    phi_next: np.ndarray
    gamma: float

    def __post_init__(self):
        phi = as_matrix(self.phi, "phi")
        phi_next = as_matrix(self.phi_next, "phi_next")
        if phi.shape != phi_next.shape:
            raise ShapeError(f"phi {phi.shape} and phi_next {phi_next.shape} differ in shape")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_next", phi_next)

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def dim(self):
        return self.phi.shape[1]


def td_matrix(pair):
    """``phi^T (phi - gamma * phi_next)``, shape ``(d, d)``."""
    return pair.phi.T @ (pair.phi - pair.gamma * pair.phi_next)


def coadaptation_trace_test(pair):
    """True when ``sum <phi_i, phi'_i> >= (1/gamma) sum ||phi_i||^2``.

    Evaluated as ``gamma * cross >= self`` so that gamma = 0 needs no
    special case.
    """
    cross = float(np.einsum("ij,ij->", pair.phi, pair.phi_next))
    self_ = float(np.einsum("ij,ij->", pair.phi, pair.phi))
    return pair.gamma * cross >= self_


@dataclass(frozen=True, eq=False)
class StabilityReport:
    eigenvalues: np.ndarray
    verdict: str
    trace_condition_holds: bool
    min_real_part: float
    tol: float

    def summary_lines(self):
        lines = [
            f"verdict: {self.verdict}",
            f"trace_condition: {str(self.trace_condition_holds).lower()}",
            f"min_real_part: {float(self.min_real_part)!r}",
            f"tolerance: {float(self.tol)!r}",
            "eigenvalues:",
        ]
        lines += [f"  {float(v.real)!r} {float(v.imag):+.17g}j" for v in self.eigenvalues]
        return lines


def classify(eigenvalues, tol):
    """Verdict for linear-TD eigenvalues using an absolute tolerance ``tol``.

    Any real part below ``-tol`` is non-convergent. So is a complex pair on
    the imaginary axis: ``|1 - eta * lambda| > 1`` for every step size.
    Real parts all above ``tol`` are stable; anything else is borderline.
    """
    re = eigenvalues.real
    im = eigenvalues.imag
    if np.any(re < -tol):
        return NON_CONVERGENT
    if np.all(re > tol):
        return STABLE
    if np.any((re <= tol) & (np.abs(im) > tol)):
        return NON_CONVERGENT
    return BORDERLINE


def stability_spectrum(pair, tol=1e-9):
    """Eigenvalues of the linear-TD matrix and the resulting verdict.

    ``tol`` is relative to the Frobenius norm of the matrix.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    m = td_matrix(pair)
    evals = eig_complex(m)
    tol_abs = tol * max(float(np.linalg.norm(m)), np.finfo(float).tiny)
    min_re = float(evals.real.min()) if evals.size else 0.0
    return StabilityReport(evals, classify(evals, tol_abs), coadaptation_trace_test(pair), min_re, tol_abs)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Outcome of running linear TD from ``w = 0``.

    ``errors`` holds the monitored norm at ``steps_recorded``: the distance
    to the TD fixed point when one exists, otherwise ``||w||``.
    """

    errors: np.ndarray
    steps_recorded: np.ndarray
    diverged: bool
    converged: bool
    fixed_point_exists: bool
    final_weights: np.ndarray

    @property
    def final_error(self):
        return float(self.errors[-1])


def _fixed_point(m, b):
    w, *_ = np.linalg.lstsq(m, b, rcond=None)
    exists = np.linalg.norm(m @ w - b) <= 1e-9 * (1.0 + np.linalg.norm(b))
    return w, bool(exists)


def simulate_linear_td_batch(pairs, rewards, eta, steps, record_every=None, conv_tol=1e-6):
    """Simulate many small instances at once by zero-padding to a common size.

    Zero-padded rows contribute nothing to ``M`` or ``b`` and zero-padded
    columns keep their weights at zero, so each instance evolves exactly as
    it would alone.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    if eta <= 0:
        raise DomainError("eta must be positive")
    pairs = list(pairs)
    rewards = [np.asarray(r, dtype=np.float64).reshape(-1) for r in rewards]
    if len(rewards) != len(pairs):
        raise ShapeError("need one reward vector per feature pair")
    count = len(pairs)
    dmax = max(p.dim for p in pairs)
    m_all = np.zeros((count, dmax, dmax))
    b_all = np.zeros((count, dmax))
    target = np.zeros((count, dmax))
    exists = np.zeros(count, dtype=bool)
    for k, (p, r) in enumerate(zip(pairs, rewards)):
        if r.shape != (p.n,):
            raise ShapeError(f"instance {k}: rewards {r.shape} do not match {p.n} rows")
        d = p.dim
        m = td_matrix(p)
        b = p.phi.T @ r
        m_all[k, :d, :d] = m
        b_all[k, :d] = b
        w_star, exists[k] = _fixed_point(m, b)
        if exists[k]:
            target[k, :d] = w_star

    record_every = record_every or max(1, steps // 200)
    mid = steps // 2
    w = np.zeros((count, dmax, 1))
    b_col = b_all[:, :, None]
    tgt_col = target[:, :, None]
    rec_steps = [0]
    rec_err = [np.linalg.norm((w - tgt_col)[:, :, 0], axis=1)]
    mid_err = rec_err[0] if mid == 0 else None
    alive = np.ones(count, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            w = w - eta * (m_all @ w - b_col)
            if k % record_every == 0 or k == mid or k == steps:
                err = np.linalg.norm((w - tgt_col)[:, :, 0], axis=1)
                if k == mid:
                    mid_err = err
                if k % record_every == 0 or k == steps:
                    rec_steps.append(k)
                    rec_err.append(err)
                alive &= np.isfinite(err)
                if not alive.any():
                    break
    errs = np.array(rec_err).T
    results = []
    for k in range(count):
        e = errs[k]
        final = e[-1]
        if mid_err is None:
            mid_k = e[0]
        else:
            mid_k = mid_err[k]
        finite = np.isfinite(final)
        diverged = (not finite) or (final >= 10.0 * mid_k and final > 0.0)
        converged = bool(
            finite and exists[k] and (final < conv_tol or (mid_k > 0 and final <= 0.1 * mid_k))
        )
        results.append(
            SimulationResult(
                e,
                np.array(rec_steps[: len(e)]),
                bool(diverged),
                converged and not diverged,
                bool(exists[k]),
                w[k, : pairs[k].dim, 0].copy(),
            )
        )
    return results


def simulate_linear_td(pair, rewards, eta, steps, record_every=None, conv_tol=1e-6):
    """Brute-force linear TD from ``w = 0``; see :class:`SimulationResult`.

    ``diverged`` means the monitored norm grew at least tenfold over the
    second half of the run. ``converged`` means a fixed point exists and the
    error either fell below ``conv_tol`` or shrank at least tenfold over the
    second half.
    """
    return simulate_linear_td_batch([pair], [rewards], eta, steps, record_every, conv_tol)[0]
