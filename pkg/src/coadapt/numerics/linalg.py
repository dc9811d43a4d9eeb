"""Dense decompositions used by the analysis tools.

Eigenvalues of general real matrices come from Householder reduction to
upper Hessenberg form followed by the Francis double-shift QR iteration;
singular values come from one-sided (Hestenes) Jacobi rotations. Both
work in float64 on matrices of up to a few hundred rows.
"""

import math

import numpy as np

from coadapt.exceptions import NumericError, ShapeError

__all__ = ["as_matrix", "hessenberg", "eig_complex", "svd_values"]


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite, two-dimensional float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


def _balance(a):
    # Osborne balancing with radix-2 scalings, so eigenvalues are unchanged exactly.
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(a):
    """Reduce a square matrix to upper Hessenberg form by Householder reflections.

    The result is orthogonally similar to ``a`` and therefore has the same
    eigenvalues.
    """
    h = as_matrix(a).copy()
    n = h.shape[0]
    if h.shape[1] != n:
        raise ShapeError(f"expected a square matrix, got shape {h.shape}")
    for k in range(n - 2):
        x = h[k + 1:, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        alpha = -math.copysign(norm_x, x[0])
        v = x.copy()
        v[0] -= alpha
        norm_v = np.linalg.norm(v)
        if norm_v == 0.0:
            continue
        v /= norm_v
        h[k + 1:, :] -= 2.0 * np.outer(v, v @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _hqr(a, max_iter):
    """Francis double-shift QR on an upper Hessenberg matrix (modified in place)."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        anorm += np.sum(np.abs(a[i, max(i - 1, 0):]))
    nn = n - 1
    t = 0.0
    p = q = r = s = w = x = y = z = 0.0
    while nn >= 0:
        its = 0
        while True:
            # Locate a negligible subdiagonal element splitting the matrix.
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) + s == s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + math.copysign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn] = z
                        wi[nn - 1] = -z
                    nn -= 2
                else:
                    if its >= max_iter:
                        raise NumericError(
                            f"QR iteration did not converge within {max_iter} sweeps"
                        )
                    if its and its % 10 == 0:
                        # Exceptional shift breaks rare cycles.
                        t += x
                        for i in range(nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                        if s == 0.0:
                            continue
                        if k == m:
                            if l != m:
                                a[k, k - 1] = -a[k, k - 1]
                        else:
                            a[k, k - 1] = -s * x
                        p += s
                        x = p / s
                        y = q / s
                        z = r / s
                        q /= p
                        r /= p
                        # Row transformation.
                        if k != nn - 1:
                            pr = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1] + r * a[k + 2, k:nn + 1]
                            a[k + 2, k:nn + 1] -= pr * z
                        else:
                            pr = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1]
                        a[k + 1, k:nn + 1] -= pr * y
                        a[k, k:nn + 1] -= pr * x
                        # Column transformation.
                        mmin = min(nn, k + 3)
                        if k != nn - 1:
                            pc = x * a[l:mmin + 1, k] + y * a[l:mmin + 1, k + 1] + z * a[l:mmin + 1, k + 2]
                            a[l:mmin + 1, k + 2] -= pc * r
                        else:
                            pc = x * a[l:mmin + 1, k] + y * a[l:mmin + 1, k + 1]
                        a[l:mmin + 1, k + 1] -= pc * q
                        a[l:mmin + 1, k] -= pc
            if not l < nn - 1:
                break
    return wr + 1j * wi


def eig_complex(a, max_iter=60):
    """Eigenvalues of a real square matrix, with multiplicity.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Finite real matrix.
    max_iter : int
        QR sweeps allowed per eigenvalue before giving up.

    Returns
    -------
    numpy.ndarray of complex128, shape (n,)
        Eigenvalues sorted by descending real part, then descending
        imaginary part. Complex eigenvalues appear as exact conjugate pairs.

    Raises
    ------
    ShapeError
        If ``a`` is not square.
    NumericError
        If ``a`` has non-finite entries or the iteration cap is hit.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    h = hessenberg(_balance(a.copy()))
    vals = _hqr(h, max_iter)
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def _round_robin(n):
    """Pairings covering every index pair once over ``n - 1`` rounds (n even)."""
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(idx[:half]), np.array(idx[half:][::-1])))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def svd_values(a, tol=None, max_sweeps=100):
    """Singular values of ``a`` in descending order.

    One-sided Jacobi: columns are rotated pairwise until mutually
    orthogonal, at which point their norms are the singular values.
    Disjoint column pairs are rotated together in round-robin order.
    A pair counts as orthogonal once ``|<u_p, u_q>| <= tol * |u_p| |u_q|``;
    the default ``tol`` is ``rows * eps``, the rounding floor of the inner
    product itself.

    Returns an array of length ``min(rows, cols)``.
    """
    a = as_matrix(a)
    if a.shape[0] < a.shape[1]:
        a = a.T
    m, n = a.shape
    if n == 0:
        return np.zeros(0)
    if tol is None:
        tol = max(m, 1) * np.finfo(np.float64).eps
    u = a.copy()
    if n == 1:
        return np.array([np.linalg.norm(u[:, 0])])
    if n % 2:
        u = np.hstack([u, np.zeros((m, 1))])
    rounds = _round_robin(u.shape[1])
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            up = u[:, p]
            uq = u[:, q]
            alpha = np.einsum("ij,ij->j", up, up)
            beta = np.einsum("ij,ij->j", uq, uq)
            gamma = np.einsum("ij,ij->j", up, uq)
            active = np.abs(gamma) > tol * np.sqrt(alpha) * np.sqrt(beta)
            if not np.any(active):
                continue
            g = np.where(active, gamma, 1.0)
            with np.errstate(over="ignore"):
                zeta = (beta - alpha) / (2.0 * g)
                t = np.where(active, np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta)), 0.0)
            t = np.where(active & (zeta == 0.0), 1.0, t)
            if not np.any(t):
                continue
            rotated = True
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            u[:, p] = c * up - s * uq
            u[:, q] = s * up + c * uq
        if not rotated:
            break
    else:
        raise NumericError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    # A zero padding column never rotates, so the n largest norms are the answer.
    norms = np.sqrt(np.einsum("ij,ij->j", u, u))
    return np.sort(norms)[::-1][:n]
