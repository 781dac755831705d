"""Householder tridiagonalization and implicit-shift QL iteration.

Pure numpy reference eigensolver for real symmetric matrices.  It is an
independent cross-check of the LAPACK route and is practical up to a few
hundred rows.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DiagonalizationError


def householder_tridiagonalize(a):
    """Return (d, e, Q) with ``a = Q @ T @ Q.T``; T has diagonal d and off-diagonal e."""
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        xnorm = math.hypot(x[0], tail)
        alpha = -math.copysign(xnorm, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        block = a[k + 1:, k + 1:]
        p = block @ v
        q = p - (v @ p) * v
        block -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        a[k + 1, k] = a[k, k + 1] = alpha
        a[k + 2:, k] = 0.0
        a[k, k + 2:] = 0.0
        Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v)
    return np.diag(a).copy(), np.diag(a, -1).copy(), Q


def tridiagonal_ql(d, e, z=None, max_iterations=None):
    """Eigen-decompose a symmetric tridiagonal matrix by implicit QL with Wilkinson-type shifts.

    ``z`` (n x n) is the accumulated transformation; pass the Householder Q to
    get eigenvectors of the original matrix.  Results are returned unsorted.
    """
    d = np.array(d, dtype=float, copy=True)
    n = d.shape[0]
    off = np.zeros(n)
    off[: n - 1] = e
    zt = np.eye(n) if z is None else np.array(z, dtype=float).T.copy()
    cap = 30 * n if max_iterations is None else max_iterations
    eps = np.finfo(float).eps
    total = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(off[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > cap:
                raise DiagonalizationError(
                    f"implicit QL did not converge within {cap} iterations at eigenvalue index {l}", index=l
                )
            g = (d[l + 1] - d[l]) / (2.0 * off[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + off[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * off[i]
                b = c * off[i]
                r = math.hypot(f, g)
                off[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    off[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                upper = zt[i + 1].copy()
                zt[i + 1] = s * zt[i] + c * upper
                zt[i] = c * zt[i] - s * upper
                i -= 1
            if underflow:
                continue
            d[l] -= p
            off[l] = g
            off[m] = 0.0
    return d, zt.T


def eigh_householder_ql(a, max_iterations=None):
    """Full eigendecomposition, ascending eigenvalues."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 1:
        return a[0].copy(), np.ones((1, 1))
    d, e, Q = householder_tridiagonalize(a)
    values, vectors = tridiagonal_ql(d, e, Q, max_iterations=max_iterations)
    order = np.argsort(values, kind="stable")
    return values[order], vectors[:, order]
