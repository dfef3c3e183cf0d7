"""In-repo dense linear algebra for the verification oracles.

A general complex eigensolver (Householder Hessenberg reduction followed by
an implicit single-shift QR iteration with Wilkinson shifts) and an LU
factorization with partial pivoting.  Deliberately self-contained: the
verification layer must not inherit its answers from the library routines it
is meant to check.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergentQR, SingularEigenbasis

_EPS = np.finfo(float).eps


def hessenberg(a: np.ndarray):
    """Unitary reduction A = Q H Q^H with H upper Hessenberg."""
    n = a.shape[0]
    h = np.asarray(a, dtype=complex).copy()
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = h[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx <= _EPS * max(1.0, np.linalg.norm(h)):
            continue
        phase = x[0] / abs(x[0]) if abs(x[0]) > 0 else 1.0
        v = x.copy()
        v[0] += phase * nx
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v = v / vn
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v.conj())
    for k in range(n - 2):
        h[k + 2:, k] = 0.0
    return h, q


def _givens(f: complex, g: complex):
    """Unitary 2x2 U with U [f, g]^T = [r, 0]^T."""
    r = np.hypot(abs(f), abs(g))
    if r == 0.0:
        return np.eye(2, dtype=complex)
    return np.array([[np.conj(f), np.conj(g)], [-g, f]], dtype=complex) / r


def schur(a: np.ndarray, max_sweeps: int | None = None):
    """Complex Schur form A = Q T Q^H by implicit single-shift QR.

    max_sweeps defaults to 100 n^2 total chase sweeps; exceeding it raises
    NonConvergentQR.
    """
    n = a.shape[0]
    if n == 1:
        return np.asarray(a, dtype=complex).copy(), np.eye(1, dtype=complex)
    t, q = hessenberg(a)
    budget = max_sweeps if max_sweeps is not None else 100 * n * n
    scale = max(np.max(np.abs(t)), 1e-300)
    sweeps = 0
    hi = n - 1
    stagnation = 0
    while hi > 0:
        # deflate negligible subdiagonals
        for i in range(hi):
            if abs(t[i + 1, i]) <= _EPS * (abs(t[i, i]) + abs(t[i + 1, i + 1]) + 1e-300 * scale):
                t[i + 1, i] = 0.0
        if t[hi, hi - 1] == 0.0:
            hi -= 1
            stagnation = 0
            continue
        lo = hi
        while lo > 0 and t[lo, lo - 1] != 0.0:
            lo -= 1
        # Wilkinson shift from the trailing 2x2 of the active window
        aa, bb = t[hi - 1, hi - 1], t[hi - 1, hi]
        cc, dd = t[hi, hi - 1], t[hi, hi]
        tr = aa + dd
        det = aa * dd - bb * cc
        disc = np.sqrt(tr * tr / 4.0 - det + 0j)
        mu1, mu2 = tr / 2.0 + disc, tr / 2.0 - disc
        mu = mu1 if abs(mu1 - dd) <= abs(mu2 - dd) else mu2
        stagnation += 1
        if stagnation % 12 == 0:
            mu = dd + 0.75 * abs(t[hi, hi - 1])  # exceptional shift against cycling
        x = t[lo, lo] - mu
        y = t[lo + 1, lo]
        for k in range(lo, hi):
            u = _givens(x, y)
            t[k:k + 2, :] = u @ t[k:k + 2, :]
            t[:, k:k + 2] = t[:, k:k + 2] @ u.conj().T
            q[:, k:k + 2] = q[:, k:k + 2] @ u.conj().T
            if k + 2 <= hi:
                x = t[k + 1, k]
                y = t[k + 2, k]
        sweeps += 1
        if sweeps > budget:
            raise NonConvergentQR(f"QR iteration exceeded {budget} sweeps at window {lo}..{hi}")
    tri = np.triu(t)
    return tri, q


def triangular_eigenvectors(t: np.ndarray) -> np.ndarray:
    """Unit-norm eigenvectors of an upper-triangular matrix by back substitution."""
    n = t.shape[0]
    scale = max(np.max(np.abs(t)), 1e-300)
    smallnum = _EPS * scale
    vecs = np.zeros((n, n), dtype=complex)
    for i in range(n):
        y = np.zeros(n, dtype=complex)
        y[i] = 1.0
        lam = t[i, i]
        for j in range(i - 1, -1, -1):
            s = t[j, j + 1:i + 1] @ y[j + 1:i + 1]
            den = t[j, j] - lam
            if abs(den) < smallnum:
                den = smallnum  # perturb clustered diagonal, standard guard
            y[j] = -s / den
            yn = abs(y[j])
            if yn > 1e12:  # rescale against overflow in long recurrences
                y[:i + 1] /= yn
        vecs[:, i] = y / np.linalg.norm(y)
    return vecs


def eig(a: np.ndarray, max_sweeps: int | None = None):
    """Eigenvalues and unit eigenvectors of a general complex matrix.

    Returns (values, vectors) sorted by ascending |value|.
    """
    t, q = schur(a, max_sweeps)
    vals = np.diag(t).copy()
    vecs = q @ triangular_eigenvectors(t)
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    order = np.argsort(np.abs(vals), kind="stable")
    return vals[order], vecs[:, order]


def lu_factor(a: np.ndarray):
    """Partial-pivot LU: returns (LU, perm) with a[perm] = L U."""
    n = a.shape[0]
    lu = np.asarray(a, dtype=complex).copy()
    perm = np.arange(n)
    scale = max(np.max(np.abs(lu)), 1e-300)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        piv = lu[k, k]
        if abs(piv) < 1e-14 * scale:
            raise SingularEigenbasis(f"pivot {abs(piv):.3e} at column {k} is negligible")
        lu[k + 1:, k] /= piv
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    if abs(lu[n - 1, n - 1]) < 1e-14 * scale:
        raise SingularEigenbasis("matrix is numerically singular")
    return lu, perm


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve with a factored matrix; b may carry multiple right-hand sides."""
    x = np.asarray(b, dtype=complex)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    x = x[perm].copy()
    n = lu.shape[0]
    for k in range(n - 1):
        x[k + 1:] -= np.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):
        x[k] /= lu[k, k]
        if k:
            x[:k] -= np.outer(lu[:k, k], x[k])
    return x[:, 0] if squeeze else x


def condition_1norm(a: np.ndarray) -> float:
    """kappa_1 = ||A||_1 ||A^-1||_1 via explicit LU inversion (small matrices)."""
    try:
        lu, perm = lu_factor(a)
    except SingularEigenbasis:
        return float("inf")
    inv = lu_solve(lu, perm, np.eye(a.shape[0], dtype=complex))
    return float(np.abs(a).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())
