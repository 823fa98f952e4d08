"""Closed-form eigen-decomposition of 3x3 Hermitian matrices.

Eigenvalues come from the trigonometric solution of the characteristic
cubic. The eigenvector of the best-isolated eigenvalue is taken from a
cross product of two rows of ``A - lambda I`` (a column of the adjugate);
the remaining pair is resolved exactly inside the orthogonal complement as a
2x2 Hermitian problem, which keeps the basis orthonormal to rounding even
when two eigenvalues (nearly) coincide. Eigenvalues are finally refined as
Rayleigh quotients of the returned vectors.
"""

from __future__ import annotations

import numpy as np

from .errors import NotHermitian

HERMITIAN_TOL = 1e-9
# relative spread below which the spectrum is treated as fully degenerate
DEGENERATE_TOL = 1e-12


def _check_hermitian(a: np.ndarray, tol: float) -> None:
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotHermitian("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.conj().T)))
    if asym > tol * scale:
        raise NotHermitian(f"matrix deviates from Hermitian by {asym:.3e}")


def eigvalsh3(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a 3x3 Hermitian matrix, ascending, via the cubic."""
    a = np.asarray(a, dtype=complex)
    m = float(np.trace(a).real) / 3.0
    k = a - m * np.eye(3)
    p = float(np.sum(np.abs(k) ** 2).real) / 6.0
    if p <= 0.0:
        return np.full(3, m)
    q = float(np.linalg.det(k).real) / 2.0
    sp = np.sqrt(p)
    r = np.clip(q / (p * sp), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    top = m + 2.0 * sp * np.cos(phi)
    bottom = m + 2.0 * sp * np.cos(phi + 2.0 * np.pi / 3.0)
    middle = 3.0 * m - top - bottom
    return np.sort(np.array([bottom, middle, top]))


def _kernel_vector(a: np.ndarray, lam: float) -> np.ndarray:
    """Null vector of ``a - lam I`` from the largest row cross product."""
    b = a - lam * np.eye(3)
    crosses = (
        np.cross(b[0], b[1]),
        np.cross(b[0], b[2]),
        np.cross(b[1], b[2]),
    )
    norms = [np.linalg.norm(c) for c in crosses]
    best = int(np.argmax(norms))
    if norms[best] == 0.0:
        # rank <= 1: anything orthogonal to the dominant row is a null vector
        row = b[int(np.argmax(np.linalg.norm(b, axis=1)))]
        if not np.any(row):
            return np.eye(3, dtype=complex)[0]
        return _complement_basis(np.conj(row) / np.linalg.norm(row))[0]
    return crosses[best] / norms[best]


def _complement_basis(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal vectors spanning the Hermitian complement of unit ``v``.

    Deterministic: seeds with the standard basis vector whose projection is
    largest (lowest index on ties).
    """
    eye = np.eye(3, dtype=complex)
    resid = [eye[k] - np.vdot(v, eye[k]) * v for k in range(3)]
    norms = np.array([np.linalg.norm(r) for r in resid])
    k = int(np.flatnonzero(norms >= norms.max() - 1e-12)[0])
    u1 = resid[k] / norms[k]
    u2 = np.conj(np.cross(v, u1))
    u2 /= np.linalg.norm(u2)
    return u1, u2


def _eigh2(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 Hermitian eigenproblem; columns of the returned matrix are vectors."""
    a = m[0, 0].real
    d = m[1, 1].real
    c = m[0, 1]
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    rad = np.hypot(half, abs(c))
    if rad <= DEGENERATE_TOL * max(abs(a), abs(d), 1.0):
        return np.array([mean, mean]), np.eye(2, dtype=complex)
    theta = 0.5 * np.arctan2(2.0 * abs(c), a - d)
    phase = np.exp(-1j * np.angle(c)) if abs(c) > 0 else 1.0
    ct, st = np.cos(theta), np.sin(theta)
    upper = np.array([ct, phase * st])
    lower = np.array([-st, phase * ct])
    return np.array([mean - rad, mean + rad]), np.column_stack([lower, upper])


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each row real and positive."""
    out = vecs.copy()
    for i, row in enumerate(out):
        mags = np.abs(row)
        j = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        out[i] = row * (np.conj(row[j]) / mags[j])
        out[i, j] = abs(out[i, j])  # drop the rounding residue in the imaginary part
    return out


def eigh3(a: np.ndarray, *, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a 3x3 Hermitian matrix.

    Returns ``(energies, vectors)`` with energies ascending and
    ``vectors[i]`` the normalized eigenvector for ``energies[i]`` (row
    convention). Phase convention: the largest-magnitude component of each
    row is real-positive.
    """
    a = np.asarray(a, dtype=complex)
    _check_hermitian(a, tol)
    a = 0.5 * (a + a.conj().T)

    if not np.any(a - np.diag(np.diag(a))):
        d = np.diag(a).real
        order = np.argsort(d, kind="stable")
        return d[order], np.eye(3, dtype=complex)[order]

    lam = eigvalsh3(a)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    if lam[2] - lam[0] <= DEGENERATE_TOL * scale:
        return lam, np.eye(3, dtype=complex)

    # the isolated eigenvalue has a gap of at least half the spread
    if lam[2] - lam[1] >= lam[1] - lam[0]:
        iso = 2
    else:
        iso = 0
    v = _kernel_vector(a, lam[iso])
    u1, u2 = _complement_basis(v)
    u = np.column_stack([u1, u2])
    sub = u.conj().T @ a @ u
    sub_vals, sub_vecs = _eigh2(0.5 * (sub + sub.conj().T))
    pair = (u @ sub_vecs).T

    vecs = np.vstack([v, pair]) if iso == 0 else np.vstack([pair, v])
    vals = np.array([np.vdot(x, a @ x).real for x in vecs])
    order = np.argsort(vals, kind="stable")
    return vals[order], _fix_phase(vecs[order])
