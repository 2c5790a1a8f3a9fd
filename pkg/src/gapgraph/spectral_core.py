"""Dense symmetric-matrix primitives.

Everything downstream (projection, GLASSO, graph operators) works on dense
real symmetric ``float64`` arrays.  The functions here never mutate their
inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError

#: entries of an eigenvector smaller than this are treated as zero when
#: choosing the sign convention
SIGN_TOL = 1e-8

_START_SEED = 20240229


@dataclass(frozen=True)
class EigenPair:
    """An eigenvalue and its unit-norm eigenvector."""

    value: float
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1:
            raise ValidationError("eigenvector must be one-dimensional")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValidationError(
                f"eigenvector is not unit norm (norm={np.linalg.norm(v):.3e})"
            )
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "value", float(self.value))


def as_symmetric(A, name="matrix"):
    """Validate ``A`` as a finite real symmetric matrix and return a float copy.

    Symmetry is checked entrywise: ``|A_ij - A_ji| <= 1e-12 * max(1, |A_ij|)``.
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    slack = 1e-12 * np.maximum(1.0, np.abs(A))
    if np.any(np.abs(A - A.T) > slack):
        worst = np.max(np.abs(A - A.T))
        raise ValidationError(f"{name} is not symmetric (max asymmetry {worst:.3e})")
    return A


def symmetrize(A):
    """Return ``(A + A.T) / 2``; used to scrub rounding asymmetry."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def canonical_sign(v):
    """Flip ``v`` so that its first non-negligible component is positive."""
    v = np.asarray(v, dtype=float)
    big = np.flatnonzero(np.abs(v) > SIGN_TOL * max(1.0, np.max(np.abs(v), initial=0.0)))
    if big.size and v[big[0]] < 0:
        return -v
    return v.copy()


def inner_product(A, B):
    """Trace inner product ``tr(B^T A) = sum_ij A_ij B_ij``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValidationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def _start_vector(n):
    # all-ones direction plus a fixed perturbation so the start is never
    # exactly orthogonal to the dominant eigenvector
    rng = np.random.default_rng(_START_SEED)
    x = np.ones(n) / np.sqrt(n) + 1e-3 * rng.standard_normal(n)
    return x / np.linalg.norm(x)


def _orthonormal_columns(cols, drop_tol=1e-10):
    basis = []
    for c in cols:
        c = c.copy()
        norm0 = np.linalg.norm(c)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for b in basis:
                c -= (b @ c) * b
        norm = np.linalg.norm(c)
        if norm > drop_tol * norm0:
            basis.append(c / norm)
    return np.column_stack(basis)


def top_eigenpair(A, tol=1e-10, max_iter=None):
    """Eigen-pair of the algebraically largest eigenvalue of a symmetric matrix.

    Locally optimal block iteration with block size one: each step performs
    Rayleigh-Ritz on ``span{x, r, p}`` where ``r`` is the current residual
    (the power-iteration direction) and ``p`` the previous update.  Because
    the Ritz step picks the largest Ritz value, no spectral shift is needed
    to favour the largest eigenvalue over large negative ones.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix.
    tol : float
        Stop once ``||A v - lam v|| <= tol * max(1, |lam|)``.
    max_iter : int, optional
        Iteration cap, default ``100 * n``.

    Returns
    -------
    EigenPair
        With the sign convention of :func:`canonical_sign`.

    Raises
    ------
    ConvergenceError
        If the residual test is not met within ``max_iter`` iterations.
    """
    A = as_symmetric(A)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    n = A.shape[0]
    if max_iter is None:
        max_iter = 100 * n
    if n == 1:
        return EigenPair(A[0, 0], np.ones(1))

    x = _start_vector(n)
    Ax = A @ x
    lam = float(x @ Ax)
    p = None
    res = np.inf
    for it in range(max_iter + 1):
        r = Ax - lam * x
        res = float(np.linalg.norm(r))
        if res <= tol * max(1.0, abs(lam)):
            return EigenPair(lam, canonical_sign(x))
        if it == max_iter:
            break
        cols = [x, r] if p is None else [x, r, p]
        S = _orthonormal_columns(cols)
        AS = A @ S
        H = symmetrize(S.T @ AS)
        w, V = np.linalg.eigh(H)
        y = V[:, -1]
        x_new = S @ y
        nrm = np.linalg.norm(x_new)
        x_new /= nrm
        p = x_new - (x @ x_new) * x
        x = x_new
        Ax = (AS @ y) / nrm
        lam = float(x @ Ax)
    raise ConvergenceError(
        f"top_eigenpair did not converge in {max_iter} iterations "
        f"(residual {res:.3e})",
        residual=res,
        iterations=max_iter,
    )


def deflate(A, pairs):
    """Return ``A - sum_k lam_k v_k v_k^T`` for mutually orthonormal pairs."""
    A = as_symmetric(A)
    pairs = list(pairs)
    if not pairs:
        return A
    V = np.column_stack([np.asarray(p.vector, dtype=float) for p in pairs])
    if V.shape[0] != A.shape[0]:
        raise ValidationError("eigenvector length does not match matrix size")
    gram = V.T @ V
    if np.max(np.abs(gram - np.eye(V.shape[1]))) > 1e-8:
        raise ValidationError("deflation vectors are not orthonormal")
    vals = np.array([p.value for p in pairs])
    return symmetrize(A - (V * vals) @ V.T)


def is_psd(A, tol=1e-9):
    """True iff the smallest eigenvalue of ``A`` is at least ``-tol``."""
    A = as_symmetric(A)
    return bool(np.linalg.eigvalsh(A)[0] >= -tol)


def random_psd(n, rng, rank=None):
    """Random PSD Gram matrix ``X^T X / rank``; a test and demo helper."""
    rank = n if rank is None else rank
    X = rng.standard_normal((rank, n))
    return symmetrize(X.T @ X / rank)
