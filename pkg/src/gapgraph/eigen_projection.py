"""Projection of a covariance matrix onto the eigen-gap cone.

The cone holds symmetric PSD matrices whose top eigenvector is a prescribed
unit vector ``u`` and whose top two eigenvalues differ by at most ``kappa``.
The projection is built greedily: the top eigen-pair is fixed to
``(u^T C u, u)``, then each remaining eigen-pair is chosen one at a time as
the direction of largest residual energy orthogonal to everything already
fixed, with its eigenvalue capped so the spectrum stays ordered and the
top gap stays below ``kappa``.

Two direction solvers are provided.  :func:`solve_direction_exact` solves the
constrained Rayleigh-quotient maximisation exactly with a dense
eigendecomposition of the residual restricted to the orthogonal complement.
:func:`solve_direction_pg` is the fast approximate route: rank-one
approximation of the residual followed by proximal gradient on a penalised
linear objective over the unit ball.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .spectral_core import (
    EigenPair,
    as_symmetric,
    canonical_sign,
    symmetrize,
    top_eigenpair,
)

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-10
PSD_TOL = 1e-8


@dataclass(frozen=True)
class ProjectionConfig:
    """Settings for :func:`project`.

    ``kappa=math.inf`` disables the gap cap (the unconstrained baseline).
    ``eig_floor=None`` floors retained eigenvalues at ``1e-6 * lambda_N``.
    ``pg_step=None`` uses ``0.9 / (2 * gamma)``.
    """

    kappa: float
    gamma: float = 1.0
    pg_step: float = None
    pg_tol: float = 1e-12
    pg_max_iter: int = 10_000
    eig_floor: float = None
    exact_threshold: int = 64
    method: str = "auto"
    eig_tol: float = 1e-10

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValidationError("kappa must be positive")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError("gamma must be positive and finite")
        if self.pg_step is None:
            object.__setattr__(self, "pg_step", 0.9 / (2.0 * self.gamma))
        if not 0 < self.pg_step <= 1.0 / (2.0 * self.gamma):
            raise ValidationError("pg_step must lie in (0, 1/(2*gamma)]")
        if self.eig_floor is not None and self.eig_floor < 0:
            raise ValidationError("eig_floor must be non-negative")
        if self.method not in ("auto", "exact", "pg"):
            raise ValidationError(f"unknown direction method {self.method!r}")
        if self.pg_max_iter < 1:
            raise ValidationError("pg_max_iter must be >= 1")

    def uses_exact(self, n):
        if self.method == "auto":
            return n <= self.exact_threshold
        return self.method == "exact"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ordered eigen-pairs of a projected covariance.

    ``values[i]`` / ``vectors[:, i]`` are ascending, so the last column is
    ``u``.  ``raw_values`` are the capped values before flooring and
    ``rayleigh`` the uncapped residual energies that produced them
    (``rayleigh[-1]`` is ``lambda_N`` itself).
    """

    values: np.ndarray
    vectors: np.ndarray
    raw_values: np.ndarray
    rayleigh: np.ndarray
    floor: float
    kappa: float

    @property
    def n(self):
        return self.values.size

    @property
    def u(self):
        return self.vectors[:, -1]

    @property
    def accumulated_basis(self):
        """``Y = [u, v_{N-1}, ..., v_1]``, the vectors in order of fixing."""
        return self.vectors[:, ::-1]

    @property
    def gap(self):
        if self.n < 2:
            return 0.0
        return float(self.values[-1] - self.values[-2])

    def matrix(self):
        return symmetrize((self.vectors * self.values) @ self.vectors.T)

    def pairs(self):
        return [EigenPair(v, self.vectors[:, i]) for i, v in enumerate(self.values)]


def _as_unit(u, n):
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != n:
        raise ValidationError(f"u has length {u.size}, expected {n}")
    if not np.all(np.isfinite(u)) or abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise ValidationError("u must be a finite unit vector")
    return u


def _as_basis(Y, n):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != n:
        raise ValidationError(f"basis has {Y.shape[0]} rows, expected {n}")
    if Y.shape[1] >= n:
        raise ValidationError("basis leaves no orthogonal complement")
    if Y.shape[1] and np.max(np.abs(Y.T @ Y - np.eye(Y.shape[1]))) > 1e-8:
        raise ValidationError("basis columns are not orthonormal")
    return Y


def last_eigenpair(cov, u, eig_floor=0.0):
    """Fix the top eigen-pair to ``u`` and return ``(lambda_N, residual)``.

    ``lambda_N = u^T cov u`` and ``residual = cov - lambda_N u u^T``.
    """
    cov = as_symmetric(cov, "cov")
    u = _as_unit(u, cov.shape[0])
    lam = float(u @ cov @ u)
    if lam <= eig_floor:
        raise ValidationError(
            f"u carries no energy in cov (u^T cov u = {lam:.3e} <= floor {eig_floor:.3e})"
        )
    return lam, symmetrize(cov - lam * np.outer(u, u))


def complement_basis(Y):
    """Orthonormal basis of the orthogonal complement of ``span(Y)``."""
    Y = np.asarray(Y, dtype=float)
    n, k = Y.shape
    if k == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(Y, mode="complete")
    return Q[:, k:]


def solve_direction_exact(residual, Y):
    """Maximise ``v^T residual v`` over unit ``v`` orthogonal to ``span(Y)``.

    Solved exactly by eigendecomposing the residual restricted to the
    orthogonal complement of ``Y``.
    """
    R = as_symmetric(residual, "residual")
    n = R.shape[0]
    Y = _as_basis(Y, n)
    Q = complement_basis(Y)
    H = symmetrize(Q.T @ R @ Q)
    w, V = np.linalg.eigh(H)
    v = Q @ V[:, -1]
    v = canonical_sign(v / np.linalg.norm(v))
    value = float(w[-1])
    if np.max(np.abs(H)) <= 1e-14 * max(1.0, np.max(np.abs(R))):
        value = 0.0
    return EigenPair(value, v)


def pg_minimize(e, Y, gamma, step, tol=1e-12, max_iter=10_000):
    """Proximal gradient for ``min -e^T v + gamma ||Y^T v||^2`` over the unit ball.

    Starts from ``e / ||e||^2``.  Returns ``(v, iterations)`` where ``v`` is
    the raw minimiser, not yet orthogonalised against ``Y``.
    """
    e = np.asarray(e, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    v = e / (e @ e)
    change = np.inf
    for it in range(1, max_iter + 1):
        grad = -e + 2.0 * gamma * (Y @ (Y.T @ v))
        w = v - step * grad
        norm = np.linalg.norm(w)
        if norm > 1.0:
            w /= norm
        change = float(np.linalg.norm(w - v))
        v = w
        if change <= tol:
            return v, it
    raise ConvergenceError(
        f"proximal gradient did not converge in {max_iter} iterations "
        f"(last step {change:.3e})",
        residual=change,
        iterations=max_iter,
        iterate=v,
    )


def solve_direction_pg(residual, Y, cfg):
    """Fast approximate direction via rank-one residual + proximal gradient.

    ``e`` is the top eigenvector of the residual; the penalised problem is
    solved with :func:`pg_minimize`, after which one Gram-Schmidt pass
    removes what is left in ``span(Y)``.  The returned value is the Rayleigh
    quotient of the residual at the final vector.

    If ``e`` lies (almost) inside ``span(Y)`` the rank-one model carries no
    usable direction: the iterate's component outside ``span(Y)`` grows by
    only ``pg_step * ||e_perp||`` per step, so PG could not reach the
    sphere within ``pg_max_iter``.  The exact solver is used instead.
    """
    R = as_symmetric(residual, "residual")
    n = R.shape[0]
    Y = _as_basis(Y, n)
    e = top_eigenpair(R, tol=cfg.eig_tol).vector
    e_perp = np.linalg.norm(e - Y @ (Y.T @ e))
    if e_perp <= 4.0 / (cfg.pg_step * cfg.pg_max_iter):
        logger.debug("rank-one direction lies in span(Y); using exact solver")
        return solve_direction_exact(R, Y)
    v, _ = pg_minimize(e, Y, cfg.gamma, cfg.pg_step, cfg.pg_tol, cfg.pg_max_iter)
    for _ in range(2):
        v = v - Y @ (Y.T @ v)
    v = canonical_sign(v / np.linalg.norm(v))
    return EigenPair(float(v @ R @ v), v)


def cap_eigenvalue(prev, rayleigh, kappa, is_second_from_top):
    """Eigenvalue for the next direction given the one above it.

    Second from the top: ``min(prev, max(prev - kappa, rayleigh))`` so the
    top gap never exceeds ``kappa``.  Below that: ``min(prev, rayleigh)``.
    """
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    if is_second_from_top:
        return min(prev, max(prev - kappa, rayleigh))
    return min(prev, rayleigh)


def project(cov, u, cfg):
    """Project ``cov`` onto the cone with top eigenvector ``u`` and gap <= kappa.

    Returns
    -------
    C : ndarray
        ``sum_i max(lambda_i, floor) v_i v_i^T``, positive definite.
    decomp : SpectralDecomposition
    """
    cov = as_symmetric(cov, "cov")
    n = cov.shape[0]
    u = _as_unit(u, n)
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.linalg.eigvalsh(cov)[0] < -PSD_TOL * scale:
        raise ValidationError("cov is not positive semi-definite")

    lam_n, E = last_eigenpair(cov, u, cfg.eig_floor or 0.0)
    floor = cfg.eig_floor if cfg.eig_floor is not None else 1e-6 * lam_n
    exact = cfg.uses_exact(n)

    vectors = np.empty((n, n))
    raw = np.empty(n)
    rq = np.empty(n)
    vectors[:, -1] = u
    raw[-1] = rq[-1] = lam_n
    for i in range(n - 2, -1, -1):
        Y = vectors[:, i + 1:][:, ::-1]
        if exact:
            pair = solve_direction_exact(E, Y)
        else:
            pair = solve_direction_pg(E, Y, cfg)
        v = pair.vector
        rq[i] = pair.value
        raw[i] = cap_eigenvalue(raw[i + 1], pair.value, cfg.kappa, i == n - 2)
        vectors[:, i] = v
        E = symmetrize(E - raw[i] * np.outer(v, v))

    values = np.maximum(raw, floor)
    decomp = SpectralDecomposition(
        values=values,
        vectors=vectors,
        raw_values=raw,
        rayleigh=rq,
        floor=float(floor),
        kappa=float(cfg.kappa),
    )
    return decomp.matrix(), decomp
