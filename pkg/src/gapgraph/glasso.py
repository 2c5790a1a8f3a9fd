"""Eigen-gap constrained graphical lasso, solved through its dual.

The dual variable is a covariance estimate ``C`` that must stay inside the
box ``|C_ij - Cbar_ij| <= rho`` around the empirical covariance ``Cbar``
while maximising ``log det C``.  Each outer iteration

1. restores box feasibility if the previous projection broke it,
2. runs one block-coordinate sweep, replacing one row/column of ``C`` at a
   time by the determinant-maximising choice inside the box, and
3. projects ``C`` onto the eigen-gap cone with :func:`~.eigen_projection.project`.

The Laplacian ``L = C^{-1}`` is only formed once the alternation stops.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import box_qp_cd
from .eigen_projection import ProjectionConfig, SpectralDecomposition, project
from .errors import ConvergenceError, NumericalError, ValidationError
from .spectral_core import as_symmetric, symmetrize

logger = logging.getLogger(__name__)

BOX_TOL = 1e-8


@dataclass(frozen=True)
class GlassoConfig:
    rho: float = 1e-4
    max_sweeps: int = 50
    outer_tol: float = 1e-8
    cd_tol: float = 1e-10
    cd_max_cycles: int = 1000

    def __post_init__(self):
        if not self.rho >= 0 or not math.isfinite(self.rho):
            raise ValidationError("rho must be a finite non-negative number")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if not self.outer_tol > 0:
            raise ValidationError("outer_tol must be positive")
        if not self.cd_tol > 0 or self.cd_max_cycles < 1:
            raise ValidationError("invalid inner solver settings")


@dataclass
class GlassoState:
    """Dual iterate.  ``objective_trace`` holds ``-log det C`` after each sweep."""

    C: np.ndarray
    cov: np.ndarray
    rho: float
    sweep_count: int = 0
    objective_trace: list = field(default_factory=list)

    def copy(self):
        return GlassoState(
            self.C.copy(), self.cov, self.rho, self.sweep_count, list(self.objective_trace)
        )

    def box_violation(self):
        return float(np.max(np.abs(self.C - self.cov)))


@dataclass
class GlassoResult:
    L: np.ndarray
    C: np.ndarray
    decomp: SpectralDecomposition
    objective_trace: list
    sweep_traces: list
    converged: bool
    sweeps: int


def neg_logdet(C):
    sign, logdet = np.linalg.slogdet(C)
    if sign <= 0:
        raise NumericalError("matrix is not positive definite")
    return -float(logdet)


def _cholesky(A, what):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite") from exc


def init_dual(cov, rho):
    """Feasible starting point ``C = cov + rho I``."""
    cov = as_symmetric(cov, "cov")
    if rho < 0:
        raise ValidationError("rho must be non-negative")
    C = cov + rho * np.eye(cov.shape[0])
    _cholesky(C, "cov + rho*I")
    return GlassoState(C=C, cov=cov, rho=float(rho))


def _update_column(C, cov, j, rho, tol, max_cycles):
    """In-place determinant-maximising update of row/column ``j``.

    Returns ``-log det C`` after the update.
    """
    n = C.shape[0]
    idx = np.r_[0:j, j + 1:n]
    W11 = C[np.ix_(idx, idx)]
    chol = _cholesky(W11, f"submatrix without column {j}")
    inv_chol = np.linalg.inv(chol)
    Q = symmetrize(inv_chol.T @ inv_chol)
    s = cov[idx, j]
    lo, hi = s - rho, s + rho
    x, cycles, change = box_qp_cd(Q, C[idx, j], lo, hi, tol, max_cycles)
    if change > tol:
        raise ConvergenceError(
            f"column {j} subproblem did not converge in {max_cycles} cycles",
            residual=change,
            iterations=cycles,
            column=j,
        )
    diag = cov[j, j] + rho
    schur = diag - x @ Q @ x
    if not schur > 0:
        raise NumericalError(f"column {j} update lost positive definiteness")
    C[idx, j] = x
    C[j, idx] = x
    C[j, j] = diag
    return -(2.0 * np.sum(np.log(np.diag(chol))) + math.log(schur))


def bcd_column_update(state, j, rho=None, tol=1e-10, max_cycles=1000):
    """Return a new state with row/column ``j`` re-optimised inside the box.

    Off-diagonal entries minimise ``c^T W11^{-1} c`` over
    ``|c - cbar| <= rho`` (coordinate descent against the inverse of the
    remaining block, equivalently maximising the Schur complement);
    the diagonal is pinned to ``cbar_jj + rho``.
    """
    rho = state.rho if rho is None else rho
    n = state.C.shape[0]
    if not 0 <= j < n:
        raise ValidationError(f"column index {j} out of range for n={n}")
    new = state.copy()
    new.rho = rho
    _update_column(new.C, new.cov, j, rho, tol, max_cycles)
    return new


def bcd_sweep(state, cfg):
    """One in-place sweep over all columns.

    Returns ``-log det C`` at the start of the sweep followed by its value
    after every column update.
    """
    trace = [neg_logdet(state.C)]
    for j in range(state.C.shape[0]):
        trace.append(
            _update_column(state.C, state.cov, j, state.rho, cfg.cd_tol, cfg.cd_max_cycles)
        )
    state.sweep_count += 1
    state.objective_trace.append(trace[-1])
    return trace


def restore_feasibility(C, cov, rho):
    """Nearest-in-spirit feasible point: clip into the box, pin the diagonal.

    If clipping loses positive definiteness, move towards ``cov + rho I``
    (feasible and positive definite) by bisection on the blend weight.
    """
    n = C.shape[0]
    anchor = cov + rho * np.eye(n)
    clipped = cov + np.clip(C - cov, -rho, rho)
    np.fill_diagonal(clipped, np.diag(anchor))
    clipped = symmetrize(clipped)
    if _is_pd(clipped):
        return clipped
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _is_pd((1 - mid) * clipped + mid * anchor):
            hi = mid
        else:
            lo = mid
    return symmetrize((1 - hi) * clipped + hi * anchor)


def _is_pd(A):
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return False
    return True


def glasso_learn(cov, u, proj_cfg, glasso_cfg=None, on_sweep=None):
    """Learn a Laplacian whose inverse lies in the eigen-gap cone.

    Parameters
    ----------
    cov : array_like, shape (n, n)
        Empirical covariance (or second-moment) matrix.
    u : array_like, shape (n,)
        Unit vector fixed as the top covariance eigenvector, i.e. the
        Laplacian's first eigenvector.
    proj_cfg : ProjectionConfig
    glasso_cfg : GlassoConfig, optional
    on_sweep : callable, optional
        Called as ``on_sweep(state)`` after every BCD sweep, before the
        projection.

    Returns
    -------
    GlassoResult
        ``L`` is the inverse of the final projected ``C``.  ``converged`` is
        False when ``max_sweeps`` ran out; a warning is issued in that case.
    """
    glasso_cfg = glasso_cfg or GlassoConfig()
    state = init_dual(cov, glasso_cfg.rho)
    cov = state.cov
    sweep_traces = []
    prev = None
    converged = False
    C_proj = decomp = None
    for sweep in range(glasso_cfg.max_sweeps):
        if sweep:
            state.C = restore_feasibility(state.C, cov, state.rho)
        sweep_traces.append(bcd_sweep(state, glasso_cfg))
        if on_sweep is not None:
            on_sweep(state)
        C_proj, decomp = project(state.C, u, proj_cfg)
        if prev is not None:
            delta = np.linalg.norm(C_proj - prev)
            if delta <= glasso_cfg.outer_tol * np.linalg.norm(prev):
                converged = True
                break
        prev = C_proj
        state.C = C_proj.copy()
    if not converged:
        warnings.warn(
            f"eigen-gap GLASSO stopped after {glasso_cfg.max_sweeps} sweeps without converging",
            RuntimeWarning,
            stacklevel=2,
        )
    # eigenvectors are shared, so invert through the decomposition
    L = symmetrize((decomp.vectors / decomp.values) @ decomp.vectors.T)
    if not np.all(np.isfinite(L)):
        raise NumericalError("final covariance is numerically singular")
    logger.debug("glasso_learn: %d sweeps, converged=%s", state.sweep_count, converged)
    return GlassoResult(
        L=L,
        C=C_proj,
        decomp=decomp,
        objective_trace=list(state.objective_trace),
        sweep_traces=sweep_traces,
        converged=converged,
        sweeps=state.sweep_count,
    )
