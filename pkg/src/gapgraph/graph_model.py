"""From a learned Laplacian to the graph and the normalised GCN operator.

A generalised Laplacian ``L = D - W`` (with self-loops folded into the
degree) is split into off-diagonal edge weights ``W`` and self-loop weights.
The GCN propagation matrix is the self-loop augmented, symmetrically
normalised adjacency

    P = (D + I)^{-1/2} (W_full + I) (D + I)^{-1/2},

where ``W_full`` includes the self-loops and ``D`` its row sums.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral_core import as_symmetric, symmetrize

EDGE_TOL = 1e-10
ONE_TOL = 1e-8


@dataclass(frozen=True)
class GraphLaplacian:
    """Undirected weighted graph recovered from a Laplacian.

    ``W`` has a zero diagonal; self-loop weights live in ``self_loops``;
    ``D`` is the degree vector including self-loops.
    """

    L: np.ndarray
    W: np.ndarray
    self_loops: np.ndarray
    components: int
    mode: str = "clamp"

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def D(self):
        return self.W.sum(axis=1) + self.self_loops

    @property
    def full_adjacency(self):
        return self.W + np.diag(self.self_loops)

    def edges(self):
        """Upper-triangle edge list ``[(i, j, w), ...]`` with ``|w| > EDGE_TOL``."""
        iu, ju = np.nonzero(np.triu(np.abs(self.W) > EDGE_TOL, 1))
        return [(int(i), int(j), float(self.W[i, j])) for i, j in zip(iu, ju)]

    def reassemble(self):
        """``diag(D) - W``: the generalised Laplacian this graph represents."""
        return np.diag(self.D) - self.W


@dataclass(frozen=True)
class GcnOperator:
    P: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    components: int

    @property
    def lambda_bound(self):
        """Largest ``|lambda_n|`` outside the ``components`` unit eigenvalues."""
        rest = self.eigenvalues[: self.P.shape[0] - self.components]
        return float(np.max(np.abs(rest))) if rest.size else 0.0

    @property
    def gap(self):
        """Difference between the two largest distinct eigenvalues of ``P``."""
        vals = self.eigenvalues
        top = vals[-1]
        below = vals[vals < top - ONE_TOL]
        return float(top - below[-1]) if below.size else 0.0

    @property
    def invariant_basis(self):
        """Orthonormal eigenvectors for eigenvalue 1 (the invariant subspace)."""
        return self.eigenvectors[:, self.P.shape[0] - self.components:]


def count_components(W, tol=EDGE_TOL):
    """Connected components of the graph with edges ``|W_ij| > tol`` (union-find)."""
    n = W.shape[0]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(*np.nonzero(np.triu(np.abs(W) > tol, 1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n)})


def laplacian_to_graph(L, mode="clamp"):
    """Split a (generalised) Laplacian into edge weights and self-loops.

    ``W_ij = -L_ij`` off the diagonal and the self-loop at ``i`` is whatever
    the diagonal holds beyond the incident edge weights,
    ``L_ii - sum_j W_ij``.  In ``clamp`` mode negative edges (positive
    ``L_ij``) and negative self-loops are dropped; ``signed`` keeps both.
    """
    if mode not in ("clamp", "signed"):
        raise ValidationError(f"unknown mode {mode!r}")
    L = as_symmetric(L, "L")
    W = -L.copy()
    np.fill_diagonal(W, 0.0)
    if mode == "clamp":
        W = np.maximum(W, 0.0)
    loops = np.diag(L) - W.sum(axis=1)
    if mode == "clamp":
        loops = np.maximum(loops, 0.0)
    return GraphLaplacian(
        L=L, W=W, self_loops=loops, components=count_components(W), mode=mode
    )


def build_operator(g):
    """Augmented normalised adjacency ``P`` with its eigendecomposition."""
    n = g.n
    W_tilde = g.full_adjacency + np.eye(n)
    d_tilde = W_tilde.sum(axis=1)
    if np.any(d_tilde <= 0):
        raise ValidationError("augmented degree is not positive; use clamp mode")
    s = 1.0 / np.sqrt(d_tilde)
    P = symmetrize(s[:, None] * W_tilde * s[None, :])
    vals, vecs = np.linalg.eigh(P)
    return GcnOperator(P=P, eigenvalues=vals, eigenvectors=vecs, components=g.components)


def distinct_gap(values, distinct_tol):
    """Gap between the two smallest distinct values of a sorted array."""
    values = np.sort(np.asarray(values, dtype=float))
    above = values[values > values[0] + distinct_tol]
    if above.size == 0:
        raise ValidationError("no distinct gap: all eigenvalues coincide")
    return float(above[0] - values[0])


def measure_eigengap(L, distinct_tol=None):
    """``mu_2 - mu_1`` for the two smallest distinct eigenvalues of ``L``.

    ``distinct_tol`` defaults to ``1e-6`` times the spectral radius.
    """
    L = as_symmetric(L, "L")
    vals = np.linalg.eigvalsh(L)
    if distinct_tol is None:
        distinct_tol = 1e-6 * max(np.max(np.abs(vals)), np.finfo(float).tiny)
    return distinct_gap(vals, distinct_tol)


def laplacian_gap_from_covariance(decomp):
    """Laplacian-domain gap ``1/lambda_{N-1} - 1/lambda_N`` of a projection."""
    return float(1.0 / decomp.values[-2] - 1.0 / decomp.values[-1])
