"""A small deterministic GCN for over-smoothing experiments.

Model: ``L`` graph-convolution blocks ``X <- act(BN(P X Theta_l))`` followed
by a per-node two-layer head ``y = act(X W1 + b1) w2 + b2``.  Everything is
plain numpy with hand-written backpropagation, so the gradient can be
checked against finite differences and runs are bitwise reproducible.

Arrays are batched: features ``(B, N, C)``, targets ``(B, N)``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError, ValidationError
from .graph_model import GraphLaplacian, build_operator, count_components

BN_EPS = 1e-5


def _act(x, slope):
    return np.where(x > 0, x, slope * x)


def _act_grad(x, slope):
    return np.where(x > 0, 1.0, slope)


@dataclass
class GcnModel:
    """Parameters and architecture of the GCN.

    ``slope=0`` gives plain ReLU, which is what the over-smoothing bound
    assumes; the default leaky slope is 0.01.
    """

    theta: list
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray
    slope: float = 0.01
    batchnorm: bool = False
    bn_gamma: list = field(default_factory=list)
    bn_beta: list = field(default_factory=list)
    bn_mean: list = field(default_factory=list)
    bn_var: list = field(default_factory=list)
    bn_momentum: float = 0.1

    @classmethod
    def init(cls, layers, channels, hidden=None, slope=0.01, batchnorm=False, seed=0):
        """Seeded uniform initialisation in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
        if layers < 1 or channels < 1:
            raise ValidationError("layers and channels must be >= 1")
        hidden = channels if hidden is None else hidden
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(channels)
        theta = [rng.uniform(-bound, bound, (channels, channels)) for _ in range(layers)]
        hb = 1.0 / math.sqrt(hidden)
        model = cls(
            theta=theta,
            head_w1=rng.uniform(-bound, bound, (channels, hidden)),
            head_b1=rng.uniform(-bound, bound, hidden),
            head_w2=rng.uniform(-hb, hb, hidden),
            head_b2=np.array(rng.uniform(-hb, hb)),
            slope=slope,
            batchnorm=batchnorm,
        )
        if batchnorm:
            model.bn_gamma = [np.ones(channels) for _ in range(layers)]
            model.bn_beta = [np.zeros(channels) for _ in range(layers)]
            model.bn_mean = [np.zeros(channels) for _ in range(layers)]
            model.bn_var = [np.ones(channels) for _ in range(layers)]
        return model

    @property
    def layers(self):
        return len(self.theta)

    @property
    def channels(self):
        return self.theta[0].shape[0]

    @property
    def s(self):
        """Largest singular value over all layer weights."""
        return max(float(np.linalg.norm(t, 2)) for t in self.theta)

    def params(self):
        """Trainable parameters by name (arrays are live references)."""
        p = {f"theta{l}": t for l, t in enumerate(self.theta)}
        if self.batchnorm:
            p.update({f"bn_gamma{l}": g for l, g in enumerate(self.bn_gamma)})
            p.update({f"bn_beta{l}": b for l, b in enumerate(self.bn_beta)})
        p.update(
            head_w1=self.head_w1, head_b1=self.head_b1,
            head_w2=self.head_w2, head_b2=self.head_b2,
        )
        return p

    def copy(self):
        cp = lambda xs: [x.copy() for x in xs]  # noqa: E731
        return replace(
            self,
            theta=cp(self.theta),
            head_w1=self.head_w1.copy(),
            head_b1=self.head_b1.copy(),
            head_w2=self.head_w2.copy(),
            head_b2=self.head_b2.copy(),
            bn_gamma=cp(self.bn_gamma),
            bn_beta=cp(self.bn_beta),
            bn_mean=cp(self.bn_mean),
            bn_var=cp(self.bn_var),
        )


def _batched(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return X[None], True
    if X.ndim != 3:
        raise ValidationError("features must have shape (N, C) or (B, N, C)")
    return X, False


def _flat(A):
    return A.reshape(-1, A.shape[-1])


def _forward(model, P, X, training):
    P = np.asarray(P, dtype=float)
    if P.shape != (X.shape[1], X.shape[1]):
        raise ValidationError(f"operator shape {P.shape} does not match {X.shape[1]} nodes")
    if X.shape[2] != model.channels:
        raise ValidationError(f"expected {model.channels} channels, got {X.shape[2]}")
    cache = {"X": [X], "U": [], "Z": [], "Zhat": [], "inv_std": [], "pre": []}
    for l, theta in enumerate(model.theta):
        U = np.matmul(P, cache["X"][-1])
        Z = U @ theta
        cache["U"].append(U)
        if model.batchnorm:
            if training:
                mu = Z.mean(axis=(0, 1))
                var = Z.var(axis=(0, 1))
                m = model.bn_momentum
                model.bn_mean[l] = (1 - m) * model.bn_mean[l] + m * mu
                model.bn_var[l] = (1 - m) * model.bn_var[l] + m * var
            else:
                mu, var = model.bn_mean[l], model.bn_var[l]
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            Zhat = (Z - mu) * inv_std
            cache["Zhat"].append(Zhat)
            cache["inv_std"].append(inv_std)
            pre = Zhat * model.bn_gamma[l] + model.bn_beta[l]
        else:
            pre = Z
        cache["pre"].append(pre)
        cache["X"].append(_act(pre, model.slope))
    h_pre = cache["X"][-1] @ model.head_w1 + model.head_b1
    h = _act(h_pre, model.slope)
    y = h @ model.head_w2 + model.head_b2
    cache.update(h_pre=h_pre, h=h)
    return y, cache


def gcn_forward(model, P, X, training=False):
    """Forward pass.

    Returns ``(prediction, activations)`` where ``activations[l]`` is the
    output of block ``l`` (``activations[0]`` is the input).  A 2-D ``X``
    gives an ``(N,)`` prediction and 2-D activations.
    """
    Xb, single = _batched(X)
    y, cache = _forward(model, P, Xb, training)
    acts = cache["X"]
    if single:
        return y[0], [a[0] for a in acts]
    return y, acts


def mse(truth, pred):
    """Mean squared error over all entries."""
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if truth.size == 0:
        raise ValidationError("mse of empty input")
    if truth.shape != pred.shape:
        raise ValidationError("mse inputs differ in length")
    return float(np.mean((truth - pred) ** 2))


def loss_and_grads(model, P, X, y):
    """MSE loss on a batch and its gradient for every parameter in :meth:`params`."""
    X, _ = _batched(X)
    y = np.asarray(y, dtype=float).reshape(X.shape[0], X.shape[1])
    pred, c = _forward(model, P, X, training=True)
    diff = pred - y
    loss = float(np.mean(diff ** 2))
    dy = 2.0 * diff / diff.size

    g = {}
    g["head_b2"] = np.array(dy.sum())
    g["head_w2"] = c["h"].reshape(-1, c["h"].shape[-1]).T @ dy.ravel()
    dh_pre = dy[..., None] * model.head_w2 * _act_grad(c["h_pre"], model.slope)
    g["head_b1"] = dh_pre.sum(axis=(0, 1))
    XL = c["X"][-1]
    g["head_w1"] = _flat(XL).T @ _flat(dh_pre)
    dX = dh_pre @ model.head_w1.T

    P = np.asarray(P, dtype=float)
    for l in range(model.layers - 1, -1, -1):
        dpre = dX * _act_grad(c["pre"][l], model.slope)
        if model.batchnorm:
            Zhat = c["Zhat"][l]
            g[f"bn_gamma{l}"] = np.sum(dpre * Zhat, axis=(0, 1))
            g[f"bn_beta{l}"] = dpre.sum(axis=(0, 1))
            dZhat = dpre * model.bn_gamma[l]
            m = Zhat.shape[0] * Zhat.shape[1]
            dZ = (c["inv_std"][l] / m) * (
                m * dZhat
                - dZhat.sum(axis=(0, 1))
                - Zhat * np.sum(dZhat * Zhat, axis=(0, 1))
            )
        else:
            dZ = dpre
        g[f"theta{l}"] = _flat(c["U"][l]).T @ _flat(dZ)
        dU = dZ @ model.theta[l].T
        dX = np.matmul(P.T, dU)
    return loss, g


class Adam:
    """Adam with bias correction over a dict of parameter arrays (updated in place)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            gk = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * gk
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * gk * gk
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    dropedge: float = 0.0
    dropedge_every: str = "epoch"

    def __post_init__(self):
        if not 0.0 <= self.dropedge <= 1.0:
            raise ValidationError("dropedge probability must lie in [0, 1]")
        if self.dropedge_every not in ("epoch", "batch"):
            raise ValidationError("dropedge_every must be 'epoch' or 'batch'")
        if not self.lr > 0:
            raise ValidationError("step size must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class SupervisedSet:
    """Features ``X`` of shape ``(T, N, C)`` and targets ``y`` of shape ``(T, N)``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 3 or self.y.shape != self.X.shape[:2]:
            raise ValidationError("SupervisedSet needs X (T, N, C) and y (T, N)")
        if self.X.shape[0] == 0:
            raise ValidationError("empty supervised set")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx):
        return SupervisedSet(self.X[idx], self.y[idx])


def drop_edges(g, p, seed):
    """Remove each undirected edge independently with probability ``p``.

    Self-loops are kept; degrees and components are recomputed.  ``p = 0``
    returns ``g`` itself.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    if p == 0.0:
        return g
    rng = np.random.default_rng(seed)
    n = g.n
    iu, ju = np.triu_indices(n, 1)
    present = g.W[iu, ju] != 0
    keep = rng.random(iu.size) >= p
    W = np.zeros_like(g.W)
    sel = present & keep
    W[iu[sel], ju[sel]] = g.W[iu[sel], ju[sel]]
    W = W + W.T
    L = np.diag(W.sum(axis=1) + g.self_loops) - W
    return GraphLaplacian(
        L=L, W=W, self_loops=g.self_loops.copy(),
        components=count_components(W), mode=g.mode,
    )


def predict(model, P, X, batch_size=256):
    X, _ = _batched(X)
    out = [
        _forward(model, P, X[i:i + batch_size], training=False)[0]
        for i in range(0, X.shape[0], batch_size)
    ]
    return np.concatenate(out, axis=0)


def train(model, op, data, cfg, graph=None):
    """Minimise the training MSE with Adam.

    ``op`` is the :class:`~.graph_model.GcnOperator` used for every batch;
    with ``cfg.dropedge > 0`` the operator is rebuilt from a freshly thinned
    copy of ``graph`` every epoch (or every batch, per ``dropedge_every``).  The input model is not modified.

    Returns ``(trained_model, loss_trace)`` where ``loss_trace[e]`` is the
    mean batch loss of epoch ``e``.
    """
    if cfg.dropedge > 0 and graph is None:
        raise ValidationError("DropEdge needs the graph, not just the operator")
    model = model.copy()
    shuffle_seq, drop_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    drop_rng = np.random.default_rng(drop_seq)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    params = model.params()
    n_samples = len(data)
    trace = []
    def thinned_operator():
        if cfg.dropedge == 0:
            return op.P
        thinned = drop_edges(graph, cfg.dropedge, int(drop_rng.integers(2**63)))
        return build_operator(thinned).P

    for epoch in range(cfg.epochs):
        P = thinned_operator()
        order = shuffle_rng.permutation(n_samples)
        total = 0.0
        for start in range(0, n_samples, cfg.batch_size):
            if start and cfg.dropedge_every == "batch":
                P = thinned_operator()
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, P, data.X[idx], data.y[idx])
            if not math.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch}")
            opt.step(params, grads)
            total += loss * idx.size
        trace.append(total / n_samples)
    return model, trace


def distance_to_invariant(X, op):
    """Frobenius distance from ``X`` (N x C) to the eigenvalue-1 eigenspace of ``P``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    V = op.invariant_basis
    return float(np.linalg.norm(X - V @ (V.T @ X)))


@dataclass(frozen=True)
class OversmoothReport:
    distances: list
    lambda_bound: float
    s: float
    bounds: list
    bound_satisfied: bool

    def to_dict(self):
        return {
            "distances": [float(d) for d in self.distances],
            "lambda_bound": self.lambda_bound,
            "s": self.s,
            "bounds": [float(b) for b in self.bounds],
            "bound_satisfied": self.bound_satisfied,
        }


def oversmoothing_check(model, op, X0, slack=1e-9):
    """Compare ``d_M(X^(l))`` with ``(s * lambda)^l * d_M(X^(0))`` for every block.

    ``distances[0]`` and ``bounds[0]`` are for the input itself.
    """
    _, acts = gcn_forward(model, op.P, X0)
    lam = op.lambda_bound
    s = model.s
    d0 = distance_to_invariant(acts[0], op)
    distances = [distance_to_invariant(a, op) for a in acts]
    bounds = [(s * lam) ** l * d0 for l in range(len(acts))]
    ok = all(d <= b + slack for d, b in zip(distances, bounds))
    return OversmoothReport(distances, lam, s, bounds, ok)


def finite_difference_check(model, P, X, y, h=1e-5, floor=1e-6):
    """Largest relative gap between analytic and central-difference gradients.

    Relative error is ``|a - f| / max(|a|, |f|, floor)``.
    """
    _, grads = loss_and_grads(model, P, X, y)
    worst = 0.0
    for name, p in model.params().items():
        flat = p.reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_and_grads(model, P, X, y)[0]
            flat[i] = old - h
            down = loss_and_grads(model, P, X, y)[0]
            flat[i] = old
            fd = (up - down) / (2 * h)
            a = gflat[i]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), floor))
    return worst
