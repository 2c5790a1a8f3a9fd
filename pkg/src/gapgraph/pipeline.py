"""Data ingestion, synthetic GMRF data, splitting and the (kappa x depth) sweep."""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .eigen_projection import ProjectionConfig
from .errors import GapGraphError, ValidationError
from .gcn_lab import GcnModel, SupervisedSet, TrainConfig, mse, predict, train
from .glasso import GlassoConfig, glasso_learn
from .graph_model import build_operator, laplacian_gap_from_covariance, laplacian_to_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignalDataset:
    """``T x N`` signal matrix: rows are time steps, columns are nodes."""

    X: np.ndarray
    feature_window: int = 10
    target_offset: int = 1

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
            raise ValidationError("signals must be a T x N matrix with T >= 2")
        if not np.all(np.isfinite(X)):
            raise ValidationError("signals contain non-finite values")
        if self.feature_window < 1 or self.target_offset < 1:
            raise ValidationError("feature_window and target_offset must be >= 1")
        object.__setattr__(self, "X", X)

    def __len__(self):
        return self.X.shape[0]

    @property
    def T(self):
        return self.X.shape[0]

    @property
    def N(self):
        return self.X.shape[1]

    def target_times(self):
        """Time indices that have a full feature window behind them."""
        first = self.feature_window + self.target_offset - 1
        return np.arange(first, self.T)

    def supervised(self):
        """Sliding windows: features ``(S, N, window)`` oldest first, targets ``(S, N)``."""
        times = self.target_times()
        if times.size == 0:
            raise ValidationError("series too short for the feature window")
        lags = np.arange(self.feature_window)[::-1] + self.target_offset
        feats = self.X[times[:, None] - lags[None, :]]  # (S, window, N)
        return SupervisedSet(np.transpose(feats, (0, 2, 1)).copy(), self.X[times].copy())


def load_signals_csv(path, has_header=False, **kwargs):
    """Read a rectangular numeric CSV (rows = time, columns = nodes)."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValidationError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return SignalDataset(np.array(rows), **kwargs)


def save_signals_csv(path, X):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(X, dtype=float):
            w.writerow([f"{v:.17g}" for v in row])


def empirical_stats(X, centered=False):
    """Empirical (second-moment or centred) covariance and the unit mean signal.

    ``X`` is a ``T x N`` array or a :class:`SignalDataset`.  Uncentred:
    ``cov = X^T X / T``.  Centred: the sample mean is removed first (biased,
    ``1/T`` normalisation).  ``u`` is the sample mean scaled to unit length.
    """
    X = X.X if isinstance(X, SignalDataset) else np.asarray(X, dtype=float)
    T = X.shape[0]
    if T < 2:
        raise ValidationError("need at least two observations")
    mean = X.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ValidationError("mean signal is zero: u undefined")
    Xc = X - mean if centered else X
    cov = Xc.T @ Xc / T
    return 0.5 * (cov + cov.T), mean / norm


def random_sensor_laplacian(n, seed, k=2, weight_range=(0.5, 1.5), self_loop=1.0, scale=100.0,
                            clusters=1, spread=0.05):
    """Sparse generalised Laplacian of a k-nearest-neighbour sensor graph.

    Nodes are scattered uniformly in the unit square, each is joined to its
    ``k`` nearest neighbours, separate components are bridged through their
    closest pair of nodes, edges get uniform random weights, and every node
    gets the same self-loop weight, so the all-ones vector is the first
    eigenvector.  The result is multiplied by ``scale``.  With
    ``clusters > 1`` nodes are placed in that many tight groups (normal
    scatter of width ``spread`` around uniform centres), so groups are
    joined only by bridge edges.

    Returns ``(L, adjacency)``.
    """
    if n < 2 or k < 1 or clusters < 1:
        raise ValidationError("need n >= 2, k >= 1 and clusters >= 1")
    rng = np.random.default_rng(seed)
    if clusters == 1:
        pos = rng.random((n, 2))
    else:
        centres = rng.random((clusters, 2))
        pos = centres[np.arange(n) % clusters] + spread * rng.standard_normal((n, 2))
    dist = np.linalg.norm(pos[:, None] - pos[None], axis=2)
    A = np.zeros((n, n))
    for i in range(n):
        for j in np.argsort(dist[i], kind="stable")[1:k + 1]:
            A[min(i, j), max(i, j)] = 1.0
    _connect(A, dist)
    A *= rng.uniform(*weight_range, (n, n))
    A = np.triu(A, 1)
    A = A + A.T
    L = scale * (np.diag(A.sum(axis=1) + self_loop) - A)
    return L, scale * A


def _connect(A, dist):
    """Add shortest bridging edges (upper triangle of ``A``) until connected."""
    n = A.shape[0]
    while True:
        sym = (A + A.T) > 0
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.nonzero(sym[i] & ~seen)[0]:
                seen[j] = True
                stack.append(j)
        if seen.all():
            return
        sub = np.where(seen[:, None] & ~seen[None, :], dist, np.inf)
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        A[min(i, j), max(i, j)] = 1.0


def synth_gmrf(n, t, L_true, mean, seed, ar=0.0, **kwargs):
    """Draw ``t`` observations ``x ~ N(mean, L_true^{-1})``.

    With ``ar > 0`` consecutive rows follow a stationary AR(1) recursion
    ``x_t - mean = ar (x_{t-1} - mean) + sqrt(1 - ar^2) e_t`` so the
    marginal distribution is unchanged but time steps are correlated.
    """
    L_true = np.asarray(L_true, dtype=float)
    if L_true.shape != (n, n):
        raise ValidationError(f"L_true must be {n} x {n}")
    if t < 1:
        raise ValidationError("t must be >= 1")
    if not 0.0 <= ar < 1.0:
        raise ValidationError("ar must lie in [0, 1)")
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (n,))
    try:
        chol = np.linalg.cholesky(np.linalg.inv(L_true))
    except np.linalg.LinAlgError as exc:
        raise ValidationError("L_true is singular or not positive definite") from exc
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((t, n)) @ chol.T
    if ar > 0:
        c = math.sqrt(1.0 - ar * ar)
        for i in range(1, t):
            Z[i] = ar * Z[i - 1] + c * Z[i]
    return SignalDataset(mean + Z, **kwargs)


def split(n, ratios=(0.7, 0.2, 0.1), seed=0):
    """Seeded random split of ``range(n)`` into train / validation / test indices.

    Sizes are ``floor(r0 n)``, ``floor(r1 n)`` and the remainder.  Each part
    is returned sorted.
    """
    n = len(n) if hasattr(n, "__len__") else int(n)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ValidationError("ratios must be three positive numbers summing to 1")
    if n < 3:
        raise ValidationError("need at least three samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    a = math.floor(ratios[0] * n + 1e-9)
    b = math.floor(ratios[1] * n + 1e-9)
    return np.sort(perm[:a]), np.sort(perm[a:a + b]), np.sort(perm[a + b:])


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepConfig:
    """Sweep settings; every field is a key of the JSON config file.

    ``kappas`` are eigen-gap caps; with ``kappa_mode="relative"`` they are
    fractions of the unconstrained gap measured on the training covariance.
    ``include_unconstrained`` adds the uncapped baseline series.
    ``dropedge`` lists drop rates for the DropEdge baseline, run on the
    unconstrained graph.
    """

    kappas: tuple = (1.0, 3.0, 5.0, 7.0, 8.0)
    kappa_mode: str = "absolute"
    include_unconstrained: bool = True
    layer_range: tuple = (1, 9)
    seeds: tuple = (0,)
    master_seed: int = 0
    rho: float = 1e-4
    centered: bool = False
    gamma: float = 1.0
    max_sweeps: int = 50
    graph_mode: str = "clamp"
    feature_window: int = 10
    target_offset: int = 1
    standardize: bool = True
    ratios: tuple = (0.7, 0.2, 0.1)
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    hidden: int = None
    slope: float = 0.01
    batchnorm: bool = False
    dropedge: tuple = ()
    signals: str = None
    has_header: bool = False
    synthetic: dict = None

    def __post_init__(self):
        for name in ("kappas", "layer_range", "seeds", "ratios", "dropedge"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kappa_mode not in ("absolute", "relative"):
            raise ValidationError("kappa_mode must be 'absolute' or 'relative'")
        if self.graph_mode not in ("clamp", "signed"):
            raise ValidationError("graph_mode must be 'clamp' or 'signed'")
        if any(not k > 0 for k in self.kappas):
            raise ValidationError("kappas must be positive")
        lr = self.layer_range
        if len(lr) != 2 or not 1 <= lr[0] <= lr[1] <= 9:
            raise ValidationError("layer_range must be an interval within [1, 9]")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1) > 1e-9 or min(self.ratios) <= 0:
            raise ValidationError("ratios must be three positive numbers summing to 1")
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        if any(not 0 <= p <= 1 for p in self.dropedge):
            raise ValidationError("dropedge rates must lie in [0, 1]")
        if self.signals is not None and self.synthetic is not None:
            raise ValidationError("give either 'signals' or 'synthetic', not both")
        if self.synthetic is not None:
            unknown = set(self.synthetic) - SYNTH_KEYS
            if unknown:
                raise ValidationError(f"unknown synthetic keys: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def layer_counts(self):
        return list(range(self.layer_range[0], self.layer_range[1] + 1))


SYNTH_KEYS = {
    "nodes", "samples", "seed", "ar", "mean", "k", "self_loop", "scale", "noise", "clusters",
}


def synthetic_signals(spec, feature_window=10, target_offset=1):
    """Signals for a sweep from a ``synthetic`` config block.

    Returns ``(dataset, L_true)``.  ``noise`` adds i.i.d. observation noise
    with that standard deviation on top of the GMRF process.
    """
    spec = dict(spec)
    n = int(spec.get("nodes", 20))
    seed = int(spec.get("seed", 0))
    L_true, _ = random_sensor_laplacian(
        n, seed, k=int(spec.get("k", 2)),
        self_loop=float(spec.get("self_loop", 1.0)), scale=float(spec.get("scale", 100.0)),
        clusters=int(spec.get("clusters", 1)),
    )
    ds = synth_gmrf(
        n, int(spec.get("samples", 2000)), L_true, float(spec.get("mean", 1.0)),
        seed=seed + 1, ar=float(spec.get("ar", 0.0)),
        feature_window=feature_window, target_offset=target_offset,
    )
    noise = float(spec.get("noise", 0.0))
    if noise > 0:
        rng = np.random.default_rng(seed + 2)
        ds = SignalDataset(ds.X + noise * rng.standard_normal(ds.X.shape),
                           feature_window, target_offset)
    return ds, L_true


RESULT_COLUMNS = [
    "series", "kappa", "dropedge", "layers", "seed", "val_mse", "test_mse",
    "gap_cov", "gap_laplacian", "optimal", "status",
]


@dataclass
class ExperimentResult:
    records: list = field(default_factory=list)

    def optimal_layers(self, series="gap"):
        """``{(kappa, dropedge): layers}`` minimising mean validation MSE over seeds.

        Ties go to the smaller layer count.
        """
        groups = {}
        for r in self.records:
            if r["series"] != series or r["status"] != "ok":
                continue
            groups.setdefault((r["kappa"], r["dropedge"]), {}).setdefault(
                r["layers"], []
            ).append(r["val_mse"])
        out = {}
        for key, by_layer in groups.items():
            means = sorted((float(np.mean(v)), lay) for lay, v in by_layer.items())
            out[key] = min(means, key=lambda m: (m[0], m[1]))[1]
        return out


@dataclass
class PreparedSweep:
    cfg: SweepConfig
    data: SignalDataset
    train: SupervisedSet
    val: SupervisedSet
    test: SupervisedSet
    graphs: dict
    failures: dict


def _kappa_key(k):
    return "inf" if math.isinf(k) else repr(float(k))


def prepare_sweep(cfg, data):
    """Split the data, learn one graph per kappa and build its operator."""
    sup = data.supervised()
    tr, va, te = split(len(sup), cfg.ratios, cfg.master_seed)
    train_set, val_set, test_set = sup.subset(tr), sup.subset(va), sup.subset(te)
    if cfg.standardize:
        mu = train_set.y.mean()
        sd = train_set.y.std() or 1.0
        norm = lambda s: SupervisedSet((s.X - mu) / sd, (s.y - mu) / sd)  # noqa: E731
        train_set, val_set, test_set = norm(train_set), norm(val_set), norm(test_set)

    times = data.target_times()[tr]
    cov, u = empirical_stats(data.X[times], centered=cfg.centered)
    glasso_cfg = GlassoConfig(rho=cfg.rho, max_sweeps=cfg.max_sweeps)

    graphs = {}
    failures = {}
    base = None
    try:
        base = glasso_learn(cov, u, ProjectionConfig(kappa=math.inf, gamma=cfg.gamma), glasso_cfg)
    except GapGraphError as exc:
        failures[math.inf] = f"failed: {exc}"
    kappas = list(cfg.kappas)
    if cfg.kappa_mode == "relative":
        if base is None:
            raise ValidationError("relative kappas need the unconstrained solution")
        kappas = [k * base.decomp.gap for k in kappas]
    if cfg.include_unconstrained or cfg.dropedge:
        kappas.append(math.inf)
    for k in kappas:
        if k in graphs or k in failures:
            continue
        try:
            res = base if math.isinf(k) else glasso_learn(
                cov, u, ProjectionConfig(kappa=k, gamma=cfg.gamma), glasso_cfg
            )
            if res is None:
                continue
            g = laplacian_to_graph(res.L, cfg.graph_mode)
            graphs[k] = (res, g, build_operator(g))
        except GapGraphError as exc:
            failures[k] = f"failed: {exc}"
    return PreparedSweep(cfg, data, train_set, val_set, test_set, graphs, failures)


def _series_list(prep):
    cfg = prep.cfg
    items = []
    kappas = sorted(set(prep.graphs) | set(prep.failures))
    for k in kappas:
        if math.isinf(k) and not cfg.include_unconstrained:
            continue
        items.append(("gap", k, 0.0))
    for p in cfg.dropedge:
        items.append(("dropedge", math.inf, float(p)))
    return items


def cell_seed(master_seed, series_index, layers, seed):
    """Seed sequence for one sweep cell, independent of which cells run."""
    return np.random.SeedSequence(master_seed, spawn_key=(series_index, layers, seed))


def run_cell(prep, series_index, series, kappa, dropedge, layers, seed):
    cfg = prep.cfg
    rec = {
        "series": series, "kappa": kappa, "dropedge": dropedge, "layers": layers,
        "seed": seed, "val_mse": math.nan, "test_mse": math.nan,
        "gap_cov": math.nan, "gap_laplacian": math.nan, "optimal": False, "status": "ok",
    }
    if kappa in prep.failures:
        rec["status"] = prep.failures[kappa]
        return rec
    res, g, op = prep.graphs[kappa]
    rec["gap_cov"] = res.decomp.gap
    rec["gap_laplacian"] = laplacian_gap_from_covariance(res.decomp)
    init_seed, train_seed = (
        int(x) for x in cell_seed(cfg.master_seed, series_index, layers, seed).generate_state(2)
    )
    try:
        model = GcnModel.init(
            layers, cfg.feature_window, hidden=cfg.hidden, slope=cfg.slope,
            batchnorm=cfg.batchnorm, seed=init_seed,
        )
        tcfg = TrainConfig(
            lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size,
            seed=train_seed, dropedge=dropedge,
        )
        model, _ = train(model, op, prep.train, tcfg, graph=g)
        rec["val_mse"] = mse(prep.val.y, predict(model, op.P, prep.val.X))
        rec["test_mse"] = mse(prep.test.y, predict(model, op.P, prep.test.X))
    except GapGraphError as exc:
        rec["status"] = f"failed: {exc}"
    return rec


def run_sweep(cfg, data, out_dir=None, cells=None):
    """Run every (series, layers, seed) cell and optionally write the outputs.

    ``cells``, if given, is a collection of ``(series_index, layers, seed)``
    tuples restricting which cells run; each cell's value does not depend on
    which other cells run.
    """
    prep = prepare_sweep(cfg, data)
    result = ExperimentResult()
    for si, (series, kappa, p) in enumerate(_series_list(prep)):
        for layers in cfg.layer_counts():
            for seed in cfg.seeds:
                if cells is not None and (si, layers, seed) not in cells:
                    continue
                rec = run_cell(prep, si, series, kappa, p, layers, seed)
                rec["series_index"] = si
                result.records.append(rec)
                logger.info("cell %s kappa=%s p=%s L=%d seed=%s val=%.6g",
                            series, kappa, p, layers, seed, rec["val_mse"])
    _flag_optimal(result)
    if out_dir is not None:
        write_results(result, cfg, out_dir)
    return result


def _flag_optimal(result):
    best = {}
    for r in result.records:
        if r["status"] != "ok":
            continue
        key = (r["series"], r["kappa"], r["dropedge"], r["seed"])
        cand = (r["val_mse"], r["layers"])
        if key not in best or cand < best[key]:
            best[key] = cand
    for r in result.records:
        key = (r["series"], r["kappa"], r["dropedge"], r["seed"])
        r["optimal"] = r["status"] == "ok" and best.get(key, (None, None))[1] == r["layers"]


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.17g}"
    return str(v)


def write_results(result, cfg, out_dir):
    """Write ``results.csv``, ``plot_gap.csv``, ``plot_dropedge.csv`` and ``config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in result.records:
            w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])
    _write_plot(result, out / "plot_gap.csv", "gap", lambda r: f"kappa={_kappa_key(r['kappa'])}")
    if cfg.dropedge:
        _write_plot(result, out / "plot_dropedge.csv", "dropedge",
                    lambda r: f"dropedge={r['dropedge']:g}",
                    extra=[r for r in result.records if r["series"] == "gap"
                           and not math.isinf(r["kappa"])])
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_plot(result, path, series, label, extra=()):
    """Layers versus mean test MSE, one column per series."""
    recs = [r for r in result.records if r["series"] == series and r["status"] == "ok"]
    cols = {}
    for r in recs:
        cols.setdefault(label(r), {}).setdefault(r["layers"], []).append(r["test_mse"])
    if extra:
        # the smallest capped gap, for comparison with the baseline series
        kmin = min(r["kappa"] for r in extra)
        for r in extra:
            if r["kappa"] == kmin and r["status"] == "ok":
                cols.setdefault(f"kappa={_kappa_key(kmin)}", {}).setdefault(
                    r["layers"], []).append(r["test_mse"])
    names = list(cols)
    layers = sorted({lay for c in cols.values() for lay in c})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layers"] + names)
        for lay in layers:
            w.writerow([lay] + [
                _fmt(float(np.mean(cols[nm][lay]))) if lay in cols[nm] else "" for nm in names
            ])
