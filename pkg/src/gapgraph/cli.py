"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad input, bad config, missing
file), 2 numerical failure.
"""

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import formats
from .eigen_projection import ProjectionConfig, project
from .errors import NumericalError, ValidationError
from .gcn_lab import GcnModel, TrainConfig, oversmoothing_check, train
from .glasso import GlassoConfig, glasso_learn
from .graph_model import build_operator, laplacian_to_graph
from .pipeline import (
    SweepConfig,
    empirical_stats,
    load_signals_csv,
    random_sensor_laplacian,
    run_sweep,
    save_signals_csv,
    split,
    synth_gmrf,
    synthetic_signals,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors, not numerical ones
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _kappa(text):
    if text.lower() in ("inf", "none"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("kappa must be positive")
    return value


def cmd_learn(args):
    data = load_signals_csv(args.signals, has_header=args.header)
    X = data.X
    if args.train_only:
        train_idx, _, _ = split(data.T, seed=args.seed)
        X = X[train_idx]
    cov, u = empirical_stats(X, centered=args.centered)
    res = glasso_learn(
        cov, u, ProjectionConfig(kappa=args.kappa, gamma=args.gamma),
        GlassoConfig(rho=args.rho, max_sweeps=args.max_sweeps),
    )
    formats.write_laplacian(args.out, res, u, args.kappa, args.rho)
    if args.graph:
        g = laplacian_to_graph(res.L, args.mode)
        formats.write_graph(args.graph, g, build_operator(g))
    print(f"n={cov.shape[0]} gap_cov={res.decomp.gap:.6g} sweeps={res.sweeps} "
          f"converged={res.converged}")


def cmd_project(args):
    cov = formats.read_matrix_csv(args.cov, square=True)
    u = formats.read_vector(args.u)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValidationError("u is the zero vector")
    cfg = ProjectionConfig(kappa=args.kappa, gamma=args.gamma, method=args.method)
    C, decomp = project(cov, u / norm, cfg)
    formats.write_matrix_csv(args.out, C)
    if args.spectrum:
        formats.write_json(args.spectrum, {
            "values": [float(v) for v in decomp.values],
            "rayleigh": [float(v) for v in decomp.rayleigh],
            "gap": decomp.gap,
            "kappa": None if math.isinf(args.kappa) else args.kappa,
        })
    print(f"gap={decomp.gap:.6g}")


def cmd_gcn_train(args):
    rec = formats.read_laplacian(args.laplacian)
    data = load_signals_csv(
        args.signals, has_header=args.header,
        feature_window=args.window, target_offset=args.offset,
    )
    if data.N != rec["n"]:
        raise ValidationError(f"signals have {data.N} nodes, Laplacian has {rec['n']}")
    g = laplacian_to_graph(rec["L"], args.mode)
    op = build_operator(g)
    sup = data.supervised()
    train_idx, _, _ = split(len(sup), seed=args.seed)
    model = GcnModel.init(args.layers, args.window, batchnorm=args.batchnorm, seed=args.seed)
    cfg = TrainConfig(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, dropedge=args.dropedge,
    )
    model, trace = train(model, op, sup.subset(train_idx), cfg, graph=g)
    formats.write_trace_csv(args.out, trace)
    if args.report:
        formats.write_report(args.report, oversmoothing_check(model, op, sup.X[train_idx[0]]))
    print(f"final_loss={trace[-1]:.6g}")


def cmd_sweep(args):
    cfg = SweepConfig.load(args.config)
    if cfg.signals is not None:
        path = Path(cfg.signals)
        if not path.is_absolute():
            path = Path(args.config).parent / path
        data = load_signals_csv(
            path, has_header=cfg.has_header,
            feature_window=cfg.feature_window, target_offset=cfg.target_offset,
        )
    elif cfg.synthetic is not None:
        data, _ = synthetic_signals(cfg.synthetic, cfg.feature_window, cfg.target_offset)
    else:
        raise ValidationError("config needs a 'signals' path or a 'synthetic' block")
    result = run_sweep(cfg, data, args.out)
    failed = sum(r["status"] != "ok" for r in result.records)
    print(f"cells={len(result.records)} failed={failed} out={args.out}")


def cmd_synth(args):
    L, _ = random_sensor_laplacian(args.nodes, args.seed, k=args.k, scale=args.scale)
    data = synth_gmrf(args.nodes, args.samples, L, args.mean, seed=args.seed + 1, ar=args.ar)
    save_signals_csv(args.out, data.X)
    if args.laplacian:
        formats.write_matrix_csv(args.laplacian, L)
    print(f"T={data.T} N={data.N}")


def build_parser():
    p = _Parser(prog="gapgraph", description="Eigen-gap constrained graph learning for GCNs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("learn", help="learn a Laplacian from a signals CSV")
    s.add_argument("signals")
    s.add_argument("-o", "--out", required=True, help="Laplacian JSON file")
    s.add_argument("--rho", type=float, default=1e-4)
    s.add_argument("--kappa", type=_kappa, default=math.inf, help="gap cap ('inf' for none)")
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--centered", action="store_true", help="use the centred covariance")
    s.add_argument("--seed", type=int, default=0, help="split seed for --train-only")
    s.add_argument("--train-only", action="store_true", help="learn from the 70%% training split")
    s.add_argument("--max-sweeps", type=int, default=50)
    s.add_argument("--header", action="store_true", help="skip a header row")
    s.add_argument("--graph", help="also write the graph export JSON here")
    s.add_argument("--mode", choices=("clamp", "signed"), default="clamp")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("project", help="project a covariance onto the eigen-gap cone")
    s.add_argument("cov", help="covariance matrix CSV")
    s.add_argument("u", help="top eigenvector CSV (normalised on load)")
    s.add_argument("-o", "--out", required=True, help="projected matrix CSV")
    s.add_argument("--kappa", type=_kappa, required=True)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--method", choices=("auto", "exact", "pg"), default="auto")
    s.add_argument("--spectrum", help="also write eigenvalues as JSON here")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("gcn-train", help="train a GCN on a learned graph")
    s.add_argument("laplacian", help="Laplacian JSON from 'learn'")
    s.add_argument("signals")
    s.add_argument("-o", "--out", required=True, help="loss trace CSV")
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--dropedge", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=30)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--window", type=int, default=10)
    s.add_argument("--offset", type=int, default=1)
    s.add_argument("--batchnorm", action="store_true")
    s.add_argument("--header", action="store_true")
    s.add_argument("--mode", choices=("clamp", "signed"), default="clamp")
    s.add_argument("--report", help="over-smoothing report JSON")
    s.set_defaults(func=cmd_gcn_train)

    s = sub.add_parser("sweep", help="run a (kappa x layers) sweep from a JSON config")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("synth", help="generate synthetic GMRF signals")
    s.add_argument("-o", "--out", required=True, help="signals CSV")
    s.add_argument("--nodes", type=int, default=20)
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--laplacian", help="write the ground-truth Laplacian CSV here")
    s.add_argument("--mean", type=float, default=1.0)
    s.add_argument("--ar", type=float, default=0.0, help="AR(1) coefficient in time")
    s.add_argument("--k", type=int, default=2, help="nearest neighbours per node")
    s.add_argument("--scale", type=float, default=100.0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
