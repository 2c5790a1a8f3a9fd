import csv
import json

import numpy as np
import pytest

from gapgraph import formats
from gapgraph.cli import main


@pytest.fixture
def signals(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["synth", "-o", str(out), "--nodes", "6", "--samples", "300",
                 "--seed", "1", "--ar", "0.5", "--laplacian", str(tmp_path / "L.csv")]) == 0
    return out


def test_synth_writes_files(signals, tmp_path):
    rows = list(csv.reader(open(signals)))
    assert len(rows) == 300 and len(rows[0]) == 6
    L = formats.read_matrix_csv(tmp_path / "L.csv", square=True)
    assert L.shape == (6, 6)


def test_synth_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["synth", "-o", str(tmp_path / name), "--nodes", "4", "--samples", "50"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_learn_and_graph(signals, tmp_path):
    out, graph = tmp_path / "L.json", tmp_path / "g.json"
    assert main(["learn", str(signals), "-o", str(out), "--kappa", "2", "--graph", str(graph)]) == 0
    rec = formats.read_laplacian(out)
    assert rec["n"] == 6 and rec["kappa"] == 2.0
    assert rec["gap_cov"] <= 2.0 + 1e-9
    g = json.loads(graph.read_text())
    assert g["n"] == 6 and g["mode"] == "clamp"
    assert max(g["p_eigenvalues"]) == pytest.approx(1.0, abs=1e-8)


def test_learn_unconstrained_kappa_is_null(signals, tmp_path):
    out = tmp_path / "L.json"
    assert main(["learn", str(signals), "-o", str(out), "--train-only", "--centered"]) == 0
    assert json.loads(out.read_text())["kappa"] is None


def test_project(tmp_path):
    u = np.ones(4) / 2
    cov = np.eye(4) + 3 * np.outer(u, u)
    formats.write_matrix_csv(tmp_path / "c.csv", cov)
    formats.write_matrix_csv(tmp_path / "u.csv", u[:, None])
    code = main(["project", str(tmp_path / "c.csv"), str(tmp_path / "u.csv"),
                 "-o", str(tmp_path / "p.csv"), "--kappa", "2",
                 "--spectrum", str(tmp_path / "s.json")])
    assert code == 0
    C = formats.read_matrix_csv(tmp_path / "p.csv", square=True)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [1, 1, 2, 4], atol=1e-9)
    assert json.loads((tmp_path / "s.json").read_text())["gap"] == pytest.approx(2.0)


def test_gcn_train(signals, tmp_path):
    lap = tmp_path / "L.json"
    assert main(["learn", str(signals), "-o", str(lap)]) == 0
    traces = []
    for name in ("t1.csv", "t2.csv"):
        code = main(["gcn-train", str(lap), str(signals), "-o", str(tmp_path / name),
                     "--layers", "2", "--epochs", "3", "--window", "4", "--dropedge", "0.3",
                     "--report", str(tmp_path / "r.json")])
        assert code == 0
        traces.append((tmp_path / name).read_text())
    assert traces[0] == traces[1]
    rows = list(csv.reader(traces[0].splitlines()))
    assert rows[0] == ["epoch", "loss"] and len(rows) == 4
    rep = json.loads((tmp_path / "r.json").read_text())
    assert len(rep["distances"]) == 3


def test_sweep(tmp_path):
    cfg = {
        "synthetic": {"nodes": 5, "samples": 120, "seed": 0},
        "kappas": [1, 2], "layer_range": [1, 2], "epochs": 1, "feature_window": 3,
        "dropedge": [0.5],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["sweep", str(path), "-o", str(tmp_path / "out")]) == 0
    rows = list(csv.reader(open(tmp_path / "out" / "results.csv")))
    # kappas 1, 2 and inf, plus one DropEdge series, two depths each
    assert len(rows) == 1 + 4 * 2
    assert (tmp_path / "out" / "plot_dropedge.csv").exists()


def test_sweep_relative_signals_path(signals, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"signals": signals.name, "kappas": [1], "layer_range": [1, 1],
                                "epochs": 1, "feature_window": 3, "include_unconstrained": False}))
    assert main(["sweep", str(path), "-o", str(tmp_path / "out")]) == 0


def test_validation_exit_codes(tmp_path, signals):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert main(["learn", str(bad), "-o", str(tmp_path / "o.json")]) == 1
    assert main(["learn", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "o.json")]) == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kapas": [1]}))
    assert main(["sweep", str(cfg), "-o", str(tmp_path / "out")]) == 1
    with pytest.raises(SystemExit) as err:
        main(["learn", str(signals), "-o", str(tmp_path / "o.json"), "--kappa", "-1"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1


def test_numerical_exit_code(tmp_path):
    # constant signals: the centred covariance is zero and singular at rho = 0
    p = tmp_path / "const.csv"
    p.write_text("1,1,1\n" * 20)
    assert main(["learn", str(p), "-o", str(tmp_path / "o.json"), "--centered", "--rho", "0"]) == 2
