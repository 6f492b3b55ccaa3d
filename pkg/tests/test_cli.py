import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from netdual.cli import TRACE_COLUMNS, main


def write_cfg(tmp_path, name="cfg.json", **cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


P2_RUN = dict(problem="quadratic", n=1, graph="path", m=2, variant="case1", epsilon=1e-8)


def test_spectrum_examples(tmp_path, capsys):
    assert main(["spectrum", "--config", write_cfg(tmp_path, graph="cycle", m=4)]) == 0
    assert capsys.readouterr().out.strip() == "lambda_max=4 lambda_min_plus=2 chi=2"
    out = tmp_path / "spec"
    assert main(["spectrum", "--config", write_cfg(tmp_path, graph="path", m=2), "--out", str(out)]) == 0
    assert "chi=1" in capsys.readouterr().out
    assert json.loads((out / "spectrum.json").read_text())["chi"] == pytest.approx(1.0)


def test_bad_graph_is_a_named_error(tmp_path, capsys):
    assert main(["spectrum", "--config", write_cfg(tmp_path, graph="cycle", m=1)]) == 2
    assert capsys.readouterr().err.startswith("error: GraphError:")
    assert main(["spectrum", "--config", write_cfg(tmp_path, graph="erdos_renyi", m=5)]) == 2


def test_run_p2_case1(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write_cfg(tmp_path, **P2_RUN), "--out", str(out)]) == 0
    header = (out / "trace.csv").read_bytes().split(b"\n", 1)[0]
    assert header == ",".join(TRACE_COLUMNS).encode()
    rows = read_csv(out / "trace.csv")
    gap = np.array([float(r["primal_gap"]) for r in rows])
    assert abs(gap[-1]) <= 1e-8
    assert abs(gap[-1]) < abs(gap[0])
    assert [int(r["iteration"]) for r in rows] == list(range(1, len(rows) + 1))

    summary = json.loads((out / "summary.json").read_text())
    last = rows[-1]
    assert summary["total_comm_rounds"] == int(last["comm_rounds"])
    assert summary["oracle_calls_max"] == int(last["oracle_calls_max"]) == max(summary["oracle_calls"])
    assert summary["certificate"]["satisfied"] is True
    assert summary["certificate"]["primal_gap"] == pytest.approx(float(last["primal_gap"]), abs=1e-15)
    assert summary["run"]["N"] == summary["bound"]["N"] == len(rows)
    assert summary["achieved_iteration"] <= summary["run"]["N"]
    assert set(summary["reference"]) == {"f_star", "R", "R_x", "R_w"}
    assert summary["config"] == P2_RUN


def test_run_exit_one_when_n_too_small(tmp_path, capsys):
    cfg = write_cfg(tmp_path, **{**P2_RUN, "N": 2})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "NOT satisfied" in capsys.readouterr().out


def test_reproducible_bytes(tmp_path):
    cfg = write_cfg(tmp_path, problem="logistic", n=3, l=5, c=0.5, graph="erdos_renyi", m=6,
                    edge_prob=0.5, graph_seed=3, variant="augmented_sc", epsilon=1e-3, N=20, T=5)
    for name in ("a", "b"):
        main(["run", "--config", cfg, "--out", str(tmp_path / name)])
    assert (tmp_path / "a/trace.csv").read_bytes() == (tmp_path / "b/trace.csv").read_bytes()
    rows = read_csv(tmp_path / "a/trace.csv")
    assert int(rows[-1]["comm_rounds"]) == 20 * 6 and int(rows[-1]["oracle_calls_max"]) == 20 * 5


def test_sweep_cycles(tmp_path, capsys):
    cfg = write_cfg(tmp_path, problem="quadratic", n=2, graph="cycle", variant="case1",
                    epsilon=1e-3, m_list=[16, 8, 32])
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [int(r["m"]) for r in rows] == [8, 16, 32]
    rounds = [int(r["rounds_to_certificate"]) for r in rows]
    assert rounds == sorted(rounds)
    for r in rows:
        main(["spectrum", "--config", write_cfg(tmp_path, "s.json", graph="cycle", m=int(r["m"]))])
        chi = float(capsys.readouterr().out.split("chi=")[1])
        assert chi == pytest.approx(float(r["chi"]), rel=1e-11)


@pytest.mark.parametrize("cfg,name", [
    (dict(problem="logistic", n=2, graph="cycle", m=4, variant="case1", epsilon=1e-3), "VariantMismatchError"),
    (dict(problem="quadratic", graph="cycle", m=4, variant="case7", epsilon=1e-3), "ConfigError"),
    (dict(problem="quadratic", graph="cycle", m=4, variant="case1", epsilon=-1.0), "ConfigError"),
    (dict(problem="quadratic", graph="cycle", m=4, variant="case1", epsilon=1e-3, colour=1), "ConfigError"),
    (dict(problem="logistic", dataset="missing.csv", graph="cycle", m=4, variant="nofriend_sc_smooth",
          epsilon=1e-3), "ConfigError"),
])
def test_named_errors(tmp_path, capsys, cfg, name):
    assert main(["run", "--config", write_cfg(tmp_path, **cfg), "--out", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err.startswith(f"error: {name}:")


def test_sweep_needs_three_sizes(tmp_path):
    cfg = write_cfg(tmp_path, graph="cycle", variant="case1", epsilon=1e-3, m_list=[4, 8])
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", write_cfg(tmp_path, **P2_RUN), "--out", str(blocker / "sub")]) == 2


def test_dataset_config(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((40, 3))
    y = np.where(a @ [1.0, -1.0, 0.5] + 0.3 * rng.standard_normal(40) > 0, 1, -1)
    np.savetxt(tmp_path / "data.csv", np.column_stack([a, y]), delimiter=",")
    cfg = write_cfg(tmp_path, problem="logistic", dataset="data.csv", c=1.0, graph="cycle", m=4,
                    variant="nofriend_sc_smooth", epsilon=1e-3)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o/summary.json").read_text())
    assert summary["bound"]["T"] == summary["run"]["T"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "netdual", "spectrum", "--config",
                          write_cfg(tmp_path, graph="star", m=4)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "lambda_max=4 lambda_min_plus=1 chi=4"
