"""Command line runner: ``netdual {spectrum,run,sweep} --config cfg.json --out dir``.

The config is a flat JSON object, for example::

    {"problem": "quadratic", "n": 2, "graph": "cycle", "m": 8,
     "variant": "case1", "epsilon": 1e-4}

Problem keys: ``problem`` (quadratic | ridge | logistic | entropy), ``n``,
``l``, ``c``, ``kappa``, ``concentration``, ``problem_seed``, ``dataset``.
Graph keys: ``graph``, ``m``, ``edge_prob``, ``graph_seed``. Run keys:
``variant``, ``epsilon``, ``epsilon_tilde`` and the overrides ``R``, ``R_x``,
``R_w``, ``N``, ``T``, ``mu``, ``L``, ``M``. ``sweep`` reads ``m_list``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .certify import certificate, compare_to_bound, config_from_reference, reference_solve
from .dualnet import VARIANTS, MissingConstantError, VariantMismatchError, bound_for, run
from .graph import GraphError, build_graph, laplacian, spectral_summary
from .problems import (
    DatasetError,
    SeparableObjective,
    entropy_agents,
    load_csv_dataset,
    logistic_agents,
    quadratic_agents,
    ridge_agents,
)

TRACE_COLUMNS = ("iteration", "comm_rounds", "oracle_calls_max", "primal_gap",
                 "consensus_residual", "dual_gap_witness")
SWEEP_COLUMNS = ("m", "chi", "rounds_to_certificate")
PROBLEMS = ("quadratic", "ridge", "logistic", "entropy")

KNOWN_KEYS = {
    "problem", "n", "l", "c", "kappa", "concentration", "problem_seed", "dataset",
    "graph", "m", "edge_prob", "graph_seed", "variant", "epsilon", "epsilon_tilde",
    "R", "R_x", "R_w", "N", "T", "mu", "L", "M", "m_list",
}
OVERRIDES = ("R", "R_x", "R_w", "N", "T", "mu", "L", "M")


class ConfigError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = Path(path).parent
    if "dataset" in cfg:
        ds = Path(cfg["dataset"])
        cfg["dataset"] = str(ds if ds.is_absolute() else base / ds)
        if not Path(cfg["dataset"]).exists():
            raise ConfigError(f"dataset {cfg['dataset']} does not exist")
    for key in ("n", "l", "m", "N", "T"):
        if key in cfg and (not isinstance(cfg[key], int) or cfg[key] < 1):
            raise ConfigError(f"{key} must be a positive integer")
    for key in ("epsilon", "epsilon_tilde", "kappa", "concentration", "mu", "L", "M"):
        if key in cfg and not (isinstance(cfg[key], (int, float)) and cfg[key] > 0):
            raise ConfigError(f"{key} must be positive")
    return cfg


def make_graph(cfg, m=None):
    m = cfg.get("m") if m is None else m
    if m is None:
        raise ConfigError("config needs m")
    return build_graph(cfg.get("graph", "cycle"), m, cfg.get("edge_prob"), cfg.get("graph_seed", 0))


def make_problem(cfg, m) -> SeparableObjective:
    kind = cfg.get("problem", "quadratic")
    n = cfg.get("n", 2)
    seed = cfg.get("problem_seed", 0)
    if kind == "quadratic":
        agents = quadratic_agents(m, n, seed, cfg.get("kappa", 4.0))
    elif kind == "ridge":
        agents = ridge_agents(m, n, cfg.get("l", 5), cfg.get("c", 0.1), seed)
    elif kind == "logistic":
        if "dataset" in cfg:
            shards = load_csv_dataset(cfg["dataset"], m)
            agents = logistic_agents(m, None, None, cfg.get("c", 0.1), shards=shards)
        else:
            agents = logistic_agents(m, n, cfg.get("l", 5), cfg.get("c", 0.1), seed)
    elif kind == "entropy":
        agents = entropy_agents(m, n, seed, cfg.get("concentration", 10.0))
    else:
        raise ConfigError(f"unknown problem {kind!r}; expected one of {PROBLEMS}")
    return SeparableObjective(agents)


def execute(cfg, m=None):
    """Build, solve the reference, run and certify. Returns a result dict."""
    variant = cfg.get("variant")
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}")
    if "epsilon" not in cfg:
        raise ConfigError("config needs epsilon")
    eps = cfg["epsilon"]
    topo = make_graph(cfg, m)
    problem = make_problem(cfg, topo.m)
    w = laplacian(topo)
    spec = spectral_summary(w)
    ref = reference_solve(problem, w)
    algo = config_from_reference(variant, eps, ref, **{k: cfg.get(k) for k in OVERRIDES})
    bound_N, bound_T = (None, None)
    try:
        bound_N, bound_T = bound_for(problem, spec, algo)
    except MissingConstantError:
        if algo.N is None:
            raise
    trace = run(problem, topo, algo, f_star=ref.f_star)
    R = algo.R if algo.R is not None else ref.R
    eps_t = cfg.get("epsilon_tilde")
    if eps_t is None:
        if R <= 0:
            raise ConfigError("R = 0 for this instance; set epsilon_tilde explicitly")
        eps_t = eps / R
    cert = certificate(trace.final_candidate, ref, w, eps, eps_t)
    report = compare_to_bound(trace, trace.N, eps, eps_t)
    return dict(topology=topo, spectral=spec, ref=ref, trace=trace, cert=cert,
                report=report, bound_N=bound_N, bound_T=bound_T, epsilon_tilde=eps_t)


def write_trace(path, trace):
    gap = trace.primal_gap
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRACE_COLUMNS)
        for k in range(trace.N):
            wr.writerow([
                k + 1, _fmt(trace.comm_rounds[k]), _fmt(trace.oracle_calls_max[k]),
                _fmt(gap[k]), _fmt(trace.consensus_residual[k]), _fmt(trace.dual_gap_witness[k]),
            ])


def summarize(cfg, res) -> dict:
    trace, ref, spec = res["trace"], res["ref"], res["spectral"]
    return {
        "config": cfg,
        "spectral": {"lambda_max": spec.lambda_max, "lambda_min_plus": spec.lambda_min_plus,
                     "chi": spec.chi},
        "reference": {"f_star": ref.f_star, "R": ref.R, "R_x": ref.R_x, "R_w": ref.R_w},
        "bound": {"N": res["bound_N"], "T": res["bound_T"]},
        "run": {"N": trace.N, "T": trace.T},
        "achieved_iteration": res["report"].first_certified,
        "certificate": res["cert"].as_dict(),
        "total_comm_rounds": int(trace.comm_rounds[-1]),
        "oracle_calls": [int(v) for v in trace.oracle_calls[-1]],
        "oracle_calls_max": int(trace.oracle_calls_max[-1]),
        "violation_count": trace.violation_count,
    }


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_spectrum(cfg, out=None) -> int:
    spec = spectral_summary(laplacian(make_graph(cfg)))
    line = "lambda_max=%.12g lambda_min_plus=%.12g chi=%.12g" % (
        spec.lambda_max, spec.lambda_min_plus, spec.chi)
    print(line)
    if out is not None:
        (_out_dir(out) / "spectrum.json").write_text(json.dumps(
            {"lambda_max": spec.lambda_max, "lambda_min_plus": spec.lambda_min_plus,
             "chi": spec.chi}, indent=2) + "\n")
    return 0


def cmd_run(cfg, out) -> int:
    out = _out_dir(out)
    res = execute(cfg)
    write_trace(out / "trace.csv", res["trace"])
    (out / "summary.json").write_text(json.dumps(summarize(cfg, res), indent=2) + "\n")
    cert = res["cert"]
    print("certificate %s: primal_gap=%.3e consensus_residual=%.3e (epsilon=%g epsilon_tilde=%.3e)"
          % ("satisfied" if cert.satisfied else "NOT satisfied", cert.primal_gap,
             cert.consensus_residual, cert.epsilon, cert.epsilon_tilde))
    return 0 if cert.satisfied else 1


def cmd_sweep(cfg, out) -> int:
    ms = cfg.get("m_list")
    if not isinstance(ms, list) or len(ms) < 3:
        raise ConfigError("sweep needs m_list with at least 3 sizes")
    out = _out_dir(out)
    rows, failed = [], []
    for m in sorted(ms):
        res = execute(cfg, m)
        rep = res["report"]
        if rep.first_certified is None:
            failed.append(m)
        rows.append((m, res["spectral"].chi, rep.rounds_to_certificate))
    with open(out / "sweep.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_COLUMNS)
        for m, chi, r in rows:
            wr.writerow([m, _fmt(chi), "" if r is None else r])
    if failed:
        print(f"no certificate reached for m in {failed}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="netdual", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=name != "spectrum")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cmd = {"spectrum": cmd_spectrum, "run": cmd_run, "sweep": cmd_sweep}[args.command]
        return cmd(cfg, args.out)
    except (ConfigError, GraphError, DatasetError, VariantMismatchError,
            MissingConstantError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
