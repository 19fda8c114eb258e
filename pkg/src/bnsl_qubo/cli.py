"""Command-line entry point: ``bnsl-qubo <generate|encode|solve|divide|evaluate>``.

Every subcommand is deterministic for a fixed ``--seed``. JSON reports embed
the full run configuration; wall-clock measurements live under ``timing`` so
that reproducibility checks can ignore them.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .decomposition import RECONSTRUCTORS, DecompositionError, divide_et_impera, generate_subproblems
from .encoder import ALPHA_RULES, EncodingError, QuboMatrix, build_qubo
from .evaluation import EvalReport, aggregate, encode_expected
from .network import (
    BayesNet,
    Dataset,
    NetworkError,
    ancestral_sample,
    expected_dataset,
    load_network,
    read_dataset,
    write_dataset,
)
from .solvers import SAMPLERS, SolverCapExceeded, SolverParams, Structure, decode_solution, energy, get_sampler

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER_CAP = 4

log = logging.getLogger("bnsl_qubo")


class ConfigError(ValueError):
    pass


def bundled_networks() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("bnsl_qubo.networks").iterdir() if p.name.endswith(".json"))


def resolve_network(spec: str) -> BayesNet:
    """Load a network from a JSON path or by bundled name (``lc``, ``mhp``, ...)."""
    path = Path(spec)
    if path.exists():
        return load_network(path)
    if spec in bundled_networks():
        return load_network(resources.files("bnsl_qubo.networks").joinpath(f"{spec}.json").read_text())
    raise FileNotFoundError(f"network {spec!r} is neither a file nor one of {bundled_networks()}")


def make_dataset(net: BayesNet, method: str, N: int, seed: int) -> Dataset:
    if method == "expected":
        return expected_dataset(net, N)
    if method == "sample":
        return ancestral_sample(net, N, seed)
    raise ConfigError(f"unknown generation method {method!r}")


def load_inputs(args) -> tuple[BayesNet | None, Dataset]:
    net = resolve_network(args.net) if args.net else None
    if args.data:
        data = read_dataset(args.data, net)
        if net is not None and list(data.variable_names) != net.names:
            raise ConfigError(f"dataset columns {list(data.variable_names)} do not match network {net.names}")
        return net, data
    if net is None:
        raise ConfigError("either --net or --data is required")
    return net, make_dataset(net, args.method, args.N, args.seed)


def run_config(args) -> dict:
    skip = {"func", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def solver_params(args, seed: int) -> SolverParams:
    return SolverParams(reads=args.reads, sweeps=args.sweeps, seed=seed, threads=args.threads)


def write_report(report: dict, out: str | None) -> None:
    if out:
        Path(out).write_text(json.dumps(report, indent=2) + "\n")
        print(f"report written to {out}")


def edges_by_name(structure: Structure, names) -> list[list[str]]:
    return [[names[a], names[b]] for a, b in sorted(structure.edges())]


def cmd_generate(args) -> int:
    net = resolve_network(args.net)
    data = make_dataset(net, args.method, args.N, args.seed)
    out = args.out or f"{Path(args.net).stem}_{args.method}_{args.N}.csv"
    write_dataset(data, out, net)
    print(f"{data.N} rows ({args.method}, N={args.N}) written to {out}")
    return EXIT_OK


def cmd_encode(args) -> int:
    _, data = load_inputs(args)
    t0 = time.perf_counter()
    Q = build_qubo(data, args.alpha_rule, args.penalty_multiplier, threads=args.threads)
    elapsed = time.perf_counter() - t0
    imap = Q.index_map
    print(f"dimension {Q.dim} ({imap.num_d} d + {imap.num_y} y + {imap.num_r} r), N={data.N}, build {elapsed:.4f} s")
    if args.out:
        sidecar = Q.save(args.out)
        print(f"QUBO written to {args.out} (roles in {sidecar})")
    return EXIT_OK


def cmd_solve(args) -> int:
    net = resolve_network(args.net) if args.net else None
    t0 = time.perf_counter()
    if args.qubo:
        Q = QuboMatrix.load(args.qubo)
        names = net.names if net is not None else [str(i) for i in range(Q.n)]
    else:
        net, data = load_inputs(args)
        Q = build_qubo(data, args.alpha_rule, args.penalty_multiplier, threads=args.threads)
        names = list(data.variable_names)
    build_time = time.perf_counter() - t0

    sampler = get_sampler(args.solver)
    runs, solve_times = [], []
    for run in range(args.runs):
        t1 = time.perf_counter()
        result = sampler.solve(Q, solver_params(args, args.seed + run))
        solve_times.append(time.perf_counter() - t1)
        structure = decode_solution(result.best_state, Q.index_map)
        runs.append({
            "run": run,
            "seed": args.seed + run,
            **result.to_dict(),
            "edges": edges_by_name(structure, names),
            "adjacency": structure.adjacency.tolist(),
        })
        print(f"run {run}: energy {result.best_energy:.6f}, best found {result.occurrences_of_best} times, "
              f"{len(structure.edges())} edges")

    report = {"command": "solve", "config": run_config(args), "dimension": Q.dim, "runs": runs,
              "timing": {"build": build_time, "solve": solve_times}}
    if net is not None:
        truth = Structure(net.adjacency)
        expected_energy = energy(Q, encode_expected(truth, Q))
        summary = aggregate(truth, [Structure(np.array(r["adjacency"])) for r in runs],
                            [r["best_energy"] for r in runs], expected_energy)
        report["expected_energy"] = expected_energy
        report["evaluation"] = summary.to_dict()
        print(f"success rate {summary.success_rate:.2f}, average result {summary.average_result:.4f}")
    write_report(report, args.out)
    return EXIT_OK


def cmd_divide(args) -> int:
    net, data = load_inputs(args)
    sampler = get_sampler(args.solver)
    names = list(data.variable_names)
    count = len(generate_subproblems(data.n, args.k))
    results = []
    for run in range(args.runs):
        res = divide_et_impera(data, args.k, sampler, solver_params(args, args.seed + run),
                               args.strategy, args.alpha_rule, threads=args.threads)
        results.append(res)
        print(f"run {run}: {res.solved}/{count} subproblems, edges {edges_by_name(res.structure, names)}")

    report = {
        "command": "divide",
        "config": run_config(args),
        "subproblem_count": count,
        "runs": [{**r.manifest(args.solver, solver_params(args, args.seed + i)),
                  "edges": edges_by_name(r.structure, names),
                  "failures": [list(f) for f in r.failures]} for i, r in enumerate(results)],
        "timing": {"formulation": [r.formulation_time for r in results],
                   "solve": [r.solve_time for r in results]},
    }
    if net is not None:
        summary = aggregate(Structure(net.adjacency), [r.structure for r in results])
        report["evaluation"] = summary.to_dict()
        sys.stdout.write(EvalReport.csv_header("k", "solver", "correct", "wrong"))
        sys.stdout.write(summary.csv_row(k=args.k, solver=args.solver,
                                         correct=" ".join(map(str, summary.correct_edges_per_run)),
                                         wrong=" ".join(map(str, summary.wrong_edges_per_run))))
    write_report(report, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    net = resolve_network(args.net)
    report = json.loads(Path(args.report).read_text())
    try:
        found = [Structure(np.array(r["adjacency"])) for r in report["runs"]]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{args.report}: not a solve/divide report ({exc})") from None
    energies = [r["best_energy"] for r in report["runs"]] if all("best_energy" in r for r in report["runs"]) else None
    summary = aggregate(Structure(net.adjacency), found, energies, report.get("expected_energy"))
    sys.stdout.write(EvalReport.csv_header())
    sys.stdout.write(summary.csv_row())
    write_report({"command": "evaluate", "config": run_config(args), "evaluation": summary.to_dict()}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnsl-qubo", description="Bayesian network structure learning as QUBO.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, need_net=False):
        p.add_argument("--net", required=need_net, help=f"network JSON path or bundled name {bundled_networks()}")
        p.add_argument("--data", help="CSV dataset; generated from --net when omitted")
        p.add_argument("--method", choices=("sample", "expected"), default="expected")
        p.add_argument("-N", type=int, default=10_000, help="dataset size (default 10000)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)

    def encode_flags(p):
        p.add_argument("--alpha-rule", choices=sorted(ALPHA_RULES), default="inv_riqi")
        p.add_argument("--penalty-multiplier", type=float, default=1.0)

    def solver_flags(p):
        p.add_argument("--solver", choices=sorted(SAMPLERS), default="sa")
        p.add_argument("--reads", type=int, default=1000)
        p.add_argument("--sweeps", type=int, default=1000)
        p.add_argument("--runs", type=int, default=1)

    p = sub.add_parser("generate", help="write a dataset sampled from a network")
    data_flags(p, need_net=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="build and export the QUBO matrix")
    data_flags(p)
    encode_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="solve the full problem directly")
    data_flags(p)
    encode_flags(p)
    solver_flags(p)
    p.add_argument("--qubo", help="previously exported QUBO file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("divide", help="divide-et-impera reconstruction from k-variable subproblems")
    data_flags(p)
    encode_flags(p)
    solver_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--strategy", type=int, choices=sorted(RECONSTRUCTORS), default=2)
    p.set_defaults(func=cmd_divide)

    p = sub.add_parser("evaluate", help="score a solve/divide report against the generating network")
    p.add_argument("--net", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolverCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_CAP
    except (ConfigError, NetworkError, EncodingError, DecompositionError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
