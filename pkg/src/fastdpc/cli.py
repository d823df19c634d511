"""Command-line harness: generate or load points, cluster, export, evaluate.

Local density counts the point itself (distance 0 < d_cut), so every density
is at least 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .approx import approx_dpc_run
from .core import ContractError, DpcParams, rand_index
from .datasets import (
    DatasetParseError,
    export_decision_graph,
    generate_gaussian,
    generate_random_walk,
    load_dataset,
    load_labels,
    save_dataset,
    save_labels,
)
from .exdpc import exdpc_run
from .result import DpcResult
from .sapprox import s_approx_run
from .scan import scan_run

ALGORITHMS = {
    "scan": scan_run,
    "ex": exdpc_run,
    "approx": approx_dpc_run,
    "s-approx": s_approx_run,
}

EXIT_USAGE = 1
EXIT_IO = 2


@dataclass
class RunReport:
    algorithm: str
    params: dict
    timings: dict
    threads: int
    n: int
    d: int
    clusters: int
    noise: int

    def lines(self) -> list[str]:
        out = [f"algorithm={self.algorithm}", f"n={self.n}", f"d={self.d}", f"threads={self.threads}"]
        out += [f"{k}={v}" for k, v in self.params.items()]
        out += [f"time_{k}={v:.6f}" for k, v in self.timings.items()]
        out += [f"time_total={sum(self.timings.values()):.6f}", f"clusters={self.clusters}", f"noise={self.noise}"]
        return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="fastdpc",
        description="Density-peaks clustering (exact, grid-approximate and sampled).",
        epilog="Local density counts the point itself, so densities start at 1. "
        "Labels: -1 noise, -2 unassigned.",
    )
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="approx")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="points file, one point per line")
    src.add_argument("--generate", choices=["gaussian", "walk"])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=15, help="gaussian clusters")
    p.add_argument("--spread", type=float, default=1000.0, help="gaussian standard deviation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dcut", type=float, required=True, help="cutoff distance")
    p.add_argument("--rho-min", type=float, default=0.0, help="noise threshold on local density")
    p.add_argument("--delta-min", type=float, help="center threshold on dependent distance (default 2*dcut)")
    p.add_argument("--epsilon", type=float, default=1.0, help="S-Approx-DPC cell scale")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-labels", metavar="PATH")
    p.add_argument("--out-decision-graph", metavar="PATH")
    p.add_argument("--out-data", metavar="PATH", help="write the (generated) points")
    p.add_argument("--eval", metavar="PATH", help="reference label file; prints rand_index")
    p.add_argument("--report", choices=["text", "json-lines"], default="text")
    return p


def _dataset(args):
    if args.input:
        return load_dataset(args.input)
    if args.n < 1 or args.d < 1:
        raise ContractError("--n and --d must be >= 1")
    if args.generate == "gaussian":
        points, _, _ = generate_gaussian(args.k, args.n, args.d, args.spread, args.seed)
        return points
    return generate_random_walk(args.n, args.d, args.seed)


def run_algorithm(name: str, points, params: DpcParams) -> DpcResult:
    return ALGORITHMS[name](points, params)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    delta_min = 2 * args.dcut if args.delta_min is None else args.delta_min
    try:
        params = DpcParams(
            d_cut=args.dcut, rho_min=args.rho_min, delta_min=delta_min,
            epsilon=args.epsilon, threads=args.threads, seed=args.seed,
        )
    except ContractError as exc:
        print(f"fastdpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        points = _dataset(args)
    except ContractError as exc:
        print(f"fastdpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetParseError) as exc:
        print(f"fastdpc: error: {exc}", file=sys.stderr)
        return EXIT_IO

    n = points.shape[0]
    d = points.shape[1] if n else 0
    result = run_algorithm(args.algo, points, params) if n else None
    labels = result.clustering.labels if result else np.empty(0, np.int64)

    report = RunReport(
        algorithm=args.algo,
        params={"d_cut": params.d_cut, "rho_min": params.rho_min, "delta_min": params.delta_min, "epsilon": params.epsilon},
        timings=result.timings if result else {"density": 0.0, "dependency": 0.0, "labeling": 0.0},
        threads=params.threads,
        n=n,
        d=d,
        clusters=result.clustering.n_clusters if result else 0,
        noise=result.clustering.n_noise if result else 0,
    )
    extra = {}
    try:
        if args.out_data:
            save_dataset(points, args.out_data)
        if args.out_labels:
            save_labels(labels, args.out_labels)
        if args.out_decision_graph and result:
            export_decision_graph(result.profile, args.out_decision_graph)
        if args.eval:
            reference = load_labels(args.eval)
            extra["rand_index"] = rand_index(reference, labels)
    except ContractError as exc:
        print(f"fastdpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetParseError) as exc:
        print(f"fastdpc: error: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.report == "json-lines":
        record = asdict(report)
        record["time_total"] = sum(report.timings.values())
        record.update(extra)
        print(json.dumps(record), file=stdout)
    else:
        for line in report.lines():
            print(line, file=stdout)
        for k, v in extra.items():
            print(f"{k}={v}", file=stdout)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
