"""Command-line front end.

Subcommands: ``select`` (sequential model selection on an edge list),
``cluster`` (single-model community detection), ``simulate`` (grid studies
from a config file), ``generate`` (write a sampled network to disk).

Exit codes: 0 success, 2 usage or I/O or parse error, 3 infeasible model
or parameters, 4 internal numerical failure.

Heavy imports happen inside command handlers so ``--threads`` can pin BLAS
thread counts via environment variables before numpy loads; ``--threads 1``
is the canonical deterministic configuration used by the golden tests.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    EdgeListParseError,
    InfeasibleModelError,
    NumericalError,
)

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockselect",
        description="Community detection and blockmodel selection "
        "(SBM / DCBM / PABM) on simple undirected networks.",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="pin BLAS thread count (1 = canonical deterministic path)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_select = sub.add_parser(
        "select", help="run the sequential SBM -> DCBM -> PABM selection workflow"
    )
    p_select.add_argument("edges", type=Path, help="edge-list file (u v per line)")
    p_select.add_argument("--k", type=int, required=True, help="community count")
    p_select.add_argument("--alpha", type=float, default=0.05)
    p_select.add_argument("--boot", type=int, default=200, help="bootstrap replicates")
    p_select.add_argument("--restarts", type=int, default=None)
    p_select.add_argument("--seed", type=int, default=0)
    p_select.add_argument("--out", type=Path, default=Path("blockselect_out"))
    p_select.add_argument(
        "--lcc", action="store_true", help="restrict to the largest connected component"
    )
    p_select.set_defaults(func=cmd_select)

    p_cluster = sub.add_parser("cluster", help="community detection under one model")
    p_cluster.add_argument("edges", type=Path)
    p_cluster.add_argument("--k", type=int, required=True)
    p_cluster.add_argument(
        "--model", choices=("sbm", "dcbm", "pabm"), required=True,
        help="which loss to minimize (centroid / rank-1 / rank-K)",
    )
    p_cluster.add_argument("--restarts", type=int, default=None)
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--out", type=Path, default=Path("blockselect_out"))
    p_cluster.add_argument("--truth", type=Path, default=None,
                           help="ground-truth labels file (node_id label)")
    p_cluster.add_argument("--lcc", action="store_true")
    p_cluster.set_defaults(func=cmd_cluster)

    p_sim = sub.add_parser("simulate", help="run a grid study from a config file")
    p_sim.add_argument("config", type=Path)
    p_sim.add_argument("--out", type=Path, default=Path("blockselect_out"))
    p_sim.add_argument("--quiet", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_gen = sub.add_parser("generate", help="sample a network and write it to disk")
    p_gen.add_argument("model", choices=("sbm", "dcbm", "pabm"))
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--k", type=int, required=True)
    p_gen.add_argument("--omega", type=str, default=None,
                       help="base block matrix, rows ; separated: '4,2;2,4'")
    p_gen.add_argument("--beta", type=float, default=None,
                       help="between/within probability ratio (alternative to --omega)")
    p_gen.add_argument("--fractions", type=str, default=None,
                       help="block fractions, e.g. '0.25,0.25,0.5' (default equal)")
    p_gen.add_argument("--density", type=float, default=None)
    p_gen.add_argument("--avg-degree", type=float, default=None)
    p_gen.add_argument("--theta-law", type=str, default="beta:1,5",
                       help="dcbm degree law: beta:a,b | powerlaw:xmin,alpha | constant:v")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=Path, default=Path("blockselect_out"))
    p_gen.set_defaults(func=cmd_generate)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_graph(path: Path, use_lcc: bool):
    from .netcore import largest_connected_component, load_edge_list

    with open(path, "r", encoding="utf-8") as fh:
        graph, ids = load_edge_list(fh)
    if use_lcc:
        graph, mapping = largest_connected_component(graph)
        ids = {
            name: mapping[idx] for name, idx in ids.items() if idx in mapping
        }
    return graph, ids


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_labels_csv(path: Path, labels, ids: dict[str, int], config: dict) -> None:
    rev = {idx: name for name, idx in ids.items()}
    lines = [f"# config: {json.dumps(config, sort_keys=True)}", "node,label"]
    for idx in range(len(labels)):
        lines.append(f"{rev.get(idx, idx)},{int(labels[idx])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _summary_line(result) -> str:
    t1 = result.test_sbm_dcbm
    parts = [
        f"SBM {'rejected' if t1.rejected else 'not rejected'} (p={t1.p_value:.2f})"
    ]
    t2 = result.test_dcbm_pabm
    if t2 is not None:
        parts.append(
            f"DCBM {'rejected' if t2.rejected else 'not rejected'} (p={t2.p_value:.2f})"
        )
    parts.append(f"model: {result.selected_model.value}")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_select(args) -> int:
    from .modelselect import run_workflow, workflow_report

    graph, ids = _load_graph(args.edges, args.lcc)
    config = {
        "command": "select",
        "edges": str(args.edges),
        "n": graph.n,
        "k": args.k,
        "alpha": args.alpha,
        "boot": args.boot,
        "restarts": args.restarts,
        "seed": args.seed,
        "lcc": args.lcc,
    }
    result = run_workflow(
        graph, args.k, alpha=args.alpha, n_boot=args.boot,
        restarts=args.restarts, seed=args.seed,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    report = workflow_report(result)
    report["config"] = config
    report["labels_file"] = "labels.csv"
    _write_json(args.out / "report.json", report)
    _write_labels_csv(args.out / "labels.csv", result.labels, ids, config)
    _write_json(args.out / "timings.json", {"config": config, "seconds": result.timing})
    print(_summary_line(result))
    return 0


def cmd_cluster(args) -> int:
    from .cluster import minimize_q1, minimize_q_subspace, mislabel_rate
    from .netcore import load_labels
    from .spectral import ase

    graph, ids = _load_graph(args.edges, args.lcc)
    config = {
        "command": "cluster",
        "edges": str(args.edges),
        "n": graph.n,
        "k": args.k,
        "model": args.model,
        "restarts": args.restarts,
        "seed": args.seed,
        "lcc": args.lcc,
    }
    if args.model == "sbm":
        emb = ase(graph, args.k)
        sol = minimize_q1(emb, args.k, n_restarts=args.restarts or 10, seed=args.seed)
    elif args.model == "dcbm":
        emb = ase(graph, args.k)
        sol = minimize_q_subspace(
            emb, args.k, r=1, n_restarts=args.restarts or 20, seed=args.seed
        )
    else:
        if args.k * args.k > graph.n:
            raise InfeasibleModelError(
                f"K^2 = {args.k * args.k} exceeds n = {graph.n}"
            )
        emb = ase(graph, args.k * args.k, scaled=False)
        sol = minimize_q_subspace(
            emb, args.k, r=args.k, n_restarts=args.restarts or 100, seed=args.seed
        )
    args.out.mkdir(parents=True, exist_ok=True)
    _write_labels_csv(args.out / "labels.csv", sol.labels, ids, config)
    meta = {
        "config": config,
        "objective": sol.objective,
        "n_iters": sol.n_iters,
        "n_restarts_used": sol.n_restarts_used,
        "degenerate": sol.degenerate,
        "labels_file": "labels.csv",
    }
    print(f"objective: {sol.objective:.6g}")
    if args.truth is not None:
        with open(args.truth, "r", encoding="utf-8") as fh:
            truth = load_labels(fh, ids, graph.n)
        rate = mislabel_rate(sol.labels, truth, args.k)
        meta["mislabel_rate"] = rate
        print(f"mislabel rate: {rate:.4f}")
    _write_json(args.out / "cluster.json", meta)
    return 0


_STUDY_LAYOUT = {
    ("test_sbm_vs_dcbm", "sbm"): "SBM_NULL_REJECTION",
    ("test_sbm_vs_dcbm", "dcbm"): "DCBM_ALT_REJECTION",
    ("test_dcbm_vs_pabm", "dcbm"): "DCBM_NULL_REJECTION",
    ("test_dcbm_vs_pabm", "pabm"): "PABM_ALT_REJECTION",
}


def cmd_simulate(args) -> int:
    from .simharness import (
        Study,
        TableLayout,
        emit_table,
        load_experiment_config,
        report_provenance,
        run_experiment,
    )

    with open(args.config, "r", encoding="utf-8") as fh:
        spec = load_experiment_config(fh)

    def progress(point_idx, method, rep_idx):
        if not args.quiet:
            print(
                f"\r[grid {point_idx + 1}/{len(spec.grid)}] {method} "
                f"replicate {rep_idx + 1}/{spec.n_replicates}  ",
                end="", file=sys.stderr, flush=True,
            )

    report = run_experiment(spec, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    if spec.study is Study.COMM_DET_SBM:
        layout = TableLayout.SBM_MISLABEL
    elif spec.study is Study.COMM_DET_DCBM:
        layout = TableLayout.DCBM_MISLABEL
    elif spec.study is Study.COMM_DET_PABM:
        layout = TableLayout.PABM_MISLABEL
    else:
        truth = spec.grid[0].true_model
        layout = TableLayout[_STUDY_LAYOUT[(spec.study.value, truth)]]
    csv_text, table_text = emit_table(report, layout)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "table.csv").write_text(csv_text, encoding="utf-8")
    header = (
        f"# study: {spec.study.value}  replicates: {spec.n_replicates}  "
        f"base_seed: {spec.base_seed}  config: {args.config}\n"
    )
    (args.out / "table.txt").write_text(header + table_text, encoding="utf-8")
    _write_json(args.out / "provenance.json", report_provenance(report))
    print(table_text, end="")
    return 0


def _parse_matrix_arg(text: str):
    import numpy as np

    try:
        return np.asarray(
            [[float(tok) for tok in row.split(",")] for row in text.split(";")]
        )
    except ValueError as exc:
        raise ConfigError(f"bad --omega {text!r}: {exc}") from exc


def cmd_generate(args) -> int:
    import numpy as np

    from .blockmodels import (
        beta_ratio_omega,
        gen_dcbm,
        gen_pabm,
        gen_sbm,
        write_params,
    )
    from .netcore import density as graph_density
    from .netcore import write_edge_list
    from .simharness import _parse_theta_law

    config = {
        "command": "generate",
        "model": args.model,
        "n": args.n,
        "k": args.k,
        "omega": args.omega,
        "beta": args.beta,
        "fractions": args.fractions,
        "density": args.density,
        "avg_degree": args.avg_degree,
        "theta_law": args.theta_law if args.model == "dcbm" else None,
        "seed": args.seed,
    }
    if args.fractions is not None:
        fractions = np.asarray([float(t) for t in args.fractions.split(",")])
    else:
        fractions = np.full(args.k, 1.0 / args.k)
    if args.model in ("sbm", "dcbm"):
        if args.omega is not None:
            base = _parse_matrix_arg(args.omega)
        elif args.beta is not None:
            base = beta_ratio_omega(args.k, args.beta)
        else:
            raise ConfigError("sbm/dcbm generation needs --omega or --beta")
    if args.model == "sbm":
        g, params = gen_sbm(
            args.n, args.k, fractions, base,
            target_density=args.density, target_avg_degree=args.avg_degree,
            seed=args.seed,
        )
    elif args.model == "dcbm":
        g, params = gen_dcbm(
            args.n, args.k, fractions, base, _parse_theta_law(args.theta_law),
            target_density=args.density, target_avg_degree=args.avg_degree,
            seed=args.seed,
        )
    else:
        g, params = gen_pabm(
            args.n, args.k, density_scale=args.density, seed=args.seed
        )
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "edges.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        write_edge_list(g, fh)
    with open(args.out / "params.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        write_params(params, fh)
    ids = {str(i): i for i in range(g.n)}
    _write_labels_csv(args.out / "labels.csv", params.labels, ids, config)
    realized = graph_density(g) if g.n >= 2 else 0.0
    print(
        f"wrote {args.model} network: n={g.n}, edges={g.edge_count}, "
        f"density={realized:.4f} -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _exit_code_for(exc: BaseException) -> int | None:
    # InfeasibleModelError is a ValueError subclass; test it first
    if isinstance(exc, InfeasibleModelError):
        return 3
    if isinstance(exc, NumericalError):
        return 4
    if exc.__class__.__name__ in ("LinAlgError", "ArpackError", "ArpackNoConvergence"):
        return 4
    if isinstance(exc, (EdgeListParseError, ConfigError, OSError, ValueError)):
        return 2
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except Exception as exc:  # map known failures onto exit codes
        code = _exit_code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
