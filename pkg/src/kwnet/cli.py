"""Command-line front end.

Three subcommands:

    kwnet gen  --nodes 10 --radius auto --seed 7 --out instance/
    kwnet run  --out results/ --runs 20 --iters 10000 --pfail 0,0.5,0.7
    kwnet rate results/pfail_0.csv --window 0.5

``gen`` materializes a connected geometric topology plus per-node synthetic
logistic datasets. ``run`` executes the Monte Carlo sweep (optionally loading
a generated instance) and writes one trace CSV per link-failure probability
plus the centralized baseline, a manifest, and a summary table on stdout.
``rate`` fits log-log decay slopes on a trace CSV.

Settings resolve as defaults < config file < command-line flags. The config
file is INI-style with sections [graph], [objective], [schedule],
[experiment]; unknown sections or keys are rejected. All randomness derives
from the single seed.

Exit codes: 0 success, 2 configuration or assumption violation, 3 divergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import rng as streams
from .estimator import ScheduleViolationError, WeightSchedule, validate_schedule
from .experiment import (
    ExperimentPlan,
    RateFitError,
    content_hash,
    estimate_rate,
    monte_carlo,
    monte_carlo_centralized,
    read_trace_csv,
    write_trace_csv,
)
from .graphs import (
    GeometricGraphSpec,
    Graph,
    GraphGenerationError,
    RandomNetworkModel,
    generate_auto_radius_graph,
    generate_geometric_graph,
    read_edge_list,
    write_edge_list,
)
from .objectives import (
    ConvergenceError,
    DatasetSpec,
    GaussianNoise,
    generate_dataset,
    load_node_dataset,
    save_node_dataset,
)
from .optimizer import (
    AlgorithmConfig,
    CentralizedConfig,
    DivergenceError,
    min_strong_convexity,
)

# section -> key -> type; doubles as the schema for config-file validation
_SCHEMA = {
    "graph": {"nodes": int, "radius": str, "max_degree": int, "file": str},
    "objective": {
        "points_per_node": int,
        "feature_dim": int,
        "kappa": float,
        "sigma": float,
        "state_coeff": float,
        "data_dir": str,
    },
    "schedule": {"alpha0": float, "beta0": float, "c0": float, "delta": float, "tau": float},
    "experiment": {
        "runs": int,
        "iterations": int,
        "p_fail": str,
        "seed": int,
        "baseline": str,
        "window": float,
        "jobs": int,
    },
}

_DEFAULTS = {
    "graph": {"nodes": 10, "radius": "auto", "max_degree": 7, "file": None},
    "objective": {
        "points_per_node": 10,
        "feature_dim": 4,
        "kappa": 0.3,
        "sigma": 1.0,
        "state_coeff": 0.0,
        "data_dir": None,
    },
    "schedule": {"alpha0": 1.0, "beta0": None, "c0": 1.0, "delta": 0.25, "tau": 0.5},
    "experiment": {
        "runs": 20,
        "iterations": 10000,
        "p_fail": "0,0.5,0.7",
        "seed": 7,
        "baseline": "kwsa",
        "window": 0.5,
        "jobs": 1,
    },
}

# flag destination -> (section, key)
_FLAG_MAP = {
    "nodes": ("graph", "nodes"),
    "radius": ("graph", "radius"),
    "max_degree": ("graph", "max_degree"),
    "graph": ("graph", "file"),
    "points_per_node": ("objective", "points_per_node"),
    "feature_dim": ("objective", "feature_dim"),
    "kappa": ("objective", "kappa"),
    "sigma": ("objective", "sigma"),
    "data": ("objective", "data_dir"),
    "alpha0": ("schedule", "alpha0"),
    "beta0": ("schedule", "beta0"),
    "c0": ("schedule", "c0"),
    "delta": ("schedule", "delta"),
    "tau": ("schedule", "tau"),
    "runs": ("experiment", "runs"),
    "iters": ("experiment", "iterations"),
    "pfail": ("experiment", "p_fail"),
    "seed": ("experiment", "seed"),
    "baseline": ("experiment", "baseline"),
    "window": ("experiment", "window"),
    "jobs": ("experiment", "jobs"),
}


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as handle:
        parser.read_file(handle)
    settings: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValueError(f"unknown config key '{key}' in section [{section}]")
            settings.setdefault(section, {})[key] = _SCHEMA[section][key](raw)
    return settings


def _resolve_settings(args: argparse.Namespace) -> dict:
    settings = {section: dict(values) for section, values in _DEFAULTS.items()}
    if getattr(args, "config", None):
        for section, values in _load_config_file(args.config).items():
            settings[section].update(values)
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            settings[section][key] = value
    return settings


def _parse_pfail(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in raw.split(","))
    except ValueError as err:
        raise ValueError(f"cannot parse p_fail list {raw!r}") from err
    for p in values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p_fail values must lie in [0, 1], got {p}")
    return values


def _build_instance(settings: dict, out_dir: Path) -> tuple[Graph, list, Path, list[Path]]:
    """Load or generate the topology and datasets; materialize them in out_dir."""
    graph_cfg = settings["graph"]
    obj_cfg = settings["objective"]
    seed = settings["experiment"]["seed"]
    data_rng = streams.data_stream(seed)

    if graph_cfg["file"]:
        graph = read_edge_list(graph_cfg["file"])
        graph_path = Path(graph_cfg["file"])
    else:
        if graph_cfg["radius"] == "auto":
            graph = generate_auto_radius_graph(
                graph_cfg["nodes"], data_rng, max_degree=graph_cfg["max_degree"]
            )
        else:
            spec = GeometricGraphSpec(graph_cfg["nodes"], float(graph_cfg["radius"]))
            graph = generate_geometric_graph(spec, data_rng)
        graph_path = out_dir / "graph.txt"
        write_edge_list(graph, graph_path)

    if obj_cfg["data_dir"]:
        node_paths = sorted(Path(obj_cfg["data_dir"]).glob("node_*.txt"))
        if len(node_paths) != graph.num_nodes:
            raise ValueError(
                f"found {len(node_paths)} dataset files for a {graph.num_nodes}-node graph"
            )
        objectives = [load_node_dataset(p) for p in node_paths]
    else:
        spec = DatasetSpec(
            graph.num_nodes, obj_cfg["points_per_node"], obj_cfg["feature_dim"], obj_cfg["kappa"]
        )
        objectives = generate_dataset(spec, data_rng)
        node_paths = []
        for i, objective in enumerate(objectives):
            path = out_dir / f"node_{i:02d}.txt"
            save_node_dataset(objective, path)
            node_paths.append(path)
    return graph, objectives, graph_path, list(node_paths)


def _build_schedule(settings: dict, graph: Graph) -> WeightSchedule:
    cfg = dict(settings["schedule"])
    if cfg["beta0"] is None:
        cfg["beta0"] = 1.0 / max(graph.max_degree(), 1)
    return WeightSchedule(**cfg)


def _write_manifest(path: Path, sections: dict[str, dict]) -> None:
    parser = configparser.ConfigParser()
    for name, values in sections.items():
        parser[name] = {key: str(value) for key, value in values.items()}
    with open(path, "w", encoding="utf-8") as handle:
        parser.write(handle)


def cmd_gen(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph, _, graph_path, node_paths = _build_instance(settings, out_dir)
    hashes = {"graph.txt": content_hash(graph_path)}
    hashes.update({p.name: content_hash(p) for p in node_paths})
    _write_manifest(
        out_dir / "manifest.txt",
        {
            "gen": {
                "seed": settings["experiment"]["seed"],
                "nodes": graph.num_nodes,
                "edges": len(graph.edges),
                "max_degree": graph.max_degree(),
                "radius": settings["graph"]["radius"],
            },
            "inputs": hashes,
        },
    )
    print(f"wrote {graph.num_nodes}-node graph ({len(graph.edges)} edges) and "
          f"{len(node_paths)} dataset files to {out_dir}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    from .objectives import solve_ground_truth

    settings = _resolve_settings(args)
    exp = settings["experiment"]
    p_fail_values = _parse_pfail(exp["p_fail"])
    if exp["baseline"] not in ("kwsa", "sgd", "none"):
        raise ValueError(f"baseline must be kwsa, sgd or none, got {exp['baseline']!r}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph, objectives, graph_path, node_paths = _build_instance(settings, out_dir)
    schedule = _build_schedule(settings, graph)
    violations = validate_schedule(schedule, min_strong_convexity(objectives))
    if violations:
        for violation in violations:
            print(f"schedule violation: {violation}", file=sys.stderr)
        return 2

    noise = GaussianNoise(settings["objective"]["sigma"], settings["objective"]["state_coeff"])
    x_star = solve_ground_truth(objectives, tol=1e-8)
    d = objectives[0].dimension
    base = AlgorithmConfig(
        network=RandomNetworkModel(graph, 0.0),
        objectives=objectives,
        noise=noise,
        schedule=schedule,
        initial_iterates=np.zeros((graph.num_nodes, d)),
        max_iterations=exp["iterations"],
        seed=exp["seed"],
    )
    plan = ExperimentPlan(base, exp["runs"], p_fail_values, x_star, window=exp["window"])
    traces = monte_carlo(plan, parallel_width=exp["jobs"])

    rows = []
    csv_names = {}
    for p_fail, trace in traces.items():
        name = f"pfail_{p_fail:g}.csv"
        write_trace_csv(trace, out_dir / name)
        csv_names[name] = p_fail
        rows.append((f"pfail={p_fail:g}", trace))
    if exp["baseline"] != "none":
        central = CentralizedConfig(
            mode=f"{exp['baseline']}-fusion",
            objectives=objectives,
            noise=noise,
            schedule=schedule,
            initial_point=np.zeros(d),
            max_iterations=exp["iterations"],
            seed=exp["seed"],
        )
        trace = monte_carlo_centralized(central, exp["runs"], x_star, parallel_width=exp["jobs"])
        write_trace_csv(trace, out_dir / "centralized.csv")
        rows.append((f"centralized ({exp['baseline']})", trace))

    hashes = {graph_path.name: content_hash(graph_path)}
    hashes.update({p.name: content_hash(p) for p in node_paths})
    _write_manifest(
        out_dir / "manifest.txt",
        {
            "run": {
                "seed": exp["seed"],
                "runs": exp["runs"],
                "iterations": exp["iterations"],
                "p_fail": ",".join(f"{p:g}" for p in p_fail_values),
                "baseline": exp["baseline"],
                "graph": str(graph_path),
            },
            "schedule": {
                "alpha0": schedule.alpha0,
                "beta0": schedule.beta0,
                "c0": schedule.c0,
                "delta": schedule.delta,
                "tau": schedule.tau,
            },
            "inputs": hashes,
        },
    )

    print(f"{'setting':<22} {'final_mse':>12} {'slope':>8} {'queries':>12}")
    for label, trace in rows:
        fit = estimate_rate(trace.iterations, trace.mse, window=exp["window"])
        print(f"{label:<22} {trace.mse[-1]:>12.4e} {fit.slope:>8.3f} {int(trace.queries[-1]):>12}")
    return 0


def cmd_rate(args: argparse.Namespace) -> int:
    trace = read_trace_csv(args.trace)
    fits = {}
    for name in ("mse", "disagreement_sq", "avg_gap_sq"):
        values = getattr(trace, name)
        try:
            fits[name] = estimate_rate(trace.iterations, values, window=args.window)
        except RateFitError as err:
            print(f"{name}: rate undefined ({err})")
    for name, fit in fits.items():
        print(f"{name}: slope={fit.slope:.6f} intercept={fit.intercept:.6f} r2={fit.r_squared:.6f}")
    if "mse" in fits:
        print(f"slope={fits['mse'].slope:.6f}")
    return 0


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--nodes", type=int, help="number of nodes when generating a topology")
    parser.add_argument("--radius", help="geometric connection radius, or 'auto'")
    parser.add_argument("--max-degree", dest="max_degree", type=int,
                        help="degree cap enforced by regeneration (radius auto)")
    parser.add_argument("--points-per-node", dest="points_per_node", type=int)
    parser.add_argument("--feature-dim", dest="feature_dim", type=int)
    parser.add_argument("--kappa", type=float, help="l2 regularization strength")
    parser.add_argument("--seed", type=int, help="root seed for all randomness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a topology and per-node datasets")
    _add_instance_flags(gen)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run the Monte Carlo experiment")
    _add_instance_flags(run)
    run.add_argument("--config", help="INI config file; flags override it")
    run.add_argument("--graph", help="edge-list file with a fixed topology")
    run.add_argument("--data", help="directory of node_*.txt dataset files")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, help="parallel Monte Carlo workers")
    run.add_argument("--runs", type=int, help="Monte Carlo runs per setting")
    run.add_argument("--iters", type=int, help="iterations per run")
    run.add_argument("--pfail", help="comma-separated link failure probabilities")
    run.add_argument("--alpha0", type=float)
    run.add_argument("--beta0", type=float)
    run.add_argument("--c0", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--tau", type=float)
    run.add_argument("--sigma", type=float, help="oracle noise standard deviation")
    run.add_argument("--baseline", choices=["kwsa", "sgd", "none"])
    run.add_argument("--window", type=float, help="log-space tail fraction for slope fits")
    run.set_defaults(func=cmd_run)

    rate = sub.add_parser("rate", help="fit decay slopes on a trace CSV")
    rate.add_argument("trace", help="trace CSV produced by 'run'")
    rate.add_argument("--window", type=float, default=0.5)
    rate.set_defaults(func=cmd_rate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScheduleViolationError as err:
        for violation in err.violations:
            print(f"schedule violation: {violation}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except (ValueError, GraphGenerationError, ConvergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
