"""Command line entry point and experiment harness.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import accuracy, bp, coding, exact, fixedpoints, model, sbp, stability
from .homotopy import TrackingFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


# -- model specification ------------------------------------------------------


def parse_graph(text: str, seed: int = 0) -> model.Graph:
    """``grid:RxC``, ``torus:RxC``, ``complete:N``, ``chain:N``, ``random:N:D``, ``tree:N``."""
    kind, _, rest = text.partition(":")
    try:
        if kind in ("grid", "torus"):
            r, c = (int(v) for v in rest.lower().split("x"))
            return model.build_grid(r, c, periodic=kind == "torus")
        if kind == "complete":
            return model.build_complete(int(rest))
        if kind == "chain":
            return model.build_chain(int(rest))
        if kind == "tree":
            return model.build_random_tree(int(rest), seed)
        if kind == "random":
            n, d = rest.split(":")
            return model.build_random(int(n), float(d), seed)
    except ValueError as err:
        raise ConfigError(f"graph: cannot parse {text!r}: {err}") from err
    raise ConfigError(f"graph: unknown kind {kind!r}")


def parse_potential(value, name: str):
    """A number, a list, or ``[\"uniform\", lo, hi]`` / ``\"uniform:lo:hi\"``."""
    if isinstance(value, str):
        if value.startswith("uniform:"):
            _, lo, hi = value.split(":")
            return ("uniform", float(lo), float(hi))
        try:
            return float(value)
        except ValueError as err:
            raise ConfigError(f"{name}: cannot parse {value!r}") from err
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list) and value and value[0] == "uniform":
        if len(value) != 3:
            raise ConfigError(f"{name}: uniform needs [\"uniform\", lo, hi]")
        return ("uniform", float(value[1]), float(value[2]))
    if isinstance(value, list):
        return [float(v) for v in value]
    raise ConfigError(f"{name}: unsupported value {value!r}")


def build_model(desc: dict, seed: int = 0) -> model.IsingModel:
    if "path" in desc:
        return model.IsingModel.load(desc["path"])
    if "nodes" in desc:
        return model.IsingModel.from_json(desc)
    graph = parse_graph(desc.get("graph", "grid:3x3"), seed)
    return model.make_ising(
        graph,
        parse_potential(desc.get("J", 1.0), "model.J"),
        parse_potential(desc.get("theta", 0.0), "model.theta"),
        seed,
    )


# -- experiment specs ---------------------------------------------------------

DEFAULT_GRIDS = {
    "tree-exactness": {"seeds": list(range(20)), "nodes": [12]},
    "fixed-point-sweep": {
        "J": [round(v, 2) for v in np.arange(-2.0, 2.01, 0.25)],
        "theta": [0.0, 0.1, 0.5],
        "seeds": [0],
        "restarts": [200],
    },
    "hamming-threshold": {"epsilon": [round(v, 2) for v in np.arange(0.01, 0.5, 0.01)]},
    "sbp-vs-bp": {"seeds": list(range(10)), "theta": [0.0]},
    "scheduler-convergence": {"seeds": list(range(10)), "iterations": [200]},
}
DEFAULT_MODELS = {
    "fixed-point-sweep": {"graph": "complete:4"},
    "sbp-vs-bp": {"graph": "grid:5x5"},
    "scheduler-convergence": {"graph": "grid:9x9"},
}


@dataclass
class ExperimentSpec:
    experiment: str
    model: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    output: Optional[str] = None


def validate_spec(raw: dict) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    if "experiment" not in raw:
        raise ConfigError("experiment: missing required key")
    name = raw["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {name!r}")
    unknown = set(raw) - {"experiment", "model", "grid", "output"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    model_desc = {**DEFAULT_MODELS.get(name, {}), **raw.get("model", {})}
    grid = dict(DEFAULT_GRIDS[name])
    user_grid = raw.get("grid", {})
    if not isinstance(user_grid, dict):
        raise ConfigError("grid: expected an object")
    for key, values in user_grid.items():
        if not isinstance(values, list):
            raise ConfigError(f"grid.{key}: expected a list")
        if not values:
            raise ConfigError(f"grid.{key}: must be nonempty")
        grid[key] = values
    return ExperimentSpec(name, model_desc, grid, raw.get("output"))


def load_config(path) -> ExperimentSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"<root>: invalid JSON ({err})") from err
    return validate_spec(raw)


# -- experiments --------------------------------------------------------------


def _tree_exactness(spec: ExperimentSpec) -> list:
    rows = []
    for n in spec.grid["nodes"]:
        for seed in spec.grid["seeds"]:
            rng = np.random.default_rng(seed)
            size = int(rng.integers(2, int(n) + 1))
            m = model.make_ising(
                model.build_random_tree(size, seed), ("uniform", -2, 2), ("uniform", -2, 2), seed
            )
            out = bp.run_bp(m, bp.BPConfig())
            ref = exact.brute_force(m)
            rows.append(
                {
                    "seed": seed,
                    "N": size,
                    "converged": out.converged,
                    "marginal_mse": accuracy.marginal_mse(out.beliefs, ref),
                    "logZ_gap": abs(out.beliefs.log_partition - ref.log_partition),
                }
            )
    return rows


def _fixed_point_sweep(spec: ExperimentSpec) -> list:
    rows = []
    graph = parse_graph(spec.model.get("graph", "complete:4"))
    for J in spec.grid["J"]:
        for theta in spec.grid["theta"]:
            for seed in spec.grid["seeds"]:
                restarts = int(spec.grid["restarts"][0])
                m = model.make_ising(graph, float(J), float(theta), seed)
                fps = fixedpoints.enumerate_fixed_points(m, restarts, seed)
                for k, fp in enumerate(fps):
                    rec = stability.stability_record(m, fp.nu)
                    rows.append(
                        {
                            "J": float(J),
                            "theta": float(theta),
                            "seed": seed,
                            "restarts": restarts,
                            "fixed_point": k,
                            "count": len(fps),
                            "mean_marginal": float(np.mean(fp.beliefs.singleton)),
                            "F_B": fp.free_energy,
                            "logZ_B": fp.log_partition,
                            "spectral_radius": rec.spectrum.spectral_radius,
                            "stability": rec.cls.value,
                        }
                    )
    return rows


def _hamming_threshold(spec: ExperimentSpec) -> list:
    return coding.threshold_rows(epsilons=spec.grid["epsilon"])


def _sbp_vs_bp(spec: ExperimentSpec) -> list:
    rows = []
    graph_text = spec.model.get("graph", "grid:5x5")
    graph = parse_graph(graph_text)
    r, c = (int(v) for v in graph_text.split(":")[1].split("x"))
    for theta in spec.grid["theta"]:
        for seed in spec.grid["seeds"]:
            rng = np.random.default_rng(seed)
            couplings = rng.choice([-1.0, 1.0], graph.edge_count)
            m = model.make_ising(graph, couplings, float(theta), seed)
            ref = exact.transfer_matrix_grid(m, r, c)
            plain = bp.run_bp(m, bp.BPConfig(scheduler="random", seed=seed), bp.init_messages(graph, "random", seed))
            guided = sbp.run_sbp(m)
            for method, beliefs, ok, iters in (
                ("BP", plain.beliefs, plain.converged, plain.iterations),
                ("SBP", guided.beliefs, guided.completed, guided.bp_iterations),
            ):
                rows.append(
                    {
                        "seed": seed,
                        "theta": float(theta),
                        "method": method,
                        "converged": ok,
                        "iterations": iters,
                        "marginal_mse": accuracy.marginal_mse(beliefs, ref),
                    }
                )
    return rows


def _scheduler_convergence(spec: ExperimentSpec) -> list:
    rows = []
    graph = parse_graph(spec.model.get("graph", "grid:9x9"))
    lo, hi = spec.model.get("range", [-6.5, 6.5])
    schedulers = spec.grid.get("schedulers", ["round_robin", "rbp", "wdbp", "nibp"])
    iterations = int(spec.grid["iterations"][0])
    for seed in spec.grid["seeds"]:
        m = model.make_ising(graph, ("uniform", lo, hi), ("uniform", lo, hi), seed)
        for name in schedulers:
            cfg = bp.BPConfig(scheduler=name, max_iterations=iterations, tolerance=1e-3, seed=seed)
            out = bp.run_bp(m, cfg)
            rows.append(
                {
                    "seed": seed,
                    "scheduler": name,
                    "converged": out.converged,
                    "updates": out.updates,
                }
            )
    return rows


EXPERIMENTS: dict[str, Callable[[ExperimentSpec], list]] = {
    "tree-exactness": _tree_exactness,
    "fixed-point-sweep": _fixed_point_sweep,
    "hamming-threshold": _hamming_threshold,
    "sbp-vs-bp": _sbp_vs_bp,
    "scheduler-convergence": _scheduler_convergence,
}


def run_experiment(spec: ExperimentSpec) -> list:
    if spec.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {spec.experiment!r}")
    rows = EXPERIMENTS[spec.experiment](spec)
    if spec.output:
        write_results(rows, spec.output)
    return rows


# -- output -------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(rows: list, path, columns: Optional[list] = None) -> None:
    """CSV with a header, first-row column order, '.' decimals and LF endings."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if list(row) != columns:
                raise ValueError("rows are not homogeneous")
            writer.writerow([_cell(row[c]) for c in columns])


def _dump(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# -- subcommands --------------------------------------------------------------


def _model_from_args(args) -> model.IsingModel:
    if args.model:
        return model.IsingModel.load(args.model)
    return build_model({"graph": args.graph, "J": args.J, "theta": args.theta}, args.seed)


def _cmd_bp_run(args):
    m = _model_from_args(args)
    cfg = bp.BPConfig(
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        damping=args.damping,
        scheduler=args.scheduler,
        seed=args.seed,
    )
    init = bp.init_messages(m.graph, args.init, args.seed)
    _dump(bp.run_bp(m, cfg, init).to_json(), args.out)


def _cmd_enumerate(args):
    m = _model_from_args(args)
    fps = fixedpoints.enumerate_fixed_points(m, args.restarts, args.seed)
    _dump(
        {"count": len(fps), "odd": fixedpoints.fixed_point_count_parity(fps),
         "fixed_points": fixedpoints.fixed_points_to_json(fps)},
        args.out,
    )


def _cmd_stability(args):
    m = _model_from_args(args)
    fps = [stability.attach_stability(m, fp) for fp in fixedpoints.enumerate_fixed_points(m, args.restarts, args.seed)]
    _dump([fp.to_json() | {"spectrum": fp.stability.spectrum.to_json()} for fp in fps], args.out)


def _cmd_sweep(args):
    spec = validate_spec(
        {
            "experiment": "fixed-point-sweep",
            "model": {"graph": args.graph},
            "grid": {
                "J": [round(v, 6) for v in np.arange(args.j_min, args.j_max + 1e-9, args.j_step)],
                "theta": args.thetas,
                "seeds": [args.seed],
                "restarts": [args.restarts],
            },
        }
    )
    rows = run_experiment(spec)
    write_results(rows, args.out or "/dev/stdout")


def _cmd_sbp(args):
    m = _model_from_args(args)
    out = sbp.run_sbp(m, sbp.SBPConfig(step=args.step, adaptive=not args.fixed_step))
    _dump({"completed": out.completed, "zeta": out.zeta, "path": out.to_json()}, args.out)


def _cmd_patch(args):
    layout = model.halves_layout(args.size, args.size)
    m = model.make_patch_model(args.size, args.size, layout, args.J, args.theta)
    fps = fixedpoints.enumerate_bp_fixed_points(m, args.restarts, args.seed)
    ref = exact.transfer_matrix_grid(m, args.size, args.size)
    sp = [fp for fp in fps if accuracy.classify_patch_fixed_point(m, fp.beliefs, layout).cls
          is accuracy.PatchClass.STATE_PRESERVING]
    rows = []
    for k, fp in enumerate(fps):
        rep = accuracy.classify_patch_fixed_point(m, fp.beliefs, layout, sp[0].beliefs if sp else None)
        rows.append(
            {
                "model": f"patch{args.size}x{args.size}",
                "J": args.J,
                "theta": args.theta,
                "fixed_point": k,
                "class": rep.cls.value,
                "F_B": fp.free_energy,
                "logZ_B": fp.log_partition,
                "E_P": accuracy.marginal_mse(fp, ref),
                "E_Z": accuracy.partition_error(fp.log_partition, ref.log_partition),
            }
        )
    write_results(rows, args.out or "/dev/stdout")


def _cmd_decode(args):
    if set(args.received) - {"0", "1"}:
        raise ConfigError(f"received: expected a string of 0/1 bits, got {args.received!r}")
    y = [int(c) for c in args.received]
    b = coding.decode_beliefs(args.epsilon, y, args.decoder)
    _dump({"received": y, "epsilon": args.epsilon, "decoder": args.decoder,
           "p_zero": b[:, 0].tolist(), "decoded": [int(p < 0.5) for p in b[:, 0]]}, args.out)


def _cmd_gibbs(args):
    m = _model_from_args(args)
    est = exact.gibbs_sample(m, args.sweeps, args.burn_in, args.seed)
    _dump({"marginals": est.tolist(), "sweeps": args.sweeps, "burn_in": args.burn_in,
           "seed": args.seed}, args.out)


def _cmd_experiment(args):
    spec = load_config(args.config)
    if args.out:
        spec.output = args.out
    if spec.output is None:
        raise ConfigError("output: missing (set it in the config or pass --out)")
    run_experiment(spec)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopybp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_model(p):
        p.add_argument("--model", help="model JSON file")
        p.add_argument("--graph", default="grid:3x3")
        p.add_argument("--J", default="1.0", help="number or uniform:lo:hi")
        p.add_argument("--theta", default="0.0", help="number or uniform:lo:hi")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        return p

    p = with_model(sub.add_parser("bp-run", help="run BP once"))
    p.add_argument("--scheduler", default="synchronous", choices=bp.SCHEDULERS)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--init", default="uniform", choices=("uniform", "random"))
    p.set_defaults(func=_cmd_bp_run)

    for name, func, helptext in (
        ("enumerate", _cmd_enumerate, "enumerate fixed points"),
        ("stability", _cmd_stability, "fixed points with Jacobian spectra"),
    ):
        p = with_model(sub.add_parser(name, help=helptext))
        p.add_argument("--restarts", type=int, default=1000)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="fixed-point sweep over J")
    p.add_argument("--graph", default="complete:4")
    p.add_argument("--j-min", type=float, default=-2.0)
    p.add_argument("--j-max", type=float, default=2.0)
    p.add_argument("--j-step", type=float, default=0.25)
    p.add_argument("--thetas", type=float, nargs="+", default=[0.0])
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = with_model(sub.add_parser("sbp", help="self-guided BP"))
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--fixed-step", action="store_true")
    p.set_defaults(func=_cmd_sbp)

    p = sub.add_parser("patch", help="two-halves patch model report")
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--J", type=float, default=0.65)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_patch)

    p = sub.add_parser("decode", help="decode a received Hamming(7,4) word")
    p.add_argument("received", help="7 bits, e.g. 1000000")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--decoder", default="bp", choices=("bp", "exact"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_decode)

    p = with_model(sub.add_parser("gibbs", help="Gibbs marginal estimates"))
    p.add_argument("--sweeps", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.set_defaults(func=_cmd_gibbs)

    p = sub.add_parser("experiment", help="run a named experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, model.InvalidArgument, FileNotFoundError, KeyError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (stability.NumericFailure, TrackingFailure, accuracy.EstimationError, FloatingPointError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
