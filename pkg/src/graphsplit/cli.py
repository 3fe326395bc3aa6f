"""``graphsplit`` command line.

    graphsplit <check|run|sweep|bench|equivalence> --config FILE [--set key=value ...] --out DIR

Exit codes: 0 success, 1 domain failure (a check fails, parameters out of
range, divergence), 2 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    DEFAULT_GRID,
    SWEEP_COLUMNS,
    BallQPInstance,
    MatrixGameInstance,
    ball_qp_reference,
    game_reference,
    gen_ball_qp,
    gen_matrix_game,
    instance_from_dict,
    run_bench,
    sweep,
)
from .errors import DivergenceError, GraphsplitError, InvalidConfigError, InvalidInputError
from .operators import problem_from_dict
from .presets import make_preset, reduction_suite
from .scheme import check_assumptions, parameter_ranges, scheme_from_dict
from .solver import TRACE_COLUMNS, SolverConfig, solve, trace_to_rows

COMMANDS = ("check", "run", "sweep", "bench", "equivalence")
EQUIVALENCE_TOL = 1e-10


class UsageError(Exception):
    """Unreadable config or files; maps to exit code 2."""


# Config handling -----------------------------------------------------------------


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config, overrides):
    """Apply ``dotted.key=value`` overrides in place; values are parsed as JSON when possible."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set {key}: {part!r} is not a section")
        node[parts[-1]] = _parse_value(raw)
    return config


def load_config(path, overrides=()):
    try:
        config = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    return apply_overrides(config, overrides)


def _read_json(path, base):
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = Path(base) / p
    try:
        return json.loads(p.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {p}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p} is not valid JSON: {exc}") from exc


class Context:
    """Resolved scheme, problem and reference for one invocation."""

    def __init__(self, config, base=None):
        self.config = config
        self.base = base
        self.seed = config.get("seed")
        self.instance = None
        self.problem = None
        self.reference = None
        self.preset_name = "file"

    def load_problem(self):
        spec = self.config.get("problem")
        if not isinstance(spec, dict):
            raise UsageError("config needs a 'problem' section")
        if ("file" in spec) == ("generator" in spec):
            raise UsageError("problem needs exactly one of 'file' or 'generator'")
        if "file" in spec:
            doc = _read_json(spec["file"], self.base)
            if doc.get("kind") in ("ball_qp", "matrix_game"):
                self.instance = instance_from_dict(doc)
                self.problem = self.instance.problem()
            else:
                self.problem = problem_from_dict(doc)
        else:
            seed = spec.get("seed", self.seed if self.seed is not None else 0)
            self.seed = seed
            gen = spec["generator"]
            if gen == "ball_qp":
                self.instance, self.problem = gen_ball_qp(int(spec.get("n", 10)), int(spec.get("d", 20)), seed)
            elif gen == "matrix_game":
                self.instance, self.problem = gen_matrix_game(int(spec.get("p", 5)), int(spec.get("d", 10)), seed)
            else:
                raise UsageError(f"unknown problem generator {gen!r}")
        return self.problem

    def load_reference(self):
        if isinstance(self.instance, BallQPInstance):
            self.reference = ball_qp_reference(self.instance).x
        elif isinstance(self.instance, MatrixGameInstance):
            self.reference = game_reference(self.instance).x
        return self.reference

    def load_scheme(self, default_n=None):
        spec = self.config.get("scheme")
        if not isinstance(spec, dict):
            raise UsageError("config needs a 'scheme' section")
        if ("file" in spec) == ("preset" in spec):
            raise UsageError("scheme needs exactly one of 'file' or 'preset'")
        if "file" in spec:
            return scheme_from_dict(_read_json(spec["file"], self.base))
        params = {k: v for k, v in spec.items() if k != "preset"}
        name = spec["preset"]
        self.preset_name = name
        if default_n is not None and "n" not in params and name not in (
                "davis_yin", "frb_classic", "graph_fb", "graph_frb"):
            params["n"] = default_n
        return make_preset(name, **params).scheme


# Output --------------------------------------------------------------------------


def header(command, ctx):
    seed = "" if ctx.seed is None else ctx.seed
    return f"# graphsplit {__version__} command={command} seed={seed} scheme={ctx.preset_name}\n"


def write_csv(path, head, columns, rows):
    buf = io.StringIO()
    buf.write(head)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


def _threads():
    raw = os.environ.get("GRAPHSPLIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"GRAPHSPLIT_THREADS must be an integer, got {raw!r}") from None


# Commands ------------------------------------------------------------------------


def cmd_check(ctx, out):
    scheme = ctx.load_scheme()
    chk = ctx.config.get("check", {})
    gamma, ell = chk.get("gamma"), chk.get("ell")
    report = check_assumptions(scheme, tol=float(chk.get("tol", 1e-9)), gamma=gamma, ell=ell)
    lines = report.lines()
    doc = report.to_dict()
    if ell is not None:
        rng = parameter_ranges(scheme, float(ell))
        doc["ranges"] = rng.to_dict()
        lines.append(f"tau = {rng.tau:.12g}  gamma_max = {rng.gamma_max:.12g}")
    text = header("check", ctx) + "\n".join(lines) + "\n"
    (out / "check.txt").write_text(text)
    write_json(out / "check.json", doc)
    print(text, end="")
    if not report.passed:
        print("failed items: " + ", ".join(report.failed()), file=sys.stderr)
        return 1
    return 0


def _resolve_step(sol, scheme, problem):
    rng = parameter_ranges(scheme, problem.ell)
    if "gamma" in sol:
        gamma = float(sol["gamma"])
    elif "gamma_hat" in sol:
        gamma = rng.gamma_from_hat(float(sol["gamma_hat"]))
    else:
        raise UsageError("solver needs 'gamma' or 'gamma_hat'")
    try:
        rng.validate(gamma)
    except InvalidConfigError as exc:
        raise InvalidConfigError(f"{exc}; gamma_max = {rng.gamma_max:.12g}") from None
    if "lambda" in sol:
        lam = float(sol["lambda"])
    else:
        lam = float(sol.get("lambda_hat", 0.5)) * rng.lambda_max(gamma)
    try:
        rng.validate(gamma, lam)
    except InvalidConfigError as exc:
        raise InvalidConfigError(
            f"{exc}; gamma_max = {rng.gamma_max:.12g}, lambda_max = {rng.lambda_max(gamma):.12g}"
        ) from None
    return gamma, lam, rng


def cmd_run(ctx, out):
    problem = ctx.load_problem()
    scheme = ctx.load_scheme(problem.n)
    sol = ctx.config.get("solver", {})
    gamma, lam, rng = _resolve_step(sol, scheme, problem)
    x_star = ctx.load_reference()
    cfg = SolverConfig(
        gamma, lam,
        max_iters=int(sol.get("max_iters", 1000)),
        residual_tol=float(sol.get("residual_tol", 0.0)),
        mode=sol.get("mode", "full_z"),
        record_every=int(sol.get("record_every", 1)),
        error_tol=sol.get("error_tol"),
    )
    result = solve(scheme, problem, cfg, x_star=x_star)
    timing = bool(ctx.config.get("timing", False))
    rows = trace_to_rows(result.trace)
    if not timing:
        for row in rows:
            row[-1] = ""
    write_csv(out / "trace.csv", header("run", ctx), TRACE_COLUMNS, rows)
    summary = {
        "gamma": gamma, "lambda": lam, "ranges": rng.to_dict(),
        "iterations": result.iterations, "converged": result.converged,
        "final_residual": result.final_residual, "final_error": result.final_error,
        "consensus_point": result.consensus_point,
    }
    write_json(out / "summary.json", summary)
    err = "" if result.final_error is None else f" relative_error={result.final_error:.3e}"
    print(f"iterations={result.iterations} residual={result.final_residual:.3e}{err}")
    return 0


def cmd_sweep(ctx, out):
    problem = ctx.load_problem()
    scheme = ctx.load_scheme(problem.n)
    x_star = ctx.load_reference()
    if x_star is None:
        raise UsageError("sweep needs a generated problem or an instance file with a reference")
    sw_cfg = ctx.config.get("sweep", {})
    result = sweep(problem, scheme,
                   sw_cfg.get("gamma_hats", DEFAULT_GRID), sw_cfg.get("lambda_hats", DEFAULT_GRID),
                   int(sw_cfg.get("iters", 1000)), x_star, error_tol=sw_cfg.get("error_tol"))
    timing = bool(ctx.config.get("timing", False))
    write_csv(out / "sweep.csv", header("sweep", ctx), SWEEP_COLUMNS, result.rows(timing))
    best = result.best
    write_json(out / "sweep_best.json", {
        "gamma_hat": best.gamma_hat, "lambda_hat": best.lambda_hat, "gamma": best.gamma,
        "lambda": best.lam, "final_error": _finite(best.final_error),
        "iters_to_tol": best.iters_to_tol,
    })
    print(f"best gamma_hat={best.gamma_hat:g} lambda_hat={best.lambda_hat:g} "
          f"final_error={best.final_error:.3e}")
    return 0


def cmd_bench(ctx, out):
    cfg = ctx.config.get("bench", {})
    kind = cfg.get("kind", "ball_qp")
    if kind == "ball_qp":
        size = (int(cfg.get("n", 10)), int(cfg.get("d", 20)))
    elif kind == "matrix_game":
        size = (int(cfg.get("p", 5)), int(cfg.get("d", 10)))
    else:
        raise UsageError(f"unknown bench kind {kind!r}")
    seed = cfg.get("seed", ctx.seed if ctx.seed is not None else 0)
    ctx.seed = seed
    ctx.preset_name = kind
    timing = bool(ctx.config.get("timing", False))
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        _, _, runs = run_bench(kind, size, seed, int(cfg.get("iters", 2000)),
                               grid=cfg.get("grid", DEFAULT_GRID),
                               record_every=int(cfg.get("record_every", 10)),
                               names=cfg.get("algorithms"), error_tol=cfg.get("error_tol", 1e-6),
                               map_fn=pool.map)
    summary = []
    for run in runs:
        ctx.preset_name = run.name
        rows = trace_to_rows(run.result.trace)
        if not timing:
            for row in rows:
                row[-1] = ""
        write_csv(out / f"bench_{run.name}.csv", header("bench", ctx), TRACE_COLUMNS, rows)
        summary.append([run.name, f"{run.best.gamma_hat:g}", f"{run.best.lambda_hat:g}",
                        repr(run.result.final_error),
                        "" if run.best.iters_to_tol is None else run.best.iters_to_tol])
        print(f"{run.name:16s} gamma_hat={run.best.gamma_hat:g} lambda_hat={run.best.lambda_hat:g} "
              f"final_error={run.result.final_error:.3e}")
    ctx.preset_name = kind
    write_csv(out / "bench_summary.csv", header("bench", ctx),
              ("algorithm", "gamma_hat", "lambda_hat", "final_error", "iters_to_tol"), summary)
    return 0


def cmd_equivalence(ctx, out):
    cfg = ctx.config.get("equivalence", {})
    iters = int(cfg.get("iters", 200))
    seed = int(cfg.get("seed", ctx.seed if ctx.seed is not None else 0))
    ctx.seed = seed
    ctx.preset_name = "reduction_suite"
    rows, ok = [], True
    for entry in reduction_suite():
        dev = entry(iters, seed)
        passed = dev <= EQUIVALENCE_TOL
        ok &= passed
        rows.append([entry.name, iters, repr(dev), "PASS" if passed else "FAIL"])
        print(f"{'PASS' if passed else 'FAIL'}  {entry.name:20s} max deviation {dev:.3e}")
    write_csv(out / "equivalence.csv", header("equivalence", ctx),
              ("reduction", "iterations", "max_deviation", "status"), rows)
    return 0 if ok else 1


HANDLERS = {"check": cmd_check, "run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench,
            "equivalence": cmd_equivalence}


def build_parser():
    parser = argparse.ArgumentParser(prog="graphsplit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"graphsplit {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file (optional for equivalence)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. solver.gamma_hat=0.5")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.config is None:
            if args.command != "equivalence":
                raise UsageError(f"{args.command} needs --config")
            config, base = apply_overrides({}, args.overrides), None
        else:
            config, base = load_config(args.config, args.overrides), Path(args.config).parent
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
        return HANDLERS[args.command](Context(config, base), out)
    except (UsageError, InvalidInputError, KeyError, TypeError) as exc:
        print(f"graphsplit: error: {exc}", file=sys.stderr)
        return 2
    except (InvalidConfigError, DivergenceError, GraphsplitError) as exc:
        print(f"graphsplit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
