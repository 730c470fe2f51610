"""Command-line surface: simulate, sweep, stream and validate subcommands.

Configuration files are flat ``key = value`` documents ('#' starts a
comment).  Scenario keys: structure, pattern, strength, G, n, N, s, k, beta,
alpha, eta, seed, p1.  Sweep extras: methods and beta_grid (comma-separated),
replicates, master_seed.  Flags always take precedence over file values.

Stream mode reads one JSON object per line with fields ``p`` (number) and
``groups`` (array of M integers in layer order) and answers each with
``{"t", "reject", "tested_layers", "thresholds", "halted"}``; malformed
lines produce an error record carrying the line number and do not advance
the stream clock.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, TextIO

from .harness import (
    LAYER_NAMES,
    RESULTS_HEADER,
    SweepSpec,
    emit_results,
    format_result_row,
    run_cell,
    run_sweep,
)
from .metrics import aggregate
from .procedures import (
    METHODS,
    constant_policy,
    make_procedure,
    simple_choice,
    validate_policy,
)
from .core import HypothesisEvent
from .simgen import ScenarioSpec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_INT_KEYS = {"G", "n", "N", "seed", "replicates", "master_seed"}
_FLOAT_KEYS = {"s", "k", "beta", "alpha", "eta", "p1"}
_CHOICE_KEYS = {"structure", "pattern", "strength"}
_LIST_KEYS = {"methods", "beta_grid"}
_SCENARIO_KEYS = _CHOICE_KEYS | {
    "G", "n", "N", "s", "k", "beta", "alpha", "eta", "seed", "p1",
}
_ALL_KEYS = _SCENARIO_KEYS | _LIST_KEYS | {"replicates", "master_seed"}


class ConfigError(Exception):
    def __init__(self, path, line: Optional[int], message: str):
        location = f"{path}:{line}" if line else str(path)
        super().__init__(f"{location}: {message}")


def parse_config(path) -> dict[str, tuple[int, str]]:
    """Parse a flat key = value file into {key: (line number, raw value)}."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(path, None, "config file not found")
    entries: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(path, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(path, lineno, f"unknown key {key!r}")
        if key in entries:
            raise ConfigError(path, lineno, f"duplicate key {key!r}")
        if not value:
            raise ConfigError(path, lineno, f"empty value for {key!r}")
        entries[key] = (lineno, value)
    return entries


def _convert(path, key: str, lineno: int, value: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        kind = "integer" if key in _INT_KEYS else "number"
        raise ConfigError(path, lineno, f"{key!r} must be an {kind}, got {value!r}")
    if key == "methods":
        return tuple(item.strip() for item in value.split(",") if item.strip())
    if key == "beta_grid":
        try:
            return tuple(float(item) for item in value.split(",") if item.strip())
        except ValueError:
            raise ConfigError(path, lineno, f"beta_grid must be comma-separated numbers")
    return value


def scenario_from_config(path, entries: dict[str, tuple[int, str]]) -> ScenarioSpec:
    fields = {}
    for key, (lineno, value) in entries.items():
        if key in _SCENARIO_KEYS:
            fields[key] = _convert(path, key, lineno, value)
    try:
        return ScenarioSpec(**fields)
    except ValueError as exc:
        raise ConfigError(path, None, str(exc))


def _config_value(path, entries, key: str, default=None):
    if key not in entries:
        return default
    lineno, value = entries[key]
    return _convert(path, key, lineno, value)


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    entries = parse_config(args.config)
    scenario = scenario_from_config(args.config, entries)
    methods = _config_value(args.config, entries, "methods", default=())
    method = args.method
    if method is None:
        if len(methods) == 1:
            method = methods[0]
        else:
            print("simulate: --method is required", file=sys.stderr)
            return EXIT_USAGE
    if method not in METHODS:
        print(f"simulate: unknown method {method!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.alpha is not None:
        scenario = replace(scenario, alpha=args.alpha)
    if args.eta is not None:
        scenario = replace(scenario, eta=args.eta)
    beta = args.beta if args.beta is not None else scenario.beta
    if beta < 0:
        print(f"simulate: beta must be non-negative, got {beta}", file=sys.stderr)
        return EXIT_USAGE
    replicates = args.replicates
    if replicates is None:
        replicates = _config_value(args.config, entries, "replicates", default=100)
    if replicates < 1:
        print("simulate: at least one replicate is required", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed
    if seed is None:
        seed = scenario.seed
    per_layer = run_cell(scenario, method, beta, replicates, seed)
    print(RESULTS_HEADER)
    for layer in LAYER_NAMES:
        row = aggregate(
            per_layer[layer], scenario.eta, method=method, beta=beta, layer=layer
        )
        print(format_result_row(row))
    return EXIT_OK


def cmd_sweep(args) -> int:
    entries = parse_config(args.config)
    scenario = scenario_from_config(args.config, entries)
    methods = args.methods
    if methods is None:
        methods = _config_value(args.config, entries, "methods", default=METHODS)
    else:
        methods = tuple(item.strip() for item in methods.split(",") if item.strip())
    beta_grid = _config_value(args.config, entries, "beta_grid")
    replicates = args.replicates
    if replicates is None:
        replicates = _config_value(args.config, entries, "replicates", default=100)
    master_seed = args.master_seed
    if master_seed is None:
        master_seed = _config_value(
            args.config, entries, "master_seed",
            default=_config_value(args.config, entries, "seed", default=0),
        )
    kwargs = {
        "scenario": scenario,
        "methods": tuple(methods),
        "replicates": replicates,
        "master_seed": master_seed,
    }
    if beta_grid:
        kwargs["beta_grid"] = beta_grid
    try:
        sweep = SweepSpec(**kwargs)
    except ValueError as exc:
        print(f"sweep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = run_sweep(sweep)
    for path in emit_results(rows, args.out):
        print(path)
    return EXIT_OK


def _stream_error(line_number: int, message: str, sink: TextIO) -> None:
    print(json.dumps({"line": line_number, "error": message}), file=sink)


def cmd_stream(args, source: Optional[TextIO] = None, sink: Optional[TextIO] = None) -> int:
    sink = sink or sys.stdout
    if source is None:
        if args.input == "-":
            source = sys.stdin
        else:
            path = Path(args.input)
            if not path.exists():
                print(f"stream: input file not found: {path}", file=sys.stderr)
                return EXIT_USAGE
            source = path.open("r", encoding="utf-8")
    if args.method not in METHODS:
        print(f"stream: unknown method {args.method!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        procedure = make_procedure(
            args.method, args.layers, args.alpha, args.eta, untested=args.untested
        )
    except ValueError as exc:
        print(f"stream: {exc}", file=sys.stderr)
        return EXIT_USAGE
    expected = args.layers
    for line_number, raw in enumerate(source, 1):
        if not raw.strip():
            continue
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            _stream_error(line_number, f"malformed record: {exc.msg}", sink)
            continue
        if not isinstance(payload, dict):
            _stream_error(line_number, "record must be a JSON object", sink)
            continue
        p = payload.get("p")
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            _stream_error(line_number, "field 'p' must be a number", sink)
            continue
        if not 0.0 <= p <= 1.0:
            _stream_error(line_number, f"p outside [0, 1]: {p}", sink)
            continue
        groups = payload.get("groups")
        if (
            not isinstance(groups, list)
            or any(isinstance(g, bool) or not isinstance(g, int) for g in groups)
            or any(g < 0 for g in groups)
        ):
            _stream_error(
                line_number, "field 'groups' must be an array of non-negative integers", sink
            )
            continue
        if len(groups) != expected:
            _stream_error(
                line_number, f"expected {expected} group ids, got {len(groups)}", sink
            )
            continue
        event = HypothesisEvent(
            t=procedure.t + 1, p=float(p), group_index=tuple(groups)
        )
        record = procedure.skip(event) if procedure.halted else procedure.step(event)
        print(
            json.dumps(
                {
                    "t": record.t,
                    "reject": bool(record.rejected),
                    "tested_layers": record.tested_layers(),
                    "thresholds": [
                        record.layers[m].threshold for m in record.tested_layers()
                    ],
                    "halted": record.halted,
                }
            ),
            file=sink,
        )
    return EXIT_OK


def cmd_validate(args) -> int:
    alpha = args.alpha
    default_spend = alpha / (1.0 - alpha)
    overridden = any(
        value is not None for value in (args.level, args.phi, args.psi, args.rho)
    )
    if overridden:
        spend = args.phi if args.phi is not None else default_spend
        policy = constant_policy(
            alpha_level=args.level if args.level is not None else alpha,
            spend=spend,
            reward=args.psi if args.psi is not None else spend + alpha,
            power_bound=args.rho if args.rho is not None else 1.0,
        )
    else:
        policy = simple_choice(alpha)
    try:
        report = validate_policy(policy, alpha, args.horizon)
    except ValueError as exc:
        print(f"validate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if report.ok:
        print(f"ok: reward rule admissible for t = 1..{args.horizon}")
        return EXIT_OK
    print(
        f"violation at t={report.t}: reward {report.reward:.6g} outside "
        f"[0, {min(report.power_cap, report.level_cap):.6g}] "
        f"(power cap {report.power_cap:.6g}, level cap {report.level_cap:.6g})"
    )
    return EXIT_RUNTIME


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerfdr",
        description="Online multi-layer FDR control: simulation and streaming decisions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one scenario/method replicate set")
    simulate.add_argument("--config", required=True, help="scenario config file")
    simulate.add_argument("--method", help="method name (one of %s)" % ", ".join(METHODS))
    simulate.add_argument("--beta", type=float, help="override effect size")
    simulate.add_argument("--alpha", type=float, help="override target level")
    simulate.add_argument("--eta", type=float, help="override discovery offset")
    simulate.add_argument("--replicates", type=int, help="override replicate count")
    simulate.add_argument("--seed", type=int, help="override master seed")
    simulate.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep", help="run a method x beta grid and emit CSVs")
    sweep.add_argument("--config", required=True, help="sweep config file")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--methods", help="comma-separated method subset")
    sweep.add_argument("--replicates", type=int, help="override replicate count")
    sweep.add_argument("--master-seed", type=int, dest="master_seed")
    sweep.set_defaults(func=cmd_sweep)

    stream = sub.add_parser("stream", help="decide a live stream of JSON records")
    stream.add_argument("--method", required=True)
    stream.add_argument("--layers", type=int, default=1, help="number of layers M")
    stream.add_argument("--alpha", type=float, default=0.1)
    stream.add_argument("--eta", type=float, default=1.0)
    stream.add_argument("--untested", choices=("literal", "accept"), default="literal")
    stream.add_argument("--input", default="-", help="input file or '-' for stdin")
    stream.set_defaults(func=cmd_stream)

    validate = sub.add_parser("validate", help="check a spending policy's reward bound")
    validate.add_argument("--alpha", type=float, default=0.1)
    validate.add_argument("--horizon", type=int, default=1000)
    validate.add_argument("--level", type=float, help="constant significance level")
    validate.add_argument("--phi", type=float, help="constant spend charge")
    validate.add_argument("--psi", type=float, help="constant discovery reward")
    validate.add_argument("--rho", type=float, help="constant power bound")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failure contract
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
