"""Command-line entry point: ``femda-bench simulate | real | report``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .classifiers import METHODS
from .contamination import ContaminationSpec
from .distributions import ScenarioConfig, parse_scenario
from .errors import ConfigInvalid, FemdaError
from .kvfile import as_bool, as_list, read_kv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# config-file keys accepted besides the ScenarioConfig fields
COMMON_KEYS = ("methods", "reps", "seed", "out", "workers")
SIMULATE_KEYS = COMMON_KEYS + ("scenario", "contamination", "full_scale", "fix_params", "contaminate_test")
REAL_KEYS = COMMON_KEYS + ("data", "schema", "sweep", "lambda", "contamination", "resplit_every", "train_fraction")
SCENARIO_FIELDS = ("m", "K", "n_train", "n_test", "beta_range", "nu_range", "tau_range", "eig_range")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigInvalid(message)


def build_parser():
    p = _Parser(prog="femda-bench", description="Benchmark FEMDA against QDA-type baselines.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file; command-line values win")
        sp.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int)

    s = sub.add_parser("simulate", help="synthetic scenario experiment")
    common(s)
    s.add_argument("--scenario", help="e.g. green:0.6GG-0.4T")
    s.add_argument("--contamination", help="<fraction>:<lambda>")
    s.add_argument("--full-scale", action="store_true", default=None, help="5000 train / 20000 test points")
    s.add_argument("--fix-params", action="store_true", default=None, help="draw cluster parameters once")
    s.add_argument("--contaminate-test", action="store_true", default=None, help="contaminate the test split too")
    for name in SCENARIO_FIELDS:
        s.add_argument(f"--{name.replace('_', '-')}", dest=name)

    r = sub.add_parser("real", help="real-data experiment")
    common(r)
    r.add_argument("--data", help="data file or bundled name")
    r.add_argument("--schema", help="schema file")
    r.add_argument("--sweep", help="<f0:f1:step> training contamination fractions")
    r.add_argument("--lambda", dest="lambda_", type=float)
    r.add_argument("--contamination", help="<fraction>:<lambda>")
    r.add_argument("--resplit-every", type=int)
    r.add_argument("--train-fraction", type=float)

    rep = sub.add_parser("report", help="render a saved result directory")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--format", choices=("csv", "markdown", "json-plot"), required=True)
    rep.add_argument("--out", help="output directory (default: the input directory)")
    return p


def parse_sweep(text):
    """``0:0.6:0.1`` -> ``(0.0, 0.1, ..., 0.6)``, endpoints inclusive."""
    try:
        f0, f1, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigInvalid(f"expected <f0:f1:step>, got {text!r}") from None
    if step <= 0 or f1 < f0:
        raise ConfigInvalid("sweep needs step > 0 and f1 >= f0")
    n = int(round((f1 - f0) / step))
    return tuple(round(f0 + i * step, 10) for i in range(n + 1))


def _merged(args, allowed):
    """Config-file values overridden by any option given on the command line."""
    values = {}
    if args.config:
        try:
            values = read_kv(args.config)
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from exc
        unknown = set(values) - set(allowed)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    for key in allowed:
        attr = "lambda_" if key == "lambda" else key
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = v
    return values


def _common(values):
    out = {}
    if "methods" in values:
        out["methods"] = tuple(m.upper() for m in as_list(values["methods"]))
    if "reps" in values:
        out["repetitions"] = int(values["reps"])
    if "seed" in values:
        out["master_seed"] = int(values["seed"])
    if "workers" in values:
        out["workers"] = int(values["workers"])
    if "out" in values:
        out["output_dir"] = str(values["out"])
    return out


def simulate_config(args):
    values = _merged(args, SIMULATE_KEYS + SCENARIO_FIELDS)
    if "scenario" not in values:
        raise ConfigInvalid("--scenario is required")
    scale = bench.FULL_SCALE if as_bool(values.get("full_scale", False)) else bench.DESK_SCALE
    sharing, p_gg = parse_scenario(str(values["scenario"]))
    kv = {**scale, **{k: values[k] for k in SCENARIO_FIELDS if k in values}, "sharing": sharing, "p_gg": p_gg}
    base = ScenarioConfig.from_kv(kv)
    contamination = ContaminationSpec.parse(values["contamination"]) if "contamination" in values else None
    return bench.ExperimentConfig(
        mode=bench.SYNTHETIC,
        scenario=base,
        contamination=contamination,
        fix_params=as_bool(values.get("fix_params", False)),
        contaminate_test=as_bool(values.get("contaminate_test", False)),
        **_common(values),
    )


def real_config(args):
    values = _merged(args, REAL_KEYS)
    if "data" not in values and "schema" not in values:
        raise ConfigInvalid("--data or --schema is required")
    sweep = parse_sweep(str(values["sweep"])) if "sweep" in values else None
    if sweep is None and "lambda" in values:
        raise ConfigInvalid("--lambda only applies together with --sweep")
    contamination = ContaminationSpec.parse(values["contamination"]) if "contamination" in values else None
    extra = {}
    if "resplit_every" in values:
        extra["resplit_every"] = int(values["resplit_every"])
    if "train_fraction" in values:
        extra["train_fraction"] = float(values["train_fraction"])
    if "lambda" in values:
        extra["sweep_lambda"] = float(values["lambda"])
    return bench.ExperimentConfig(
        mode=bench.REAL,
        dataset=values.get("data"),
        schema_path=values.get("schema"),
        sweep=sweep,
        contamination=contamination,
        **extra,
        **_common(values),
    )


def _summary(table):
    return bench.delta_table(table.rows, bench._stat_for(table.rows))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            table = bench.ResultsTable.load(args.in_dir)
            path = bench.emit_report(table, args.format, args.out or args.in_dir)
            print(path)
            return EXIT_OK
        config = simulate_config(args) if args.command == "simulate" else real_config(args)
    except (ConfigInvalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        table = bench.run(config)
    except (FemdaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(_summary(table))
    if config.output_dir:
        print(f"results written to {Path(config.output_dir)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
