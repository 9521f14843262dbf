"""Repeated-experiment harness for the synthetic scenarios and the real datasets.

Seeding
-------
Every random stream is derived from ``SeedSequence([master_seed, index, tag])``
where ``index`` is the repetition (or the split block for real data) and
``tag`` names the stream. Method order never touches any stream, and all
methods of one repetition are trained and tested on the same data.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import METHODS, TrainSettings, accuracy, train
from .contamination import EMPIRICAL, GROUND_TRUTH, ContaminationSpec, class_means, contaminate
from .datasets import BUNDLED, PreprocessPolicy, load_bundled, load_csv, preprocess, read_schema, stratified_split
from .distributions import ScenarioConfig, generate_cluster_params, generate_scenario
from .errors import ConfigInvalid, FemdaError

log = logging.getLogger(__name__)

SYNTHETIC = "synthetic"
REAL = "real"

# stream tags for SeedSequence([master_seed, index, tag])
TAG_DATA = 0
TAG_CONTAM_TRAIN = 1
TAG_CONTAM_TEST = 2
TAG_SPLIT = 3
TAG_PARAMS = 4

DESK_SCALE = {"n_train": 2000, "n_test": 5000}
FULL_SCALE = {"n_train": 5000, "n_test": 20000}

RECORD_FIELDS = (
    "scenario", "method", "fraction", "lam", "repetition", "split",
    "accuracy", "fit_time", "converged", "error",
)
SUMMARY_FIELDS = (
    "scenario", "method", "fraction", "lam", "mean_accuracy", "std_accuracy",
    "median_accuracy", "repetitions", "mean_fit_time", "convergence_failures", "failed_repetitions",
)


def stream(master_seed, index, tag):
    """Generator for one named stream of one repetition."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, index, tag]))


@dataclass
class ExperimentConfig:
    """Everything needed to rerun one experiment.

    ``sweep`` lists training-contamination fractions applied at ``sweep_lambda``;
    it takes precedence over ``contamination``. ``contaminate_test`` also
    rescales the test split of synthetic runs with an independent draw.
    """

    mode: str = SYNTHETIC
    scenario: ScenarioConfig | None = None
    dataset: str | None = None
    schema_path: str | None = None
    policy: PreprocessPolicy | None = None
    methods: tuple = METHODS
    contamination: ContaminationSpec | None = None
    sweep: tuple | None = None
    sweep_lambda: float = 5.0
    repetitions: int = 5
    resplit_every: int = 10
    train_fraction: float = 0.7
    master_seed: int = 0
    fix_params: bool = False
    contaminate_test: bool = False
    workers: int = 1
    output_dir: str | None = None
    settings: TrainSettings = field(default_factory=TrainSettings)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        if self.sweep is not None:
            self.sweep = tuple(float(f) for f in self.sweep)
        self.validate()

    def validate(self):
        if self.mode not in (SYNTHETIC, REAL):
            raise ConfigInvalid(f"mode must be {SYNTHETIC!r} or {REAL!r}")
        if self.mode == SYNTHETIC and self.scenario is None:
            raise ConfigInvalid("synthetic mode needs a scenario")
        if self.mode == REAL and not (self.dataset or self.schema_path):
            raise ConfigInvalid("real mode needs a dataset path or bundled name")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigInvalid(f"methods must be a nonempty subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigInvalid("methods must not repeat")
        if self.repetitions < 1:
            raise ConfigInvalid("repetitions must be >= 1")
        if self.resplit_every < 1:
            raise ConfigInvalid("resplit_every must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigInvalid("train_fraction must lie in (0, 1)")
        if self.sweep is not None:
            if not self.sweep or any(not 0 <= f <= 1 for f in self.sweep):
                raise ConfigInvalid("sweep fractions must lie in [0, 1]")
            if not self.sweep_lambda > 0:
                raise ConfigInvalid("sweep lambda must be positive")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")

    def contamination_levels(self, center_source):
        """``(fraction, lam)`` pairs to evaluate; ``(0, 1)`` means clean."""
        if self.sweep is not None:
            return [ContaminationSpec(f, self.sweep_lambda, center_source) for f in self.sweep]
        if self.contamination is not None:
            c = self.contamination
            return [ContaminationSpec(c.fraction, c.lam, center_source)]
        return [ContaminationSpec(0.0, 1.0, center_source)]

    def describe(self):
        """JSON-friendly summary written next to the results."""
        out = {
            "mode": self.mode,
            "methods": list(self.methods),
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "fix_params": self.fix_params,
            "contaminate_test": self.contaminate_test,
            "sweep": list(self.sweep) if self.sweep is not None else None,
            "sweep_lambda": self.sweep_lambda,
            "contamination": (
                None if self.contamination is None
                else [self.contamination.fraction, self.contamination.lam]
            ),
        }
        if self.mode == SYNTHETIC:
            out["scenario"] = self.scenario.to_kv()
        else:
            out.update(dataset=self.dataset, schema=self.schema_path,
                       resplit_every=self.resplit_every, train_fraction=self.train_fraction)
        return out


class ResultsTable:
    """Per-repetition records plus their aggregate rows.

    ``std_accuracy`` is the population standard deviation over successful
    repetitions. Timing is informational and excluded from :meth:`key`.
    """

    def __init__(self, records, meta=None):
        self.records = [dict(r) for r in records]
        self.meta = dict(meta or {})
        self.rows = aggregate(self.records)

    def __len__(self):
        return len(self.rows)

    def key(self):
        """Deterministic content: everything except wall-clock times."""
        return [
            tuple(r[f] for f in RECORD_FIELDS if f != "fit_time") for r in self.records
        ]

    def row(self, method, scenario=None, fraction=None):
        hits = [
            r for r in self.rows
            if r["method"] == method
            and (scenario is None or r["scenario"] == scenario)
            and (fraction is None or math.isclose(r["fraction"], fraction))
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {method}, {scenario}, {fraction}")
        return hits[0]

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(out / "repetitions.csv", self.records)
        write_summary(out / "summary.csv", self.rows)
        with open(out / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
        return out

    @classmethod
    def load(cls, in_dir):
        d = Path(in_dir)
        meta = {}
        if (d / "meta.json").exists():
            with open(d / "meta.json", encoding="utf-8") as fh:
                meta = json.load(fh)
        return cls(read_records(d / "repetitions.csv"), meta)


def aggregate(records):
    """Group records by (scenario, method, fraction, lam) in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault((r["scenario"], r["method"], r["fraction"], r["lam"]), []).append(r)
    rows = []
    for (scenario, method, fraction, lam), rs in groups.items():
        ok = [r for r in rs if not r["error"]]
        acc = np.array([r["accuracy"] for r in ok], dtype=float)
        times = np.array([r["fit_time"] for r in ok], dtype=float)
        rows.append({
            "scenario": scenario,
            "method": method,
            "fraction": fraction,
            "lam": lam,
            "mean_accuracy": float(acc.mean()) if acc.size else math.nan,
            "std_accuracy": float(acc.std()) if acc.size else math.nan,
            "median_accuracy": float(np.median(acc)) if acc.size else math.nan,
            "repetitions": int(acc.size),
            "mean_fit_time": float(times.mean()) if times.size else math.nan,
            "convergence_failures": sum(1 for r in ok if not r["converged"]),
            "failed_repetitions": len(rs) - len(ok),
        })
    return rows


def _fmt_float(x):
    return repr(float(x))


def write_records(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        w.writeheader()
        for r in records:
            row = dict(r)
            for f in ("fraction", "lam", "accuracy", "fit_time"):
                row[f] = _fmt_float(row[f])
            row["converged"] = int(bool(row["converged"]))
            w.writerow(row)


def read_records(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            for f in ("fraction", "lam", "accuracy", "fit_time"):
                row[f] = float(row[f])
            for f in ("repetition", "split"):
                row[f] = int(row[f])
            row["converged"] = bool(int(row["converged"]))
            out.append(row)
    return out


def write_summary(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt_float(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_summary(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            for f in SUMMARY_FIELDS[2:]:
                row[f] = float(row[f]) if f not in ("repetitions", "convergence_failures", "failed_repetitions") else int(row[f])
            out.append(row)
    return out


def _record(scenario, method, spec, rep, split, acc=math.nan, fit_time=math.nan, converged=False, error=""):
    return {
        "scenario": scenario, "method": method, "fraction": float(spec.fraction),
        "lam": float(spec.lam), "repetition": rep, "split": split,
        "accuracy": float(acc), "fit_time": float(fit_time),
        "converged": bool(converged), "error": error,
    }


def _evaluate(config, scenario, spec, rep, split, train_set, test_set):
    out = []
    for method in config.methods:
        try:
            model = train(method, train_set, config.settings)
            acc = accuracy(model, test_set)
        except FemdaError as exc:
            log.warning("rep %d %s %s failed (seed %d): %s", rep, scenario, method, config.master_seed, exc)
            out.append(_record(scenario, method, spec, rep, split, error=f"{type(exc).__name__}: {exc}"))
            continue
        if not model.converged:
            log.warning("rep %d %s %s did not converge (seed %d)", rep, scenario, method, config.master_seed)
        out.append(_record(scenario, method, spec, rep, split, acc, model.fit_time, model.converged))
    return out


def _synthetic_rep(config, rep, truth):
    sc = config.scenario
    levels = config.contamination_levels(GROUND_TRUTH)
    try:
        ds = generate_scenario(sc, stream(config.master_seed, rep, TAG_DATA), truth)
    except FemdaError as exc:
        err = f"{type(exc).__name__}: {exc}"
        return [
            _record(sc.scenario_id, m, s, rep, rep, error=err) for s in levels for m in config.methods
        ]
    centers = {k + 1: p.mean for k, p in enumerate(ds.truth)}
    records = []
    for spec in levels:
        # one seed per repetition keeps altered sets nested across a sweep
        tr, _ = contaminate(ds.train, centers, spec, stream(config.master_seed, rep, TAG_CONTAM_TRAIN))
        te = ds.test
        if config.contaminate_test:
            te, _ = contaminate(te, centers, spec, stream(config.master_seed, rep, TAG_CONTAM_TEST))
        records += _evaluate(config, sc.scenario_id, spec, rep, rep, tr, te)
    return records


def _run_reps(fn, config, args_list):
    if config.workers == 1 or len(args_list) == 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(config.workers) as ex:
        futures = [ex.submit(fn, *a) for a in args_list]
        # collected in submission order so output is scheduling independent
        return [f.result() for f in futures]


def run_synthetic(config):
    """Repeat one synthetic scenario and aggregate per method and level."""
    if config.mode != SYNTHETIC:
        raise ConfigInvalid("run_synthetic needs a synthetic config")
    truth = None
    if config.fix_params:
        truth = generate_cluster_params(config.scenario, stream(config.master_seed, 0, TAG_PARAMS))
    chunks = _run_reps(_synthetic_rep, config, [(config, rep, truth) for rep in range(config.repetitions)])
    return ResultsTable([r for c in chunks for r in c], {"config": config.describe()})


def load_real(config):
    """Load the dataset named by a real-mode config; returns ``(data, report)``."""
    if config.dataset in BUNDLED and config.schema_path is None:
        data, report = load_bundled(config.dataset)
    else:
        if config.schema_path is None:
            raise ConfigInvalid("a schema file is required for non-bundled data")
        schema, policy = read_schema(config.schema_path)
        path = config.dataset or schema.file
        if path is None:
            raise ConfigInvalid("no data path in config or schema")
        path = Path(path)
        if not path.is_absolute() and not path.exists():
            path = Path(config.schema_path).parent / path
        data, report = preprocess(load_csv(path, schema), config.policy or policy)
    return data, report


def _real_rep(config, data, name, rep):
    block = rep // config.resplit_every
    tr, te = stratified_split(data, config.train_fraction, stream(config.master_seed, block, TAG_SPLIT))
    centers = class_means(tr)
    records = []
    for spec in config.contamination_levels(EMPIRICAL):
        tr_c, _ = contaminate(tr, centers, spec, stream(config.master_seed, rep, TAG_CONTAM_TRAIN))
        records += _evaluate(config, name, spec, rep, block, tr_c, te)
    return records


def run_real(config):
    """Repeat train/test evaluation on one real dataset.

    The split is redrawn every ``resplit_every`` repetitions; contamination
    only touches the training split and is centred on its class means.
    """
    if config.mode != REAL:
        raise ConfigInvalid("run_real needs a real-data config")
    data, report = load_real(config)
    name = config.dataset if config.dataset in BUNDLED else Path(config.dataset or config.schema_path).stem
    chunks = _run_reps(_real_rep, config, [(config, data, name, rep) for rep in range(config.repetitions)])
    records = [r for c in chunks for r in c]
    meta = {"config": config.describe(), "preprocess": report,
            "splits": len({r["split"] for r in records})}
    return ResultsTable(records, meta)


def run(config):
    table = run_synthetic(config) if config.mode == SYNTHETIC else run_real(config)
    if config.output_dir:
        table.save(config.output_dir)
    return table


# ---------------------------------------------------------------- reporting

def _stat_for(rows):
    return "median_accuracy" if any(r["scenario"] in BUNDLED for r in rows) else "mean_accuracy"


def delta_table(rows, statistic="mean_accuracy"):
    """Markdown table: best method per line in absolute percent, the others as
    signed differences from it. Lines are (scenario, fraction, lam)."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    lines = {}
    for r in rows:
        lines.setdefault((r["scenario"], r["fraction"], r["lam"]), {})[r["method"]] = r[statistic]
    header = "| scenario | eps | lambda | " + " | ".join(methods) + " |"
    out = [header, "|" + "---|" * (3 + len(methods))]
    for (scenario, fraction, lam), vals in lines.items():
        finite = {m: v for m, v in vals.items() if not math.isnan(v)}
        best = max(finite, key=lambda m: (finite[m], -methods.index(m))) if finite else None
        cells = []
        for m in methods:
            v = vals.get(m, math.nan)
            if math.isnan(v):
                cells.append("n/a")
            elif m == best:
                cells.append(f"**{100 * v:.2f}**")
            else:
                cells.append(f"{100 * (v - finite[best]):+.2f}")
        out.append(f"| {scenario} | {fraction:g} | {lam:g} | " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"


def plot_series(rows, statistic="mean_accuracy"):
    """``{scenario: {method: {fraction: accuracy}}}`` for sweep plots."""
    series = {}
    for r in rows:
        series.setdefault(r["scenario"], {}).setdefault(r["method"], {})[f"{r['fraction']:g}"] = r[statistic]
    return {"statistic": statistic, "series": series}


def emit_report(results, fmt, out_dir):
    """Write one report file; returns its path."""
    rows = results.rows if isinstance(results, ResultsTable) else list(results)
    if not rows:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stat = _stat_for(rows)
    if fmt == "csv":
        path = out / "summary.csv"
        write_summary(path, rows)
    elif fmt == "markdown":
        path = out / "report.md"
        path.write_text(delta_table(rows, stat), encoding="utf-8")
    elif fmt == "json-plot":
        path = out / "plot.json"
        path.write_text(json.dumps(plot_series(rows, stat), indent=2), encoding="utf-8")
    else:
        raise ConfigInvalid(f"unknown report format {fmt!r}")
    return path
