"""Replicated experiments: spec parsing, seeded execution and result files.

Seeding scheme: replication ``k`` of an experiment with seed ``s`` uses
``SeedSequence(s, spawn_key=(1, k))`` and spawns four children from it, in
order, for data generation, GATE's initial design, baseline (C) and
baseline (D).  Fixed column means (when requested) come from
``SeedSequence(s, spawn_key=(0,))``.  A replication's streams therefore do
not depend on how many replications run or on which worker runs them.

Output directory layout::

    config.json        resolved experiment spec
    rep_<k>.jsonl      one record per approach for replication k
    time_<k>.json      wall-clock seconds per approach (kept apart so the
                       records replay byte for byte)
    aggregate.csv      mean/sd per approach and metric
    comparison.txt     plain-text table of the approaches side by side
    roc_<approach>.csv ROC points of every replication (test split)
    varfreq.csv        how often GATE selected each variable
"""

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatasetManifest, LabelOracle, case_spec, draw_means, gen_synthetic, load_manifest
from .errors import GateError, InvalidSpec
from .gate import (
    GateConfig,
    run_baseline_full,
    run_baseline_random_full,
    run_baseline_random_selected,
    run_gate,
)
from .logistic import IrlsControls
from .metrics import aggregate

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
APPROACHES = ("A", "B", "C", "D")
APPROACH_NAMES = {
    "A": "GATE",
    "B": "full variables and subjects",
    "C": "random subjects, selected variables",
    "D": "random subjects, full variables",
}
METRICS = ("n", "train_acc", "train_auc", "test_acc", "test_auc", "tpr", "fpr", "n_vars", "time")

SYNTHETIC_DEFAULTS = {"case": 2, "N": 20000, "P": 100, "test_size": 5000, "fixed_means": False}


@dataclass
class ExperimentSpec:
    dataset: dict = field(default_factory=lambda: dict(SYNTHETIC_DEFAULTS))
    gate: GateConfig = field(default_factory=GateConfig)
    baselines: tuple = ("B", "C", "D")
    replications: int = 1
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    @property
    def synthetic(self):
        return "manifest" not in self.dataset

    @classmethod
    def from_dict(cls, d, base_dir=None):
        """Build a spec, filling defaults.  Raises InvalidSpec listing every problem."""
        problems = []
        d = dict(d)
        unknown = set(d) - {"dataset", "gate", "baselines", "replications", "seed", "output_dir",
                            "workers"}
        if unknown:
            problems.append(f"unknown keys: {sorted(unknown)}")

        dataset = dict(d.get("dataset", {}))
        if "manifest" in dataset:
            extra = set(dataset) - {"manifest"}
            if extra:
                problems.append(f"dataset: unknown keys with a manifest: {sorted(extra)}")
            path = Path(dataset["manifest"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            dataset["manifest"] = str(path)
        else:
            extra = set(dataset) - set(SYNTHETIC_DEFAULTS)
            if extra:
                problems.append(f"dataset: unknown keys {sorted(extra)}")
            dataset = {**SYNTHETIC_DEFAULTS, **dataset}

        gate_d = dict(d.get("gate", {}))
        irls_d = gate_d.pop("irls", {})
        gate_fields = set(GateConfig.__dataclass_fields__) - {"irls", "seed"}
        bad = set(gate_d) - gate_fields
        if bad:
            problems.append(f"gate: unknown keys {sorted(bad)}")
            gate_d = {k: v for k, v in gate_d.items() if k in gate_fields}
        bad = set(irls_d) - set(IrlsControls.__dataclass_fields__)
        if bad:
            problems.append(f"gate.irls: unknown keys {sorted(bad)}")
            irls_d = {k: v for k, v in irls_d.items() if k not in bad}
        if "ridge" in irls_d:
            irls_d["ridge"] = tuple(irls_d["ridge"])
        if gate_d.get("initial_vars") is not None:
            gate_d["initial_vars"] = tuple(gate_d["initial_vars"])
        gate = GateConfig(**gate_d, irls=IrlsControls(**irls_d))

        spec = cls(
            dataset=dataset,
            gate=gate,
            baselines=tuple(d.get("baselines", ("B", "C", "D"))),
            replications=d.get("replications", 1),
            seed=d.get("seed", 0),
            output_dir=d.get("output_dir", "results"),
            workers=d.get("workers", 1),
        )
        problems.extend(spec.violations())
        if problems:
            raise InvalidSpec("\n".join(problems))
        return spec

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"cannot read spec {path}: {exc}") from None
        return cls.from_dict(d, base_dir=path.parent)

    def violations(self):
        out = [f"gate.{v}" for v in self.gate.violations()]
        if not isinstance(self.replications, int) or self.replications < 1:
            out.append(f"replications must be a positive integer, got {self.replications!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            out.append(f"workers must be a positive integer, got {self.workers!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            out.append(f"seed must be a nonnegative integer, got {self.seed!r}")
        bad = [b for b in self.baselines if b not in ("B", "C", "D")]
        if bad:
            out.append(f"baselines must be drawn from B, C, D; got {bad}")
        if self.synthetic:
            ds = self.dataset
            if ds["case"] not in (1, 2, 3):
                out.append(f"dataset.case must be 1, 2 or 3, got {ds['case']!r}")
            if not isinstance(ds["N"], int) or not isinstance(ds["test_size"], int) \
                    or not 0 < ds["test_size"] < ds["N"]:
                out.append("dataset: need integers 0 < test_size < N")
            elif ds["N"] - ds["test_size"] < self.gate.n0 + self.gate.n_q:
                out.append("dataset: training split smaller than n0 + n_q")
            min_p = 6 if ds["case"] == 3 else 5
            if not isinstance(ds["P"], int) or ds["P"] < min_p:
                out.append(f"dataset.P must be an integer >= {min_p}")
        else:
            path = Path(self.dataset["manifest"])
            if not path.is_file():
                out.append(f"dataset.manifest: file not found: {path}")
            else:
                try:
                    m = DatasetManifest.load(path)
                    m.split_kwargs()
                    if not Path(m.path).is_file():
                        out.append(f"dataset.manifest: data file not found: {m.path}")
                except (GateError, OSError, json.JSONDecodeError, TypeError) as exc:
                    out.append(f"dataset.manifest: {exc}")
        out_dir = Path(self.output_dir)
        probe = out_dir if out_dir.exists() else _existing_parent(out_dir)
        if probe is None or not os.access(probe, os.W_OK) or (out_dir.exists() and not out_dir.is_dir()):
            out.append(f"output_dir is not writable: {out_dir}")
        return out

    def to_dict(self):
        return {
            "dataset": dict(self.dataset),
            "gate": {k: v for k, v in self.gate.to_dict().items() if k != "seed"},
            "baselines": list(self.baselines),
            "replications": self.replications,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
        }


def _existing_parent(path):
    for parent in Path(path).absolute().parents:
        if parent.exists():
            return parent
    return None


def replication_seeds(seed, rep):
    """Child seed sequences (data, gate, C, D) for replication ``rep``."""
    return np.random.SeedSequence(seed, spawn_key=(1, rep)).spawn(4)


def make_pool(spec, data_seed):
    ds = spec.dataset
    if not spec.synthetic:
        return load_manifest(ds["manifest"])
    means = None
    if ds.get("fixed_means"):
        means = draw_means(ds["P"], np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    return gen_synthetic(case_spec(ds["case"], ds["P"]), N=ds["N"], P=ds["P"],
                         test_size=ds["test_size"], seed=data_seed, means=means)


def run_replication(spec, rep, pool=None):
    """Run GATE and the requested baselines for one replication.

    Returns the list of :class:`RunResult` in approach order.
    """
    data_ss, gate_ss, c_ss, d_ss = replication_seeds(spec.seed, rep)
    if pool is None:
        pool = make_pool(spec, data_ss)
    gate_seed = int(gate_ss.generate_state(1, np.uint64)[0])
    config = GateConfig(**{**vars(spec.gate), "seed": gate_seed})
    a = run_gate(config, pool, LabelOracle(pool))
    results = [a]
    alpha = config.alpha
    if "B" in spec.baselines and (spec.synthetic or rep == 0):
        results.append(run_baseline_full(pool, alpha=alpha))
    if "C" in spec.baselines:
        results.append(run_baseline_random_selected(pool, a.n, a.selected_vars, c_ss, alpha,
                                                    config.irls))
    if "D" in spec.baselines:
        results.append(run_baseline_random_full(pool, a.n, d_ss, alpha, config.irls))
    return results


def record_lines(rep, results):
    lines = []
    for r in results:
        rec = {"schema": SCHEMA_VERSION, "rep": rep, **r.to_record()}
        lines.append(json.dumps(rec, sort_keys=True, allow_nan=False))
    return "\n".join(lines) + "\n"


def _write_replication(out_dir, rep, results):
    out_dir = Path(out_dir)
    (out_dir / f"rep_{rep}.jsonl").write_text(record_lines(rep, results))
    times = {r.approach: r.wall_time for r in results}
    (out_dir / f"time_{rep}.json").write_text(json.dumps(times, sort_keys=True))
    roc = {}
    for r in results:
        if r.test_roc is not None:
            roc[r.approach] = (r.test_roc.fpr, r.test_roc.tpr)
    return roc


def _replication_job(args):
    spec, rep, pool = args
    results = run_replication(spec, rep, pool)
    roc = _write_replication(spec.output_dir, rep, results)
    return rep, roc


def run_experiment(spec):
    """Run every replication, writing results into ``spec.output_dir``.

    Finished replications stay on disk if a later one fails.  Returns the
    aggregate rows written to ``aggregate.csv``.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in [*out.glob("rep_*.jsonl"), *out.glob("time_*.json"), *out.glob("roc_*.csv")]:
        stale.unlink()
    (out / "config.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")

    shared_pool = None if spec.synthetic else load_manifest(spec.dataset["manifest"])
    if shared_pool is not None:
        warn_column_scales(shared_pool)
    jobs = [(spec, rep, shared_pool) for rep in range(spec.replications)]
    rocs = {}
    if spec.workers == 1:
        for job in jobs:
            rep, roc = _replication_job(job)
            rocs[rep] = roc
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            for rep, roc in ex.map(_replication_job, jobs):
                rocs[rep] = roc
    _write_rocs(out, rocs)
    return build_report(out)


def warn_column_scales(pool, ratio=10.0):
    """Warn when non-intercept column variances differ by more than ``ratio``.

    The gradient criterion scales with column scale, so such data should be
    standardized before use.
    """
    cols = [j for j in range(pool.P) if j != pool.intercept]
    if not cols:
        return False
    var = pool.X[np.ix_(pool.train_idx, cols)].var(axis=0)
    var = var[var > 0]
    if var.size and var.max() > ratio * var.min():
        log.warning(
            "column variances range from %.3g to %.3g (more than %gx); variable selection "
            "by gradient magnitude favours large-scale columns, consider standardizing",
            var.min(), var.max(), ratio,
        )
        return True
    return False


def _write_rocs(out, rocs):
    for approach in APPROACHES:
        rows = [(rep, f, t) for rep in sorted(rocs) for f, t in zip(*rocs[rep].get(approach, ((), ())))]
        if not rows:
            continue
        with (out / f"roc_{approach}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "fpr", "tpr"])
            for rep, f, t in rows:
                w.writerow([rep, repr(float(f)), repr(float(t))])


class CorruptResults(GateError):
    pass


def read_records(out_dir):
    """Parse every ``rep_<k>.jsonl`` in ``out_dir`` (sorted by replication).

    Raises :class:`CorruptResults` naming the file and line of the first bad
    record, or when a record carries an unknown schema version.
    """
    out = Path(out_dir)
    if not out.is_dir():
        raise CorruptResults(f"no results: {out} is not a directory")
    files = sorted(out.glob("rep_*.jsonl"), key=lambda p: _rep_number(p))
    if not files:
        raise CorruptResults(f"no results in {out}")
    records = []
    for path in files:
        try:
            text = path.read_text()
        except OSError as exc:
            raise CorruptResults(f"{path}: unreadable ({exc})") from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptResults(f"{path}, line {lineno}: corrupt record ({exc.msg})") from None
            if not isinstance(rec, dict) or "schema" not in rec:
                raise CorruptResults(f"{path}, line {lineno}: not a result record")
            if rec["schema"] != SCHEMA_VERSION:
                raise CorruptResults(
                    f"{path}, line {lineno}: schema version {rec['schema']!r} is not supported "
                    f"(this version reads {SCHEMA_VERSION})"
                )
            missing = {"approach", "rep", "n", "selected_vars", "train", "test"} - set(rec)
            if missing:
                raise CorruptResults(f"{path}, line {lineno}: missing fields {sorted(missing)}")
            records.append(rec)
    return records


def _rep_number(path):
    try:
        return int(path.stem.split("_", 1)[1])
    except (IndexError, ValueError):
        return -1


def _read_times(out):
    times = {}
    for path in out.glob("time_*.json"):
        try:
            times[_rep_number(path)] = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
    return times


def record_metrics(rec, wall_time=None):
    sel = rec.get("selection") or {}
    return {
        "n": rec["n"],
        "train_acc": rec["train"].get("acc"),
        "train_auc": rec["train"].get("auc"),
        "test_acc": rec["test"].get("acc"),
        "test_auc": rec["test"].get("auc"),
        "tpr": sel.get("tpr"),
        "fpr": sel.get("fpr"),
        "n_vars": len(rec["selected_vars"]),
        "time": wall_time,
    }


AGGREGATE_COLUMNS = ["approach", "reps"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "sd")] + [
    "sd_flag"
]


def summarize_records(records, times=None):
    """Aggregate rows keyed by approach, in A-B-C-D order."""
    times = times or {}
    by_approach = {}
    for rec in records:
        t = times.get(rec["rep"], {}).get(rec["approach"])
        by_approach.setdefault(rec["approach"], []).append(record_metrics(rec, t))
    table = {}
    for approach in APPROACHES:
        if approach in by_approach:
            table[approach] = aggregate(by_approach[approach], METRICS)
    return table


def build_report(out_dir):
    """(Re)write aggregate.csv, comparison.txt and varfreq.csv from the records."""
    out = Path(out_dir)
    records = read_records(out)
    table = summarize_records(records, _read_times(out))
    with (out / "aggregate.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for approach, rows in table.items():
            line = [approach, max(r.count for r in rows)]
            for r in rows:
                line += [_fmt(r.mean), _fmt(r.sd)]
            line.append(int(any(r.sd_flagged for r in rows if r.count)))
            w.writerow(line)
    (out / "comparison.txt").write_text(format_comparison(table))
    _write_varfreq(out, records)
    return table


def _fmt(x):
    return "" if x is None or np.isnan(x) else repr(float(x))


def format_comparison(table):
    cols = ["n", "train_acc", "train_auc", "test_acc", "test_auc", "tpr", "fpr", "n_vars"]
    head = f"{'approach':<40}" + "".join(f"{c:>14}" for c in cols)
    lines = [head, "-" * len(head)]
    for approach, rows in table.items():
        by_metric = {r.metric: r for r in rows}
        label = f"({approach}) {APPROACH_NAMES[approach]}"
        mean = "".join(f"{_cell(by_metric[c].mean):>14}" for c in cols)
        sd = "".join(f"{'(' + _cell(by_metric[c].sd) + ')':>14}" if by_metric[c].count else f"{'':>14}"
                     for c in cols)
        lines.append(f"{label:<40}{mean}")
        lines.append(f"{'':<40}{sd}")
    return "\n".join(lines) + "\n"


def _cell(x):
    return "" if np.isnan(x) else f"{x:.3f}"


def _write_varfreq(out, records):
    gate = [r for r in records if r["approach"] == "A"]
    if not gate:
        return
    counts = {}
    for r in gate:
        for v in r["selected_vars"]:
            counts[v] = counts.get(v, 0) + 1
    P = max(counts) + 1
    config = out / "config.json"
    if config.is_file():
        try:
            P = max(P, int(json.loads(config.read_text())["dataset"]["P"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            pass
    with (out / "varfreq.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["var", "count", "frequency"])
        for v in range(P):
            c = counts.get(v, 0)
            w.writerow([v, c, repr(c / len(gate))])
