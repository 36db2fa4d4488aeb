"""Command-line front end: ``gate run | validate | report``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import GateError, InvalidSpec
from .experiment import CorruptResults, ExperimentSpec, build_report, run_experiment

log = logging.getLogger("gatelearn")

# flag -> (section, key, type)
_OVERRIDES = {
    "case": ("dataset", "case", int),
    "N": ("dataset", "N", int),
    "P": ("dataset", "P", int),
    "test_size": ("dataset", "test_size", int),
    "n0": ("gate", "n0", int),
    "nq": ("gate", "n_q", int),
    "h": ("gate", "h", int),
    "alpha": ("gate", "alpha", float),
    "epsilon": ("gate", "epsilon", float),
    "max_vars": ("gate", "max_vars", int),
}


def _build_parser():
    p = argparse.ArgumentParser(prog="gate", description="Greedy active learning for logistic regression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run replicated experiments")
    run.add_argument("--spec", help="experiment spec (JSON); flags below override it")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--case", type=int, choices=(1, 2, 3), help="synthetic case preset")
    src.add_argument("--dataset", metavar="MANIFEST", help="CSV dataset manifest (JSON)")
    run.add_argument("--reps", type=int, help="number of replications")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, help="parallel replication workers")
    run.add_argument("--baselines", help="subset of BCD to run alongside GATE, e.g. BCD or ''")
    run.add_argument("--N", type=int, help="synthetic pool size")
    run.add_argument("--P", type=int, help="synthetic variable count")
    run.add_argument("--test-size", dest="test_size", type=int)
    run.add_argument("--fixed-means", action="store_true", help="draw column means once for all reps")
    run.add_argument("--n0", type=int)
    run.add_argument("--nq", type=int, help="batch size")
    run.add_argument("--h", type=int, help="candidate-scope order")
    run.add_argument("--alpha", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--max-vars", dest="max_vars", type=int)

    val = sub.add_parser("validate", help="check a spec file and print resolved defaults")
    val.add_argument("spec")

    rep = sub.add_parser("report", help="rebuild tables from a results directory")
    rep.add_argument("results_dir")
    return p


def _spec_from_args(args):
    base_dir = None
    d = {}
    if args.spec:
        path = Path(args.spec)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"cannot read spec {path}: {exc}") from None
        base_dir = path.parent
    d.setdefault("dataset", {})
    d.setdefault("gate", {})
    if args.dataset:
        d["dataset"] = {"manifest": str(Path(args.dataset).absolute())}
    for flag, (section, key, _) in _OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            if section == "dataset" and "manifest" in d["dataset"]:
                raise InvalidSpec(f"--{flag} only applies to synthetic datasets")
            d[section][key] = value
    if args.fixed_means:
        d["dataset"]["fixed_means"] = True
    if args.reps is not None:
        d["replications"] = args.reps
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["output_dir"] = args.out
    if args.workers is not None:
        d["workers"] = args.workers
    if args.baselines is not None:
        d["baselines"] = list(args.baselines.upper())
    return ExperimentSpec.from_dict(d, base_dir=base_dir)


def cmd_run(args):
    try:
        spec = _spec_from_args(args)
    except InvalidSpec as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 2
    try:
        table = run_experiment(spec)
    except (GateError, OSError) as exc:
        print(f"run failed: {exc}; finished replications kept in {spec.output_dir}", file=sys.stderr)
        return 1
    out = Path(spec.output_dir)
    print((out / "comparison.txt").read_text(), end="")
    print(f"results written to {out} ({spec.replications} replications, approaches "
          f"{''.join(table)})")
    return 0


def cmd_validate(args):
    try:
        spec = ExperimentSpec.load(args.spec)
    except InvalidSpec as exc:
        print(f"invalid spec {args.spec}:\n{exc}", file=sys.stderr)
        return 2
    print(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_report(args):
    try:
        build_report(args.results_dir)
    except CorruptResults as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    print((Path(args.results_dir) / "comparison.txt").read_text(), end="")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"run": cmd_run, "validate": cmd_validate, "report": cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
