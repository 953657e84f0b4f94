"""Command-line entry point: ``mctsga prep | run | report``.

Exit codes: 0 success, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import _kernels
from .config import APPROACHES, RunConfig, apply_seeds, load_config
from .dataset import prepare, write_labeled_csv
from .errors import DataError, NumericalError, StructureError
from .genetic import run_ga, write_history_csv
from .genome import encode, load_genome, save_genome
from .mcts import run_mcts_ga
from .metrics import summarize, write_roc_csv
from .network import MlpSpec, forward, init_model, save_model, train

log = logging.getLogger("mctsga")

EXIT_INPUT = 2
EXIT_NUMERIC = 3

TABLE_ORDER = ("nn-sgd", "nn-adam", "ga", "mcts-ga")
TABLE_NAMES = {"nn-sgd": "Neural Net -SGD", "nn-adam": "Neural Net -ADAM",
               "ga": "Genetic Algorithm", "mcts-ga": "MCTS-GA"}


class _Artifacts:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.paths = []

    def path(self, name):
        p = self.out / name
        self.paths.append(p)
        return p

    def remove(self):
        for p in self.paths:
            p.unlink(missing_ok=True)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class Experiment:
    """All four approaches on one train/test split with one seed lineage."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.seeds = apply_seeds(cfg)
        self.spec = MlpSpec()
        self.train, self.test = prepare(cfg.data_path(), self.seeds["data"], cfg.data.test_fraction)
        self.workers = cfg.resolved_workers()
        self._trained = {}

    def trained_model(self, optimizer):
        if optimizer not in self._trained:
            tc = dataclasses.replace(self.cfg.train, optimizer=optimizer)
            model0 = init_model(self.spec, self.seeds["model_init"])
            self._trained[optimizer] = train(model0, self.train, tc)
        return self._trained[optimizer]

    def seed_genome(self):
        src = self.cfg.genome.seed_model
        if src == "adam":
            return encode(self.trained_model("adam")[0])
        if src == "untrained":
            return encode(init_model(self.spec, self.seeds["model_init"]))
        path = Path(src)
        if not path.is_file():
            raise DataError(f"genome.seed_model: {src}: no such file")
        g = load_genome(path)
        if list(g.lengths) != self.spec.segment_lengths:
            raise StructureError(f"{src}: genome does not match layers {self.spec.layer_sizes}")
        return g

    def run_network(self, name, art):
        t0 = time.perf_counter()
        model, history = self.trained_model(name.split("-")[1])
        metrics, roc = summarize(forward(model, self.test.features), self.test.labels)
        train_metrics, _ = summarize(forward(model, self.train.features), self.train.labels)
        entry = dict(metrics, train_accuracy=train_metrics["accuracy"],
                     final_loss=history[-1], wall_clock_seconds=time.perf_counter() - t0)
        write_roc_csv(roc, art.path(f"roc_{name}.csv"))
        _write_rows(art.path(f"history_{name}.csv"), ["epoch", "loss"],
                    [(i, repr(float(v))) for i, v in enumerate(history)])
        save_model(model, art.path(f"model_{name}.json"))
        return entry

    def run_ga(self, art):
        t0 = time.perf_counter()
        res = run_ga(self.seed_genome(), self.spec, self.train, self.test, self.cfg.ga,
                     self.cfg.genome.perturb_range, self.workers)
        entry = dict(res.test_metrics, train_accuracy=res.best.fitness,
                     fitness_evaluations=res.n_evals,
                     wall_clock_seconds=time.perf_counter() - t0)
        write_roc_csv(res.roc, art.path("roc_ga.csv"))
        write_history_csv(res.history, art.path("history_ga.csv"))
        save_genome(res.best, self.spec, art.path("genome_ga.json"))
        return entry

    def run_mcts(self, art):
        t0 = time.perf_counter()
        res = run_mcts_ga(self.seed_genome(), self.spec, self.train, self.test, self.cfg.ga,
                          self.cfg.mcts, self.cfg.genome.perturb_range, self.workers)
        search = {k: v for k, v in res.stats.items() if k != "incumbent_trace"}
        entry = dict(res.test_metrics, train_accuracy=res.best.fitness, search=search,
                     wall_clock_seconds=time.perf_counter() - t0)
        write_roc_csv(res.roc, art.path("roc_mcts-ga.csv"))
        _write_rows(art.path("history_mcts-ga.csv"), ["iteration", "incumbent_fitness"],
                    [(i, repr(float(v))) for i, v in enumerate(res.stats["incumbent_trace"])])
        save_genome(res.best, self.spec, art.path("genome_mcts-ga.json"))
        return entry

    def run(self, art):
        t0 = time.perf_counter()
        selected = APPROACHES if self.cfg.approach == "compare" else (self.cfg.approach,)
        results = {}
        for name in selected:
            log.info("running %s", name)
            if name.startswith("nn-"):
                results[name] = self.run_network(name, art)
            elif name == "ga":
                results[name] = self.run_ga(art)
            else:
                results[name] = self.run_mcts(art)
        return {
            "format": "mctsga-report/1",
            "config": self.cfg.to_flat(),
            "seeds": self.seeds,
            "data": {
                "n_train": len(self.train),
                "n_test": len(self.test),
                "train_class_counts": list(self.train.class_counts()),
                "test_class_counts": list(self.test.class_counts()),
            },
            "approaches": results,
            "runtime": {
                "out": str(art.out),
                "workers": self.workers,
                "backend": _kernels.BACKEND,
                "wall_clock_seconds": time.perf_counter() - t0,
            },
        }


def strip_timing(report):
    """Copy of a report without execution-environment and wall-clock fields."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items()
                if k != "runtime" and not k.endswith("seconds")}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report


def format_table(report):
    names = [n for n in TABLE_ORDER if n in report["approaches"]]
    head = f"{'':10s}" + "".join(f"{TABLE_NAMES[n]:>20s}" for n in names)
    lines = [head]
    for metric in ("accuracy", "recall", "auc"):
        lines.append(f"{metric:10s}" + "".join(
            f"{report['approaches'][n][metric]:>20.3f}" for n in names))
    lines.append("")
    for n in names:
        cm = report["approaches"][n]["confusion"]
        lines.append(f"{TABLE_NAMES[n]}: tp={cm['tp']} fp={cm['fp']} fn={cm['fn']} tn={cm['tn']}")
    return "\n".join(lines)


def cmd_prep(args):
    cfg = load_config(args.config, args.set)
    if args.csv:
        cfg.data.path = args.csv
    if args.seed is not None:
        cfg.seed = args.seed
    seeds = cfg.seeds()
    tr, te = prepare(cfg.data_path(), seeds["data"], cfg.data.test_fraction)
    art = _Artifacts(args.out or cfg.out)
    try:
        write_labeled_csv(tr, art.path("train.csv"))
        write_labeled_csv(te, art.path("test.csv"))
        with open(art.path("scaler.json"), "w", encoding="utf-8") as fh:
            json.dump(dict(tr.scaler.to_dict(), seed=cfg.seed, data_seed=seeds["data"],
                           test_fraction=cfg.data.test_fraction), fh, indent=1)
    except BaseException:
        art.remove()
        raise
    print(f"train: {len(tr)} rows {tr.class_counts()}  test: {len(te)} rows {te.class_counts()}")
    return 0


def cmd_run(args):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.approach:
        cfg.approach = args.approach
    if args.out:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    art = _Artifacts(cfg.out)
    try:
        report = Experiment(cfg).run(art)
        with open(art.path("report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    except BaseException:
        art.remove()
        raise
    print(format_table(report))
    return 0


def cmd_report(args):
    path = Path(args.report)
    if path.is_dir():
        path = path / "report.json"
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: no such report") from None
    print(format_table(report))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mctsga", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML file of dotted keys")
        sp.add_argument("--seed", type=int, help="global seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")

    sp = sub.add_parser("prep", help="balance, scale and split the dataset")
    common(sp)
    sp.add_argument("--csv", help="diabetes CSV (default: bundled Pima data)")
    sp.set_defaults(func=cmd_prep)

    sp = sub.add_parser("run", help="run one approach or the four-way comparison")
    common(sp)
    sp.add_argument("--approach", choices=APPROACHES + ("compare",))
    sp.add_argument("--workers", type=int, help="fitness evaluation threads (0 = all cores)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="print the summary table of a finished run")
    sp.add_argument("report", help="report.json or its directory")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, StructureError, OSError) as exc:
        print(f"mctsga: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FloatingPointError) as exc:
        print(f"mctsga: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
