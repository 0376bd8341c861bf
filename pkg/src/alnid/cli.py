"""Command-line pipeline: ingest -> train -> relearn -> zsl, plus an all-in-one report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import dtree, kdd, relearn, zsl

log = logging.getLogger("alnid")

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STRICT = 0, 1, 2, 3
SEEN_ACCURACY_BOUND = 0.99
SUBSAMPLE_ACCURACY_BOUND = 0.98


class DataError(Exception):
    pass


class StrictViolation(Exception):
    pass


@dataclass
class RunConfig:
    data: str | None = None
    out: str = "run"
    min_leaf_size: int = 2
    max_depth: int | None = None
    gamma: float = 1.0
    lam: float = 1.0
    k: int = 1
    grid_search: bool = False
    seed: int = 0
    subsample: int | None = None
    strict: bool = False
    tree_target: str = "class"
    train_level: str = "class"
    knn_mode: str = "signature"

    def validate(self) -> None:
        if self.data is None:
            raise ValueError("no dataset given (--data or config 'data')")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.gamma <= 0 or self.lam <= 0:
            raise ValueError("gamma and lambda must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.subsample is not None and self.subsample < 1:
            raise ValueError("subsample must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.tree_target not in ("class", "category"):
            raise ValueError("tree_target must be 'class' or 'category'")
        if self.train_level not in ("class", "category"):
            raise ValueError("train_level must be 'class' or 'category'")
        if self.knn_mode not in ("signature", "instance"):
            raise ValueError("knn_mode must be 'signature' or 'instance'")


def load_config(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.pop("version", None)
    if version != CONFIG_VERSION:
        raise ValueError(f"unsupported config version {version!r}")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return doc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = asdict(RunConfig())
    if args.config:
        values.update(load_config(args.config))
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- file output

def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def write_stats_csv(path: Path, stats: dict[str, dict[str, float]]) -> None:
    write_csv(path, ["attribute", "min", "max", "mean", "stddev"],
              [[name, *(_fmt(s[k]) for k in ("min", "max", "mean", "stddev"))] for name, s in stats.items()])


def read_stats_csv(path: Path) -> dict[str, dict[str, float]]:
    return {r["attribute"]: {k: float(r[k]) for k in ("min", "max", "mean", "stddev")} for r in read_csv(path)}


def write_census_csv(path: Path, counts: dict[str, int]) -> None:
    write_csv(path, ["class", "category", "count"],
              [[name, kdd.CLASSES[name].category, n] for name, n in counts.items()])


def read_census_csv(path: Path) -> dict[str, int]:
    return {r["class"]: int(r["count"]) for r in read_csv(path)}


def write_confusion_csv(path: Path, result: zsl.EvalResult) -> None:
    write_csv(path, ["truth", *result.labels],
              [[lab, *row] for lab, row in zip(result.labels, result.confusion.tolist())])


def write_learned_csv(path: Path, learned: kdd.Dataset) -> None:
    cats = learned.categories
    rows = ([*(int(v) for v in feats), lab, cat]
            for feats, lab, cat in zip(learned.features.tolist(), learned.labels, cats))
    write_csv(path, [f"{a}'" for a in kdd.ATTRIBUTES] + ["class", "category"], rows)


def read_learned_csv(path: Path) -> kdd.Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    feats = np.array([[int(v) for v in r[:-2]] for r in rows], dtype=float).reshape(len(rows), len(kdd.ATTRIBUTES))
    return kdd.Dataset(feats, [r[-2] for r in rows])


# ---------------------------------------------------------------- stages

def stats_table(dataset: kdd.Dataset) -> dict[str, dict[str, float]]:
    return {name: kdd.attribute_stats(dataset, i) for i, name in enumerate(kdd.ATTRIBUTES)}


def load_data(cfg: RunConfig) -> tuple[kdd.Dataset, dict]:
    """Load the dataset, check the census against the class table, and subsample if asked."""
    try:
        data = kdd.load_dataset(cfg.data)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    except (kdd.KddFormatError, UnicodeDecodeError) as exc:
        raise DataError(f"{cfg.data}: {exc}") from exc
    if len(data) == 0:
        raise DataError(f"{cfg.data}: dataset is empty")
    counts = kdd.census(data)
    mismatches = kdd.census_mismatches(counts)
    info = {
        "instances": len(data), "census": counts, "category_census": kdd.category_census(data),
        "census_matches_reference": not mismatches and len(data) == kdd.CANONICAL_TOTAL,
        "census_mismatches": {k: {"found": f, "expected": e} for k, (f, e) in mismatches.items()},
    }
    if cfg.strict and not info["census_matches_reference"]:
        raise StrictViolation(f"census differs from the reference for {len(mismatches)} classes")
    if cfg.subsample is not None:
        data = kdd.stratified_subsample(data, cfg.subsample, cfg.seed)
        info["subsample"] = {"size": cfg.subsample, "seed": cfg.seed, "instances": len(data)}
    return data, info


def stage_ingest(cfg: RunConfig, out: Path, data: kdd.Dataset, info: dict) -> dict:
    full_stats = stats_table(data)
    comparison = kdd.compare_stats(full_stats)
    hard_fail = [r for r in comparison if not r["ok"] and not r["soft"]]
    soft_fail = [r for r in comparison if not r["ok"] and r["soft"]]
    for r in soft_fail:
        log.warning("%s %s: found %s, reference %s (reported, not enforced)",
                    r["attribute"], r["statistic"], r["found"], r["expected"])
    write_census_csv(out / "census.csv", kdd.census(data))
    write_stats_csv(out / "stats_original.csv", full_stats)
    report = {**info, "stats": full_stats, "stats_comparison": comparison,
              "stats_match_reference": not hard_fail, "stats_soft_mismatches": soft_fail}
    write_json(out / "ingest.json", report)
    return report


def _tree_labels(ds: kdd.Dataset, target: str):
    return ds.categories if target == "category" else ds.labels


def stage_train(cfg: RunConfig, out: Path, data: kdd.Dataset) -> tuple[dtree.DecisionTree, dict]:
    split = kdd.split_zero_shot(data)
    seen = split.seen
    if len(seen) == 0:
        raise DataError("no seen-class instances to train on")
    y = _tree_labels(seen, cfg.tree_target)
    tree = dtree.build_tree(seen.features, y, cfg.min_leaf_size, cfg.max_depth)
    accuracy = float(np.mean(tree.predict(seen.features) == np.asarray(y)))
    (out / "tree.json").write_text(tree.to_json() + "\n")
    rules = dtree.extract_rules(tree)
    (out / "rules.txt").write_text(dtree.format_rules(rules))
    bound = SUBSAMPLE_ACCURACY_BOUND if cfg.subsample is not None else SEEN_ACCURACY_BOUND
    metrics = {
        "seen_instances": len(seen), "unseen_instances": len(split.unseen),
        "tree_target": cfg.tree_target, "training_accuracy": accuracy,
        "leaf_count": tree.leaf_count, "node_count": tree.node_count, "rule_count": len(rules),
        "max_depth": tree.max_leaf_depth, "accuracy_bound": bound, "accuracy_ok": accuracy >= bound,
    }
    write_json(out / "train_metrics.json", metrics)
    if cfg.strict and not metrics["accuracy_ok"]:
        raise StrictViolation(f"training accuracy {accuracy:.4f} below {bound}")
    return tree, metrics


def load_tree(out: Path) -> dtree.DecisionTree:
    path = out / "tree.json"
    if not path.exists():
        raise DataError(f"{path} not found; run 'train' first")
    tree = dtree.DecisionTree.from_json(path.read_text())
    if tree.n_attributes != len(kdd.ATTRIBUTES):
        raise DataError(f"schema-mismatch: tree has {tree.n_attributes} attributes")
    return tree


def stage_relearn(cfg: RunConfig, out: Path, data: kdd.Dataset, tree: dtree.DecisionTree) -> dict:
    learned = relearn.relearn_dataset(tree, data)
    write_learned_csv(out / "learned.csv", learned)
    stats = {name: relearn.learned_stats(learned, i) for i, name in enumerate(kdd.ATTRIBUTES)}
    write_stats_csv(out / "stats_learned.csv", stats)
    sep = relearn.separability_report(data, learned)
    write_json(out / "separability.json", sep.to_dict())
    write_csv(out / "separability.csv", ["attribute", "fisher_original", "fisher_learned", "learned_better"],
              [[r["attribute"], repr(r["fisher_original"]), repr(r["fisher_learned"]), int(r["learned_better"])]
               for r in sep.rows()])
    hist_rows = []
    for name, kinds in sep.histograms.items():
        for kind, h in kinds.items():
            for group, counts in h["counts"].items():
                for b, c in enumerate(counts):
                    hist_rows.append([name, kind, group, repr(h["edges"][b]), repr(h["edges"][b + 1]), c])
    write_csv(out / "histograms.csv", ["attribute", "kind", "group", "lo", "hi", "count"], hist_rows)
    better = int(sum(sep.improved))
    if better < 7:
        log.warning("learned attributes separate better on only %d of 12 attributes", better)
    root = int(tree.feature[0])
    return {
        "learned_stats": stats, "separability_better_count": better,
        "root_attribute": kdd.ATTRIBUTES[root] if root >= 0 else None,
        "root_min": stats[kdd.ATTRIBUTES[root]]["min"] if root >= 0 else None,
        "all_integral": bool(np.all(learned.features == np.round(learned.features)) and np.all(learned.features >= 0)),
    }


def stage_zsl(cfg: RunConfig, out: Path, data: kdd.Dataset, tree: dtree.DecisionTree) -> dict:
    split = kdd.split_zero_shot(data)
    if len(split.seen) == 0:
        raise DataError("no seen-class instances")
    seen_l = relearn.relearn_dataset(tree, split.seen)
    unseen_l = relearn.relearn_dataset(tree, split.unseen)
    seed = cfg.seed if cfg.grid_search else None
    run = zsl.zero_shot_run(seen_l, unseen_l, cfg.gamma, cfg.lam, cfg.k, cfg.train_level, cfg.knn_mode,
                            grid_search_seed=seed)
    base = zsl.zero_shot_run(split.seen, split.unseen, cfg.gamma, cfg.lam, cfg.k, cfg.train_level, cfg.knn_mode,
                             normalize=True, grid_search_seed=seed)
    zsl.save_model(out / "model.json", run.model, run.train_signatures, run.infer_signatures)
    write_confusion_csv(out / "confusion_eszsl.csv", run.eszsl)
    write_confusion_csv(out / "confusion_knn.csv", run.knn)

    def summary(r: zsl.ZeroShotRun) -> dict:
        return {"gamma": r.model.gamma, "lambda": r.model.lam, "residual": r.residual,
                "eszsl": r.eszsl.to_dict(), "knn": r.knn.to_dict(), "grid": r.grid}

    report = {
        "unseen_instances": len(split.unseen), "train_level": cfg.train_level,
        "knn_mode": cfg.knn_mode, "k": cfg.k,
        "learned": summary(run), "baseline_original": summary(base),
        "residual_ok": run.residual <= 1e-8,
        "beats_uniform": max(run.eszsl.accuracy, run.knn.accuracy) > 1 / len(kdd.CATEGORIES),
    }
    write_json(out / "eval.json", report)
    print(f"ESZSL residual: {run.residual:.3e} ({'ok' if report['residual_ok'] else 'FAIL'})")
    print(f"unseen category accuracy: ESZSL {run.eszsl.accuracy:.4f}, k-NN {run.knn.accuracy:.4f} "
          f"(baseline ESZSL {base.eszsl.accuracy:.4f}, k-NN {base.knn.accuracy:.4f})")
    return report


# ---------------------------------------------------------------- commands

def cmd_ingest(cfg: RunConfig, out: Path) -> dict:
    data, info = load_data(cfg)
    report = stage_ingest(cfg, out, data, info)
    print(f"{info['instances']} instances; census matches reference: {info['census_matches_reference']}")
    return report


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    data, _ = load_data(cfg)
    _, metrics = stage_train(cfg, out, data)
    print(f"training accuracy {metrics['training_accuracy']:.4f}; {metrics['leaf_count']} leaves, "
          f"depth {metrics['max_depth']}")
    return metrics


def cmd_relearn(cfg: RunConfig, out: Path) -> dict:
    data, _ = load_data(cfg)
    return stage_relearn(cfg, out, data, load_tree(out))


def cmd_zsl(cfg: RunConfig, out: Path) -> dict:
    data, _ = load_data(cfg)
    return stage_zsl(cfg, out, data, load_tree(out))


def cmd_report(cfg: RunConfig, out: Path) -> dict:
    data, info = load_data(cfg)
    ingest = stage_ingest(cfg, out, data, info)
    tree, train = stage_train(cfg, out, data)
    learned = stage_relearn(cfg, out, data, tree)
    zero_shot = stage_zsl(cfg, out, data, tree)
    report = {
        "config": asdict(cfg),
        "census_matches_reference": ingest["census_matches_reference"],
        "stats_match_reference": ingest["stats_match_reference"],
        "train": train, "relearn": {k: v for k, v in learned.items() if k != "learned_stats"},
        "zero_shot": {
            "residual": zero_shot["learned"]["residual"],
            "eszsl_accuracy": zero_shot["learned"]["eszsl"]["accuracy"],
            "knn_accuracy": zero_shot["learned"]["knn"]["accuracy"],
            "baseline_eszsl_accuracy": zero_shot["baseline_original"]["eszsl"]["accuracy"],
            "baseline_knn_accuracy": zero_shot["baseline_original"]["knn"]["accuracy"],
        },
    }
    write_json(out / "report.json", report)
    return report


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "relearn": cmd_relearn, "zsl": cmd_zsl, "report": cmd_report}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--data", help="KDD Cup 99 file (plain or compressed)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict", action="store_true", help="abort (exit 3) on reference mismatches")
    common.add_argument("--subsample", type=int, help="stratified subsample size")
    common.add_argument("--seed", type=int, help="subsampling / holdout seed")
    common.add_argument("--min-leaf-size", dest="min_leaf_size", type=int)
    common.add_argument("--max-depth", dest="max_depth", type=int)
    common.add_argument("--gamma", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--grid-search", dest="grid_search", action="store_true")
    common.add_argument("--tree-target", dest="tree_target", choices=["class", "category"])
    common.add_argument("--train-level", dest="train_level", choices=["class", "category"])
    common.add_argument("--knn-mode", dest="knn_mode", choices=["signature", "instance"])
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="alnid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"alnid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except StrictViolation as exc:
        print(f"alnid: strict: {exc}", file=sys.stderr)
        return EXIT_STRICT
    except DataError as exc:
        print(f"alnid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
