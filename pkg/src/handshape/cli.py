"""Command-line interface.

Stages hand off through files under ``--output-dir``::

    canonical/                 canonical, mask and contour PNGs per sample
    stages/                    debug stage images (--debug-stages)
    descriptors_<kind>.json    descriptor sets per sample
    model_<kind>.json          trained ProbSom model
    report_<protocol>*.{json,csv}
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import probsom
from .dataset import Dataset, SampleRecord, load_manifest, manifest_from_directory, write_manifest
from .errors import HandshapeError
from .estimators import ProbSomClassifier, extract_descriptors
from .evaluation import KNNBaseline, run_protocol, write_report
from .pipeline import (RunConfig, canonicalize_file, descriptors_for_dataset, map_items,
                       read_descriptors, save_canonical, save_stages, write_descriptors,
                       write_descriptors_csv)

log = logging.getLogger("handshape")

SOM_FLAGS = {
    "grid_rows": "grid_rows", "grid_cols": "grid_cols", "epochs": "epochs",
    "learning_rate": "initial_learning_rate", "final_learning_rate": "final_learning_rate",
    "radius": "initial_radius", "final_radius": "final_radius",
}


def _config(args):
    overrides = {
        "manifest": getattr(args, "manifest", None),
        "output_dir": args.output_dir,
        "model": getattr(args, "model", None),
        "descriptor": getattr(args, "descriptor", None),
        "radon_input": getattr(args, "radon_input", None),
        "segmentation": getattr(args, "segmentation", None),
        "protocol": getattr(args, "protocol", None),
        "repetitions": getattr(args, "repetitions", None),
        "test_fraction": getattr(args, "test_fraction", None),
        "seed": args.seed,
        "jobs": args.jobs,
        "debug_stages": True if args.debug_stages else None,
        "top_k": getattr(args, "top_k", None),
    }
    if args.config:
        config = RunConfig.from_file(args.config, **overrides)
    else:
        config = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    som = dict(config.som)
    for flag, key in SOM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            som[key] = value
    config.som = som
    return config


def _out(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(config):
    if not config.manifest:
        raise HandshapeError("a manifest is required (--manifest or config file)")
    return load_manifest(config.manifest, class_names=config.class_names, check_files=False)


def _report_failures(failures, dataset):
    for i, msg in failures:
        log.error("%s (%s): %s", dataset.records[i].sample_id, dataset.records[i].image_path, msg)
    return 1 if failures else 0


def cmd_make_manifest(args):
    dataset = manifest_from_directory(args.image_dir, one_based=not args.zero_based,
                                      **({"pattern": args.pattern} if args.pattern else {}))
    out = Path(args.out) if args.out else Path(args.image_dir) / "manifest.csv"
    write_manifest(dataset, out)
    log.info("wrote %d records to %s", len(dataset), out)
    return 0


def cmd_preprocess(args, config=None):
    config = config or _config(args)
    dataset = _load_dataset(config)
    out = _out(config)
    canonical_dir = out / "canonical"
    canonical_dir.mkdir(exist_ok=True)

    def one(record):
        canonical = canonicalize_file(record.image_path, config, keep_stages=config.debug_stages)
        save_canonical(canonical, canonical_dir, record.sample_id)
        if config.debug_stages:
            save_stages(canonical, out / "stages", record.sample_id)
        return True

    results, failures = map_items(one, dataset.records, config.jobs)
    with open(canonical_dir / "status.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample_id", "path", "status"])
        failed = dict(failures)
        for i, rec in enumerate(dataset.records):
            w.writerow([rec.sample_id, rec.image_path, failed.get(i, "ok")])
    log.info("canonicalized %d/%d images into %s", sum(r is not None for r in results),
             len(dataset), canonical_dir)
    return _report_failures(failures, dataset)


def _descriptor_path(out, kind):
    return out / f"descriptors_{kind}.json"


def cmd_extract(args, config=None):
    config = config or _config(args)
    dataset = _load_dataset(config)
    out = _out(config)
    canonical_dir = None if getattr(args, "from_images", False) else out / "canonical"
    if canonical_dir is not None and not canonical_dir.is_dir():
        log.error("no canonical images under %s; run 'preprocess' first", canonical_dir)
        return 1
    sets, failures = descriptors_for_dataset(dataset, config, canonical_dir, config.jobs)
    path = _descriptor_path(out, config.descriptor)
    write_descriptors(path, dataset, sets, config.descriptor)
    if getattr(args, "csv", False):
        write_descriptors_csv(path.with_suffix(".csv"), dataset, sets)
    log.info("wrote %d descriptor sets to %s", sum(s is not None for s in sets), path)
    return _report_failures(failures, dataset)


def _descriptors_arg(args, config, out):
    path = getattr(args, "descriptors", None)
    return Path(path) if path else _descriptor_path(out, config.descriptor)


def _estimator(config, class_names, classifier="probsom"):
    if classifier == "knn":
        return KNNBaseline(k_neighbors=config.som.get("k_neighbors", 1), n_classes=len(class_names))
    som = {k: v for k, v in config.som.items() if k != "k_neighbors"}
    return ProbSomClassifier(class_names=list(class_names), random_state=config.seed, **som)


def cmd_train(args, config=None):
    config = config or _config(args)
    out = _out(config)
    dataset, sets, kind = read_descriptors(_descriptors_arg(args, config, out))
    clf = _estimator(config, dataset.class_names).fit(sets, dataset.labels)
    model_path = Path(config.model) if config.model else out / f"model_{kind}.json"
    probsom.save_model(clf.model_, model_path)
    log.info("trained %dx%d ProbSom on %d samples (%s); model written to %s",
             clf.grid_rows, clf.grid_cols, len(sets), kind, model_path)
    return 0


def cmd_predict(args, config=None):
    config = config or _config(args)
    out = _out(config)
    if not config.model:
        log.error("--model is required")
        return 1
    model = probsom.load_model(config.model)
    if args.image:
        records = [SampleRecord(Path(p), 0, 0, 0) for p in args.image]
        dataset = Dataset(records, list(model.class_names))
        sets, failures = map_items(
            lambda r: extract_descriptors(canonicalize_file(r.image_path, config),
                                          model.descriptor_kind, config.radon_input),
            records, config.jobs)
        truth = [None] * len(records)
    else:
        dataset, sets, kind = read_descriptors(_descriptors_arg(args, config, out))
        if kind != model.descriptor_kind:
            log.error("descriptor kind mismatch: descriptors are %r but the model expects %r",
                      kind, model.descriptor_kind)
            return 1
        failures = []
        truth = [r.class_id for r in dataset.records]
    k = min(config.top_k, model.n_classes)
    rows = []
    for rec, ds, true in zip(dataset.records, sets, truth):
        if ds is None:
            continue
        cs = probsom.classify(model, ds)
        top = cs.ranking[:k]
        name = rec.sample_id if true is not None else str(rec.image_path)
        rows.append([name, "" if true is None else true]
                    + [f"{int(c)}:{cs.scores[c]!r}" for c in top])
    target = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(target, lineterminator="\n")
        w.writerow(["sample", "true_class"] + [f"rank{i + 1}" for i in range(k)])
        w.writerows(rows)
    finally:
        if args.out:
            target.close()
    return _report_failures(failures, dataset)


def cmd_evaluate(args, config=None):
    config = config or _config(args)
    out = _out(config)
    dataset, sets, kind = read_descriptors(_descriptors_arg(args, config, out))
    classifier = getattr(args, "classifier", None) or "probsom"
    estimator = _estimator(config, dataset.class_names, classifier)
    report = run_protocol(sets, dataset, config.protocol, config.repetitions, config.seed,
                          estimator, config.test_fraction, config.jobs,
                          config={"descriptor": kind, "classifier": classifier})
    prefix = f"report_{config.protocol}_{kind}" + ("" if classifier == "probsom" else f"_{classifier}")
    paths = write_report(report, out, prefix)
    log.info("%s %s: mean accuracy %.4f (std %.4f) over %d folds; top-2 %.4f",
             config.protocol, kind, report.mean, report.std_dev, len(report.per_fold_accuracy),
             report.top_k_accuracy.get(2, float("nan")))
    log.info("report written to %s", paths["json"])
    print(json.dumps({"protocol": report.protocol, "mean": report.mean, "std_dev": report.std_dev,
                      "top_k_accuracy": {str(k): v for k, v in report.top_k_accuracy.items()
                                         if k <= 3}}))
    return 0


def cmd_run_all(args):
    config = _config(args)
    status = cmd_preprocess(args, config)
    status |= cmd_extract(args, config)
    args.descriptors = None
    status |= cmd_evaluate(args, config)
    status |= cmd_train(args, config)
    return status


def _add_global(p):
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default 1)")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--debug-stages", action="store_true",
                   help="write the five canonicalization stage images per input")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_pipeline(p, manifest=True):
    if manifest:
        p.add_argument("--manifest")
    p.add_argument("--descriptor", choices=("radon-local", "radon-global", "sift"))
    p.add_argument("--radon-input", choices=("intensity", "mask"))
    p.add_argument("--segmentation", choices=("auto", "glove", "segmented"))


def _add_som(p):
    p.add_argument("--grid-rows", type=int)
    p.add_argument("--grid-cols", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--final-learning-rate", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--final-radius", type=float)


def _add_eval(p):
    p.add_argument("--protocol", choices=("random-cv", "inter-subject"))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--classifier", choices=("probsom", "knn"), default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="handshape",
                                     description="Handshape classification with ProbSom.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-manifest", help="build a manifest from LSA16-style file names")
    _add_global(p)
    p.add_argument("image_dir")
    p.add_argument("--out")
    p.add_argument("--pattern", help="regex with named groups cls, subject, repetition")
    p.add_argument("--zero-based", action="store_true")
    p.set_defaults(func=cmd_make_manifest)

    p = sub.add_parser("preprocess", help="segment and canonicalize every image")
    _add_global(p)
    _add_pipeline(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("extract", help="compute descriptor sets")
    _add_global(p)
    _add_pipeline(p)
    p.add_argument("--from-images", action="store_true",
                   help="canonicalize on the fly instead of reading canonical/")
    p.add_argument("--csv", action="store_true", help="also write a flat CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a ProbSom model")
    _add_global(p)
    _add_pipeline(p, manifest=False)
    _add_som(p)
    p.add_argument("--descriptors")
    p.add_argument("--model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="rank classes for descriptor sets or images")
    _add_global(p)
    _add_pipeline(p, manifest=False)
    p.add_argument("--model")
    p.add_argument("--descriptors")
    p.add_argument("--image", nargs="+")
    p.add_argument("--top-k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    _add_global(p)
    _add_pipeline(p, manifest=False)
    _add_som(p)
    _add_eval(p)
    p.add_argument("--descriptors")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-all", help="preprocess, extract, evaluate and train")
    _add_global(p)
    _add_pipeline(p)
    _add_som(p)
    _add_eval(p)
    p.add_argument("--model")
    p.set_defaults(func=cmd_run_all, from_images=False, csv=False, descriptors=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (HandshapeError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
