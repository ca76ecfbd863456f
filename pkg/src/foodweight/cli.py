"""Command-line pipeline: fixtures, splitting, training, prediction, evaluation.

Subcommands: gen-fixture, split, train, predict, eval-detections, report.
Machine-readable outputs are JSON files with deterministic bytes; human
tables go to stdout; diagnostics (including the per-command seed header) go
to stderr.  A TOML config file may supply any flag value; explicit flags
win.
"""

import argparse
import sys
from pathlib import Path

from . import __version__
from ._kernels import BACKEND
from .dataset import (
    class_registry,
    generate_synthetic_fixture,
    load_manifest,
    stratified_split,
)
from .detect_eval import COCO_IOU_THRESHOLDS, evaluate_detections, format_detection_table
from .errors import (
    ConstantActuals,
    EmptyDataset,
    EmptyInput,
    FoodWeightError,
    MissingFile,
    UnknownClass,
)
from .fileio import (
    Prediction,
    ground_truth_boxes,
    read_detections,
    read_ground_truth,
    read_predictions,
    read_split,
    write_json,
    write_predictions,
    write_split,
)
from .geometry import clamp_to_image, iou
from .imaging import crop as crop_image, decode
from .nnet import TrainConfig, WeightModel, train
from .regress_eval import (
    WeightSample,
    evaluate_regression,
    format_per_class_table,
    format_regression_table,
    per_class_report,
)


def _load_config_file(path):
    if path is None:
        return {}
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    p = Path(path)
    if not p.exists():
        raise MissingFile(f"config file not found: {p}")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


class _Settings:
    """Flag values resolved against the optional config file (flags win)."""

    def __init__(self, args):
        self._args = vars(args)
        self._config = _load_config_file(self._args.get("config"))

    def get(self, name, default=None):
        value = self._args.get(name)
        if value is not None:
            return value
        for key in (name, name.replace("_", "-")):
            if key in self._config:
                return self._config[key]
        return default


def _log(command: str, seed, extra: str = "") -> None:
    msg = f"[foodweight {command}] seed={seed} kernels={BACKEND}"
    if extra:
        msg += " " + extra
    print(msg, file=sys.stderr)


def _parse_thresholds(text: str) -> tuple:
    """Parse '0.5,0.75' lists or '0.50:0.05:0.95' inclusive ranges."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad threshold range {text!r}, expected start:step:stop")
        start, step, stop = (float(v) for v in parts)
        if step <= 0:
            raise ValueError("threshold step must be positive")
        values = []
        k = 0
        while True:
            v = round(start + k * step, 10)
            if v > stop + 1e-9:
                break
            values.append(round(v, 4))
            k += 1
    else:
        values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError(f"no IoU thresholds in {text!r}")
    for v in values:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"IoU threshold {v} outside (0, 1]")
    return tuple(values)


# -- commands --------------------------------------------------------------------


def cmd_gen_fixture(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    _log("gen-fixture", seed)
    paths = generate_synthetic_fixture(
        out_dir=cfg.get("out"),
        num_classes=int(cfg.get("classes", 14)),
        per_class=int(cfg.get("per_class", 40)),
        image_size=int(cfg.get("image_size", 64)),
        weight_slope=float(cfg.get("slope", 0.002)),
        weight_intercept=float(cfg.get("intercept", 20.0)),
        noise=float(cfg.get("noise", 0.0)),
        seed=seed,
    )
    print(paths.manifest)
    print(paths.ground_truth)
    print(paths.images_dir)
    return 0


def cmd_split(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    _log("split", seed)
    ratios = tuple(float(v) for v in str(cfg.get("ratios", "0.6,0.2,0.2")).split(","))
    records = load_manifest(cfg.get("manifest"))
    assignment = stratified_split(records, ratios=ratios, seed=seed)
    write_split(cfg.get("out"), assignment)
    counts = assignment.counts()
    print(
        f"train={counts['train']} val={counts['val']} test={counts['test']}",
        file=sys.stderr,
    )
    return 0


def _predict_record(model, image, record_box, label):
    box = clamp_to_image(record_box, image.width, image.height)
    return model.forward(crop_image(image, box), label)


def _load_image(path: Path):
    with open(path, "rb") as fh:
        return decode(fh.read())


def cmd_train(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    out_dir = Path(cfg.get("out"))
    _log("train", seed)
    records = load_manifest(cfg.get("manifest"))
    registry = class_registry(records)
    split = read_split(cfg.get("split"))
    train_records = split.subset(records, "train")
    if not train_records:
        raise EmptyDataset("split assigns no records to train")
    first_image = _load_image(Path(train_records[0].image_path))
    config = TrainConfig(
        learning_rate=float(cfg.get("learning_rate", 1e-4)),
        batch_size=int(cfg.get("batch_size", 32)),
        epochs=int(cfg.get("epochs", 10)),
        seed=seed,
        flip_probability=float(cfg.get("flip_prob", 0.5)),
    )
    model = WeightModel.initialize(
        registry,
        channels=first_image.channels,
        pool_size=int(cfg.get("pool_size", 16)),
        seed=seed,
    )
    model, history = train(
        model,
        train_records,
        config,
        scaler_mode=cfg.get("scaler", "standardize"),
        threads=int(cfg.get("threads", 1)),
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = cfg.get("checkpoint") or out_dir / "checkpoint.json"
    model.save(checkpoint_path)
    write_json(out_dir / "loss_history.json", {"seed": seed, "loss": list(history)})

    reports = {}
    report_doc = {"seed": seed, "splits": {}}
    for name in ("train", "val", "test"):
        subset = split.subset(records, name)
        if len(subset) < 2:
            print(f"skipping {name} metrics: fewer than 2 records", file=sys.stderr)
            report_doc["splits"][name] = None
            continue
        actual = []
        predicted = []
        for rec in subset:
            image = _load_image(Path(rec.image_path))
            actual.append(rec.weight_grams)
            predicted.append(_predict_record(model, image, rec.gt_box, rec.label))
        try:
            rep = evaluate_regression(actual, predicted)
        except (EmptyInput, ConstantActuals) as exc:
            print(f"skipping {name} metrics: {exc}", file=sys.stderr)
            report_doc["splits"][name] = None
            continue
        reports[name] = rep
        report_doc["splits"][name] = rep.to_json_dict()
    write_json(out_dir / "report.json", report_doc)
    if reports:
        print(format_regression_table(reports))
    print(f"checkpoint written to {checkpoint_path}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    _log("predict", seed)
    model = WeightModel.load(cfg.get("checkpoint"))
    boxes_path = Path(cfg.get("boxes"))
    images_dir = Path(cfg.get("images_dir"))
    entries = _read_boxes_any(boxes_path)
    images = {}
    predictions = []
    for image_id, box, label, score in entries:
        if label not in model.registry:
            raise UnknownClass(f"label {label!r} not in model registry")
        if image_id not in images:
            images[image_id] = _load_image(_find_image(images_dir, image_id))
        image = images[image_id]
        weight = _predict_record(model, image, box, label)
        predictions.append(
            Prediction(
                image_id=image_id,
                label=label,
                box=box,
                predicted_weight_grams=weight,
                score=score,
            )
        )
    write_predictions(cfg.get("out"), predictions)
    print(f"{len(predictions)} predictions written", file=sys.stderr)
    return 0


def _find_image(images_dir: Path, image_id: str) -> Path:
    for suffix in (".png", ".jpg", ".jpeg"):
        candidate = images_dir / f"{image_id}{suffix}"
        if candidate.exists():
            return candidate
    raise MissingFile(f"no image file for id {image_id!r} under {images_dir}")


def _read_boxes_any(path: Path):
    """Accept either a detection dump or a ground-truth file as box input.

    Returns (image_id, box, label, score-or-None) tuples; an empty array
    yields an empty list.
    """
    import json as _json

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = _json.load(fh)
        except _json.JSONDecodeError as exc:
            raise FoodWeightError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise FoodWeightError(f"{path}: expected a JSON array of boxes")
    if not doc:
        return []
    if "score" in doc[0]:
        return [(d.image_id, d.box, d.label, d.score) for d in read_detections(path)]
    return [
        (e.image_id, e.box, e.label, None) for e in read_ground_truth(path)
    ]


def cmd_eval_detections(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    _log("eval-detections", seed)
    dets = read_detections(cfg.get("detections"))
    gt_entries = read_ground_truth(cfg.get("ground_truth"))
    gts = ground_truth_boxes(gt_entries)

    det_ids = {d.image_id for d in dets}
    gt_ids = {g.image_id for g in gts}
    orphans = sorted(det_ids.symmetric_difference(gt_ids))
    if orphans:
        print(
            f"warning: {len(orphans)} image ids present in only one file; "
            f"evaluating the intersection. Orphans: {', '.join(orphans)}",
            file=sys.stderr,
        )
        common = det_ids & gt_ids
        dets = [d for d in dets if d.image_id in common]
        gts = [g for g in gts if g.image_id in common]

    thresholds = COCO_IOU_THRESHOLDS
    raw = cfg.get("iou_thresholds")
    if raw:
        thresholds = _parse_thresholds(str(raw))
    interpolation = str(cfg.get("interpolation", "all-point")).replace("-", "_")
    report = evaluate_detections(dets, gts, thresholds, interpolation)
    out = cfg.get("out")
    if out:
        doc = report.to_json_dict()
        doc["seed"] = seed
        doc["iou_thresholds"] = list(thresholds)
        write_json(out, doc)
    print(format_detection_table(report))
    return 0


def cmd_report(args) -> int:
    cfg = _Settings(args)
    seed = int(cfg.get("seed", 0))
    _log("report", seed)
    predictions = read_predictions(cfg.get("predictions"))
    gt_entries = read_ground_truth(cfg.get("ground_truth"))
    gts_by_image = {}
    for entry in gt_entries:
        gts_by_image.setdefault(entry.image_id, []).append(entry)

    samples = []
    skipped = 0
    for pred in predictions:
        candidates = gts_by_image.get(pred.image_id, [])
        best = None
        best_iou = 0.0
        for entry in candidates:
            overlap = iou(pred.box, entry.box)
            if overlap > best_iou:
                best_iou = overlap
                best = entry
        if best is None:
            skipped += 1
            continue
        samples.append(
            WeightSample(
                label=best.label,
                actual=best.weight_grams,
                predicted=pred.predicted_weight_grams,
                confidence=1.0 if pred.score is None else pred.score,
            )
        )
    if skipped:
        print(
            f"warning: {skipped} predictions had no overlapping ground truth; skipped",
            file=sys.stderr,
        )
    if not samples:
        raise EmptyDataset("no predictions matched any ground truth")
    pcr = per_class_report(samples)
    try:
        regression = evaluate_regression(
            [s.actual for s in samples], [s.predicted for s in samples]
        )
    except (EmptyInput, ConstantActuals) as exc:
        regression = None
        print(f"regression metrics unavailable: {exc}", file=sys.stderr)
    out = cfg.get("out")
    if out:
        write_json(
            out,
            {
                "seed": seed,
                "per_class": pcr.to_json_dict(),
                "regression": regression.to_json_dict() if regression else None,
            },
        )
    print(format_per_class_table(pcr))
    if regression:
        print()
        print(format_regression_table({"all": regression}))
    return 0


# -- parser ----------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="run seed (default 0)")
    p.add_argument("--config", default=None, help="TOML config file; flags win")
    p.add_argument(
        "--threads", type=int, default=None, help="worker threads (default 1)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foodweight",
        description="Food weight estimation pipeline: fixtures, training, evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixture", help="render a synthetic dataset with a known weight law")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=None, help="number of classes (default 14)")
    p.add_argument("--per-class", type=int, default=None, dest="per_class",
                   help="samples per class (default 40)")
    p.add_argument("--image-size", type=int, default=None, dest="image_size",
                   help="square image size in pixels (default 64)")
    p.add_argument("--slope", type=float, default=None, help="weight law slope (default 0.002)")
    p.add_argument("--intercept", type=float, default=None,
                   help="weight law intercept (default 20)")
    p.add_argument("--noise", type=float, default=None, help="weight noise stddev (default 0)")
    _add_common(p)
    p.set_defaults(func=cmd_gen_fixture)

    p = sub.add_parser("split", help="stratified train/val/test split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default=None, help="comma ratios (default 0.6,0.2,0.2)")
    p.add_argument("--out", required=True, help="output split JSON")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the weight model on the train split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, help="split JSON from the split command")
    p.add_argument("--out", required=True, help="output directory for checkpoint/reports")
    p.add_argument("--checkpoint", default=None, help="checkpoint path override")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 10)")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size",
                   help="minibatch size (default 32)")
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate",
                   help="Adam learning rate (default 1e-4)")
    p.add_argument("--flip-prob", type=float, default=None, dest="flip_prob",
                   help="horizontal flip probability (default 0.5)")
    p.add_argument("--scaler", choices=("standardize", "identity"), default=None,
                   help="feature scaler mode (default standardize)")
    p.add_argument("--pool-size", type=int, default=None, dest="pool_size",
                   help="backbone pooling grid (default 16)")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict weights for boxes against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--boxes", required=True,
                   help="detections or ground-truth JSON supplying boxes and labels")
    p.add_argument("--images-dir", required=True, dest="images_dir")
    p.add_argument("--out", required=True, help="output predictions JSON")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval-detections", help="detection metrics against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth", required=True, dest="ground_truth")
    p.add_argument("--iou-thresholds", default=None, dest="iou_thresholds",
                   help="comma list or start:step:stop (default 0.5:0.05:0.95)")
    p.add_argument("--interpolation", choices=("all-point", "eleven-point"),
                   default=None, help="PR-curve interpolation (default all-point)")
    p.add_argument("--out", default=None, help="optional output report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_eval_detections)

    p = sub.add_parser("report", help="per-class and regression report for predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", required=True, dest="ground_truth")
    p.add_argument("--out", default=None, help="optional output report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FoodWeightError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
