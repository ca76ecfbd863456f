"""Manifest ingestion, stratified splitting, and synthetic fixtures.

The manifest is a headered CSV (UTF-8, LF, '.' decimals):
image_id, path, x_min, y_min, x_max, y_max, label, weight_grams,
container, orientation.  Paths resolve relative to the manifest's
directory.

The fixture generator renders one shape per image with a class-specific
intensity and assigns weight by a declared affine law over the box area, so
the learning task is solvable and recomputable from the stored boxes.  The
oracle detector turns ground truth into a detection dump with controlled
jitter and drop-out, letting the evaluation stack run end to end without a
real detector.
"""

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .detect_eval import Detection, GroundTruth
from .errors import (
    DegenerateBox,
    EmptyDataset,
    MissingFile,
    ParseError,
    UnknownClass,
)
from .geometry import BoundingBox
from . import pngio

MANIFEST_COLUMNS = (
    "image_id",
    "path",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "label",
    "weight_grams",
    "container",
    "orientation",
)

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SampleRecord:
    """One dataset row; image_path is already resolved to an absolute path."""

    image_id: str
    image_path: str
    gt_box: BoundingBox
    label: str
    weight_grams: float
    container: str
    orientation: str

    def __post_init__(self):
        if not self.weight_grams > 0:
            raise ValueError(f"weight must be positive, got {self.weight_grams}")


def load_manifest(path, registry: Sequence[str] | None = None, check_images: bool = True):
    """Parse and validate a manifest CSV into SampleRecords.

    With an explicit registry, unknown labels raise UnknownClass naming the
    offending line; otherwise the registry is implied by the data (see
    class_registry).  Row numbers in errors are 1-based file lines.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"manifest not found: {path}")
    base = path.parent
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty manifest") from None
        if tuple(header) != MANIFEST_COLUMNS:
            raise ParseError(
                f"{path}: bad header {header!r}, expected {list(MANIFEST_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(MANIFEST_COLUMNS)} fields, "
                    f"got {len(row)}"
                )
            image_id, rel_path, *rest = row
            try:
                x_min, y_min, x_max, y_max = (float(v) for v in rest[:4])
                weight = float(rest[5])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: {exc}") from None
            label, container, orientation = rest[4], rest[6], rest[7]
            if min(x_min, y_min, x_max, y_max) < 0:
                raise ParseError(
                    f"{path}:{line_no}: negative box coordinate"
                )
            try:
                box = BoundingBox(x_min, y_min, x_max, y_max)
            except DegenerateBox as exc:
                raise ParseError(f"{path}:{line_no}: {exc}") from None
            if not weight > 0:
                raise ParseError(
                    f"{path}:{line_no}: weight must be positive, got {weight}"
                )
            if registry is not None and label not in registry:
                raise UnknownClass(f"{path}:{line_no}: unknown label {label!r}")
            image_path = (base / rel_path).resolve()
            if check_images and not image_path.exists():
                raise MissingFile(f"{path}:{line_no}: image not found: {image_path}")
            records.append(
                SampleRecord(
                    image_id=image_id,
                    image_path=str(image_path),
                    gt_box=box,
                    label=label,
                    weight_grams=weight,
                    container=container,
                    orientation=orientation,
                )
            )
    return records


def class_registry(records: Sequence[SampleRecord]) -> list:
    """Ordered class list: labels in order of first appearance."""
    seen = []
    for rec in records:
        if rec.label not in seen:
            seen.append(rec.label)
    return seen


@dataclass
class SplitAssignment:
    """Total, disjoint mapping image_id -> train | val | test."""

    assignment: dict

    def subset(self, records: Sequence[SampleRecord], name: str) -> list:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return [r for r in records if self.assignment.get(r.image_id) == name]

    def counts(self) -> dict:
        out = {name: 0 for name in SPLIT_NAMES}
        for split in self.assignment.values():
            out[split] += 1
        return out


def _weight_buckets(records: Sequence[SampleRecord]) -> dict:
    """Quartile bucket of each record's weight within its class.

    Thresholds are nearest-rank quartiles of the class's weights; records
    with identical weights always share a bucket.
    """
    by_label = {}
    for rec in records:
        by_label.setdefault(rec.label, []).append(rec.weight_grams)
    thresholds = {}
    for label, weights in by_label.items():
        ws = sorted(weights)
        n = len(ws)
        qs = [ws[max(0, math.ceil(k * n / 4) - 1)] for k in (1, 2, 3)]
        thresholds[label] = qs
    buckets = {}
    for rec in records:
        qs = thresholds[rec.label]
        buckets[rec.image_id] = sum(1 for q in qs if rec.weight_grams > q)
    return buckets


def stratified_split(
    records: Sequence[SampleRecord],
    ratios: tuple = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitAssignment:
    """Deterministic stratified partition at the given train/val/test ratios.

    Strata are (label, container, orientation, weight-quartile-bucket)
    groups; each is shuffled with the seed and cut so train gets
    floor(r_train * n), val the next floor, test the remainder.
    """
    records = list(records)
    if not records:
        raise EmptyDataset("stratified_split needs at least one record")
    if len(ratios) != 3 or any(not r > 0 for r in ratios):
        raise ValueError(f"ratios must be three positive values: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1: {ratios}")
    buckets = _weight_buckets(records)
    strata = {}
    for rec in records:
        key = (rec.label, rec.container, rec.orientation, buckets[rec.image_id])
        strata.setdefault(key, []).append(rec)
    rng = random.Random(seed)
    assignment = {}
    for key in sorted(strata):
        group = list(strata[key])
        rng.shuffle(group)
        n = len(group)
        n_train = math.floor(ratios[0] * n + 1e-9)
        n_val = math.floor(ratios[1] * n + 1e-9)
        for i, rec in enumerate(group):
            if i < n_train:
                split = "train"
            elif i < n_train + n_val:
                split = "val"
            else:
                split = "test"
            assignment[rec.image_id] = split
    return SplitAssignment(assignment=assignment)


# -- synthetic fixtures --------------------------------------------------------


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    manifest: Path
    ground_truth: Path
    images_dir: Path


@dataclass(frozen=True)
class GroundTruthEntry:
    """One row of the ground-truth JSON file (detection ground truth plus
    the regression target and stratification tags)."""

    image_id: str
    box: BoundingBox
    label: str
    weight_grams: float
    container: str
    orientation: str

    def to_ground_truth(self) -> GroundTruth:
        return GroundTruth(image_id=self.image_id, box=self.box, label=self.label)


def _render_image(size, bg, shade, x0, y0, w, h, ellipse):
    """8-bit grayscale raster with one filled rectangle or ellipse."""
    buf = bytearray([bg]) * (size * size)
    if ellipse:
        cx = x0 + w / 2.0
        cy = y0 + h / 2.0
        rx = w / 2.0
        ry = h / 2.0
        for y in range(y0, y0 + h):
            for x in range(x0, x0 + w):
                nx = (x + 0.5 - cx) / rx
                ny = (y + 0.5 - cy) / ry
                if nx * nx + ny * ny <= 1.0:
                    buf[y * size + x] = shade
    else:
        for y in range(y0, y0 + h):
            start = y * size + x0
            buf[start : start + w] = bytes([shade]) * w
    return bytes(buf)


def generate_synthetic_fixture(
    out_dir,
    num_classes: int = 14,
    per_class: int = 40,
    image_size: int = 64,
    weight_slope: float = 0.002,
    weight_intercept: float = 20.0,
    noise: float = 0.0,
    seed: int = 0,
    containers: tuple = ("bowl",),
    orientations: tuple = ("top",),
) -> FixturePaths:
    """Render a desk-scale dataset with a known weight law.

    Each image holds one shape (rectangles for even class indices, ellipses
    for odd) at a random position and size; weight is
    weight_slope * box_area + weight_intercept + noise * gauss(0, 1),
    so with zero noise the manifest weights recompute exactly from the
    stored boxes.  Container and orientation tags cycle per class so strata
    stay balanced; the single-tag defaults keep desk-scale strata large
    enough for near-exact 60/20/20 cuts.  Fixed seeds give byte-identical
    output trees.
    """
    if num_classes < 1 or per_class < 1:
        raise ValueError("num_classes and per_class must be >= 1")
    if image_size < 16:
        raise ValueError(f"image_size too small: {image_size}")
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    min_side = max(6, image_size // 6)
    max_side = (3 * image_size) // 4
    labels = [f"class_{k:02d}" for k in range(num_classes)]
    manifest_rows = []
    gt_entries = []
    index = 0
    for k, label in enumerate(labels):
        shade = 64 + (191 * k) // max(1, num_classes - 1)
        for j in range(per_class):
            image_id = f"img_{index:05d}"
            index += 1
            w = rng.randint(min_side, max_side)
            h = rng.randint(min_side, max_side)
            x0 = rng.randint(0, image_size - w)
            y0 = rng.randint(0, image_size - h)
            bg = rng.randint(10, 40)
            raster = _render_image(image_size, bg, shade, x0, y0, w, h, ellipse=k % 2 == 1)
            png_path = images_dir / f"{image_id}.png"
            png_path.write_bytes(pngio.encode(image_size, image_size, 1, raster))
            area = float(w * h)
            weight = weight_slope * area + weight_intercept
            if noise > 0:
                weight += noise * rng.gauss(0.0, 1.0)
            weight = max(weight, 1e-3)
            box = BoundingBox(float(x0), float(y0), float(x0 + w), float(y0 + h))
            container = containers[j % len(containers)]
            orientation = orientations[(j // len(containers)) % len(orientations)]
            manifest_rows.append(
                (
                    image_id,
                    f"images/{image_id}.png",
                    repr(box.x_min),
                    repr(box.y_min),
                    repr(box.x_max),
                    repr(box.y_max),
                    label,
                    repr(weight),
                    container,
                    orientation,
                )
            )
            gt_entries.append(
                GroundTruthEntry(
                    image_id=image_id,
                    box=box,
                    label=label,
                    weight_grams=weight,
                    container=container,
                    orientation=orientation,
                )
            )
    manifest_path = out_dir / "manifest.csv"
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(manifest_rows)
    gt_path = out_dir / "ground_truth.json"
    from .fileio import write_ground_truth

    write_ground_truth(gt_path, gt_entries)
    return FixturePaths(
        root=out_dir,
        manifest=manifest_path,
        ground_truth=gt_path,
        images_dir=images_dir,
    )


def oracle_detector(
    gts: Sequence[GroundTruth],
    jitter: float = 0.0,
    drop_rate: float = 0.0,
    seed: int = 0,
) -> list:
    """Detection dump derived from ground truth with controlled degradation.

    Each ground truth is dropped with probability drop_rate; survivors get
    each coordinate perturbed by uniform +/- jitter * (box extent on that
    axis) and a score of 1 minus a jitter-proportional random decay.  With
    jitter 0 and drop 0 the output reproduces the ground truth exactly and
    every downstream metric is 1.0.
    """
    if not 0.0 <= jitter < 0.5:
        raise ValueError(f"jitter must be in [0, 0.5), got {jitter}")
    if not 0.0 <= drop_rate < 1.0:
        raise ValueError(f"drop_rate must be in [0, 1), got {drop_rate}")
    rng = random.Random(seed)
    detections = []
    for gt in gts:
        if rng.random() < drop_rate:
            continue
        if jitter > 0.0:
            w = gt.box.width
            h = gt.box.height
            x_min = max(0.0, gt.box.x_min + (2.0 * rng.random() - 1.0) * jitter * w)
            x_max = gt.box.x_max + (2.0 * rng.random() - 1.0) * jitter * w
            y_min = max(0.0, gt.box.y_min + (2.0 * rng.random() - 1.0) * jitter * h)
            y_max = gt.box.y_max + (2.0 * rng.random() - 1.0) * jitter * h
            box = BoundingBox(x_min, y_min, x_max, y_max)
            score = 1.0 - jitter * rng.random()
        else:
            box = gt.box
            score = 1.0
        detections.append(
            Detection(image_id=gt.image_id, box=box, label=gt.label, score=score)
        )
    return detections
