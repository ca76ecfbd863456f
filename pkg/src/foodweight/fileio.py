"""Readers and writers for the declared JSON interchange files.

Detection dump: JSON array of {image_id, x_min, y_min, x_max, y_max,
label, score}.  Ground truth: JSON array of the same box fields plus
{weight_grams, container, orientation}.  Predictions: JSON array of
{image_id, label, box fields, predicted_weight_grams, score?}.  Split
assignment: JSON object {image_id: "train" | "val" | "test"}.

All files are UTF-8 with LF endings; floats serialize at full round-trip
precision; writers emit sorted keys so identical data yields identical
bytes.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .dataset import SPLIT_NAMES, GroundTruthEntry, SplitAssignment
from .detect_eval import Detection
from .errors import DegenerateBox, MissingFile, ParseError
from .geometry import BoundingBox


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None


def _require(entry: dict, key: str, path, index: int):
    if key not in entry:
        raise ParseError(f"{path}: entry {index} missing key {key!r}")
    return entry[key]


def _parse_box(entry: dict, path, index: int) -> BoundingBox:
    try:
        return BoundingBox(
            float(_require(entry, "x_min", path, index)),
            float(_require(entry, "y_min", path, index)),
            float(_require(entry, "x_max", path, index)),
            float(_require(entry, "y_max", path, index)),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: entry {index}: bad box value: {exc}") from None
    except DegenerateBox as exc:
        raise ParseError(f"{path}: entry {index}: {exc}") from None


def _box_fields(box: BoundingBox) -> dict:
    return {
        "x_min": box.x_min,
        "y_min": box.y_min,
        "x_max": box.x_max,
        "y_max": box.y_max,
    }


# -- detections ----------------------------------------------------------------


def write_detections(path, detections: Sequence[Detection]) -> None:
    rows = [
        {
            "image_id": d.image_id,
            **_box_fields(d.box),
            "label": d.label,
            "score": d.score,
        }
        for d in detections
    ]
    write_json(path, rows)


def read_detections(path) -> list:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: detection dump must be a JSON array")
    out = []
    for i, entry in enumerate(doc):
        box = _parse_box(entry, path, i)
        try:
            det = Detection(
                image_id=str(_require(entry, "image_id", path, i)),
                box=box,
                label=str(_require(entry, "label", path, i)),
                score=float(_require(entry, "score", path, i)),
            )
        except ValueError as exc:
            raise ParseError(f"{path}: entry {i}: {exc}") from None
        out.append(det)
    return out


# -- ground truth ----------------------------------------------------------------


def write_ground_truth(path, entries: Sequence[GroundTruthEntry]) -> None:
    rows = [
        {
            "image_id": e.image_id,
            **_box_fields(e.box),
            "label": e.label,
            "weight_grams": e.weight_grams,
            "container": e.container,
            "orientation": e.orientation,
        }
        for e in entries
    ]
    write_json(path, rows)


def read_ground_truth(path) -> list:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: ground-truth file must be a JSON array")
    out = []
    for i, entry in enumerate(doc):
        box = _parse_box(entry, path, i)
        try:
            weight = float(_require(entry, "weight_grams", path, i))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: entry {i}: bad weight: {exc}") from None
        if not weight > 0:
            raise ParseError(f"{path}: entry {i}: weight must be positive, got {weight}")
        out.append(
            GroundTruthEntry(
                image_id=str(_require(entry, "image_id", path, i)),
                box=box,
                label=str(_require(entry, "label", path, i)),
                weight_grams=weight,
                container=str(entry.get("container", "")),
                orientation=str(entry.get("orientation", "")),
            )
        )
    return out


def ground_truth_boxes(entries: Sequence[GroundTruthEntry]) -> list:
    """Project ground-truth entries onto the detection-evaluation type."""
    return [e.to_ground_truth() for e in entries]


# -- predictions -----------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    """One weight prediction for one input box."""

    image_id: str
    label: str
    box: BoundingBox
    predicted_weight_grams: float
    score: float | None = None


def write_predictions(path, predictions: Sequence[Prediction]) -> None:
    rows = []
    for p in predictions:
        row = {
            "image_id": p.image_id,
            "label": p.label,
            **_box_fields(p.box),
            "predicted_weight_grams": p.predicted_weight_grams,
        }
        if p.score is not None:
            row["score"] = p.score
        rows.append(row)
    write_json(path, rows)


def read_predictions(path) -> list:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: predictions file must be a JSON array")
    out = []
    for i, entry in enumerate(doc):
        box = _parse_box(entry, path, i)
        score = entry.get("score")
        out.append(
            Prediction(
                image_id=str(_require(entry, "image_id", path, i)),
                label=str(_require(entry, "label", path, i)),
                box=box,
                predicted_weight_grams=float(
                    _require(entry, "predicted_weight_grams", path, i)
                ),
                score=None if score is None else float(score),
            )
        )
    return out


# -- split assignment --------------------------------------------------------------


def write_split(path, split: SplitAssignment) -> None:
    write_json(path, split.assignment)


def read_split(path) -> SplitAssignment:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: split file must be a JSON object")
    for image_id, name in doc.items():
        if name not in SPLIT_NAMES:
            raise ParseError(f"{path}: image {image_id!r} has unknown split {name!r}")
    return SplitAssignment(assignment=dict(doc))
