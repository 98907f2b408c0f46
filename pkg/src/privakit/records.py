"""Line-delimited record types shared by the evaluation toolkit and services."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, TextIO

from .errors import ValidationError
from .imaging import BBox

__all__ = [
    "AnnotationRecord",
    "DetectionRecord",
    "GroundTruthBox",
    "PredictionLabel",
    "RAF_DB_LABELS",
    "write_ndjson",
    "read_ndjson",
]

# label sets for the downstream classification benchmark
RAF_DB_LABELS: dict[str, tuple[str, ...]] = {
    "race": ("Caucasian", "African-American", "Asian"),
    "emotion": ("Surprise", "Fear", "Disgust", "Happiness", "Sadness", "Anger", "Neutral"),
    "age": ("0-3", "4-19", "20-39", "40-69", "70+"),
    "gender": ("Male", "Female", "Unsure"),
}


@dataclass(frozen=True)
class AnnotationRecord:
    """One rater's 1-5 score for one task."""

    task_id: str
    annotator_id: str
    score: int
    timestamp: float = 0.0
    pair_position: str | None = None
    attribute: str | None = None
    category: str | None = None
    level: str | None = None

    def __post_init__(self):
        if self.score not in (1, 2, 3, 4, 5):
            raise ValidationError(f"score must be an integer in 1..5, got {self.score!r}")
        if self.pair_position not in (None, "left", "right"):
            raise ValidationError(f"pair_position must be left/right, got {self.pair_position!r}")

    def to_json(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "AnnotationRecord":
        data = json.loads(line)
        return cls(
            task_id=data["task_id"],
            annotator_id=data["annotator_id"],
            score=int(data["score"]),
            timestamp=float(data.get("timestamp", 0.0)),
            pair_position=data.get("pair_position"),
            attribute=data.get("attribute"),
            category=data.get("category"),
            level=data.get("level"),
        )


@dataclass(frozen=True)
class DetectionRecord:
    """A scored predicted box."""

    image_id: str
    label: str
    box: BBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: str
    label: str
    box: BBox


@dataclass(frozen=True)
class PredictionLabel:
    """A classifier's prediction for one image under one attribute category."""

    image_id: str
    category: str
    predicted: str
    actual: str

    def __post_init__(self):
        labels = RAF_DB_LABELS.get(self.category)
        if labels is None:
            raise ValidationError(f"unknown label category {self.category!r}")
        for value in (self.predicted, self.actual):
            if value not in labels:
                raise ValidationError(f"{value!r} not in the {self.category!r} label set")


def _box_fields(box: BBox) -> dict:
    return {"x0": box.x0, "y0": box.y0, "x1": box.x1, "y1": box.y1}


def detection_to_json(det: DetectionRecord) -> str:
    d = {"image_id": det.image_id, "label": det.label, "score": det.score}
    d.update(_box_fields(det.box))
    return json.dumps(d, sort_keys=True)


def ground_truth_to_json(gt: GroundTruthBox) -> str:
    d = {"image_id": gt.image_id, "label": gt.label}
    d.update(_box_fields(gt.box))
    return json.dumps(d, sort_keys=True)


def detection_from_json(line: str) -> DetectionRecord:
    d = json.loads(line)
    return DetectionRecord(
        image_id=d["image_id"],
        label=d["label"],
        box=BBox(int(d["x0"]), int(d["y0"]), int(d["x1"]), int(d["y1"])),
        score=float(d["score"]),
    )


def ground_truth_from_json(line: str) -> GroundTruthBox:
    d = json.loads(line)
    return GroundTruthBox(
        image_id=d["image_id"],
        label=d["label"],
        box=BBox(int(d["x0"]), int(d["y0"]), int(d["x1"]), int(d["y1"])),
    )


def write_ndjson(lines: Iterable[str], stream: TextIO) -> int:
    n = 0
    for line in lines:
        stream.write(line)
        stream.write("\n")
        n += 1
    return n


def read_ndjson(stream: TextIO) -> Iterator[str]:
    for line in stream:
        line = line.strip()
        if line:
            yield line
