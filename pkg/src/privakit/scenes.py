"""Planted-scene fixtures: sidecar descriptions that drive the mock backends.

A scene pairs an image with a JSON sidecar listing planted subjects and PII
regions, so mock model backends can answer deterministically without any
ML. Sidecars live next to their image with the same stem and a .json suffix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import BBox, ImageBuffer, save_png

__all__ = ["PlantedSubject", "PlantedRegion", "Scene", "SceneRegistry", "make_demo_corpus"]

SCENE_SCHEMA = "planted-scene-v1"


@dataclass(frozen=True)
class PlantedSubject:
    box: BBox
    yaw_deg: float = 0.0
    beta: tuple[float, ...] = (0.0,) * 10


@dataclass(frozen=True)
class PlantedRegion:
    label: str
    box: BBox


@dataclass(frozen=True)
class Scene:
    image_id: str
    subjects: tuple[PlantedSubject, ...] = ()
    pii_regions: tuple[PlantedRegion, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "subjects": [
                {"box": list(s.box.as_tuple()), "yaw_deg": s.yaw_deg, "beta": list(s.beta)}
                for s in self.subjects
            ],
            "pii_regions": [
                {"label": r.label, "box": list(r.box.as_tuple())} for r in self.pii_regions
            ],
        }

    @classmethod
    def from_dict(cls, image_id: str, d: dict) -> "Scene":
        return cls(
            image_id=image_id,
            subjects=tuple(
                PlantedSubject(
                    box=BBox(*s["box"]),
                    yaw_deg=float(s.get("yaw_deg", 0.0)),
                    beta=tuple(s.get("beta", [0.0] * 10)),
                )
                for s in d.get("subjects", [])
            ),
            pii_regions=tuple(
                PlantedRegion(label=r["label"], box=BBox(*r["box"]))
                for r in d.get("pii_regions", [])
            ),
        )


class SceneRegistry:
    """Looks scenes up by exact pixel content of the query image."""

    def __init__(self):
        self._by_hash: dict[str, Scene] = {}

    def add(self, image: ImageBuffer, scene: Scene) -> None:
        self._by_hash[image.content_hash()] = scene

    def lookup(self, image: ImageBuffer) -> Scene | None:
        return self._by_hash.get(image.content_hash())

    def __len__(self) -> int:
        return len(self._by_hash)

    @classmethod
    def from_directory(cls, directory) -> "SceneRegistry":
        from .imaging import load_png

        registry = cls()
        for sidecar in sorted(Path(directory).glob("*.json")):
            image_path = sidecar.with_suffix(".png")
            if not image_path.exists():
                continue
            data = json.loads(sidecar.read_text(encoding="utf-8"))
            scene = Scene.from_dict(image_path.stem, data)
            registry.add(load_png(image_path), scene)
        return registry


def _background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """A mildly textured backdrop: two-way gradient plus low-amplitude noise."""
    ys = np.linspace(0, 1, height)[:, None]
    xs = np.linspace(0, 1, width)[None, :]
    base = np.stack(
        [
            40 + 120 * xs + 0 * ys,
            60 + 90 * ys + 0 * xs,
            80 + 60 * xs * ys,
        ],
        axis=2,
    )
    noise = rng.integers(0, 18, size=(height, width, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)


def _place_box(rng, width, height, min_side=12, max_frac=0.45, occupied=None):
    for _ in range(50):
        bw = int(rng.integers(min_side, max(min_side + 1, int(width * max_frac))))
        bh = int(rng.integers(min_side, max(min_side + 1, int(height * max_frac))))
        x0 = int(rng.integers(0, max(1, width - bw)))
        y0 = int(rng.integers(0, max(1, height - bh)))
        box = BBox(x0, y0, x0 + bw, y0 + bh)
        if occupied and any(_overlaps(box, other) for other in occupied):
            continue
        return box
    return None


def _overlaps(a: BBox, b: BBox) -> bool:
    return not (a.x1 <= b.x0 or b.x1 <= a.x0 or a.y1 <= b.y0 or b.y1 <= a.y0)


def make_demo_corpus(directory, count: int = 20, seed: int = 0) -> list[Path]:
    """Write a synthetic planted-scene corpus; returns the image paths.

    Image 0 is always a zero-subject scene; the rest carry 1-3 disjoint
    subjects and occasionally a planted "license plate" region.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        width = int(rng.integers(96, 176))
        height = int(rng.integers(80, 144))
        data = _background(rng, width, height)

        n_subjects = 0 if i == 0 else int(rng.integers(1, 4))
        boxes: list[BBox] = []
        subjects = []
        for _ in range(n_subjects):
            box = _place_box(rng, width, height, occupied=boxes)
            if box is None:
                continue
            boxes.append(box)
            yaw = float(rng.choice([0.0, 0.0, 90.0, 180.0, -90.0]))
            # paint the planted person as a dark block so scenes look distinct
            data[box.y0 : box.y1, box.x0 : box.x1] = (
                30 + 10 * (len(boxes) % 3),
                30,
                60,
            )
            subjects.append(PlantedSubject(box=box, yaw_deg=yaw))

        regions = []
        if i % 4 == 1:
            box = _place_box(rng, width, height, min_side=8, max_frac=0.2, occupied=boxes)
            if box is not None:
                data[box.y0 : box.y1, box.x0 : box.x1] = (220, 220, 200)
                regions.append(PlantedRegion(label="license plate", box=box))

        image = ImageBuffer(data)
        scene = Scene(image_id=f"scene-{i:03d}", subjects=tuple(subjects), pii_regions=tuple(regions))
        image_path = directory / f"scene-{i:03d}.png"
        save_png(image, image_path)
        image_path.with_suffix(".json").write_text(
            json.dumps(scene.to_dict(), indent=2), encoding="utf-8"
        )
        paths.append(image_path)
    return paths
