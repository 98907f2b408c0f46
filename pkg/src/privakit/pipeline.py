"""In-place human replacement, end to end.

Stage order per image: estimate subject parameters, segment and feather each
person mask, render a posture-matched avatar, composite it into the source
crop, generate a replacement conditioned on the avatar's edges and prompt,
reintegrate every subject, then detect and inpaint residual PII.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .backends import Backend, SubjectParams
from .canny import canny_edges
from .errors import ParameterError, ProtocolError, ShapeError
from .imaging import (
    BBox,
    EdgeMap,
    ImageBuffer,
    SoftMask,
    alpha_composite,
    crop,
    feather_mask,
    mask_union,
    paste_resample,
    resample_bilinear,
    quantize_u8,
    save_png,
)
from .prompts import (
    NEGATIVE_PROMPT,
    PromptSpec,
    assign_strategy,
    build_prompt,
    extend_with_orientation,
    prompt_attr,
)

__all__ = [
    "PipelineConfig",
    "SubjectRecord",
    "SubjectArtifacts",
    "Letterbox",
    "PseudonymizationResult",
    "pseudonymize_image",
    "process_subject",
    "reintegrate",
    "pii_pass",
    "letterbox_to",
    "un_letterbox",
    "write_result",
    "GENERIC_INPAINT_PROMPT",
]

GENERIC_INPAINT_PROMPT = "background scenery, no text, no people"

MIN_BOX_SIDE = 8


@dataclass(frozen=True)
class PipelineConfig:
    feather_sigma: float = 3.0
    crop_pad_fraction: float = 0.10
    generator_resolution: int = 512
    canny_low: float = 100.0
    canny_high: float = 200.0
    canny_sigma: float = 1.4
    pii_descriptions: tuple[str, ...] = ()
    seed: int = 0
    prompt_strategy: str = "random"
    prompt_labels: dict[str, str] | None = None
    max_parallel_subjects: int = 4
    backend_url: str | None = None
    generate_mode: str = "flat"

    def __post_init__(self):
        if self.generator_resolution < 256:
            raise ParameterError("generator_resolution must be >= 256")
        if self.feather_sigma <= 0:
            raise ParameterError("feather_sigma must be > 0")
        if self.max_parallel_subjects < 1:
            raise ParameterError("max_parallel_subjects must be >= 1")

    def to_dict(self) -> dict:
        return {
            "feather_sigma": self.feather_sigma,
            "crop_pad_fraction": self.crop_pad_fraction,
            "generator_resolution": self.generator_resolution,
            "canny": [self.canny_low, self.canny_high, self.canny_sigma],
            "pii_descriptions": list(self.pii_descriptions),
            "seed": self.seed,
            "prompt_strategy": self.prompt_strategy,
            "prompt_labels": self.prompt_labels,
            "max_parallel_subjects": self.max_parallel_subjects,
            "generate_mode": self.generate_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        canny = d.get("canny", [100.0, 200.0, 1.4])
        return cls(
            feather_sigma=float(d.get("feather_sigma", 3.0)),
            crop_pad_fraction=float(d.get("crop_pad_fraction", 0.10)),
            generator_resolution=int(d.get("generator_resolution", 512)),
            canny_low=float(canny[0]),
            canny_high=float(canny[1]),
            canny_sigma=float(canny[2]),
            pii_descriptions=tuple(d.get("pii_descriptions", ())),
            seed=int(d.get("seed", 0)),
            prompt_strategy=d.get("prompt_strategy", "random"),
            prompt_labels=d.get("prompt_labels"),
            max_parallel_subjects=int(d.get("max_parallel_subjects", 4)),
            backend_url=d.get("backend_url"),
            generate_mode=d.get("generate_mode", "flat"),
        )


def derive_seed(seed: int, index: int) -> int:
    return (seed * 1_000_003 + index) % (2**31)


@dataclass(frozen=True)
class SubjectRecord:
    """One detected human: pose/shape parameters, mask, box, prompt."""

    index: int
    theta: tuple[float, ...]
    beta: tuple[float, ...]
    mask: SoftMask
    box: BBox
    prompt_spec: PromptSpec

    def validate(self) -> None:
        outside = self.mask.weights.copy()
        b = self.box
        outside[b.y0 : b.y1, b.x0 : b.x1] = 0.0
        if (outside > 0.01).any():
            raise ShapeError(f"subject {self.index}: mask support leaks outside its box")


@dataclass(frozen=True)
class Letterbox:
    """How a crop was fitted onto the square generator canvas."""

    content_w: int
    content_h: int
    offset_x: int
    offset_y: int
    box_w: int
    box_h: int

    @property
    def is_identity(self) -> bool:
        return (
            self.offset_x == 0
            and self.offset_y == 0
            and (self.content_w, self.content_h) == (self.box_w, self.box_h)
        )

    def as_dict(self) -> dict:
        return {
            "content": [self.content_w, self.content_h],
            "offset": [self.offset_x, self.offset_y],
            "box": [self.box_w, self.box_h],
        }


def letterbox_to(image: ImageBuffer, resolution: int) -> tuple[ImageBuffer, Letterbox]:
    """Fit onto a resolution x resolution canvas, aspect preserved, edges replicated."""
    w, h = image.width, image.height
    if w >= h:
        cw, ch = resolution, max(1, round(h * resolution / w))
    else:
        cw, ch = max(1, round(w * resolution / h)), resolution
    if (cw, ch) == (w, h):
        content = image.data
    else:
        content = quantize_u8(resample_bilinear(image.data, ch, cw))
    ox, oy = (resolution - cw) // 2, (resolution - ch) // 2
    padded = np.pad(
        content,
        ((oy, resolution - ch - oy), (ox, resolution - cw - ox), (0, 0)),
        mode="edge",
    )
    return ImageBuffer(padded), Letterbox(cw, ch, ox, oy, w, h)


def un_letterbox(image: ImageBuffer, lb: Letterbox) -> ImageBuffer:
    """Invert letterbox_to: strip padding and resample back to the box size."""
    content = image.data[lb.offset_y : lb.offset_y + lb.content_h,
                         lb.offset_x : lb.offset_x + lb.content_w]
    if (lb.content_w, lb.content_h) == (lb.box_w, lb.box_h):
        return ImageBuffer(content.copy())
    return ImageBuffer(quantize_u8(resample_bilinear(content, lb.box_h, lb.box_w)))


@dataclass(frozen=True)
class SubjectArtifacts:
    """Everything the pipeline produced for one subject."""

    index: int
    skipped: bool = False
    skip_reason: str | None = None
    record: SubjectRecord | None = None
    feathered: SoftMask | None = None
    avatar: ImageBuffer | None = None
    avatar_full: ImageBuffer | None = None
    edges: EdgeMap | None = None
    composite_crop: ImageBuffer | None = None
    generated: ImageBuffer | None = None
    prompt: str | None = None
    orientation: str | None = None
    effective_box: BBox | None = None
    letterbox: Letterbox | None = None


@dataclass(frozen=True)
class PseudonymizationResult:
    output: ImageBuffer
    subjects: tuple[SubjectArtifacts, ...]
    union_mask: SoftMask
    pii_regions: tuple[SoftMask, ...]
    manifest: dict

    @property
    def manifest_digest(self) -> str:
        return self.manifest["digest"]


def _prepare_subject(x, index, params: SubjectParams, config, backend) -> SubjectArtifacts:
    mask, box = backend.segment_subject(x, index, config.seed)
    spec = assign_strategy(
        config.prompt_strategy, config.prompt_labels, config.seed, index=index
    )
    record = SubjectRecord(index, params.theta, params.beta, mask, box, spec)
    record.validate()
    if box.width < MIN_BOX_SIDE or box.height < MIN_BOX_SIDE:
        return SubjectArtifacts(
            index=index,
            skipped=True,
            skip_reason=f"degenerate box {box.as_tuple()} (< {MIN_BOX_SIDE} px a side)",
            record=record,
        )
    feathered = feather_mask(mask, config.feather_sigma)
    avatar = backend.render_avatar(
        record.theta, record.beta, box.width, box.height, derive_seed(config.seed, index)
    )
    avatar_full = paste_resample(ImageBuffer.full(x.width, x.height, 0, x.channels), avatar, box)
    return SubjectArtifacts(
        index=index,
        record=record,
        feathered=feathered,
        avatar=avatar,
        avatar_full=avatar_full,
    )


def process_subject(x: ImageBuffer, prep: SubjectArtifacts, config: PipelineConfig,
                    backend: Backend) -> SubjectArtifacts:
    """Composite the avatar into the subject crop and run the generator on it."""
    record = prep.record
    orientation = prompt_attr(record.theta, record.beta)
    text = build_prompt(record.prompt_spec)
    prompt = extend_with_orientation(orientation, text)

    composited = alpha_composite(x, prep.avatar_full, prep.feathered)
    pad = round(config.crop_pad_fraction * max(record.box.width, record.box.height))
    crop_img, eff_box = crop(composited, record.box, pad)
    crop_lb, lb = letterbox_to(crop_img, config.generator_resolution)

    avatar_crop, _ = crop(prep.avatar_full, record.box, pad)
    avatar_lb, _ = letterbox_to(avatar_crop, config.generator_resolution)
    edges = canny_edges(avatar_lb, config.canny_low, config.canny_high, config.canny_sigma)

    generated = backend.generate_crop(
        crop_lb, edges, prompt, NEGATIVE_PROMPT, derive_seed(config.seed, record.index)
    )
    if (generated.width, generated.height) != (crop_lb.width, crop_lb.height):
        raise ProtocolError(
            f"generator returned {generated.width}x{generated.height}, "
            f"expected {crop_lb.width}x{crop_lb.height}"
        )
    return replace(
        prep,
        edges=edges,
        composite_crop=crop_lb,
        generated=generated,
        prompt=prompt,
        orientation=orientation,
        effective_box=eff_box,
        letterbox=lb,
    )


def reintegrate(x: ImageBuffer, subjects: list[SubjectArtifacts]) -> ImageBuffer:
    """Sequential over-composite in subject index order.

    Equivalent to summing masked contributions when masks are disjoint; on
    overlap the later subject wins.
    """
    running = x.copy()
    for art in sorted(subjects, key=lambda a: a.index):
        if art.skipped or art.generated is None:
            continue
        patch = un_letterbox(art.generated, art.letterbox)
        overlay = paste_resample(running, patch, art.effective_box)
        running = alpha_composite(running, overlay, art.feathered)
    return running


def pii_pass(
    x_hat: ImageBuffer,
    x_original: ImageBuffer,
    descriptions: tuple[str, ...],
    config: PipelineConfig,
    backend: Backend,
) -> tuple[ImageBuffer, tuple[SoftMask, ...]]:
    """Detect residual PII on the original image and inpaint it on the output."""
    if not descriptions:
        return x_hat, ()
    masks: list[SoftMask] = []
    for description in descriptions:
        masks.extend(backend.detect_pii(x_original, [description]))
    if not masks:
        return x_hat, ()
    feathered = tuple(feather_mask(m, config.feather_sigma) for m in masks)
    union = mask_union(list(feathered))
    inpainted = backend.inpaint_regions(
        x_hat, union, GENERIC_INPAINT_PROMPT, derive_seed(config.seed, 0x7111)
    )
    if (inpainted.width, inpainted.height) != (x_hat.width, x_hat.height):
        raise ProtocolError("inpainting backend changed image dimensions")
    return alpha_composite(x_hat, inpainted, union), feathered


def _manifest(x, config, backend, arts, pii_masks, output, timings, image_id) -> dict:
    doc = {
        "schema": "pseudonymization-manifest-v1",
        "image_id": image_id,
        "seed": config.seed,
        "config": config.to_dict(),
        "backend_versions": backend.versions(),
        "input": {"width": x.width, "height": x.height, "sha256": x.content_hash()},
        "subjects": [
            {
                "index": a.index,
                "skipped": a.skipped,
                "reason": a.skip_reason,
                "box": list(a.record.box.as_tuple()) if a.record else None,
                "effective_box": list(a.effective_box.as_tuple()) if a.effective_box else None,
                "orientation": a.orientation,
                "prompt": a.prompt,
                "letterbox": a.letterbox.as_dict() if a.letterbox else None,
            }
            for a in arts
        ],
        "pii": {"descriptions": list(config.pii_descriptions), "regions": len(pii_masks)},
        "output": {"width": output.width, "height": output.height, "sha256": output.content_hash()},
    }
    digest = hashlib.sha256(
        json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()
    doc["digest"] = digest
    doc["timings_ms"] = {k: round(v * 1000.0, 3) for k, v in timings.items()}
    return doc


def pseudonymize_image(
    x: ImageBuffer,
    config: PipelineConfig,
    backend: Backend,
    image_id: str = "",
) -> PseudonymizationResult:
    """Run the whole replacement pipeline on one image."""
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    params = backend.estimate_subjects(x, config.seed)
    prepared = [
        _prepare_subject(x, i, p, config, backend) for i, p in enumerate(params)
    ]
    timings["prepare"] = time.perf_counter() - t0

    active = [p for p in prepared if not p.skipped]
    t0 = time.perf_counter()
    if active:
        workers = min(len(active), config.max_parallel_subjects)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(lambda p: process_subject(x, p, config, backend), active))
    else:
        done = []
    timings["generate"] = time.perf_counter() - t0

    arts = sorted(done + [p for p in prepared if p.skipped], key=lambda a: a.index)

    t0 = time.perf_counter()
    x_hat = reintegrate(x, done) if done else x.copy()
    timings["reintegrate"] = time.perf_counter() - t0

    union = mask_union([a.feathered for a in done], shape=(x.width, x.height))

    t0 = time.perf_counter()
    x_hat, pii_masks = pii_pass(x_hat, x, config.pii_descriptions, config, backend)
    timings["pii"] = time.perf_counter() - t0

    manifest = _manifest(x, config, backend, arts, pii_masks, x_hat, timings, image_id)
    return PseudonymizationResult(
        output=x_hat,
        subjects=tuple(arts),
        union_mask=union,
        pii_regions=pii_masks,
        manifest=manifest,
    )


def write_result(result: PseudonymizationResult, out_dir) -> None:
    """Artifact layout: final.png, subjects/{i}/{avatar,edges,crop}.png + prompt.txt, manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_png(result.output, out / "final.png")
    for art in result.subjects:
        if art.skipped:
            continue
        sub = out / "subjects" / str(art.index)
        sub.mkdir(parents=True, exist_ok=True)
        save_png(art.avatar, sub / "avatar.png")
        save_png(art.edges, sub / "edges.png")
        save_png(art.generated, sub / "crop.png")
        (sub / "prompt.txt").write_text(art.prompt, encoding="utf-8")
    (out / "manifest.json").write_text(
        json.dumps(result.manifest, indent=2, ensure_ascii=False), encoding="utf-8"
    )
