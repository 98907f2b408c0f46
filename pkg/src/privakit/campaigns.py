"""Evaluation campaign construction for the four human-perception studies.

Campaign kinds:
  phi_a  prompt complexity: sampled attribute combos rendered at the
         simple/medium/complex levels against shared source images.
  phi_b  single face attribute: one basic prompt per value of the
         50-value face set.
  phi_c  fine-grained translation: one prompt per chain endpoint; tasks
         are presented as side-by-side pairs along each chain.
  phi_d  single full-body attribute: one basic prompt per value of the
         100-value full-body set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import ParameterError
from .prompts import LEVELS, PromptSpec, build_prompt, sample_attribute_combos
from .vocab import (
    VOCAB_VERSION,
    full_body_vocab,
    single_face_attribute_vocab,
    translation_chain_vocab,
)

__all__ = ["KINDS", "CampaignTask", "CampaignSpec", "build_campaign"]

KINDS = ("phi_a", "phi_b", "phi_c", "phi_d")

DEFAULT_ANNOTATORS_PER_IMAGE = 3
DEFAULT_COMBOS = 396
DEFAULT_SOURCES_PER_COMBO = 3


@dataclass(frozen=True)
class CampaignTask:
    task_id: str
    source_id: str
    level: str
    category: str | None
    attribute: str | None
    positive: str
    negative: str
    image_refs: tuple[str, ...]
    pair: tuple[str, str] | None = None
    pair_position: str | None = None

    @property
    def transition_label(self) -> str | None:
        return f"{self.pair[0]} → {self.pair[1]}" if self.pair else None

    def to_dict(self) -> dict:
        d = {
            "task_id": self.task_id,
            "source_id": self.source_id,
            "level": self.level,
            "category": self.category,
            "attribute": self.attribute,
            "positive": self.positive,
            "negative": self.negative,
            "image_refs": list(self.image_refs),
        }
        if self.pair:
            d["pair"] = list(self.pair)
            d["pair_position"] = self.pair_position
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignTask":
        return cls(
            task_id=d["task_id"],
            source_id=d["source_id"],
            level=d["level"],
            category=d.get("category"),
            attribute=d.get("attribute"),
            positive=d["positive"],
            negative=d["negative"],
            image_refs=tuple(d["image_refs"]),
            pair=tuple(d["pair"]) if d.get("pair") else None,
            pair_position=d.get("pair_position"),
        )


@dataclass(frozen=True)
class CampaignSpec:
    kind: str
    source_ids: tuple[str, ...]
    seed: int
    annotators_per_image: int
    prompt_count: int
    tasks: tuple[CampaignTask, ...]
    comparison_pairs: tuple[tuple[str, str, str], ...] = ()
    vocabulary_version: str = VOCAB_VERSION

    @property
    def task_count(self) -> int:
        return len(self.tasks)

    @property
    def annotations_required(self) -> int:
        return self.task_count * self.annotators_per_image

    def to_manifest(self) -> dict:
        return {
            "schema": "campaign-v1",
            "kind": self.kind,
            "seed": self.seed,
            "vocabulary_version": self.vocabulary_version,
            "annotators_per_image": self.annotators_per_image,
            "sources": list(self.source_ids),
            "prompt_count": self.prompt_count,
            "task_count": self.task_count,
            "annotations_required": self.annotations_required,
            "comparison_pairs": [list(p) for p in self.comparison_pairs],
            "tasks": [t.to_dict() for t in self.tasks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_manifest(), indent=2, ensure_ascii=False)

    @classmethod
    def from_manifest(cls, manifest: dict) -> "CampaignSpec":
        return cls(
            kind=manifest["kind"],
            source_ids=tuple(manifest["sources"]),
            seed=int(manifest["seed"]),
            annotators_per_image=int(manifest["annotators_per_image"]),
            prompt_count=int(manifest["prompt_count"]),
            tasks=tuple(CampaignTask.from_dict(t) for t in manifest["tasks"]),
            comparison_pairs=tuple(tuple(p) for p in manifest.get("comparison_pairs", [])),
            vocabulary_version=manifest.get("vocabulary_version", VOCAB_VERSION),
        )


def _basic_task(kind, index, source, category, value) -> CampaignTask:
    spec = PromptSpec(level="basic", attributes={category: value})
    text = build_prompt(spec)
    task_id = f"{kind}-{index:06d}"
    return CampaignTask(
        task_id=task_id,
        source_id=source,
        level="basic",
        category=category,
        attribute=value,
        positive=text.positive,
        negative=text.negative,
        image_refs=(f"{task_id}.png",),
    )


def _build_single_attribute(kind: str, vset, sources, seed, annotators) -> CampaignSpec:
    prompts = [(v.category, value) for v in vset.vocabs for value in v.values]
    tasks = []
    i = 0
    for source in sources:
        for category, value in prompts:
            tasks.append(_basic_task(kind, i, source, category, value))
            i += 1
    return CampaignSpec(
        kind=kind,
        source_ids=tuple(sources),
        seed=seed,
        annotators_per_image=annotators,
        prompt_count=len(prompts),
        tasks=tuple(tasks),
    )


def _build_translation(sources, seed, annotators) -> CampaignSpec:
    """One task per (source, chain endpoint), shown beside its chain neighbor.

    The chain start is shown as the left half of its first pair; every
    other endpoint is the right half of the pair arriving at it.
    """
    vset = translation_chain_vocab()
    tasks = []
    i = 0
    for source in sources:
        for vocab in vset.vocabs:
            values = vocab.values
            for idx, value in enumerate(values):
                if idx == 0:
                    pair, position = (values[0], values[1]), "left"
                else:
                    pair, position = (values[idx - 1], values[idx]), "right"
                spec = PromptSpec(level="basic", attributes={vocab.category: value})
                text = build_prompt(spec)
                task_id = f"phi_c-{i:06d}"
                tasks.append(
                    CampaignTask(
                        task_id=task_id,
                        source_id=source,
                        level="basic",
                        category=vocab.category,
                        attribute=value,
                        positive=text.positive,
                        negative=text.negative,
                        image_refs=(f"{task_id}__left.png", f"{task_id}__right.png"),
                        pair=pair,
                        pair_position=position,
                    )
                )
                i += 1
    return CampaignSpec(
        kind="phi_c",
        source_ids=tuple(sources),
        seed=seed,
        annotators_per_image=annotators,
        prompt_count=vset.total_values(),
        tasks=tuple(tasks),
        comparison_pairs=tuple(vset.chain_pairs()),
    )


def _build_complexity(sources, seed, annotators, combos, sources_per_combo) -> CampaignSpec:
    """Sampled attribute combos, each paired with a few sources at all three levels."""
    specs = sample_attribute_combos(combos, seed)
    shuffled = list(sources)
    random.Random(seed).shuffle(shuffled)
    levels = [lv for lv in LEVELS if lv != "basic"]
    tasks = []
    i = 0
    slot = 0
    for spec in specs:
        for _ in range(sources_per_combo):
            source = shuffled[slot % len(shuffled)]
            slot += 1
            for level in levels:
                leveled = PromptSpec(level=level, attributes=spec.attributes)
                text = build_prompt(leveled)
                task_id = f"phi_a-{i:06d}"
                tasks.append(
                    CampaignTask(
                        task_id=task_id,
                        source_id=source,
                        level=level,
                        category=None,
                        attribute=None,
                        positive=text.positive,
                        negative=text.negative,
                        image_refs=(f"{task_id}.png",),
                    )
                )
                i += 1
    return CampaignSpec(
        kind="phi_a",
        source_ids=tuple(sources),
        seed=seed,
        annotators_per_image=annotators,
        prompt_count=len(specs) * len(levels),
        tasks=tuple(tasks),
    )


def build_campaign(
    kind: str,
    sources: list[str],
    seed: int,
    annotators_per_image: int = DEFAULT_ANNOTATORS_PER_IMAGE,
    combos: int = DEFAULT_COMBOS,
    sources_per_combo: int = DEFAULT_SOURCES_PER_COMBO,
) -> CampaignSpec:
    """Materialize the full task list for an evaluation campaign."""
    if kind not in KINDS:
        raise ParameterError(f"unknown campaign kind {kind!r}")
    if not sources:
        raise ParameterError("sources must be non-empty")
    if len(set(sources)) != len(sources):
        raise ParameterError("duplicate source ids")
    if annotators_per_image < 1:
        raise ParameterError("annotators_per_image must be >= 1")

    if kind == "phi_b":
        return _build_single_attribute(kind, single_face_attribute_vocab(), sources, seed, annotators_per_image)
    if kind == "phi_d":
        return _build_single_attribute(kind, full_body_vocab(), sources, seed, annotators_per_image)
    if kind == "phi_c":
        return _build_translation(sources, seed, annotators_per_image)
    return _build_complexity(sources, seed, annotators_per_image, combos, sources_per_combo)
