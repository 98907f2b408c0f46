"""Attribute vocabularies for the face and full-body evaluation sets.

Vocabularies ship as UTF-8 line-delimited files under data/vocab/<set>/,
one file per category. The translation-pair set stores its values in chain
order; consecutive lines form the comparison pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import VocabularyError

__all__ = [
    "AttributeVocab",
    "VocabularySet",
    "CATEGORIES",
    "VOCAB_VERSION",
    "face_attributes_vocab",
    "single_face_attribute_vocab",
    "translation_chain_vocab",
    "full_body_vocab",
    "lookup_category",
]

CATEGORIES = (
    "gender",
    "age",
    "ethnicity",
    "emotion",
    "face_attribute",
    "skin_tone",
    "hair",
    "occupation",
    "clothing",
)

VOCAB_VERSION = "v1"


@dataclass(frozen=True)
class AttributeVocab:
    category: str
    values: tuple[str, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise VocabularyError(f"unknown category {self.category!r}")
        if not self.values:
            raise VocabularyError(f"category {self.category!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise VocabularyError(f"duplicate values in category {self.category!r}")

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, value: str) -> bool:
        return value in self.values


@dataclass(frozen=True)
class VocabularySet:
    """A named group of per-category vocabularies (one evaluation's attribute set)."""

    name: str
    vocabs: tuple[AttributeVocab, ...]

    def category(self, category: str) -> AttributeVocab:
        for v in self.vocabs:
            if v.category == category:
                return v
        raise VocabularyError(f"set {self.name!r} has no category {category!r}")

    def categories(self) -> tuple[str, ...]:
        return tuple(v.category for v in self.vocabs)

    def total_values(self) -> int:
        return sum(len(v) for v in self.vocabs)

    def chain_pairs(self) -> list[tuple[str, str, str]]:
        """(category, from, to) for consecutive values within each category."""
        pairs = []
        for v in self.vocabs:
            pairs.extend((v.category, a, b) for a, b in zip(v.values, v.values[1:]))
        return pairs


def _read_values(set_dir: str, category: str) -> tuple[str, ...]:
    path = resources.files("privakit").joinpath(f"data/vocab/{set_dir}/{category}.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    return tuple(line for line in lines if line.strip())


def _load_set(name: str, set_dir: str, categories: tuple[str, ...]) -> VocabularySet:
    return VocabularySet(
        name, tuple(AttributeVocab(c, _read_values(set_dir, c)) for c in categories)
    )


@lru_cache(maxsize=None)
def face_attributes_vocab() -> VocabularySet:
    """Five-category face set: 7 ages, 7 ethnicities, 2 genders, 7 emotions, 36 face attributes."""
    return _load_set(
        "face", "phi_a", ("gender", "age", "ethnicity", "emotion", "face_attribute")
    )


@lru_cache(maxsize=None)
def single_face_attribute_vocab() -> VocabularySet:
    """Single-attribute face set: ethnicity + emotion + face attributes (50 values)."""
    base = face_attributes_vocab()
    return VocabularySet(
        "face-single",
        (base.category("ethnicity"), base.category("emotion"), base.category("face_attribute")),
    )


@lru_cache(maxsize=None)
def translation_chain_vocab() -> VocabularySet:
    """Fine-grained translation chains: 11 ethnicities, 8 ages, 7 emotions, 7 skin tones."""
    return _load_set("chains", "phi_c", ("ethnicity", "age", "emotion", "skin_tone"))


@lru_cache(maxsize=None)
def full_body_vocab() -> VocabularySet:
    """Nine-category full-body set totaling 100 values."""
    return _load_set(
        "full-body",
        "phi_d",
        (
            "gender",
            "age",
            "emotion",
            "ethnicity",
            "skin_tone",
            "face_attribute",
            "hair",
            "occupation",
            "clothing",
        ),
    )


def _all_sets() -> tuple[VocabularySet, ...]:
    return (face_attributes_vocab(), translation_chain_vocab(), full_body_vocab())


def lookup_category(category: str, value: str) -> str:
    """Resolve value against every registered vocabulary for the category.

    Matching is case-insensitive; returns the value as given. Raises
    VocabularyError when no registered vocabulary contains the value.
    """
    if category not in CATEGORIES:
        raise VocabularyError(f"unknown category {category!r}")
    needle = value.casefold()
    for vset in _all_sets():
        try:
            vocab = vset.category(category)
        except VocabularyError:
            continue
        for known in vocab.values:
            if known.casefold() == needle:
                return value
    raise VocabularyError(f"value {value!r} not registered for category {category!r}")
