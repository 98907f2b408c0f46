"""Prompt grammar: four complexity levels, orientation text, attribute sampling.

Positive prompts are assembled as prefix + attribute clause + level suffix;
all prompts share one fixed negative prompt. Clause wording, including the
irregular spacing in the complex suffix, is intentional and must not be
"tidied" -- downstream texts are compared byte-for-byte.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .errors import ParameterError, PromptSpecError
from .pose import check_params, root_yaw_deg
from .vocab import face_attributes_vocab, lookup_category

__all__ = [
    "PROMPT_PREFIX",
    "NEGATIVE_PROMPT",
    "LEVELS",
    "SIMPLE_CATEGORIES",
    "ORIENTATIONS",
    "PromptSpec",
    "PromptText",
    "build_prompt",
    "parse_simple_prompt",
    "prompt_attr",
    "sample_attribute_combos",
    "assign_strategy",
    "extend_with_orientation",
]

PROMPT_PREFIX = "seen from front,"

NEGATIVE_PROMPT = (
    "drawing, painting, blurry, smooth, cgi, anime, rendering, black and white, "
    "oily, wet, shining light, hard light, special effect, nudity, sexy, erotic, "
    "topless, sports clothing"
)

LEVELS = ("basic", "simple", "medium", "complex")

# the five categories a simple/medium/complex prompt must carry
SIMPLE_CATEGORIES = ("age", "ethnicity", "gender", "face_attribute", "emotion")

_SIMPLE_CLAUSE = "A {age} {ethnicity} {gender} with {face_attribute}, showing {emotion} emotion."
_MEDIUM_CLAUSE = (
    "A {age} {ethnicity} {gender} with {face_attribute}, showing a clearly "
    "exaggerated {emotion} emotion. The portrait is natural and realistic, "
    "with sharp focus and high detail."
)
_COMPLEX_CLAUSE = (
    "A {age} {ethnicity} {gender} with {face_attribute}, and their face is "
    "expressing very exaggerated {emotion} emotion. The image is natural, "
    "realistic, sharp focus, high detail,  medium format photograph, person , "
    "(Nikon DSLR Camera, 8K resolution, Detailed face features)."
)

# basic-level sentence form per category; clothing values already start
# with "wearing ..." so neither standard form fits them
_BASIC_WITH_FORM = frozenset({"face_attribute", "hair"})
_BASIC_PLAIN_FORM = frozenset({"clothing"})

ORIENTATIONS = (
    "facing the camera",
    "facing left",
    "facing away from the camera",
    "facing right",
)


@dataclass(frozen=True)
class PromptSpec:
    """An attribute assignment plus complexity level, renderable to prompt text."""

    level: str
    attributes: dict[str, str]
    orientation_text: str | None = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise PromptSpecError(f"unknown level {self.level!r}")
        if self.level == "basic":
            if len(self.attributes) != 1:
                raise PromptSpecError("basic prompts carry exactly one attribute")
        else:
            missing = [c for c in SIMPLE_CATEGORIES if c not in self.attributes]
            extra = [c for c in self.attributes if c not in SIMPLE_CATEGORIES]
            if missing or extra:
                raise PromptSpecError(
                    f"{self.level} prompts need exactly {SIMPLE_CATEGORIES}; "
                    f"missing={missing} extra={extra}"
                )


@dataclass(frozen=True)
class PromptText:
    positive: str
    negative: str = field(default=NEGATIVE_PROMPT)


def _basic_clause(category: str, value: str) -> str:
    if category in _BASIC_WITH_FORM:
        return f"A person with {value}"
    if category in _BASIC_PLAIN_FORM:
        return f"A person {value}"
    return f"A {value} person."


def build_prompt(spec: PromptSpec) -> PromptText:
    """Render a spec to its positive/negative prompt pair.

    Attribute values are validated case-insensitively against every
    registered vocabulary for their category and rendered verbatim.
    orientation_text, when present on the spec, lands between the fixed
    prefix and the attribute clause.
    """
    for category, value in spec.attributes.items():
        lookup_category(category, value)

    if spec.level == "basic":
        ((category, value),) = spec.attributes.items()
        clause = _basic_clause(category, value)
    else:
        template = {
            "simple": _SIMPLE_CLAUSE,
            "medium": _MEDIUM_CLAUSE,
            "complex": _COMPLEX_CLAUSE,
        }[spec.level]
        clause = template.format(**spec.attributes)

    parts = [PROMPT_PREFIX]
    if spec.orientation_text:
        parts.append(spec.orientation_text)
    parts.append(clause)
    return PromptText(positive=" ".join(parts))


_SIMPLE_RE = re.compile(
    r"^seen from front, A (?P<rest>.+) with (?P<face_attribute>.+), "
    r"showing (?P<emotion>.+) emotion\.$"
)


def parse_simple_prompt(positive: str) -> PromptSpec:
    """Invert a simple-level positive prompt back into its spec.

    Age and gender are single tokens, so the head of the clause splits as
    age / ethnicity (possibly multi-word) / gender.
    """
    m = _SIMPLE_RE.match(positive)
    if not m:
        raise PromptSpecError(f"not a simple-level prompt: {positive!r}")
    head = m.group("rest").split(" ")
    if len(head) < 3:
        raise PromptSpecError(f"unparseable attribute clause: {positive!r}")
    return PromptSpec(
        level="simple",
        attributes={
            "age": head[0],
            "ethnicity": " ".join(head[1:-1]),
            "gender": head[-1],
            "face_attribute": m.group("face_attribute"),
            "emotion": m.group("emotion"),
        },
    )


def prompt_attr(theta, beta) -> str:
    """Map pose parameters to one of four heading phrases.

    The root yaw is quantized into 90-degree sectors centered on the four
    headings; each sector is half-open, [center - 45, center + 45), so a
    boundary angle belongs to the counter-clockwise neighbor.
    """
    t, _ = check_params(theta, beta)
    yaw = root_yaw_deg(t)
    sector = int(((yaw + 45.0) % 360.0) // 90.0)
    return ORIENTATIONS[sector]


def extend_with_orientation(orientation: str, prompt: PromptText) -> str:
    """Final generator text: orientation phrase joined ahead of the prompt."""
    return f"{orientation} {prompt.positive}"


def _combo_space():
    vset = face_attributes_vocab()
    return [(c, vset.category(c).values) for c in SIMPLE_CATEGORIES]


def sample_attribute_combos(count: int, seed: int, level: str = "simple") -> list[PromptSpec]:
    """Seeded uniform sample, without replacement, of the five-category cross-product."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    space = _combo_space()
    sizes = [len(values) for _, values in space]
    total = 1
    for n in sizes:
        total *= n
    if count > total:
        raise ParameterError(f"count {count} exceeds cross-product size {total}")
    rng = random.Random(seed)
    picks = rng.sample(range(total), count)
    specs = []
    for index in picks:
        attrs = {}
        for (category, values), size in zip(reversed(space), reversed(sizes)):
            index, pos = divmod(index, size)
            attrs[category] = values[pos]
        specs.append(PromptSpec(level=level, attributes=attrs))
    return specs


def assign_strategy(
    strategy: str,
    labels: dict[str, str] | None = None,
    seed: int = 0,
    index: int = 0,
) -> PromptSpec:
    """Build one simple-level spec under a prompt-control strategy.

    random: independent seeded draw per category. diversify: round-robin
    per category by batch index, so marginal counts over a batch differ by
    at most one. preserve: copy the given labels, fill the rest randomly.
    """
    if strategy not in ("random", "diversify", "preserve"):
        raise ParameterError(f"unknown strategy {strategy!r}")
    if strategy == "preserve" and not labels:
        raise PromptSpecError("preserve strategy requires at least one label")

    space = _combo_space()
    rng = random.Random(f"{seed}:{index}")
    attrs: dict[str, str] = {}
    for category, values in space:
        if strategy == "preserve" and labels and category in labels:
            attrs[category] = lookup_category(category, labels[category])
        elif strategy == "diversify":
            offset = random.Random(f"{seed}:{category}").randrange(len(values))
            attrs[category] = values[(index + offset) % len(values)]
        else:
            attrs[category] = rng.choice(values)
    return PromptSpec(level="simple", attributes=attrs)
