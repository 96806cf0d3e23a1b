"""The closed seven-label bridging-relation taxonomy."""

from __future__ import annotations

import enum
import logging
import re

from .errors import UnknownRelationTypeError

logger = logging.getLogger(__name__)


class RelationType(str, enum.Enum):
    PART_OF = "part-of"
    MEMBER_OF = "member-of"
    INSTRUMENT = "instrument"
    THEME = "theme"
    CAUSE_OF = "cause-of"
    IN = "in"
    TEMPORAL = "temporal"

    def __str__(self) -> str:
        return self.value


class RelationClass(str, enum.Enum):
    MEREOLOGICAL = "Mereological"
    FRAME_RELATED = "FrameRelated"

    def __str__(self) -> str:
        return self.value


# Wire order; prompts and reports list types in exactly this order.
RELATION_TYPES: tuple[RelationType, ...] = tuple(RelationType)

_CLASS_OF = {
    RelationType.PART_OF: RelationClass.MEREOLOGICAL,
    RelationType.MEMBER_OF: RelationClass.MEREOLOGICAL,
    RelationType.INSTRUMENT: RelationClass.FRAME_RELATED,
    RelationType.THEME: RelationClass.FRAME_RELATED,
    RelationType.CAUSE_OF: RelationClass.FRAME_RELATED,
    RelationType.IN: RelationClass.FRAME_RELATED,
    RelationType.TEMPORAL: RelationClass.FRAME_RELATED,
}

_BY_VALUE = {t.value: t for t in RelationType}
_SEPARATORS = re.compile(r"[\s_‐-―-]+")


def parse_relation_type(label) -> RelationType:
    """Map a model-emitted label onto the closed set.

    Matching is case-insensitive after trimming. Space and underscore
    spellings ("part of", "part_of") are folded onto the hyphenated form and
    the rewrite is logged.
    """
    if isinstance(label, RelationType):
        return label
    if not isinstance(label, str):
        raise UnknownRelationTypeError(label)
    key = label.strip().lower()
    if key in _BY_VALUE:
        return _BY_VALUE[key]
    folded = _SEPARATORS.sub("-", key).strip("-")
    if folded in _BY_VALUE:
        logger.info("normalized relation label %r -> %r", label, folded)
        return _BY_VALUE[folded]
    raise UnknownRelationTypeError(label)


def relation_class(t: RelationType) -> RelationClass:
    return _CLASS_OF[RelationType(t)]


def types_in_class(cls: RelationClass) -> tuple[RelationType, ...]:
    return tuple(t for t in RELATION_TYPES if _CLASS_OF[t] is cls)
