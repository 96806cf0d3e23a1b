"""Persona schema, persona sampling and the hidden conditioning prompt.

A schema is four dimensions (SocialRole, Personality, Background,
Interests), each holding named subcategories with a closed list of allowed
values. A :class:`PersonaProfile` picks exactly one value per subcategory
and serves both as the hidden ground truth and as a prediction.

Custom schemas load from the same JSON layout that :meth:`PersonaSchema.to_dict`
produces, so a user can widen the value lists without touching code.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from string import Template

from ._io import canonical_json, read_json, write_json
from .errors import InvalidProfileError, InvalidSchemaError

DIMENSION_NAMES = ("SocialRole", "Personality", "Background", "Interests")

DIMENSION_LABELS = {
    "SocialRole": "Social role",
    "Personality": "Personality",
    "Background": "Background",
    "Interests": "Interests",
}

HIDDEN_PROMPT_TEMPLATE = "hidden_persona_v1.txt"

Slot = tuple[str, str]


@dataclass(frozen=True)
class Subcategory:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class Dimension:
    name: str
    subcategories: tuple[Subcategory, ...]


@dataclass(frozen=True)
class PersonaSchema:
    dimensions: tuple[Dimension, ...]

    def validate(self) -> "PersonaSchema":
        if not self.dimensions:
            raise InvalidSchemaError("schema has no dimensions")
        names = tuple(d.name for d in self.dimensions)
        if names != DIMENSION_NAMES:
            raise InvalidSchemaError(
                f"schema dimensions must be {list(DIMENSION_NAMES)}, got {list(names)}"
            )
        for dim in self.dimensions:
            if not dim.subcategories:
                raise InvalidSchemaError(f"dimension {dim.name} has no subcategories")
            seen = set()
            for sub in dim.subcategories:
                if sub.name in seen:
                    raise InvalidSchemaError(f"duplicate subcategory {dim.name}.{sub.name}")
                seen.add(sub.name)
                if not sub.values:
                    raise InvalidSchemaError(f"{dim.name}.{sub.name} has no allowed values")
                if len(set(sub.values)) != len(sub.values):
                    raise InvalidSchemaError(f"{dim.name}.{sub.name} repeats a value")
                if any(not isinstance(v, str) or not v.strip() for v in sub.values):
                    raise InvalidSchemaError(f"{dim.name}.{sub.name} has an empty value")
        return self

    def slots(self) -> list[Slot]:
        """All (dimension, subcategory) pairs in schema order."""
        return [(d.name, s.name) for d in self.dimensions for s in d.subcategories]

    def allowed(self, dimension: str, subcategory: str) -> tuple[str, ...]:
        for d in self.dimensions:
            if d.name == dimension:
                for s in d.subcategories:
                    if s.name == subcategory:
                        return s.values
        raise KeyError((dimension, subcategory))

    def dimension(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "dimensions": [
                {
                    "name": d.name,
                    "subcategories": [
                        {"name": s.name, "values": list(s.values)} for s in d.subcategories
                    ],
                }
                for d in self.dimensions
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PersonaSchema":
        try:
            dims = tuple(
                Dimension(
                    name=d["name"],
                    subcategories=tuple(
                        Subcategory(name=s["name"], values=tuple(s["values"]))
                        for s in d["subcategories"]
                    ),
                )
                for d in data["dimensions"]
            )
        except (KeyError, TypeError) as exc:
            raise InvalidSchemaError(f"malformed schema document: {exc}") from exc
        return cls(dims).validate()


@dataclass(frozen=True)
class PersonaProfile:
    """One value per schema slot.

    ``unresolved`` lists slots an inference strategy could not read from the
    model's reply and filled with the schema default; ``warnings`` carries
    degraded-input notices. Neither takes part in scoring.
    """

    assignments: dict[Slot, str]
    unresolved: tuple[Slot, ...] = ()
    warnings: tuple[str, ...] = ()

    def __getitem__(self, slot: Slot) -> str:
        return self.assignments[slot]

    def dimension_values(self, schema: PersonaSchema, dimension: str) -> list[str]:
        return [self.assignments[(dimension, s.name)] for s in schema.dimension(dimension).subcategories]

    def validate(self, schema: PersonaSchema) -> "PersonaProfile":
        expected = set(schema.slots())
        got = set(self.assignments)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise InvalidProfileError(f"profile slots mismatch (missing={missing}, extra={extra})")
        for (dim, sub), value in self.assignments.items():
            if value not in schema.allowed(dim, sub):
                raise InvalidProfileError(f"{value!r} is not an allowed value for {dim}.{sub}")
        return self

    def to_dict(self) -> dict:
        nested: dict[str, dict[str, str]] = {}
        for (dim, sub), value in self.assignments.items():
            nested.setdefault(dim, {})[sub] = value
        return {
            "assignments": nested,
            "unresolved": [f"{d}.{s}" for d, s in sorted(self.unresolved)],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PersonaProfile":
        try:
            assignments = {
                (dim, sub): value
                for dim, subs in data["assignments"].items()
                for sub, value in subs.items()
            }
        except (KeyError, AttributeError, TypeError) as exc:
            raise InvalidProfileError(f"malformed profile document: {exc}") from exc
        unresolved = tuple(tuple(s.split(".", 1)) for s in data.get("unresolved", ()))
        return cls(assignments, unresolved, tuple(data.get("warnings", ())))

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def default_schema() -> PersonaSchema:
    """The four-dimension schema with its representative values."""
    return PersonaSchema(
        (
            Dimension(
                "SocialRole",
                (
                    Subcategory("Professional", ("Doctor", "Lawyer", "Professor", "Accountant")),
                    Subcategory(
                        "Technical Management",
                        ("Software Engineer", "Data Scientist", "Product Manager"),
                    ),
                    Subcategory("Public Service", ("Civil Servant", "Police Officer", "Teacher")),
                ),
            ),
            Dimension(
                "Personality",
                (
                    Subcategory(
                        "Big-Five Traits",
                        (
                            "Openness",
                            "Conscientiousness",
                            "Extroversion",
                            "Agreeableness",
                            "Neuroticism",
                        ),
                    ),
                ),
            ),
            Dimension(
                "Background",
                (
                    Subcategory("Education", ("High School", "Bachelor's", "Master's", "Ph.D.")),
                    Subcategory("Location", ("Urban", "Rural")),
                    Subcategory("Family Status", ("Single", "Married", "Living Alone")),
                ),
            ),
            Dimension(
                "Interests",
                (
                    Subcategory("Hobbies", ("Reading", "Traveling", "Gaming")),
                    Subcategory("Core Values", ("Creativity", "Family", "Integrity")),
                    Subcategory("Comm. Style", ("Direct", "Emotional")),
                ),
            ),
        )
    )


def sample_persona(schema: PersonaSchema, seed: int) -> PersonaProfile:
    """Draw one value per subcategory uniformly, reproducibly from ``seed``."""
    schema.validate()
    rng = random.Random(seed)
    return PersonaProfile({(d, s): rng.choice(schema.allowed(d, s)) for d, s in schema.slots()})


def _profile_block(profile: PersonaProfile, schema: PersonaSchema) -> str:
    slots = schema.slots()
    if set(slots) != set(profile.assignments):
        slots = list(profile.assignments)
    lines: list[str] = []
    current = None
    for dim, sub in slots:
        value = profile.assignments[(dim, sub)]
        if dim != current:
            if current is not None:
                lines.append("")
            lines.append(f"{DIMENSION_LABELS.get(dim, dim)}:")
            current = dim
        lines.append(f"- {sub}: {value}")
    return "\n".join(lines)


def render_hidden_prompt(
    profile: PersonaProfile, schema: PersonaSchema | None = None, template: str | None = None
) -> str:
    """System prompt that makes the target embody ``profile`` without naming it.

    Slots are listed in schema order so the text does not depend on how the
    profile was loaded.
    """
    if template is None:
        template = resources.files(__package__).joinpath("templates", HIDDEN_PROMPT_TEMPLATE).read_text(
            encoding="utf-8"
        )
    return Template(template).substitute(profile_block=_profile_block(profile, schema or default_schema())).rstrip("\n")


def load_schema(path) -> PersonaSchema:
    return PersonaSchema.from_dict(read_json(path))


def save_profile(path, profile: PersonaProfile):
    return write_json(path, profile.to_dict())


def load_profile(path, schema: PersonaSchema | None = None) -> PersonaProfile:
    profile = PersonaProfile.from_dict(read_json(path))
    if schema is not None:
        profile.validate(schema)
    return profile
