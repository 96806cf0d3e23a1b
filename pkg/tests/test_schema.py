import pytest

from persona_bridge.errors import InvalidProfileError, InvalidSchemaError
from persona_bridge.schema import (
    Dimension,
    PersonaProfile,
    PersonaSchema,
    Subcategory,
    default_schema,
    load_profile,
    render_hidden_prompt,
    sample_persona,
    save_profile,
)


def test_default_schema_values(schema):
    assert schema.allowed("SocialRole", "Professional") == ("Doctor", "Lawyer", "Professor", "Accountant")
    assert set(schema.allowed("Background", "Location")) == {"Urban", "Rural"}
    assert [d.name for d in schema.dimensions] == ["SocialRole", "Personality", "Background", "Interests"]


def test_default_schema_has_ten_subcategories(schema):
    # 3 + 1 + 3 + 3
    assert len(schema.slots()) == 10
    assert schema.allowed("Personality", "Big-Five Traits") == (
        "Openness",
        "Conscientiousness",
        "Extroversion",
        "Agreeableness",
        "Neuroticism",
    )


def test_schema_round_trip(schema):
    assert PersonaSchema.from_dict(schema.to_dict()) == schema


@pytest.mark.parametrize(
    "dims",
    [
        (),
        (Dimension("SocialRole", ()),),
    ],
)
def test_invalid_schema(dims):
    with pytest.raises(InvalidSchemaError):
        PersonaSchema(dims).validate()


def test_empty_value_list_is_rejected(schema):
    data = schema.to_dict()
    data["dimensions"][0]["subcategories"][0]["values"] = []
    with pytest.raises(InvalidSchemaError):
        PersonaSchema.from_dict(data)


def _singleton(schema):
    return PersonaSchema(
        tuple(
            Dimension(d.name, tuple(Subcategory(s.name, s.values[:1]) for s in d.subcategories))
            for d in schema.dimensions
        )
    )


def test_singleton_schema_forces_profile(schema):
    tiny = _singleton(schema)
    first = sample_persona(tiny, 0)
    for seed in range(25):
        assert sample_persona(tiny, seed) == first
    assert first["SocialRole", "Professional"] == "Doctor"


def test_sampling_is_deterministic(schema):
    assert sample_persona(schema, 42) == sample_persona(schema, 42)
    assert sample_persona(schema, 42).validate(schema)


def test_sampling_is_uniform_enough(schema):
    urban = sum(sample_persona(schema, s)["Background", "Location"] == "Urban" for s in range(10_000))
    assert 0.47 <= urban / 10_000 <= 0.53


def test_profile_validation(schema):
    p = sample_persona(schema, 1)
    bad = dict(p.assignments)
    bad["SocialRole", "Professional"] = "Astronaut"
    with pytest.raises(InvalidProfileError):
        PersonaProfile(bad).validate(schema)
    missing = dict(p.assignments)
    del missing["Background", "Location"]
    with pytest.raises(InvalidProfileError):
        PersonaProfile(missing).validate(schema)


def test_profile_file_round_trip(schema, tmp_path):
    p = sample_persona(schema, 3)
    save_profile(tmp_path / "p.json", p)
    assert load_profile(tmp_path / "p.json", schema) == p


def _with(schema, seed, slot, value):
    a = dict(sample_persona(schema, seed).assignments)
    a[slot] = value
    return PersonaProfile(a)


def test_hidden_prompt_contents(schema):
    doctor = _with(schema, 0, ("SocialRole", "Professional"), "Doctor")
    lawyer = _with(schema, 0, ("SocialRole", "Professional"), "Lawyer")
    text = render_hidden_prompt(doctor, schema)
    assert "Doctor" in text
    assert text == render_hidden_prompt(doctor, schema)
    assert text != render_hidden_prompt(lawyer, schema)
    for value in doctor.assignments.values():
        assert value in text


def test_hidden_prompt_ignores_assignment_order(schema):
    p = sample_persona(schema, 9)
    shuffled = PersonaProfile(dict(reversed(list(p.assignments.items()))))
    assert render_hidden_prompt(p, schema) == render_hidden_prompt(shuffled, schema)


def test_default_schema_is_fresh():
    assert default_schema() == default_schema()
