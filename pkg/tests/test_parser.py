"""Parsing and serialization of the functional-syntax subset."""
import random

import pytest

from generators import mutate_document, random_document_ontology
from ontodx import bundled_ontology_path, parse_ontology, serialize_ontology
from ontodx.errors import (
    OntodxError,
    ParseError,
    UndeclaredEntityError,
    UnsupportedConstructError,
)
from ontodx.model import Intersection, Iri, Named, Some

NS = "http://example.org/t#"

HEADER = f"Prefix(:=<{NS}>)\n"


def parse(body: str):
    return parse_ontology(HEADER + body)


class TestParsing:
    def test_symptom_characteristic_definition(self):
        onto = parse(
            "Declaration(Class(:SpotOnLeaf)) Declaration(Class(:Spot))"
            " Declaration(Class(:Leaf)) Declaration(ObjectProperty(:hasSymptom))"
            " Declaration(ObjectProperty(:hasSymptomAt))"
            " EquivalentClasses(:SpotOnLeaf ObjectIntersectionOf("
            "ObjectSomeValuesFrom(:hasSymptom :Spot)"
            " ObjectSomeValuesFrom(:hasSymptomAt :Leaf)))"
        )
        body = onto.definitions[Iri(NS, "SpotOnLeaf")]
        assert body == Intersection(
            (
                Some(Iri(NS, "hasSymptom"), Named(Iri(NS, "Spot"))),
                Some(Iri(NS, "hasSymptomAt"), Named(Iri(NS, "Leaf"))),
            )
        )

    def test_declarations_only_document(self):
        onto = parse("Declaration(Class(:A))")
        a = Iri(NS, "A")
        assert onto.classes == {a}
        assert onto.told_supers.get(a) is None
        assert onto.definitions == {}

    def test_undeclared_reference(self):
        with pytest.raises(UndeclaredEntityError) as err:
            parse(
                "Declaration(Class(:A)) SubClassOf(:A :Halo)"
            )
        assert err.value.iri == Iri(NS, "Halo")

    def test_ontology_wrapper_and_iri(self):
        onto = parse("Ontology(<http://example.org/o> Declaration(Class(:A)))")
        assert onto.ontology_iri == "http://example.org/o"
        assert Iri(NS, "A") in onto.classes

    def test_full_iri_entities(self):
        onto = parse_ontology(
            "Declaration(Class(<http://other.example/ns#Thing>))"
        )
        assert Iri("http://other.example/ns#", "Thing") in onto.classes

    def test_nested_intersections_are_flattened(self):
        onto = parse(
            "Declaration(Class(:A)) Declaration(Class(:B)) Declaration(Class(:C))"
            " Declaration(Class(:D))"
            " EquivalentClasses(:D ObjectIntersectionOf("
            "ObjectIntersectionOf(:A :B) :C))"
        )
        body = onto.definitions[Iri(NS, "D")]
        assert isinstance(body, Intersection) and len(body.operands) == 3


class TestParseErrors:
    @pytest.mark.parametrize(
        "body,name",
        [
            ("Declaration(Class(:A)) ObjectMinCardinality(2 :p :A)", "ObjectMinCardinality"),
            (
                "Declaration(Class(:A)) SubClassOf(:A ObjectComplementOf(:A))",
                "ObjectComplementOf",
            ),
            ("DisjointClasses(:A :B)", "DisjointClasses"),
            ("Declaration(NamedIndividual(:a))", "NamedIndividual"),
        ],
    )
    def test_unsupported_constructs(self, body, name):
        with pytest.raises(UnsupportedConstructError) as err:
            parse(body)
        assert err.value.name == name

    def test_unknown_construct_call_is_unsupported(self):
        with pytest.raises(UnsupportedConstructError):
            parse("FancyNewAxiom(:A)")

    def test_language_tagged_label_unsupported(self):
        with pytest.raises(UnsupportedConstructError):
            parse(
                'Declaration(Class(:A)) AnnotationAssertion(rdfs:label :A "x"@en)'
            )

    def test_nary_equivalent_classes_unsupported(self):
        with pytest.raises(UnsupportedConstructError):
            parse(
                "Declaration(Class(:A)) Declaration(Class(:B)) Declaration(Class(:C))"
                " EquivalentClasses(:A :B :C)"
            )

    def test_syntax_error_carries_position(self):
        with pytest.raises(ParseError) as err:
            parse_ontology("Prefix(:=<http://e#>)\nSubClassOf(:A")
        assert err.value.line == 2
        assert err.value.column > 0

    def test_unknown_prefix(self):
        with pytest.raises(ParseError) as err:
            parse_ontology("Declaration(Class(q:A))")
        assert "prefix" in str(err.value)

    def test_cyclic_definition_from_text(self):
        with pytest.raises(OntodxError) as err:
            parse(
                "Declaration(Class(:A)) Declaration(Class(:B))"
                " Declaration(ObjectProperty(:r)) Declaration(ObjectProperty(:s))"
                " EquivalentClasses(:A ObjectSomeValuesFrom(:r :B))"
                " EquivalentClasses(:B ObjectSomeValuesFrom(:s :A))"
            )
        assert "cyclic" in str(err.value)


class TestSerialization:
    def test_round_trip_identity_on_bundled_ontology(self, onto):
        text = serialize_ontology(onto)
        again = parse_ontology(text)
        assert again.axioms == onto.axioms
        assert again.prefixes == onto.prefixes

    def test_reverse_insertion_yields_canonical_document(self):
        forward = parse("Declaration(Class(:A)) Declaration(Class(:B))")
        backward = parse("Declaration(Class(:B)) Declaration(Class(:A))")
        assert serialize_ontology(forward) == serialize_ontology(backward)

    def test_repeated_serialization_is_byte_identical(self, onto):
        assert serialize_ontology(onto) == serialize_ontology(onto)
        reparsed = parse_ontology(serialize_ontology(onto))
        assert serialize_ontology(reparsed) == serialize_ontology(onto)

    def test_bundled_fixture_file_is_canonical(self, onto):
        text = bundled_ontology_path().read_text(encoding="utf-8")
        assert serialize_ontology(onto) == text

    def test_repo_fixture_copy_matches_packaged_one(self, fixtures_dir):
        packaged = bundled_ontology_path().read_bytes()
        assert (fixtures_dir / "rice_disease.ofn").read_bytes() == packaged

    def test_label_escaping_round_trips(self):
        onto = parse(
            'Declaration(Class(:A)) AnnotationAssertion(rdfs:label :A "a \\"q\\" b")'
        )
        again = parse_ontology(serialize_ontology(onto))
        assert again.axioms == onto.axioms


class TestRandomizedRoundTrip:
    def test_round_trip_sample(self):
        rng = random.Random(1199)
        for _ in range(60):
            onto = random_document_ontology(rng)
            again = parse_ontology(serialize_ontology(onto))
            assert again.axioms == onto.axioms

    def test_fuzz_sample_never_crashes(self):
        rng = random.Random(7331)
        base = serialize_ontology(random_document_ontology(rng))
        for _ in range(500):
            doc = mutate_document(rng, base)
            try:
                parse_ontology(doc)
            except OntodxError:
                pass
