"""Subsumption, classification, vocabulary extraction, told hierarchy."""
import random
from concurrent.futures import ThreadPoolExecutor

import pytest

from generators import random_expression, random_reasoner_ontology, random_subsumption_instance
from oracle import oracle_is_subsumed
from ontodx.errors import UndeclaredEntityError
from ontodx.model import (
    Declaration,
    EquivalentClasses,
    Iri,
    Named,
    Ontology,
    Some,
    SubClassOf,
    Union,
    intersection_of,
)
from ontodx.reasoner import (
    VocabularyRoots,
    classify_expression,
    extract_vocabulary,
    is_subsumed,
    told_ancestors,
)

NS = "http://example.org/t#"


def t(local):
    return Iri(NS, local)


def small_ontology(axioms):
    return Ontology(axioms, {"": NS})


class TestToldAncestors:
    def test_fixture_disease_chain(self, onto, iri):
        assert told_ancestors(onto, iri("BrownSpot")) == {
            iri("BrownSpot"),
            iri("RiceFungalDisease"),
            iri("RiceDisease"),
        }

    def test_reflexive_on_root(self, onto, iri):
        assert told_ancestors(onto, iri("Abnormality")) == {iri("Abnormality")}

    def test_transitive_chain(self):
        onto_ = small_ontology(
            [Declaration("Class", t(x)) for x in "ABC"]
            + [
                SubClassOf(Named(t("A")), Named(t("B"))),
                SubClassOf(Named(t("B")), Named(t("C"))),
            ]
        )
        assert told_ancestors(onto_, t("A")) == {t("A"), t("B"), t("C")}

    def test_definition_named_conjuncts_count_as_ancestors(self):
        onto_ = small_ontology(
            [Declaration("Class", t(x)) for x in ("D", "A", "B")]
            + [Declaration("ObjectProperty", t("r"))]
            + [
                SubClassOf(Named(t("A")), Named(t("B"))),
                EquivalentClasses(
                    t("D"),
                    intersection_of([Named(t("A")), Some(t("r"), Named(t("B")))]),
                ),
            ]
        )
        assert told_ancestors(onto_, t("D")) == {t("D"), t("A"), t("B")}

    def test_undeclared_class(self, onto):
        with pytest.raises(UndeclaredEntityError):
            told_ancestors(onto, t("Nope"))


class TestVocabularyExtraction:
    def test_fixture_colors_sorted(self, vocab):
        assert [label for label, _ in vocab.colors] == [
            "Brown",
            "Brownish Yellow",
            "Dark Brown",
            "Gray",
            "Green",
            "Light Yellow",
            "Reddish Brown",
        ]

    def test_fixture_symptoms_and_shapes(self, vocab):
        assert [l for l, _ in vocab.symptoms] == ["Lesion", "Spot", "Streak"]
        assert [l for l, _ in vocab.shapes] == [
            "Circular", "Eye", "Halo", "Linear", "Oval", "Zigzag",
        ]

    def test_root_without_subclasses_is_empty(self):
        onto_ = small_ontology([Declaration("Class", t("Root"))])
        roots = VocabularyRoots(t("Root"), t("Root"), t("Root"), t("Root"))
        assert extract_vocabulary(onto_, roots).colors == ()

    def test_diamond_descendant_reported_once(self):
        onto_ = small_ontology(
            [Declaration("Class", t(x)) for x in ("Root", "A", "B", "C")]
            + [
                SubClassOf(Named(t("A")), Named(t("Root"))),
                SubClassOf(Named(t("B")), Named(t("Root"))),
                SubClassOf(Named(t("C")), Named(t("A"))),
                SubClassOf(Named(t("C")), Named(t("B"))),
            ]
        )
        roots = VocabularyRoots(t("Root"), t("Root"), t("Root"), t("Root"))
        got = extract_vocabulary(onto_, roots).colors
        assert got == (("A", t("A")), ("B", t("B")), ("C", t("C")))

    def test_exclusion_list(self, onto, roots, iri):
        trimmed = extract_vocabulary(onto, roots, exclude={iri("Streak")})
        assert [l for l, _ in trimmed.symptoms] == ["Lesion", "Spot"]


class TestIsSubsumed:
    def test_existential_with_union_filler(self, onto, iri):
        verdict = is_subsumed(
            onto,
            Some(iri("hasShape"), Named(iri("Oval"))),
            Some(iri("hasShape"), Union((Named(iri("Oval")), Named(iri("Circular"))))),
        )
        assert verdict.holds
        rules = [step.rule for step in verdict.trace]
        assert "existential" in rules and "union" in rules

    @pytest.mark.parametrize(
        "make",
        [
            lambda i: Named(i("Brown")),
            lambda i: Some(i("hasColor"), Named(i("Brown"))),
            lambda i: intersection_of(
                [Some(i("hasSymptom"), Named(i("Spot"))), Named(i("SpotOnLeaf"))]
            ),
        ],
    )
    def test_reflexivity(self, onto, iri, make):
        expr = make(iri)
        assert is_subsumed(onto, expr, expr).holds

    def test_union_on_left_rejected(self, onto, iri):
        union = Union((Named(iri("Oval")), Named(iri("Circular"))))
        with pytest.raises(ValueError):
            is_subsumed(onto, union, Named(iri("Oval")))

    def test_undeclared_entity_rejected(self, onto, iri):
        with pytest.raises(UndeclaredEntityError):
            is_subsumed(onto, Named(t("Nope")), Named(iri("Brown")))

    def test_defined_name_unfolds_on_the_left(self, onto, iri):
        verdict = is_subsumed(
            onto,
            Named(iri("SpotOnLeaf")),
            Some(iri("hasSymptom"), Named(iri("Spot"))),
        )
        assert verdict.holds

    def test_trace_covers_definition_conjuncts_on_success(self, onto, iri):
        query = Some(
            iri("abnormalityGroup"),
            intersection_of(
                [
                    Some(iri("hasSymptom"), Named(iri("Spot"))),
                    Some(iri("hasSymptomAt"), Named(iri("Leaf"))),
                    Some(iri("hasColor"), Named(iri("Brown"))),
                    Some(iri("hasShape"), Named(iri("Oval"))),
                ]
            ),
        )
        verdict = is_subsumed(onto, query, Named(iri("BrownSpot")))
        assert verdict.holds
        targets = " | ".join(step.target_part for step in verdict.trace)
        for needle in ("SpotOnLeaf", "hasColor some Brown", "hasShape some (Oval or Circular)"):
            assert needle in targets

    def test_oracle_agreement_sample(self):
        rng = random.Random(411)
        for _ in range(150):
            onto_, sub, sup = random_subsumption_instance(rng)
            assert is_subsumed(onto_, sub, sup).holds == oracle_is_subsumed(onto_, sub, sup)

    def test_transitivity_sample(self):
        rng = random.Random(52)
        checked = 0
        for _ in range(400):
            onto_, classes, props = random_reasoner_ontology(rng)
            a = random_expression(rng, classes, props, 2, allow_union=False)
            b = random_expression(rng, classes, props, 2, allow_union=False)
            c = random_expression(rng, classes, props, 2, allow_union=False)
            if is_subsumed(onto_, a, b).holds and is_subsumed(onto_, b, c).holds:
                checked += 1
                assert is_subsumed(onto_, a, c).holds
        assert checked > 10  # the sample actually exercised the implication


class TestClassifyExpression:
    def _query(self, iri, symptom, color, shape):
        return Some(
            iri("abnormalityGroup"),
            intersection_of(
                [
                    Some(iri("hasSymptom"), Named(iri(symptom))),
                    Some(iri("hasSymptomAt"), Named(iri("Leaf"))),
                    Some(iri("hasColor"), Named(iri(color))),
                    Some(iri("hasShape"), Named(iri(shape))),
                ]
            ),
        )

    def test_textbook_brown_spot_query(self, onto, iri):
        diagnosis = classify_expression(
            onto, self._query(iri, "Spot", "Brown", "Oval"), iri("RiceDisease")
        )
        assert diagnosis.matched == (iri("BrownSpot"),)
        assert set(diagnosis.verdicts) == {
            iri("BrownSpot"), iri("NarrowBrownSpot"), iri("LeafBlast"), iri("LeafScald"),
        }

    def test_color_only_query_matches_nothing(self, onto, iri):
        query = Some(iri("abnormalityGroup"), Some(iri("hasColor"), Named(iri("Brown"))))
        diagnosis = classify_expression(onto, query, iri("RiceDisease"))
        assert diagnosis.matched == ()
        for verdict in diagnosis.verdicts.values():
            assert not verdict.holds
            assert verdict.trace[-1].rule == "unmatched"

    def test_definition_body_matches_its_own_disease(self, onto, iri):
        body = onto.definitions[iri("NarrowBrownSpot")]
        diagnosis = classify_expression(onto, body, iri("RiceDisease"))
        assert diagnosis.matched == (iri("NarrowBrownSpot"),)

    def test_matched_is_minimal_under_told_ancestry(self):
        axioms = (
            [Declaration("Class", t(x)) for x in ("Root", "Parent", "Child", "X")]
            + [Declaration("ObjectProperty", t("g"))]
            + [
                SubClassOf(Named(t("Parent")), Named(t("Root"))),
                SubClassOf(Named(t("Child")), Named(t("Parent"))),
                EquivalentClasses(t("Parent"), Some(t("g"), Named(t("X")))),
                EquivalentClasses(t("Child"), Some(t("g"), Named(t("X")))),
            ]
        )
        onto_ = small_ontology(axioms)
        diagnosis = classify_expression(onto_, Some(t("g"), Named(t("X"))), t("Root"))
        assert diagnosis.matched == (t("Child"),)
        assert diagnosis.verdicts[t("Parent")].holds  # matched, filtered as ancestor

    def test_deterministic_diagnosis(self, onto, iri):
        query = self._query(iri, "Lesion", "BrownishYellow", "Linear")
        first = classify_expression(onto, query, iri("RiceDisease"))
        second = classify_expression(onto, query, iri("RiceDisease"))
        assert first.matched == second.matched
        assert list(first.verdicts) == list(second.verdicts)
        for cls in first.verdicts:
            assert first.verdicts[cls].trace == second.verdicts[cls].trace

    def test_concurrent_classification_is_consistent(self, onto, iri):
        query = self._query(iri, "Spot", "Brown", "Oval")

        def run(_):
            return classify_expression(onto, query, iri("RiceDisease")).matched

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(run, range(32)))
        assert all(r == (iri("BrownSpot"),) for r in results)
