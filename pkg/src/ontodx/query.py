"""Compile an observation into a description-logic query expression.

Each non-N/A field becomes an existential restriction over its property; a
plant-part restriction is injected whenever a symptom is present (disease
definitions locate symptoms on a plant part, while observations carry no
location field). The restrictions are conjoined in canonical order (symptom,
location, color, shape) and wrapped in a single abnormality-group
existential. An all-N/A observation yields HealthyFinding instead of a query.
"""
from __future__ import annotations

from dataclasses import dataclass

from .client import Observation
from .errors import ObservationLabelError, UnknownLabelError
from .model import ClassExpression, Iri, Named, Ontology, Some, intersection_of


@dataclass(frozen=True)
class HealthyFinding:
    """Pipeline outcome for an all-N/A observation: no query, no disease."""


@dataclass(frozen=True)
class QueryProperties:
    symptom: Iri
    symptom_at: Iri
    color: Iri
    shape: Iri
    group: Iri

    @classmethod
    def default_for(cls, onto: Ontology) -> "QueryProperties":
        """Conventional property names resolved in the default namespace."""
        ns = onto.default_namespace
        if ns is None:
            raise ValueError(
                "ontology declares no default namespace; pass QueryProperties explicitly"
            )
        props = cls(
            symptom=Iri(ns, "hasSymptom"),
            symptom_at=Iri(ns, "hasSymptomAt"),
            color=Iri(ns, "hasColor"),
            shape=Iri(ns, "hasShape"),
            group=Iri(ns, "abnormalityGroup"),
        )
        for prop in (props.symptom, props.symptom_at, props.color, props.shape, props.group):
            onto.require_property(prop)
        return props


def build_query(
    obs: Observation,
    onto: Ontology,
    plant_part: Iri,
    properties: QueryProperties | None = None,
) -> ClassExpression | HealthyFinding:
    """Build the query expression for an observation, or HealthyFinding.

    Fields that name concepts outside the ontology raise
    ObservationLabelError carrying every failing field at once; multi-value
    strings ("Spot and Lesion") are not split and fail the same way. N/A
    fields are simply omitted, so classification proceeds on whatever
    evidence exists.
    """
    if obs.is_all_na:
        return HealthyFinding()
    props = properties or QueryProperties.default_for(onto)
    onto.require_class(plant_part)

    failures: list[UnknownLabelError] = []

    def resolve(kind: str, value: str) -> Iri | None:
        try:
            return onto.resolve_label(value)
        except UnknownLabelError as err:
            failures.append(UnknownLabelError(value, err.suggestions, field=kind))
            return None

    parts: list[ClassExpression] = []
    if obs.symptom is not None:
        cls = resolve("symptom", obs.symptom)
        if cls is not None:
            parts.append(Some(props.symptom, Named(cls)))
        parts.append(Some(props.symptom_at, Named(plant_part)))
    if obs.color is not None:
        cls = resolve("color", obs.color)
        if cls is not None:
            parts.append(Some(props.color, Named(cls)))
    if obs.shape is not None:
        cls = resolve("shape", obs.shape)
        if cls is not None:
            parts.append(Some(props.shape, Named(cls)))
    if failures:
        raise ObservationLabelError(failures)
    return Some(props.group, intersection_of(parts))
