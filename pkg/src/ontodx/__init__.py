"""Ontology-grounded visual diagnosis with multimodal language models.

The pipeline: extract an abnormality vocabulary from a disease ontology,
render a deterministic prompt listing it, send the prompt plus an image to a
model backend, parse the JSON observation, compile it into a description-logic
query, and classify the query by structural subsumption against the disease
definitions. An evaluator scores whole datasets against the ontology-defined
gold concepts.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .client import (
    ImageRef,
    ModelConfig,
    Observation,
    parse_observation,
    send,
)
from .errors import OntodxError
from .model import (
    ClassExpression,
    Intersection,
    Iri,
    Named,
    Ontology,
    Some,
    Union,
    dl,
    intersection_of,
    resolve_label,
)
from .parser import parse_ontology, serialize_ontology
from .prompt import PromptSpec, build_prompt
from .query import HealthyFinding, QueryProperties, build_query
from .reasoner import (
    AbnormalityVocabulary,
    Diagnosis,
    SubsumptionVerdict,
    VocabularyRoots,
    classify_expression,
    extract_vocabulary,
    is_subsumed,
    told_ancestors,
    told_descendants,
)

__version__ = "0.1.0"

__all__ = [
    "AbnormalityVocabulary",
    "ClassExpression",
    "Diagnosis",
    "HealthyFinding",
    "ImageRef",
    "Intersection",
    "Iri",
    "ModelConfig",
    "Named",
    "Observation",
    "Ontology",
    "OntodxError",
    "PromptSpec",
    "QueryProperties",
    "Some",
    "SubsumptionVerdict",
    "Union",
    "VocabularyRoots",
    "build_prompt",
    "build_query",
    "bundled_ontology_path",
    "classify_expression",
    "dl",
    "extract_vocabulary",
    "intersection_of",
    "is_subsumed",
    "load_bundled_ontology",
    "parse_observation",
    "parse_ontology",
    "resolve_label",
    "send",
    "serialize_ontology",
    "told_ancestors",
    "told_descendants",
]


def bundled_ontology_path() -> Path:
    """Path to the rice disease ontology shipped with the package."""
    return Path(str(resources.files("ontodx") / "fixtures" / "rice_disease.ofn"))


def load_bundled_ontology() -> Ontology:
    return parse_ontology(bundled_ontology_path().read_text(encoding="utf-8"))
