"""Deterministic prompt rendering from an entity name and a vocabulary.

The template asks the model for exactly three JSON keys and lists the
allowed labels inside a triple-quoted context block, color first, then
symptom, then shape. Label order is lexicographic so that the rendered text
and its fingerprint are stable; replay fixtures are keyed by fingerprint.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import EmptyVocabularyError
from .reasoner import AbnormalityVocabulary

TEMPLATE_VERSION = "1"

_TEMPLATE = (
    "As an expert of {entity} diseases, your task is to examine the given image "
    "of the {entity} in a detailed manner to look for color abnormalities, "
    "symptom abnormalities, and shape of symptom abnormalities.\n"
    "Alongside the image of {entity}, you will be provided with the possible set "
    "of color abnormalities and symptom abnormalities and the shape of these "
    "symptoms delimited by triple quotes.\n"
    "Return the information in the following JSON format (note xxx is a "
    'placeholder, if the information is not available in the image, put "N/A" '
    "instead):\n"
    '{{"SymptomAbnormality": xxx, "ColorAbnormality": xxx, '
    '"ShapeOfSymptomAbnormality": xxx}}\n'
    "Don't provide anything other than the results in the JSON format.\n"
    "'''\n"
    '"ColorAbnormality": {colors},\n'
    '"SymptomAbnormality": {symptoms},\n'
    '"ShapeOfSymptomAbnormality": {shapes}\n'
    "'''\n"
)


@dataclass(frozen=True)
class PromptSpec:
    """A rendered prompt plus the stable fingerprint of its inputs."""

    entity: str
    vocabulary: AbnormalityVocabulary
    text: str
    fingerprint: str


def build_prompt(entity: str, vocab: AbnormalityVocabulary) -> PromptSpec:
    """Render the prompt for `entity` with the vocabulary's display labels.

    Plant-part labels are extracted alongside the rest of the vocabulary but
    deliberately not listed; the model is asked only for the three
    abnormality kinds.
    """
    if not entity:
        raise ValueError("entity must be non-empty")
    for kind in ("symptoms", "colors", "shapes"):
        if not getattr(vocab, kind):
            raise EmptyVocabularyError(kind)
    text = _TEMPLATE.format(
        entity=entity,
        colors=", ".join(vocab.labels("colors")),
        symptoms=", ".join(vocab.labels("symptoms")),
        shapes=", ".join(vocab.labels("shapes")),
    )
    return PromptSpec(
        entity=entity,
        vocabulary=vocab,
        text=text,
        fingerprint=_fingerprint(entity, vocab),
    )


def _fingerprint(entity: str, vocab: AbnormalityVocabulary) -> str:
    payload = {
        "template_version": TEMPLATE_VERSION,
        "entity": entity,
        "colors": [[label, iri.full] for label, iri in vocab.colors],
        "symptoms": [[label, iri.full] for label, iri in vocab.symptoms],
        "shapes": [[label, iri.full] for label, iri in vocab.shapes],
        "plant_parts": [[label, iri.full] for label, iri in vocab.plant_parts],
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    )
    return digest.hexdigest()[:16]
