"""Exception types shared across the package."""
from __future__ import annotations


class OntodxError(Exception):
    """Base class for every error deliberately raised by this package."""


# --- ontology document errors ------------------------------------------------

class ParseError(OntodxError):
    """Syntax error in an ontology document, with a source position."""

    def __init__(self, line: int, column: int, expected: str, found: str | None = None):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        detail = f", found {found!r}" if found is not None else ""
        super().__init__(f"line {line}, column {column}: expected {expected}{detail}")


class UnsupportedConstructError(OntodxError):
    """The document uses an OWL feature outside the supported subset."""

    def __init__(self, name: str, line: int = 0, column: int = 0):
        self.name = name
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"unsupported construct {name!r}{where}")


class UndeclaredEntityError(OntodxError):
    def __init__(self, iri, kind: str = "entity"):
        self.iri = iri
        self.kind = kind
        super().__init__(f"{kind} {iri} is referenced but not declared")


class CyclicDefinitionError(OntodxError):
    """The class-definition graph contains a cycle."""

    def __init__(self, chain):
        self.chain = tuple(chain)
        pretty = " -> ".join(i.local for i in self.chain)
        super().__init__(f"cyclic class definition: {pretty}")


class DuplicateDefinitionError(OntodxError):
    def __init__(self, iri):
        self.iri = iri
        super().__init__(f"class {iri} has more than one definition")


class DuplicateLabelError(OntodxError):
    def __init__(self, label: str, first, second):
        self.label = label
        self.first = first
        self.second = second
        super().__init__(
            f"label {label!r} maps to both {first} and {second} after normalization"
        )


class UnknownLabelError(OntodxError):
    """A label does not resolve to any class; carries nearest candidates."""

    def __init__(self, label: str, suggestions=(), field: str | None = None):
        self.label = label
        self.suggestions = tuple(suggestions)
        self.field = field
        hint = f" (closest: {', '.join(self.suggestions)})" if self.suggestions else ""
        where = f" for {field}" if field else ""
        super().__init__(f"unknown label {label!r}{where}{hint}")


# --- prompt / observation errors ----------------------------------------------

class EmptyVocabularyError(OntodxError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"vocabulary has no {kind} labels; cannot build a prompt")


class NoJsonFoundError(OntodxError):
    def __init__(self, snippet: str = ""):
        self.snippet = snippet
        super().__init__(f"no JSON object found in model reply: {snippet[:120]!r}")


class MissingKeyError(OntodxError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"model reply JSON is missing key {name!r}")


class NonStringValueError(OntodxError):
    def __init__(self, name: str, value=None):
        self.name = name
        self.value = value
        super().__init__(f"model reply value for {name!r} is not a string: {value!r}")


class ObservationLabelError(OntodxError):
    """One or more observation fields name concepts outside the ontology."""

    def __init__(self, failures):
        # failures: sequence of UnknownLabelError with .field set
        self.failures = tuple(failures)
        parts = "; ".join(str(f) for f in self.failures)
        super().__init__(f"observation does not resolve: {parts}")


# --- client errors -------------------------------------------------------------

class AuthError(OntodxError):
    pass


class RateLimitedError(OntodxError):
    pass


class RequestTimeoutError(OntodxError):
    pass


class BackendError(OntodxError):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class ReplayMissError(OntodxError):
    """The replay store has no recorded reply for this prompt/image pair."""

    def __init__(self, key: str, path=None):
        self.key = key
        self.path = path
        where = f" (looked for {path})" if path else ""
        super().__init__(f"no recorded reply for key {key}{where}")


# --- evaluation errors -----------------------------------------------------------

class MalformedDefinitionError(OntodxError):
    def __init__(self, disease, detail: str = ""):
        self.disease = disease
        tail = f": {detail}" if detail else ""
        super().__init__(f"definition of {disease} does not have the expected shape{tail}")


class ManifestError(OntodxError):
    pass


class EmptyInputError(OntodxError):
    pass
