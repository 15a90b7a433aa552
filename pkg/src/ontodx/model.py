"""Core data model: IRIs, class expressions, axioms, and the indexed ontology.

An :class:`Ontology` is immutable after construction and safe to share across
threads. Construction canonicalizes the axiom order (declarations, labels,
subclass axioms, definitions, each sorted by the involved IRIs) so that
serialization is deterministic and parse/serialize round-trips are identity
on the axiom list.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import (
    CyclicDefinitionError,
    DuplicateDefinitionError,
    DuplicateLabelError,
    UndeclaredEntityError,
    UnknownLabelError,
)

RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"


class Iri:
    """An entity identifier split into a namespace prefix and a local name.

    Equality, hashing and ordering all use the full form (namespace + local),
    case-sensitively.
    """

    __slots__ = ("namespace", "local")

    def __init__(self, namespace: str, local: str):
        if not namespace:
            raise ValueError("IRI namespace must be non-empty")
        if not local:
            raise ValueError("IRI local name must be non-empty")
        if "#" in local or any(c.isspace() for c in local):
            raise ValueError(f"invalid IRI local name {local!r}")
        self.namespace = namespace
        self.local = local

    @property
    def full(self) -> str:
        return self.namespace + self.local

    def __eq__(self, other) -> bool:
        return isinstance(other, Iri) and self.full == other.full

    def __hash__(self) -> int:
        return hash(self.full)

    def __lt__(self, other: "Iri") -> bool:
        return self.full < other.full

    def __repr__(self) -> str:
        return f"Iri({self.full!r})"

    def __str__(self) -> str:
        return self.full


# --- class expressions --------------------------------------------------------

class ClassExpression:
    """Base class for the four supported concept constructors."""

    __slots__ = ()


@dataclass(frozen=True, repr=False)
class Named(ClassExpression):
    cls: Iri

    def __repr__(self):
        return f"Named({self.cls.full!r})"


@dataclass(frozen=True)
class Some(ClassExpression):
    """Existential restriction: things related by `prop` to some `filler`."""

    prop: Iri
    filler: ClassExpression


@dataclass(frozen=True)
class Intersection(ClassExpression):
    operands: tuple[ClassExpression, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise ValueError("Intersection needs at least two operands")
        if any(isinstance(op, Intersection) for op in self.operands):
            raise ValueError("nested Intersection; flatten with intersection_of()")


@dataclass(frozen=True)
class Union(ClassExpression):
    operands: tuple[ClassExpression, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise ValueError("Union needs at least two operands")


def intersection_of(operands: Iterable[ClassExpression]) -> ClassExpression:
    """Conjoin expressions, flattening nested intersections.

    A single operand is returned bare; this is the normal form used everywhere.
    """
    flat: list[ClassExpression] = []
    for op in operands:
        if isinstance(op, Intersection):
            flat.extend(op.operands)
        else:
            flat.append(op)
    if not flat:
        raise ValueError("cannot conjoin zero expressions")
    if len(flat) == 1:
        return flat[0]
    return Intersection(tuple(flat))


def conjuncts_of(expr: ClassExpression) -> tuple[ClassExpression, ...]:
    if isinstance(expr, Intersection):
        return expr.operands
    return (expr,)


def contains_union(expr: ClassExpression) -> bool:
    if isinstance(expr, Union):
        return True
    if isinstance(expr, Intersection):
        return any(contains_union(op) for op in expr.operands)
    if isinstance(expr, Some):
        return contains_union(expr.filler)
    return False


def iter_expression_iris(expr: ClassExpression) -> Iterator[tuple[Iri, str]]:
    """Yield (iri, kind) pairs for every entity the expression mentions."""
    if isinstance(expr, Named):
        yield expr.cls, "class"
    elif isinstance(expr, Some):
        yield expr.prop, "property"
        yield from iter_expression_iris(expr.filler)
    elif isinstance(expr, (Intersection, Union)):
        for op in expr.operands:
            yield from iter_expression_iris(op)
    else:  # pragma: no cover - defensive
        raise TypeError(f"not a class expression: {expr!r}")


def named_iris(expr: ClassExpression) -> Iterator[Iri]:
    for iri, kind in iter_expression_iris(expr):
        if kind == "class":
            yield iri


def dl(expr: ClassExpression) -> str:
    """Render an expression in compact Manchester-like text for traces."""
    if isinstance(expr, Named):
        return expr.cls.local
    if isinstance(expr, Some):
        return f"{expr.prop.local} some {_dl_atom(expr.filler)}"
    if isinstance(expr, Intersection):
        return " and ".join(_dl_atom(op) for op in expr.operands)
    if isinstance(expr, Union):
        return " or ".join(_dl_atom(op) for op in expr.operands)
    raise TypeError(f"not a class expression: {expr!r}")


def _dl_atom(expr: ClassExpression) -> str:
    if isinstance(expr, Named):
        return expr.cls.local
    return f"({dl(expr)})"


# --- axioms --------------------------------------------------------------------

DECLARATION_KINDS = ("Class", "ObjectProperty")


class Axiom:
    __slots__ = ()


@dataclass(frozen=True)
class Declaration(Axiom):
    kind: str
    entity: Iri

    def __post_init__(self):
        if self.kind not in DECLARATION_KINDS:
            raise ValueError(f"unsupported declaration kind {self.kind!r}")


@dataclass(frozen=True)
class SubClassOf(Axiom):
    sub: ClassExpression
    sup: ClassExpression


@dataclass(frozen=True)
class EquivalentClasses(Axiom):
    lhs: Iri
    rhs: ClassExpression


@dataclass(frozen=True)
class Label(Axiom):
    entity: Iri
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("label text must be non-empty")


def _expr_key(expr: ClassExpression):
    if isinstance(expr, Named):
        return (0, expr.cls.full)
    if isinstance(expr, Some):
        return (1, expr.prop.full, _expr_key(expr.filler))
    if isinstance(expr, Intersection):
        return (2, tuple(_expr_key(op) for op in expr.operands))
    return (3, tuple(_expr_key(op) for op in expr.operands))


def axiom_sort_key(axiom: Axiom):
    if isinstance(axiom, Declaration):
        return (0, axiom.entity.full, axiom.kind)
    if isinstance(axiom, Label):
        return (1, axiom.entity.full, axiom.text)
    if isinstance(axiom, SubClassOf):
        return (2, _expr_key(axiom.sub), _expr_key(axiom.sup))
    return (3, axiom.lhs.full, _expr_key(axiom.rhs))


# --- labels ---------------------------------------------------------------------

_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_NORM_RE = re.compile(r"[\s_\-]+")


def split_camel_case(name: str) -> str:
    """SpotOnLeaf -> 'Spot On Leaf'; used as the display label fallback."""
    return _CAMEL_RE.sub(" ", name)


def normalize_label(label: str) -> str:
    """Lowercase and strip whitespace, hyphens and underscores.

    Token order is preserved: 'YellowishBrown' stays distinct from
    'BrownishYellow'.
    """
    return _NORM_RE.sub("", label).lower()


def edit_distance(a: str, b: str) -> int:
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# --- ontology --------------------------------------------------------------------

class Ontology:
    """Parsed axiom set with the indexes the rest of the package needs.

    Read-only after construction. Raises typed errors when the axiom set
    violates an invariant: references to undeclared entities, cyclic class
    definitions, more than one definition per class, or label collisions
    after normalization.
    """

    def __init__(
        self,
        axioms: Iterable[Axiom],
        prefixes: Mapping[str, str] | None = None,
        ontology_iri: str | None = None,
    ):
        self.axioms: tuple[Axiom, ...] = tuple(sorted(axioms, key=axiom_sort_key))
        self.prefixes: dict[str, str] = dict(prefixes or {})
        self.ontology_iri = ontology_iri

        self.classes: set[Iri] = set()
        self.properties: set[Iri] = set()
        self.told_supers: dict[Iri, tuple[Iri, ...]] = {}
        self.complex_supers: dict[Iri, tuple[ClassExpression, ...]] = {}
        self.definitions: dict[Iri, ClassExpression] = {}
        self.explicit_labels: dict[Iri, str] = {}
        self.label_index: dict[str, Iri] = {}

        self._build_indexes()
        self._check_declared()
        self._check_definition_acyclicity()
        self._build_label_index()

    # -- construction helpers -------------------------------------------------

    def _build_indexes(self) -> None:
        told: dict[Iri, list[Iri]] = {}
        complex_: dict[Iri, list[ClassExpression]] = {}
        for ax in self.axioms:
            if isinstance(ax, Declaration):
                (self.classes if ax.kind == "Class" else self.properties).add(ax.entity)
            elif isinstance(ax, SubClassOf):
                if isinstance(ax.sub, Named):
                    if isinstance(ax.sup, Named):
                        told.setdefault(ax.sub.cls, []).append(ax.sup.cls)
                    else:
                        complex_.setdefault(ax.sub.cls, []).append(ax.sup)
            elif isinstance(ax, EquivalentClasses):
                if ax.lhs in self.definitions:
                    raise DuplicateDefinitionError(ax.lhs)
                self.definitions[ax.lhs] = ax.rhs
            elif isinstance(ax, Label):
                self.explicit_labels[ax.entity] = ax.text
        self.told_supers = {c: tuple(sorted(set(v))) for c, v in told.items()}
        self.complex_supers = {c: tuple(v) for c, v in complex_.items()}

    def _check_declared(self) -> None:
        for ax in self.axioms:
            if isinstance(ax, Declaration):
                continue
            if isinstance(ax, SubClassOf):
                refs = list(iter_expression_iris(ax.sub))
                refs += list(iter_expression_iris(ax.sup))
            elif isinstance(ax, EquivalentClasses):
                refs = [(ax.lhs, "class")] + list(iter_expression_iris(ax.rhs))
            else:  # Label
                if ax.entity not in self.classes and ax.entity not in self.properties:
                    raise UndeclaredEntityError(ax.entity)
                continue
            for iri, kind in refs:
                if kind == "class" and iri not in self.classes:
                    raise UndeclaredEntityError(iri, "class")
                if kind == "property" and iri not in self.properties:
                    raise UndeclaredEntityError(iri, "object property")

    def _check_definition_acyclicity(self) -> None:
        # Edges: defined class -> every named class mentioned in its body.
        edges = {
            lhs: sorted(set(named_iris(rhs))) for lhs, rhs in self.definitions.items()
        }
        WHITE, GRAY, BLACK = 0, 1, 2
        color: dict[Iri, int] = {}
        path: list[Iri] = []

        def visit(node: Iri) -> None:
            color[node] = GRAY
            path.append(node)
            for nxt in edges.get(node, ()):
                state = color.get(nxt, WHITE)
                if state == GRAY:
                    cycle = path[path.index(nxt):] + [nxt]
                    raise CyclicDefinitionError(cycle)
                if state == WHITE and nxt in edges:
                    visit(nxt)
            path.pop()
            color[node] = BLACK

        for start in sorted(edges):
            if color.get(start, WHITE) == WHITE:
                visit(start)

    def _build_label_index(self) -> None:
        for cls in sorted(self.classes):
            label = self.display_label(cls)
            key = normalize_label(label)
            other = self.label_index.get(key)
            if other is not None and other != cls:
                raise DuplicateLabelError(label, other, cls)
            self.label_index[key] = cls

    # -- queries ----------------------------------------------------------------

    @property
    def default_namespace(self) -> str | None:
        return self.prefixes.get("")

    def display_label(self, iri: Iri) -> str:
        """Explicit rdfs:label if present, else the camel-case-split local name."""
        return self.explicit_labels.get(iri) or split_camel_case(iri.local)

    def require_class(self, iri: Iri) -> None:
        if iri not in self.classes:
            raise UndeclaredEntityError(iri, "class")

    def require_property(self, iri: Iri) -> None:
        if iri not in self.properties:
            raise UndeclaredEntityError(iri, "object property")

    def require_expression(self, expr: ClassExpression) -> None:
        for iri, kind in iter_expression_iris(expr):
            if kind == "class":
                self.require_class(iri)
            else:
                self.require_property(iri)

    def resolve_label(self, label: str) -> Iri:
        """Map a free-text label to a class by exact normalized match.

        No fuzzy acceptance: a failed lookup raises UnknownLabelError whose
        suggestions (at most three, nearest by edit distance) are for
        diagnostics only.
        """
        key = normalize_label(label)
        hit = self.label_index.get(key)
        if hit is not None:
            return hit
        ranked = sorted(
            ((edit_distance(key, known), known) for known in self.label_index),
            key=lambda t: (t[0], t[1]),
        )
        suggestions = tuple(
            self.display_label(self.label_index[known]) for _, known in ranked[:3]
        )
        raise UnknownLabelError(label, suggestions)


def resolve_label(onto: Ontology, label: str) -> Iri:
    return onto.resolve_label(label)
