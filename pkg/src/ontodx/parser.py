"""Reader and writer for the supported OWL 2 functional-style syntax subset.

Supported constructs: Prefix declarations, an optional Ontology(...) wrapper,
Declaration(Class|ObjectProperty), SubClassOf, EquivalentClasses with a named
left side, AnnotationAssertion(rdfs:label ...), and the class constructors
ObjectIntersectionOf, ObjectUnionOf and ObjectSomeValuesFrom. Every other OWL
construct raises UnsupportedConstructError; malformed input raises ParseError
with a line/column position.
"""
from __future__ import annotations

import re

from .errors import ParseError, UnsupportedConstructError
from .model import (
    RDFS_NS,
    Axiom,
    ClassExpression,
    Declaration,
    EquivalentClasses,
    Intersection,
    Iri,
    Label,
    Named,
    Ontology,
    Some,
    SubClassOf,
    Union,
    intersection_of,
)

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<iriref><[^<>\s]*>)
    | (?P<string>"(?:[^"\\]|\\.)*")
    | (?P<pname>(?:[A-Za-z_][A-Za-z0-9_.\-]*)?:[A-Za-z_][A-Za-z0-9_.\-]*)
    | (?P<name>[A-Za-z_][A-Za-z0-9_.\-]*)
    | (?P<number>\d+)
    | (?P<lparen>\()
    | (?P<rparen>\))
    | (?P<eq>=)
    | (?P<colon>:)
    | (?P<at>@)
    | (?P<caret>\^\^)
    """,
    re.VERBOSE,
)

_CONSTRUCTORS = {"ObjectIntersectionOf", "ObjectUnionOf", "ObjectSomeValuesFrom"}
_AXIOM_NAMES = {"Declaration", "SubClassOf", "EquivalentClasses", "AnnotationAssertion"}

# Recognized-but-rejected OWL vocabulary, reported as UnsupportedConstructError
# rather than a bare syntax error.
_KNOWN_UNSUPPORTED = {
    # declarations
    "NamedIndividual", "DataProperty", "AnnotationProperty", "Datatype",
    # class expressions
    "ObjectComplementOf", "ObjectAllValuesFrom", "ObjectHasValue", "ObjectHasSelf",
    "ObjectOneOf", "ObjectMinCardinality", "ObjectMaxCardinality",
    "ObjectExactCardinality", "DataSomeValuesFrom", "DataAllValuesFrom",
    "DataHasValue", "DataMinCardinality", "DataMaxCardinality",
    "DataExactCardinality",
    # axioms
    "DisjointClasses", "DisjointUnion", "SubObjectPropertyOf",
    "EquivalentObjectProperties", "DisjointObjectProperties",
    "InverseObjectProperties", "ObjectPropertyDomain", "ObjectPropertyRange",
    "FunctionalObjectProperty", "InverseFunctionalObjectProperty",
    "ReflexiveObjectProperty", "IrreflexiveObjectProperty",
    "SymmetricObjectProperty", "AsymmetricObjectProperty",
    "TransitiveObjectProperty", "SubDataPropertyOf", "EquivalentDataProperties",
    "DisjointDataProperties", "DataPropertyDomain", "DataPropertyRange",
    "FunctionalDataProperty", "DatatypeDefinition", "HasKey", "ClassAssertion",
    "ObjectPropertyAssertion", "NegativeObjectPropertyAssertion",
    "DataPropertyAssertion", "NegativeDataPropertyAssertion", "SameIndividual",
    "DifferentIndividuals", "SubAnnotationPropertyOf", "AnnotationPropertyDomain",
    "AnnotationPropertyRange", "Import",
}


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind: str, text: str, line: int, column: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    line_start = 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a token", text[pos])
        kind = m.lastgroup or ""
        lexeme = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, lexeme, line, m.start() - line_start + 1))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + lexeme.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.prefixes: dict[str, str] = {}
        self.ontology_iri: str | None = None

    # -- token plumbing ---------------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str, tok: _Token | None = None):
        tok = tok or self.peek()
        found = tok.text if tok.kind != "eof" else "end of input"
        raise ParseError(tok.line, tok.column, expected, found)

    def expect(self, kind: str, expected: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(expected)
        return self.advance()

    def expect_name(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "name" or tok.text != text:
            self.fail(repr(text))
        return self.advance()

    # -- grammar ------------------------------------------------------------------

    def parse_document(self) -> Ontology:
        while self.peek().kind == "name" and self.peek().text == "Prefix":
            self.parse_prefix()
        axioms: list[Axiom] = []
        if self.peek().kind == "name" and self.peek().text == "Ontology":
            self.advance()
            self.expect("lparen", "'('")
            if self.peek().kind == "iriref":
                self.ontology_iri = self.advance().text[1:-1]
            while self.peek().kind != "rparen":
                if self.peek().kind == "eof":
                    self.fail("an axiom or ')'")
                axioms.append(self.parse_axiom())
            self.advance()
        else:
            while self.peek().kind != "eof":
                axioms.append(self.parse_axiom())
        if self.peek().kind != "eof":
            self.fail("end of document")
        return Ontology(axioms, self.prefixes, self.ontology_iri)

    def parse_prefix(self) -> None:
        self.expect_name("Prefix")
        self.expect("lparen", "'('")
        tok = self.peek()
        if tok.kind == "colon":
            name = ""
            self.advance()
        elif tok.kind == "name":
            name = self.advance().text
            self.expect("colon", "':'")
        else:
            self.fail("a prefix name or ':'")
        self.expect("eq", "'='")
        iri_tok = self.expect("iriref", "an IRI in angle brackets")
        self.expect("rparen", "')'")
        if name in self.prefixes:
            raise ParseError(tok.line, tok.column, "a fresh prefix name", name + ":")
        self.prefixes[name] = iri_tok.text[1:-1]

    def parse_axiom(self) -> Axiom:
        tok = self.peek()
        if tok.kind != "name":
            self.fail("an axiom")
        if tok.text in _KNOWN_UNSUPPORTED:
            raise UnsupportedConstructError(tok.text, tok.line, tok.column)
        if tok.text not in _AXIOM_NAMES:
            # Looks like a construct call we do not know about.
            if self.tokens[self.pos + 1].kind == "lparen":
                raise UnsupportedConstructError(tok.text, tok.line, tok.column)
            self.fail("an axiom")
        self.advance()
        self.expect("lparen", "'('")
        if tok.text == "Declaration":
            ax = self.parse_declaration_body()
        elif tok.text == "SubClassOf":
            ax = SubClassOf(self.parse_class_expr(), self.parse_class_expr())
        elif tok.text == "EquivalentClasses":
            ax = self.parse_equivalent_body()
        else:
            ax = self.parse_annotation_body()
        self.expect("rparen", "')'")
        return ax

    def parse_declaration_body(self) -> Declaration:
        tok = self.peek()
        if tok.kind != "name":
            self.fail("'Class' or 'ObjectProperty'")
        if tok.text in _KNOWN_UNSUPPORTED:
            raise UnsupportedConstructError(tok.text, tok.line, tok.column)
        if tok.text not in ("Class", "ObjectProperty"):
            self.fail("'Class' or 'ObjectProperty'")
        self.advance()
        self.expect("lparen", "'('")
        entity = self.parse_entity()
        self.expect("rparen", "')'")
        return Declaration(tok.text, entity)

    def parse_equivalent_body(self) -> EquivalentClasses:
        tok = self.peek()
        if tok.kind not in ("pname", "iriref"):
            self.fail("a named class on the left of EquivalentClasses")
        lhs = self.parse_entity()
        rhs = self.parse_class_expr()
        if self.peek().kind != "rparen":
            extra = self.peek()
            raise UnsupportedConstructError(
                "n-ary EquivalentClasses", extra.line, extra.column
            )
        return EquivalentClasses(lhs, rhs)

    def parse_annotation_body(self) -> Label:
        tok = self.peek()
        if tok.kind != "pname":
            self.fail("an annotation property")
        full = self._resolve_pname_text(tok)
        if full != RDFS_NS + "label":
            raise UnsupportedConstructError(
                f"annotation property {tok.text}", tok.line, tok.column
            )
        self.advance()
        entity = self.parse_entity()
        text_tok = self.expect("string", "a quoted string")
        nxt = self.peek()
        if nxt.kind == "at":
            raise UnsupportedConstructError("language-tagged literal", nxt.line, nxt.column)
        if nxt.kind == "caret":
            raise UnsupportedConstructError("typed literal", nxt.line, nxt.column)
        value = _unescape_string(text_tok)
        if not value:
            raise ParseError(text_tok.line, text_tok.column, "a non-empty label string")
        return Label(entity, value)

    def parse_class_expr(self) -> ClassExpression:
        tok = self.peek()
        if tok.kind in ("pname", "iriref"):
            return Named(self.parse_entity())
        if tok.kind != "name":
            self.fail("a class expression")
        if tok.text in _CONSTRUCTORS:
            self.advance()
            self.expect("lparen", "'('")
            if tok.text == "ObjectSomeValuesFrom":
                prop = self.parse_entity()
                filler = self.parse_class_expr()
                expr: ClassExpression = Some(prop, filler)
            else:
                operands = [self.parse_class_expr()]
                while self.peek().kind != "rparen":
                    if self.peek().kind == "eof":
                        self.fail("a class expression or ')'")
                    operands.append(self.parse_class_expr())
                if len(operands) < 2:
                    self.fail("at least two operands")
                if tok.text == "ObjectIntersectionOf":
                    expr = intersection_of(operands)
                else:
                    expr = Union(tuple(operands))
            self.expect("rparen", "')'")
            return expr
        if tok.text in _KNOWN_UNSUPPORTED or self.tokens[self.pos + 1].kind == "lparen":
            raise UnsupportedConstructError(tok.text, tok.line, tok.column)
        self.fail("a class expression")

    def parse_entity(self) -> Iri:
        tok = self.peek()
        if tok.kind == "pname":
            full = self._resolve_pname_text(tok)
            self.advance()
            return self._split_full_iri(full, tok)
        if tok.kind == "iriref":
            self.advance()
            return self._split_full_iri(tok.text[1:-1], tok)
        self.fail("an entity (prefixed name or IRI)")

    # -- helpers -----------------------------------------------------------------

    def _resolve_pname_text(self, tok: _Token) -> str:
        prefix, local = tok.text.split(":", 1)
        ns = self.prefixes.get(prefix)
        if ns is None:
            if prefix == "rdfs":
                ns = RDFS_NS
            else:
                shown = prefix + ":" if prefix else ":"
                raise ParseError(tok.line, tok.column, "a declared prefix", shown)
        return ns + local

    def _split_full_iri(self, full: str, tok: _Token) -> Iri:
        cut = full.rfind("#")
        if cut < 0:
            cut = full.rfind("/")
        if cut < 0 or cut + 1 >= len(full):
            raise ParseError(tok.line, tok.column, "an IRI with a local name", full)
        try:
            return Iri(full[: cut + 1], full[cut + 1:])
        except ValueError:
            raise ParseError(tok.line, tok.column, "a well-formed IRI", full) from None


def _unescape_string(tok: _Token) -> str:
    body = tok.text[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            if i + 1 >= len(body):
                raise ParseError(tok.line, tok.column, "a complete escape sequence")
            nxt = body[i + 1]
            if nxt not in ('"', "\\"):
                raise ParseError(tok.line, tok.column, "an escape of '\"' or '\\\\'", nxt)
            out.append(nxt)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def parse_ontology(text: str) -> Ontology:
    """Parse a document into an Ontology, running all structural checks."""
    return _Parser(text).parse_document()


# --- serialization ------------------------------------------------------------------


def serialize_ontology(onto: Ontology) -> str:
    """Render an ontology back to functional syntax in canonical order.

    The output parses back to an ontology with an identical axiom list, and
    repeated serialization is byte-identical.
    """
    lines: list[str] = []
    for name in sorted(onto.prefixes):
        lines.append(f"Prefix({name}:=<{onto.prefixes[name]}>)")
    if lines:
        lines.append("")
    head = "Ontology("
    if onto.ontology_iri:
        head += f"<{onto.ontology_iri}>"
    lines.append(head)
    for ax in onto.axioms:
        lines.append("  " + _render_axiom(ax, onto))
    lines.append(")")
    return "\n".join(lines) + "\n"


def _render_axiom(ax: Axiom, onto: Ontology) -> str:
    if isinstance(ax, Declaration):
        return f"Declaration({ax.kind}({_render_entity(ax.entity, onto)}))"
    if isinstance(ax, Label):
        text = ax.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'AnnotationAssertion(rdfs:label {_render_entity(ax.entity, onto)} "{text}")'
    if isinstance(ax, SubClassOf):
        return f"SubClassOf({_render_expr(ax.sub, onto)} {_render_expr(ax.sup, onto)})"
    return (
        f"EquivalentClasses({_render_entity(ax.lhs, onto)} "
        f"{_render_expr(ax.rhs, onto)})"
    )


def _render_expr(expr: ClassExpression, onto: Ontology) -> str:
    if isinstance(expr, Named):
        return _render_entity(expr.cls, onto)
    if isinstance(expr, Some):
        return (
            f"ObjectSomeValuesFrom({_render_entity(expr.prop, onto)} "
            f"{_render_expr(expr.filler, onto)})"
        )
    name = "ObjectIntersectionOf" if isinstance(expr, Intersection) else "ObjectUnionOf"
    inner = " ".join(_render_expr(op, onto) for op in expr.operands)
    return f"{name}({inner})"


def _render_entity(iri: Iri, onto: Ontology) -> str:
    for name in sorted(onto.prefixes, key=lambda n: (n != "", n)):
        if onto.prefixes[name] == iri.namespace:
            return f"{name}:{iri.local}"
    return f"<{iri.full}>"
