"""Structural subsumption reasoning over an ontology.

The decision procedure unfolds class definitions (acyclic by construction),
saturates named conjuncts with their told superclasses, and then matches the
right-hand expression conjunct by conjunct:

  * a named class matches when it appears in the saturated atom set, or when
    its definition body matches;
  * an existential restriction matches when some left-side existential with
    the same property has a filler subsumed by the right filler;
  * an intersection requires all conjuncts, a union any disjunct.

Disjunctions that definitions introduce on the left side are handled by case
analysis over the disjuncts. The procedure is sound for this fragment and,
for union-free query expressions over acyclic definitions with named told
superclasses, matches a canonical-model oracle exactly.

Queries (the left side) must be union-free as written; unions there are
rejected rather than approximated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    ClassExpression,
    Intersection,
    Iri,
    Named,
    Ontology,
    Some,
    Union,
    contains_union,
    dl,
)


@dataclass(frozen=True)
class TraceStep:
    """One justification step: which query part matched which target part."""

    query_part: str | None
    target_part: str
    rule: str
    depth: int = 0

    def render(self) -> str:
        pad = "  " * self.depth
        if self.query_part is None:
            return f"{pad}{self.target_part}  [{self.rule}]"
        return f"{pad}{self.target_part}  <==  {self.query_part}  [{self.rule}]"


@dataclass(frozen=True)
class SubsumptionVerdict:
    holds: bool
    trace: tuple[TraceStep, ...]


@dataclass(frozen=True)
class Diagnosis:
    """Disease classes matching a query, with per-candidate justifications.

    `matched` is subsumption-minimal (no member is a strict told ancestor of
    another member) and ordered lexicographically. `verdicts` covers every
    candidate tested, including failures with their first failing conjunct.
    """

    query: ClassExpression
    matched: tuple[Iri, ...]
    verdicts: dict[Iri, SubsumptionVerdict]


@dataclass(frozen=True)
class VocabularyRoots:
    color: Iri
    symptom: Iri
    shape: Iri
    plant_part: Iri


@dataclass(frozen=True)
class AbnormalityVocabulary:
    """(label, class) pairs per concept kind, sorted by label, duplicate-free."""

    colors: tuple[tuple[str, Iri], ...]
    symptoms: tuple[tuple[str, Iri], ...]
    shapes: tuple[tuple[str, Iri], ...]
    plant_parts: tuple[tuple[str, Iri], ...]

    def labels(self, kind: str) -> tuple[str, ...]:
        return tuple(label for label, _ in getattr(self, kind))


# --- told hierarchy ----------------------------------------------------------------


def told_ancestors(onto: Ontology, cls: Iri) -> frozenset[Iri]:
    """Reflexive-transitive closure over stated subclass edges plus the named
    conjuncts of definitions."""
    onto.require_class(cls)
    seen: set[Iri] = set()
    stack = [cls]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(onto.told_supers.get(cur, ()))
        defn = onto.definitions.get(cur)
        if defn is not None:
            for part in _top_conjuncts(defn):
                if isinstance(part, Named):
                    stack.append(part.cls)
    return frozenset(seen)


def told_descendants(onto: Ontology, root: Iri) -> frozenset[Iri]:
    onto.require_class(root)
    return frozenset(c for c in onto.classes if root in told_ancestors(onto, c))


def _top_conjuncts(expr: ClassExpression) -> tuple[ClassExpression, ...]:
    if isinstance(expr, Intersection):
        return expr.operands
    return (expr,)


# --- vocabulary extraction ------------------------------------------------------------


def extract_vocabulary(
    onto: Ontology,
    roots: VocabularyRoots,
    exclude: frozenset[Iri] | set[Iri] = frozenset(),
) -> AbnormalityVocabulary:
    """Collect the strict named descendants of each vocabulary root.

    Intermediate grouping classes count as descendants and are included
    unless listed in `exclude`.
    """

    def collect(root: Iri) -> tuple[tuple[str, Iri], ...]:
        items = [
            (onto.display_label(c), c)
            for c in told_descendants(onto, root)
            if c != root and c not in exclude
        ]
        return tuple(sorted(items))

    return AbnormalityVocabulary(
        colors=collect(roots.color),
        symptoms=collect(roots.symptom),
        shapes=collect(roots.shape),
        plant_parts=collect(roots.plant_part),
    )


# --- subsumption -------------------------------------------------------------------


@dataclass
class _State:
    """Saturated conjunct set of the left-hand side.

    `atoms` is an ordered set of named classes closed under told ancestors;
    `exists` the existential conjuncts; `unions` pending disjunctions that
    definitions introduced. `seen_defs` guards each definition against being
    unfolded twice along one case branch, which also bounds the case
    analysis.
    """

    onto: Ontology
    atoms: dict[Iri, None] = field(default_factory=dict)
    exists: list[Some] = field(default_factory=list)
    unions: list[Union] = field(default_factory=list)
    seen_defs: set[Iri] = field(default_factory=set)
    seen_complex: set[Iri] = field(default_factory=set)

    def branch(self) -> "_State":
        clone = _State(self.onto)
        clone.atoms = dict(self.atoms)
        clone.exists = list(self.exists)
        clone.unions = list(self.unions)
        clone.seen_defs = set(self.seen_defs)
        clone.seen_complex = set(self.seen_complex)
        return clone

    def add(self, exprs) -> None:
        queue = list(exprs)
        while queue:
            expr = queue.pop(0)
            if isinstance(expr, Named):
                for anc in sorted(told_ancestors(self.onto, expr.cls)):
                    if anc not in self.atoms:
                        self.atoms[anc] = None
                    defn = self.onto.definitions.get(anc)
                    if defn is not None and anc not in self.seen_defs:
                        self.seen_defs.add(anc)
                        queue.append(defn)
                    if anc not in self.seen_complex:
                        self.seen_complex.add(anc)
                        queue.extend(self.onto.complex_supers.get(anc, ()))
            elif isinstance(expr, Intersection):
                queue.extend(expr.operands)
            elif isinstance(expr, Some):
                if expr not in self.exists:
                    self.exists.append(expr)
            elif isinstance(expr, Union):
                if expr not in self.unions:
                    self.unions.append(expr)
            else:  # pragma: no cover - defensive
                raise TypeError(f"not a class expression: {expr!r}")


def is_subsumed(
    onto: Ontology, sub: ClassExpression, sup: ClassExpression
) -> SubsumptionVerdict:
    """Decide sub <= sup and return the verdict with its justification trace.

    `sub` must be union-free as written and both expressions must only
    mention declared entities.
    """
    onto.require_expression(sub)
    onto.require_expression(sup)
    if contains_union(sub):
        raise ValueError("the left side of a subsumption query must be union-free")
    state = _State(onto)
    state.add([sub])
    holds, steps = _prove(state, sup, 0)
    return SubsumptionVerdict(holds, tuple(steps))


def _prove(state: _State, sup: ClassExpression, depth: int):
    if state.unions:
        union = state.unions[0]
        steps: list[TraceStep] = [
            TraceStep(dl(union), dl(sup), "case-split", depth)
        ]
        first = True
        for disjunct in union.operands:
            branch = state.branch()
            branch.unions.pop(0)
            branch.add([disjunct])
            ok, sub_steps = _prove(branch, sup, depth + 1)
            if not ok:
                return False, steps + sub_steps
            if first:
                steps.extend(sub_steps)
                first = False
        return True, steps
    return _prove_conjunctive(state, sup, depth)


def _prove_conjunctive(state: _State, sup: ClassExpression, depth: int):
    """Match one right-hand expression against the saturated state.

    On success the steps cover every conjunct of `sup`; on failure they
    descend along the failing path only, so the last step names the deepest
    unmatched conjunct.
    """
    onto = state.onto
    if isinstance(sup, Intersection):
        steps: list[TraceStep] = []
        for part in sup.operands:
            ok, sub_steps = _prove_conjunctive(state, part, depth)
            if not ok:
                return False, sub_steps
            steps.extend(sub_steps)
        return True, steps

    if isinstance(sup, Union):
        for disjunct in sup.operands:
            ok, sub_steps = _prove_conjunctive(state, disjunct, depth + 1)
            if ok:
                step = TraceStep(dl(disjunct), dl(sup), "union", depth)
                return True, [step] + sub_steps
        return False, [TraceStep(None, dl(sup), "unmatched", depth)]

    if isinstance(sup, Named):
        target = sup.cls
        if target in state.atoms:
            source = next(
                a for a in state.atoms if target in told_ancestors(onto, a)
            )
            rule = "identity" if source == target else "told-ancestor"
            return True, [TraceStep(source.local, target.local, rule, depth)]
        defn = onto.definitions.get(target)
        if defn is not None:
            ok, sub_steps = _prove_conjunctive(state, defn, depth + 1)
            step = TraceStep(
                None,
                f"{target.local} := {dl(defn)}" if ok else target.local,
                "definition" if ok else "unmatched",
                depth,
            )
            return ok, [step] + sub_steps
        return False, [TraceStep(None, target.local, "unmatched", depth)]

    if isinstance(sup, Some):
        first_failure: list[TraceStep] | None = None
        for candidate in state.exists:
            if candidate.prop != sup.prop:
                continue
            inner = _State(onto)
            inner.add([candidate.filler])
            ok, sub_steps = _prove(inner, sup.filler, depth + 1)
            if ok:
                step = TraceStep(dl(candidate), dl(sup), "existential", depth)
                return True, [step] + sub_steps
            if first_failure is None:
                first_failure = sub_steps
        fail = [TraceStep(None, dl(sup), "unmatched", depth)]
        return False, fail + (first_failure or [])

    raise TypeError(f"not a class expression: {sup!r}")  # pragma: no cover


# --- classification -----------------------------------------------------------------


def classify_expression(onto: Ontology, query: ClassExpression, root: Iri) -> Diagnosis:
    """Test the query against every defined descendant of `root`.

    Returns the subsumption-minimal matches plus a verdict for every
    candidate; candidate order is lexicographic, so identical inputs yield
    identical diagnoses.
    """
    onto.require_class(root)
    onto.require_expression(query)
    if contains_union(query):
        raise ValueError("query expressions must be union-free")
    candidates = sorted(
        c for c in told_descendants(onto, root) if c in onto.definitions
    )
    verdicts: dict[Iri, SubsumptionVerdict] = {}
    for candidate in candidates:
        verdicts[candidate] = is_subsumed(onto, query, Named(candidate))
    matched_all = [c for c in candidates if verdicts[c].holds]
    matched = tuple(
        c
        for c in matched_all
        if not any(d != c and c in told_ancestors(onto, d) for d in matched_all)
    )
    return Diagnosis(query=query, matched=matched, verdicts=verdicts)
