"""Dataset evaluation: gold concepts, alignment metrics, and the batch pipeline.

Gold concepts per image are class-level, derived from the ontology definition
of the image's disease class; the per-concept exact measure therefore
conflates model error with intra-class visual variation, which the report
header states. Accuracies are computed with exact rational arithmetic and
serialized as floats.

The concept-wise accuracy TP/(TP+FP) is applied with every scored image
contributing either a TP or an FP, so it equals the mean exact-measure score;
the test suite pins that identity.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .client import ImageRef, ModelConfig, Observation, parse_observation, send
from .errors import (
    EmptyInputError,
    MalformedDefinitionError,
    ManifestError,
    OntodxError,
    UnknownLabelError,
)
from .model import Intersection, Iri, Named, Ontology, Some, Union, dl
from .parser import serialize_ontology
from .prompt import PromptSpec
from .query import HealthyFinding, QueryProperties, build_query
from .reasoner import (
    AbnormalityVocabulary,
    VocabularyRoots,
    classify_expression,
    told_ancestors,
)

HEALTHY = "healthy"
CONCEPT_KINDS = ("symptom", "color", "shape")

REPORT_NOTE = (
    "Scores are computed from recorded replies in the local replay store or "
    "from one live sample per image; they characterize this run's reply set, "
    "not the general behavior of any hosted model."
)


# --- manifest ---------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    resolved_path: Path
    gold_class: Iri | None  # None marks a healthy entry
    tags: tuple[str, ...] = ()

    @property
    def is_healthy(self) -> bool:
        return self.gold_class is None


def load_manifest(path: str | Path, onto: Ontology, disease_root: Iri) -> list[ManifestEntry]:
    """Read a JSON-lines manifest and validate it against the ontology.

    Each line carries image_path, gold_class (a full class IRI or "healthy")
    and optional tags. Diseased gold classes must be declared descendants of
    the disease root. Image paths are resolved relative to the manifest file.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    entries: list[ManifestEntry] = []
    diseases = {c.full: c for c in onto.classes}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(row, dict) or "image_path" not in row or "gold_class" not in row:
            raise ManifestError(
                f"{path}:{lineno}: each entry needs image_path and gold_class"
            )
        gold_raw = row["gold_class"]
        if gold_raw == HEALTHY:
            gold = None
        else:
            gold = diseases.get(str(gold_raw))
            if gold is None:
                raise ManifestError(f"{path}:{lineno}: unknown class {gold_raw!r}")
            if disease_root not in told_ancestors(onto, gold):
                raise ManifestError(
                    f"{path}:{lineno}: {gold.local} is not a descendant of "
                    f"{disease_root.local}"
                )
        tags = tuple(str(t) for t in row.get("tags", ()))
        image_path = str(row["image_path"])
        entries.append(
            ManifestEntry(
                image_path=image_path,
                resolved_path=path.parent / image_path,
                gold_class=gold,
                tags=tags,
            )
        )
    if not entries:
        raise ManifestError(f"manifest {path} contains no entries")
    return entries


# --- gold concepts ------------------------------------------------------------------


@dataclass(frozen=True)
class GoldConcepts:
    """Acceptable concept classes per kind, read off a disease definition."""

    symptoms: frozenset[Iri]
    colors: frozenset[Iri]
    shapes: frozenset[Iri]

    def for_kind(self, kind: str) -> frozenset[Iri]:
        return getattr(self, kind + "s")


def derive_gold_concepts(
    onto: Ontology, disease: Iri, properties: QueryProperties
) -> GoldConcepts:
    """Unfold a disease definition and collect the restriction fillers.

    The definition must be a single abnormality-group existential over a
    conjunction; defined helper classes inside it are unfolded, and a union
    filler contributes all of its named disjuncts.
    """
    defn = onto.definitions.get(disease)
    if defn is None:
        raise MalformedDefinitionError(disease, "class has no definition")
    if not (isinstance(defn, Some) and defn.prop == properties.group):
        raise MalformedDefinitionError(
            disease, f"expected a single {properties.group.local} existential"
        )
    by_prop = {
        properties.symptom: set(),
        properties.color: set(),
        properties.shape: set(),
    }
    queue = list(_conjuncts(defn.filler))
    unfolded: set[Iri] = set()
    while queue:
        part = queue.pop(0)
        if isinstance(part, Named):
            body = onto.definitions.get(part.cls)
            if body is not None and part.cls not in unfolded:
                unfolded.add(part.cls)
                queue.extend(_conjuncts(body))
        elif isinstance(part, Some):
            bucket = by_prop.get(part.prop)
            if bucket is None:
                continue  # location and other restrictions carry no concept
            bucket.update(_named_fillers(disease, part.filler))
        else:
            raise MalformedDefinitionError(disease, f"unexpected conjunct {dl(part)}")
    return GoldConcepts(
        symptoms=frozenset(by_prop[properties.symptom]),
        colors=frozenset(by_prop[properties.color]),
        shapes=frozenset(by_prop[properties.shape]),
    )


def _conjuncts(expr):
    return expr.operands if isinstance(expr, Intersection) else (expr,)


def _named_fillers(disease: Iri, filler) -> set[Iri]:
    if isinstance(filler, Named):
        return {filler.cls}
    if isinstance(filler, Union):
        out: set[Iri] = set()
        for op in filler.operands:
            if not isinstance(op, Named):
                raise MalformedDefinitionError(disease, f"non-named disjunct {dl(op)}")
            out.add(op.cls)
        return out
    raise MalformedDefinitionError(disease, f"unsupported filler {dl(filler)}")


# --- per-field resolution and the exact measure ----------------------------------------


@dataclass(frozen=True)
class ResolvedField:
    status: str  # "ok" | "na" | "unknown"
    iri: Iri | None = None
    raw: str | None = None


def _resolve_field(onto: Ontology, value: str | None) -> ResolvedField:
    if value is None:
        return ResolvedField("na")
    try:
        return ResolvedField("ok", onto.resolve_label(value), value)
    except UnknownLabelError:
        return ResolvedField("unknown", None, value)


def exact_measure(
    predicted: str | None,
    gold: frozenset[Iri],
    onto: Ontology,
    descendant_credit: bool = True,
) -> int:
    """1 when the prediction resolves into the gold set, else 0.

    With descendant credit (the default), a prediction that resolves to a
    told descendant of a gold concept also scores 1; disable it for strict
    equality against the definition's own classes. N/A and unresolvable
    predictions score 0.
    """
    resolved = _resolve_field(onto, predicted)
    return _em_from_resolved(resolved, gold, onto, descendant_credit)


def _em_from_resolved(
    resolved: ResolvedField,
    gold: frozenset[Iri],
    onto: Ontology,
    descendant_credit: bool,
) -> int:
    if resolved.status != "ok":
        return 0
    assert resolved.iri is not None
    if resolved.iri in gold:
        return 1
    if descendant_credit:
        ancestors = told_ancestors(onto, resolved.iri)
        if any(g in ancestors for g in gold):
            return 1
    return 0


# --- records -----------------------------------------------------------------------


@dataclass
class EvalRecord:
    index: int
    image_path: str
    image_hash: str | None
    gold_class: Iri | None
    sample: int
    model: str
    raw_reply: str | None = None
    observation: Observation | None = None
    resolved: dict[str, ResolvedField] | None = None
    query_dl: str | None = None
    healthy_finding: bool = False
    matched: tuple[Iri, ...] | None = None
    verdict_summary: dict[str, str] | None = None
    em: dict[str, int] | None = None
    classification_correct: bool | None = None
    error_stage: str | None = None
    error_message: str | None = None

    def to_json_dict(self) -> dict:
        obs = None
        if self.observation is not None:
            obs = {
                "symptom": self.observation.symptom,
                "color": self.observation.color,
                "shape": self.observation.shape,
            }
        resolved = None
        if self.resolved is not None:
            resolved = {
                kind: {
                    "status": f.status,
                    "class": f.iri.full if f.iri else None,
                }
                for kind, f in self.resolved.items()
            }
        return {
            "index": self.index,
            "image_path": self.image_path,
            "image_hash": self.image_hash,
            "gold_class": self.gold_class.full if self.gold_class else HEALTHY,
            "sample": self.sample,
            "model": self.model,
            "raw_reply": self.raw_reply,
            "observation": obs,
            "resolved": resolved,
            "query": self.query_dl,
            "healthy_finding": self.healthy_finding,
            "matched": [m.local for m in self.matched] if self.matched is not None else None,
            "verdicts": self.verdict_summary,
            "em": self.em,
            "classification_correct": self.classification_correct,
            "error": (
                {"stage": self.error_stage, "message": self.error_message}
                if self.error_stage
                else None
            ),
        }


# --- metric operations ----------------------------------------------------------------


def concept_wise_accuracy(records, kind: str) -> Fraction:
    """TP / (TP + FP) over the exact-measure scores for one concept kind.

    Every scored record contributes either a true positive (EM = 1) or a
    false positive (EM = 0), so this equals the mean exact measure.
    """
    if kind not in CONCEPT_KINDS:
        raise ValueError(f"unknown concept kind {kind!r}")
    scored = [r.em[kind] for r in records if r.em is not None]
    if not scored:
        raise EmptyInputError(f"no scored records for {kind}")
    tp = sum(scored)
    fp = len(scored) - tp
    return Fraction(tp, tp + fp)


def classification_accuracy(records) -> dict[Iri, Fraction]:
    """Per gold class, the fraction of records classified correctly.

    Error outcomes and healthy findings on diseased entries count as
    incorrect. Healthy entries are not part of this table.
    """
    totals: dict[Iri, list[int]] = {}
    for r in records:
        if r.gold_class is None:
            continue
        bucket = totals.setdefault(r.gold_class, [0, 0])
        bucket[1] += 1
        if r.classification_correct:
            bucket[0] += 1
    if not totals:
        raise EmptyInputError("no diseased records")
    return {cls: Fraction(correct, total) for cls, (correct, total) in sorted(totals.items())}


@dataclass(frozen=True)
class AblationReport:
    rates: dict[str, Fraction]
    hallucinations: tuple[dict, ...]


def ablation_rates(records, green: Iri) -> AblationReport:
    """No-abnormality rates over healthy-image records.

    Symptom and shape count as no-abnormality only when N/A; color also when
    it resolves to the healthy leaf color class. Everything else is flagged
    as a hallucination.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no healthy records")
    counts = {kind: 0 for kind in CONCEPT_KINDS}
    hallucinations: list[dict] = []
    for r in records:
        for kind in CONCEPT_KINDS:
            f = r.resolved[kind] if r.resolved is not None else ResolvedField("unknown")
            if f.status == "na":
                counts[kind] += 1
            elif kind == "color" and f.status == "ok" and f.iri == green:
                counts[kind] += 1
            else:
                hallucinations.append(
                    {"index": r.index, "concept": kind, "label": f.raw or "(unparsed)"}
                )
    rates = {kind: Fraction(counts[kind], len(records)) for kind in CONCEPT_KINDS}
    return AblationReport(rates=rates, hallucinations=tuple(hallucinations))


def concept_distribution(records, vocab: AbnormalityVocabulary) -> dict[str, dict[str, int]]:
    """Occurrences of each vocabulary label per kind, plus N/A and unknown buckets.

    Labels that resolve outside the kind's vocabulary land in the unknown
    bucket, so the buckets always sum to the number of records per kind.
    """
    kind_to_field = {"symptom": "symptoms", "color": "colors", "shape": "shapes"}
    out: dict[str, dict[str, int]] = {}
    for kind, fieldname in kind_to_field.items():
        pairs = getattr(vocab, fieldname)
        label_of = {iri: label for label, iri in pairs}
        counts = {label: 0 for label, _ in pairs}
        counts["N/A"] = 0
        counts["(unknown)"] = 0
        for r in records:
            f = r.resolved[kind] if r.resolved is not None else ResolvedField("unknown")
            if f.status == "na":
                counts["N/A"] += 1
            elif f.status == "ok" and f.iri in label_of:
                counts[label_of[f.iri]] += 1
            else:
                counts["(unknown)"] += 1
        out[kind] = counts
    return out


# --- run settings and report -------------------------------------------------------------


@dataclass
class EvalSettings:
    roots: VocabularyRoots
    plant_part: Iri
    properties: QueryProperties
    disease_root: Iri
    green: Iri
    match_policy: str = "strict"  # "strict": unique match; "contains": gold among matches
    em_descendant_credit: bool = True
    samples: int = 1
    workers: int = 1
    manifest_digest: str = ""

    def __post_init__(self):
        if self.match_policy not in ("strict", "contains"):
            raise ValueError(f"unknown match policy {self.match_policy!r}")
        if self.samples < 1 or self.workers < 1:
            raise ValueError("samples and workers must be >= 1")


@dataclass
class MetricsReport:
    run_info: dict
    counts: dict[str, int]
    concept_accuracy: dict[str, Fraction | None]
    per_class_concept_accuracy: dict[Iri, dict[str, Fraction | None]]
    classification: dict[Iri, Fraction]
    healthy_finding_rate: Fraction | None
    distribution: dict[str, dict[str, int]]
    ablation: AblationReport | None

    def to_json_dict(self) -> dict:
        def ratio(x: Fraction | None):
            return None if x is None else float(x)

        return {
            "run": self.run_info,
            "counts": self.counts,
            "concept_accuracy": {k: ratio(v) for k, v in self.concept_accuracy.items()},
            "per_class_concept_accuracy": {
                cls.local: {k: ratio(v) for k, v in row.items()}
                for cls, row in sorted(self.per_class_concept_accuracy.items())
            },
            "classification_accuracy": {
                cls.local: ratio(v) for cls, v in sorted(self.classification.items())
            },
            "healthy_finding_rate": ratio(self.healthy_finding_rate),
            "distribution": self.distribution,
            "ablation": (
                None
                if self.ablation is None
                else {
                    "no_abnormality_rates": {
                        k: ratio(v) for k, v in self.ablation.rates.items()
                    },
                    "hallucinations": list(self.ablation.hallucinations),
                }
            ),
        }


@dataclass
class EvalRun:
    records: list[EvalRecord]
    metrics: MetricsReport


# --- the pipeline -------------------------------------------------------------------------


def run_evaluation(
    entries: list[ManifestEntry],
    onto: Ontology,
    prompt: PromptSpec,
    model_config: ModelConfig,
    settings: EvalSettings,
    out_dir: str | Path | None = None,
) -> EvalRun:
    """Send, parse, compile and classify every manifest entry, then aggregate.

    Per-entry failures are recorded (with the failing stage) and never abort
    the batch. When `out_dir` is given, a JSON-lines record log and a JSON
    summary are written with stable ordering, so replay-backed runs are
    byte-identical.
    """
    if not entries:
        raise ManifestError("no manifest entries to evaluate")
    gold_cache: dict[Iri, GoldConcepts] = {}

    def gold_for(disease: Iri) -> GoldConcepts:
        if disease not in gold_cache:
            gold_cache[disease] = derive_gold_concepts(onto, disease, settings.properties)
        return gold_cache[disease]

    tasks = [
        (index, entry, sample)
        for index, entry in enumerate(entries)
        for sample in range(settings.samples)
    ]

    def run_task(task) -> EvalRecord:
        index, entry, sample = task
        return _evaluate_one(
            index, entry, sample, onto, prompt, model_config, settings, gold_for
        )

    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            records = list(pool.map(run_task, tasks))
    else:
        records = [run_task(t) for t in tasks]
    records.sort(key=lambda r: (r.index, r.sample))

    metrics = _aggregate(records, entries, onto, prompt, model_config, settings)
    run = EvalRun(records=records, metrics=metrics)
    if out_dir is not None:
        write_reports(run, Path(out_dir))
    return run


def _evaluate_one(
    index: int,
    entry: ManifestEntry,
    sample: int,
    onto: Ontology,
    prompt: PromptSpec,
    model_config: ModelConfig,
    settings: EvalSettings,
    gold_for,
) -> EvalRecord:
    record = EvalRecord(
        index=index,
        image_path=entry.image_path,
        image_hash=None,
        gold_class=entry.gold_class,
        sample=sample,
        model=model_config.fingerprint,
    )

    def fail(stage: str, exc: Exception) -> EvalRecord:
        record.error_stage = stage
        record.error_message = str(exc)
        return record

    try:
        image = ImageRef.from_path(entry.resolved_path)
    except (OSError, ValueError) as exc:
        return fail("image", exc)
    record.image_hash = image.content_hash

    try:
        reply = send(prompt, image, model_config)
    except OntodxError as exc:
        return fail("send", exc)
    record.raw_reply = reply

    try:
        obs = parse_observation(reply, model_config.fingerprint)
    except OntodxError as exc:
        return fail("parse", exc)
    record.observation = obs
    record.resolved = {
        "symptom": _resolve_field(onto, obs.symptom),
        "color": _resolve_field(onto, obs.color),
        "shape": _resolve_field(onto, obs.shape),
    }

    if entry.gold_class is not None:
        gold = gold_for(entry.gold_class)
        record.em = {
            kind: _em_from_resolved(
                record.resolved[kind],
                gold.for_kind(kind),
                onto,
                settings.em_descendant_credit,
            )
            for kind in CONCEPT_KINDS
        }

    try:
        result = build_query(obs, onto, settings.plant_part, settings.properties)
    except OntodxError as exc:
        record.classification_correct = False
        return fail("build_query", exc)

    if isinstance(result, HealthyFinding):
        record.healthy_finding = True
        record.classification_correct = entry.is_healthy
        return record

    record.query_dl = dl(result)
    try:
        diagnosis = classify_expression(onto, result, settings.disease_root)
    except OntodxError as exc:
        record.classification_correct = False
        return fail("classify", exc)
    record.matched = diagnosis.matched
    record.verdict_summary = {
        cls.local: (
            "holds"
            if verdict.holds
            else f"fails at {verdict.trace[-1].target_part}"
        )
        for cls, verdict in diagnosis.verdicts.items()
    }
    if entry.is_healthy:
        record.classification_correct = False
    elif settings.match_policy == "strict":
        record.classification_correct = diagnosis.matched == (entry.gold_class,)
    else:
        record.classification_correct = entry.gold_class in diagnosis.matched
    return record


def _aggregate(
    records: list[EvalRecord],
    entries: list[ManifestEntry],
    onto: Ontology,
    prompt: PromptSpec,
    model_config: ModelConfig,
    settings: EvalSettings,
) -> MetricsReport:
    diseased = [r for r in records if r.gold_class is not None]
    healthy = [r for r in records if r.gold_class is None]
    scored = [r for r in diseased if r.em is not None]
    observed = [r for r in diseased if r.observation is not None]

    concept_acc: dict[str, Fraction | None] = {}
    for kind in CONCEPT_KINDS:
        concept_acc[kind] = (
            concept_wise_accuracy(scored, kind) if scored else None
        )

    per_class: dict[Iri, dict[str, Fraction | None]] = {}
    for cls in sorted({r.gold_class for r in diseased}):
        class_records = [r for r in scored if r.gold_class == cls]
        per_class[cls] = {
            kind: (concept_wise_accuracy(class_records, kind) if class_records else None)
            for kind in CONCEPT_KINDS
        }

    classification = classification_accuracy(diseased) if diseased else {}

    healthy_rate = None
    ablation = None
    if healthy:
        healthy_rate = Fraction(
            sum(1 for r in healthy if r.healthy_finding), len(healthy)
        )
        ablation = ablation_rates(healthy, settings.green)

    run_info = {
        "note": REPORT_NOTE,
        "model": model_config.model_name,
        "backend": model_config.backend,
        "prompt_fingerprint": prompt.fingerprint,
        "ontology_digest": ontology_digest(onto),
        "manifest_digest": settings.manifest_digest,
        "match_policy": settings.match_policy,
        "em_descendant_credit": settings.em_descendant_credit,
        "samples": settings.samples,
        "temperature": model_config.temperature,
        "top_p": model_config.top_p,
    }
    counts = {
        "entries": len(entries),
        "records": len(records),
        "diseased": len(diseased),
        "healthy": len(healthy),
        "scored": len(scored),
        "errors": sum(1 for r in records if r.error_stage),
    }
    return MetricsReport(
        run_info=run_info,
        counts=counts,
        concept_accuracy=concept_acc,
        per_class_concept_accuracy=per_class,
        classification=classification,
        healthy_finding_rate=healthy_rate,
        distribution=concept_distribution(observed, prompt.vocabulary),
        ablation=ablation,
    )


def ontology_digest(onto: Ontology) -> str:
    return hashlib.sha256(serialize_ontology(onto).encode("utf-8")).hexdigest()[:16]


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def write_reports(run: EvalRun, out_dir: Path) -> tuple[Path, Path]:
    """Write records.jsonl and summary.json with stable key ordering."""
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    summary_path = out_dir / "summary.json"
    with records_path.open("w", encoding="utf-8") as fh:
        for record in run.records:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    summary_path.write_text(
        json.dumps(run.metrics.to_json_dict(), indent=2, sort_keys=True, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    return records_path, summary_path
