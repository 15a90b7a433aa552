"""Command-line interface: vocab, prompt, classify, evaluate, ablation.

Configuration precedence is flags over environment variables (ONTODX_BACKEND,
ONTODX_MODEL) over the JSON config file over built-in defaults. Credentials
are read from environment variables only, never from flags.

Exit codes: 0 success, 1 domain error (reported with its pipeline stage),
2 usage or I/O error.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import bundled_ontology_path
from .client import ImageRef, ModelConfig, parse_observation, send
from .errors import ManifestError, OntodxError
from .evaluator import (
    EvalSettings,
    ablation_rates,
    file_digest,
    load_manifest,
    run_evaluation,
)
from .model import Iri, Ontology
from .parser import parse_ontology
from .prompt import build_prompt
from .query import HealthyFinding, QueryProperties, build_query
from .reasoner import VocabularyRoots, classify_expression, extract_vocabulary

DEFAULTS = {
    "entity": "rice leaf",
    "roots": {
        "color": "ColorAbnormality",
        "symptom": "SymptomAbnormality",
        "shape": "ShapeOfSymptomAbnormality",
        "plant_part": "PlantPart",
    },
    "plant_part": "Leaf",
    "disease_root": "RiceDisease",
    "green": "Green",
    "match_policy": "strict",
    "em_descendant_credit": True,
    "vocabulary_exclude": [],
}


def _fail(stage: str, exc: Exception) -> "SystemExit":
    click.echo(f"error ({stage}): {exc}", err=True)
    return SystemExit(1)


def _load_profile(config_path: str | None) -> dict:
    profile = json.loads(json.dumps(DEFAULTS))  # deep copy
    profile["model"] = {}
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error (config): cannot read {config_path}: {exc}", err=True)
            raise SystemExit(2) from exc
        for key, value in loaded.items():
            if key == "roots":
                profile["roots"].update(value)
            else:
                profile[key] = value
    return profile


def _model_config(profile: dict, backend: str | None, model: str | None) -> ModelConfig:
    fields = dict(profile.get("model", {}))
    env_backend = os.environ.get("ONTODX_BACKEND")
    env_model = os.environ.get("ONTODX_MODEL")
    if env_backend:
        fields["backend"] = env_backend
    if env_model:
        fields["model_name"] = env_model
    if backend:
        fields["backend"] = backend
    if model:
        fields["model_name"] = model
    try:
        return ModelConfig(**fields)
    except (TypeError, ValueError) as exc:
        click.echo(f"error (config): invalid model configuration: {exc}", err=True)
        raise SystemExit(2) from exc


def _load_ontology(path: str | None) -> Ontology:
    target = Path(path) if path else bundled_ontology_path()
    try:
        text = target.read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error (ontology): cannot read {target}: {exc}", err=True)
        raise SystemExit(2) from exc
    try:
        return parse_ontology(text)
    except OntodxError as exc:
        raise _fail("ontology", exc)


def _class_ref(onto: Ontology, name: str) -> Iri:
    if name.startswith("<") and name.endswith(">"):
        name = name[1:-1]
    if "://" in name:
        cut = name.rfind("#")
        if cut < 0:
            cut = name.rfind("/")
        return Iri(name[: cut + 1], name[cut + 1:])
    ns = onto.default_namespace
    if ns is None:
        raise OntodxError(
            f"cannot resolve {name!r}: ontology has no default namespace; use a full IRI"
        )
    return Iri(ns, name)


def _roots(onto: Ontology, profile: dict) -> VocabularyRoots:
    r = profile["roots"]
    return VocabularyRoots(
        color=_class_ref(onto, r["color"]),
        symptom=_class_ref(onto, r["symptom"]),
        shape=_class_ref(onto, r["shape"]),
        plant_part=_class_ref(onto, r["plant_part"]),
    )


def _settings(onto: Ontology, profile: dict, manifest_digest: str = "") -> EvalSettings:
    return EvalSettings(
        roots=_roots(onto, profile),
        plant_part=_class_ref(onto, profile["plant_part"]),
        properties=QueryProperties.default_for(onto),
        disease_root=_class_ref(onto, profile["disease_root"]),
        green=_class_ref(onto, profile["green"]),
        match_policy=profile["match_policy"],
        em_descendant_credit=profile["em_descendant_credit"],
        manifest_digest=manifest_digest,
    )


def _vocabulary(onto: Ontology, profile: dict):
    exclude = frozenset(_class_ref(onto, n) for n in profile.get("vocabulary_exclude", []))
    return extract_vocabulary(onto, _roots(onto, profile), exclude)


ontology_option = click.option(
    "--ontology", "ontology_path", type=str, default=None,
    help="Ontology document path (defaults to the bundled one).",
)
config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), default=None,
    help="JSON configuration file.",
)
backend_option = click.option("--backend", default=None, help="Model backend override.")
model_option = click.option("--model", default=None, help="Model name override.")


@click.group()
def main() -> None:
    """Ontology-grounded visual diagnosis with multimodal language models."""


@main.command()
@ontology_option
@config_option
def vocab(ontology_path, config_path) -> None:
    """Print the abnormality vocabulary extracted from the ontology."""
    profile = _load_profile(config_path)
    onto = _load_ontology(ontology_path)
    try:
        vocabulary = _vocabulary(onto, profile)
    except OntodxError as exc:
        raise _fail("vocabulary", exc)
    payload = {
        kind: [{"label": label, "class": iri.full} for label, iri in getattr(vocabulary, kind)]
        for kind in ("colors", "symptoms", "shapes", "plant_parts")
    }
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@main.command("prompt")
@ontology_option
@config_option
@click.option("--entity", default=None, help="Entity name substituted into the prompt.")
def prompt_cmd(ontology_path, config_path, entity) -> None:
    """Print the rendered prompt for inspection."""
    profile = _load_profile(config_path)
    onto = _load_ontology(ontology_path)
    try:
        vocabulary = _vocabulary(onto, profile)
        spec = build_prompt(entity or profile["entity"], vocabulary)
    except OntodxError as exc:
        raise _fail("prompt", exc)
    click.echo(spec.text, nl=False)


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@ontology_option
@config_option
@backend_option
@model_option
@click.option("--record", is_flag=True, help="Record the live reply into the replay store.")
def classify(image, ontology_path, config_path, backend, model, record) -> None:
    """Diagnose a single image and print the explanation trace."""
    profile = _load_profile(config_path)
    onto = _load_ontology(ontology_path)
    config = _model_config(profile, backend, model)
    if record and not config.record_dir:
        config.record_dir = config.fixture_dir
    try:
        settings = _settings(onto, profile)
        vocabulary = _vocabulary(onto, profile)
        spec = build_prompt(profile["entity"], vocabulary)
    except OntodxError as exc:
        raise _fail("prompt", exc)
    try:
        ref = ImageRef.from_path(image)
    except (OSError, ValueError) as exc:
        raise _fail("image", exc)
    try:
        reply = send(spec, ref, config)
    except OntodxError as exc:
        raise _fail("send", exc)
    try:
        observation = parse_observation(reply, config.fingerprint)
    except OntodxError as exc:
        raise _fail("parse", exc)
    try:
        result = build_query(observation, onto, settings.plant_part, settings.properties)
    except OntodxError as exc:
        raise _fail("build_query", exc)
    if isinstance(result, HealthyFinding):
        click.echo("no abnormality detected")
        return
    try:
        diagnosis = classify_expression(onto, result, settings.disease_root)
    except OntodxError as exc:
        raise _fail("classify", exc)
    if diagnosis.matched:
        names = ", ".join(onto.display_label(m) for m in diagnosis.matched)
        click.echo(f"diagnosis: {names}")
        for cls in diagnosis.matched:
            click.echo(f"trace for {cls.local}:")
            for step in diagnosis.verdicts[cls].trace:
                click.echo(f"  {step.render()}")
    else:
        click.echo("diagnosis: no disease class matches")
        for cls, verdict in diagnosis.verdicts.items():
            click.echo(f"  {cls.local}: fails at {verdict.trace[-1].target_part}")


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@ontology_option
@config_option
@backend_option
@model_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="eval-out")
@click.option("--record", is_flag=True, help="Record live replies into the replay store.")
@click.option("--samples", type=int, default=1, help="Samples per image.")
@click.option("--workers", type=int, default=1, help="Concurrent pipeline workers.")
def evaluate(manifest, ontology_path, config_path, backend, model, out_dir, record,
             samples, workers) -> None:
    """Evaluate a manifest and write the record log and summary report."""
    profile = _load_profile(config_path)
    onto = _load_ontology(ontology_path)
    config = _model_config(profile, backend, model)
    if record and not config.record_dir:
        config.record_dir = config.fixture_dir
    try:
        entries = load_manifest(manifest, onto, _class_ref(onto, profile["disease_root"]))
        settings = _settings(onto, profile, manifest_digest=file_digest(manifest))
        settings.samples = samples
        settings.workers = workers
        vocabulary = _vocabulary(onto, profile)
        spec = build_prompt(profile["entity"], vocabulary)
        run = run_evaluation(entries, onto, spec, config, settings, out_dir=out_dir)
    except OntodxError as exc:
        raise _fail("evaluate", exc)
    summary = run.metrics.to_json_dict()
    click.echo(f"records: {summary['counts']['records']}")
    errors = summary["counts"]["errors"]
    if errors:
        click.echo(f"entries with errors: {errors}")
    for cls, acc in summary["classification_accuracy"].items():
        click.echo(f"classification {cls}: {acc}")
    click.echo(f"reports written to {out_dir}")


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@ontology_option
@config_option
@backend_option
@model_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="eval-out")
def ablation(manifest, ontology_path, config_path, backend, model, out_dir) -> None:
    """Run the healthy-image study and report no-abnormality rates."""
    profile = _load_profile(config_path)
    onto = _load_ontology(ontology_path)
    config = _model_config(profile, backend, model)
    try:
        entries = load_manifest(manifest, onto, _class_ref(onto, profile["disease_root"]))
        healthy = [e for e in entries if e.is_healthy]
        if not healthy:
            raise ManifestError("manifest has no healthy entries")
        settings = _settings(onto, profile, manifest_digest=file_digest(manifest))
        vocabulary = _vocabulary(onto, profile)
        spec = build_prompt(profile["entity"], vocabulary)
        run = run_evaluation(healthy, onto, spec, config, settings)
        report = ablation_rates(run.records, settings.green)
    except OntodxError as exc:
        raise _fail("ablation", exc)
    payload = {
        "no_abnormality_rates": {k: float(v) for k, v in report.rates.items()},
        "hallucinations": list(report.hallucinations),
        "records": len(run.records),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "ablation.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(json.dumps(payload["no_abnormality_rates"], sort_keys=True))
    click.echo(f"report written to {path}")


if __name__ == "__main__":
    sys.exit(main())
