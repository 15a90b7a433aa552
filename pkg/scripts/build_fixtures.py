#!/usr/bin/env python3
"""Regenerate the bundled replay corpus and its golden reports.

Writes, under fixtures/:
  rice_disease.ofn       copy of the packaged ontology
  images/*.png           100 tiny deterministic images (80 diseased, 20 healthy)
  manifest.jsonl         the evaluation manifest
  replies/simulated/     one recorded reply per (prompt fingerprint, image hash)
  replay_config.json     a ready-to-use CLI config for the replay backend
  golden/records.jsonl   record log of the canonical evaluation run
  golden/summary.json    summary report of the canonical evaluation run

The reply set is scripted so that strict-unique classification lands on
exactly {BrownSpot: 19/20, NarrowBrownSpot: 6/20, LeafBlast: 0/20,
LeafScald: 0/20} and the 20 healthy replies mix all-N/A with color Green.
Rerunning the script is byte-stable.
"""
from __future__ import annotations

import json
import struct
import sys
import zlib
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ontodx import (  # noqa: E402
    ImageRef,
    Iri,
    ModelConfig,
    VocabularyRoots,
    build_prompt,
    bundled_ontology_path,
    extract_vocabulary,
    load_bundled_ontology,
)
from ontodx.evaluator import (  # noqa: E402
    EvalSettings,
    file_digest,
    load_manifest,
    run_evaluation,
)
from ontodx.query import QueryProperties  # noqa: E402

FIXTURES = REPO / "fixtures"
MODEL_NAME = "simulated"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def make_png(rgb, marker=0, size=8) -> bytes:
    rows = bytearray()
    for y in range(size):
        rows.append(0)
        for x in range(size):
            if y * size + x == marker % (size * size):
                rows.extend(((rgb[0] + 61) % 256, (rgb[1] + 73) % 256, (rgb[2] + 89) % 256))
            else:
                rows.extend(rgb)
    header = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", header)
        + _chunk(b"IDAT", zlib.compress(bytes(rows), 9))
        + _chunk(b"IEND", b"")
    )


def obs_json(symptom="N/A", color="N/A", shape="N/A") -> str:
    return json.dumps(
        {
            "SymptomAbnormality": symptom,
            "ColorAbnormality": color,
            "ShapeOfSymptomAbnormality": shape,
        }
    )


def fenced(text: str) -> str:
    return f"```json\n{text}\n```"


def chatty(text: str) -> str:
    return f"Here is what I can see in the image:\n{text}\nHope this helps!"


def reply_plan() -> list[tuple[str, str, str]]:
    """(class slug, gold class name, reply text) for all 100 images."""
    plan: list[tuple[str, str, str]] = []

    def add(slug, gold, text):
        plan.append((slug, gold, text))

    # Brown Spot: 19 correct (varying reply dress-up and in-hierarchy color
    # variation), 1 symptom confusion.
    for i in range(1, 21):
        if i <= 10:
            text = obs_json("Spot", "Brown", "Oval")
        elif i <= 14:
            text = fenced(obs_json("Spot", "Brown", "Circular"))
        elif i <= 17:
            text = chatty(obs_json("Spot", "Dark Brown", "Oval"))
        elif i <= 19:
            text = chatty(obs_json("Spot", "Brown", "Oval"))
        else:
            text = obs_json("Lesion", "Brown", "Oval")
        add("bs", "BrownSpot", text)

    # Narrow Brown Spot: 6 correct, then misreads as Brown Spot, an
    # out-of-vocabulary color, near misses, and two spurious all-N/A replies.
    for i in range(1, 21):
        if i <= 6:
            text = obs_json("Lesion", "Brownish Yellow", "Linear")
        elif i <= 12:
            text = obs_json("Spot", "Brown", "Oval")
        elif i <= 15:
            text = obs_json("Lesion", "YellowishBrown", "Linear")
        elif i <= 18:
            text = fenced(obs_json("Lesion", "Brown", "Linear"))
        else:
            text = obs_json()
        add("nbs", "NarrowBrownSpot", text)

    # Leaf Blast: never correct; the shape reads oval or the symptom a lesion.
    for i in range(1, 21):
        if i <= 10:
            text = obs_json("Spot", "Gray", "Oval")
        elif i <= 16:
            text = chatty(obs_json("Spot", "Brown", "Oval"))
        else:
            text = obs_json("Lesion", "Gray", "Eye")
        add("lb", "LeafBlast", text)

    # Leaf Scald: never correct; reads as Narrow Brown Spot or the shape is off.
    for i in range(1, 21):
        if i <= 5:
            text = obs_json("Lesion", "Brownish Yellow", "Linear")
        elif i <= 13:
            text = obs_json("Lesion", "Reddish Brown", "Oval")
        else:
            text = fenced(obs_json("Spot", "Reddish Brown", "Zigzag"))
        add("ls", "LeafScald", text)

    # Healthy: all-N/A in several dress-ups, plus Green-colored reads.
    for i in range(1, 21):
        if i <= 6:
            text = obs_json()
        elif i <= 9:
            text = fenced(obs_json())
        elif i <= 12:
            text = chatty(obs_json())
        else:
            text = obs_json(color="Green")
        add("healthy", "healthy", text)
    return plan


BASE_COLORS = {
    "bs": (139, 90, 43),
    "nbs": (160, 120, 60),
    "lb": (120, 120, 120),
    "ls": (170, 80, 60),
    "healthy": (40, 160, 60),
}


def main() -> None:
    onto = load_bundled_ontology()
    ns = onto.default_namespace
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "rice_disease.ofn").write_bytes(bundled_ontology_path().read_bytes())

    roots = VocabularyRoots(
        color=Iri(ns, "ColorAbnormality"),
        symptom=Iri(ns, "SymptomAbnormality"),
        shape=Iri(ns, "ShapeOfSymptomAbnormality"),
        plant_part=Iri(ns, "PlantPart"),
    )
    vocab = extract_vocabulary(onto, roots)
    prompt = build_prompt("rice leaf", vocab)

    images_dir = FIXTURES / "images"
    images_dir.mkdir(exist_ok=True)
    store = FIXTURES / "replies" / MODEL_NAME
    store.mkdir(parents=True, exist_ok=True)
    for old in store.glob("*.txt"):
        old.unlink()

    manifest_lines = []
    counters: dict[str, int] = {}
    for slug, gold, text in reply_plan():
        counters[slug] = counters.get(slug, 0) + 1
        name = f"{slug}_{counters[slug]:02d}.png"
        png = make_png(BASE_COLORS[slug], marker=counters[slug] * 7)
        (images_dir / name).write_bytes(png)
        image_hash = ImageRef.from_bytes(png).content_hash
        (store / f"{prompt.fingerprint}-{image_hash}.txt").write_text(text, encoding="utf-8")
        manifest_lines.append(
            {
                "image_path": f"images/{name}",
                "gold_class": "healthy" if gold == "healthy" else ns + gold,
                "tags": ["healthy"] if gold == "healthy" else [gold],
            }
        )
    manifest_path = FIXTURES / "manifest.jsonl"
    manifest_path.write_text(
        "\n".join(json.dumps(line) for line in manifest_lines) + "\n", encoding="utf-8"
    )

    (FIXTURES / "replay_config.json").write_text(
        json.dumps(
            {
                "model": {
                    "backend": "replay",
                    "model_name": MODEL_NAME,
                    "fixture_dir": "fixtures/replies",
                }
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    entries = load_manifest(manifest_path, onto, Iri(ns, "RiceDisease"))
    settings = EvalSettings(
        roots=roots,
        plant_part=Iri(ns, "Leaf"),
        properties=QueryProperties.default_for(onto),
        disease_root=Iri(ns, "RiceDisease"),
        green=Iri(ns, "Green"),
        manifest_digest=file_digest(manifest_path),
    )
    config = ModelConfig(backend="replay", model_name=MODEL_NAME, fixture_dir=str(FIXTURES / "replies"))
    run = run_evaluation(entries, onto, prompt, config, settings, out_dir=FIXTURES / "golden")

    print(f"prompt fingerprint: {prompt.fingerprint}")
    print(f"entries: {len(entries)}, errors: {run.metrics.counts['errors']}")
    for cls, acc in sorted(run.metrics.classification.items()):
        print(f"  classification {cls.local}: {acc}")
    if run.metrics.ablation:
        print("  ablation:", {k: str(v) for k, v in run.metrics.ablation.rates.items()})
    print("  healthy finding rate:", run.metrics.healthy_finding_rate)


if __name__ == "__main__":
    main()
