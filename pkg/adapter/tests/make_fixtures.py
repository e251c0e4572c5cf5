"""Regenerate the shared fixture files.

Run from a checkout where the pipeline package (hyqa) is importable; the
loss cases freeze values computed by the pipeline's own loss so the two
implementations can be compared without importing each other at test
time.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


def loss_cases() -> list[dict]:
    from hyqa.rerank import NEGATIVE, POSITIVE, reranker_loss

    rng = random.Random(424242)
    cases = [
        {"scores": [0.5, 0.5], "labels": ["pos", "neg"]},
        {"scores": [1.0, 0.0], "labels": ["pos", "neg"]},
        {"scores": [0.0, 1.0], "labels": ["pos", "neg"]},
    ]
    for _ in range(17):
        n = rng.randint(1, 64)
        labels = ["pos"] + [rng.choice(["pos", "neg"]) for _ in range(n - 1)]
        scores = [round(rng.uniform(0.001, 0.999), 6) for _ in range(n)]
        cases.append({"scores": scores, "labels": labels})
    for case in cases:
        case["expected"] = reranker_loss(
            case["scores"],
            [POSITIVE if label == "pos" else NEGATIVE for label in case["labels"]],
        )
    return cases


GOLDEN_SCORE = {
    "request": {
        "pairs": [
            {
                "question": "who engineered the aurora bridge",
                "title": "Aurora Bridge",
                "content": "The Aurora Bridge crosses the Meridell narrows and was "
                           "engineered by Clara Voss.",
            },
            {
                "question": "who engineered the aurora bridge",
                "title": "table_d-101-1",
                "content": "[header] Stadium ; City ; Capacity ; Opened "
                           "[row] Ravenport Arena ; Ravenport ; 64000 ; 1998",
            },
        ]
    }
}

GOLDEN_GENERATE = {
    "request": {
        "question": "which party won the kestrel 2 district",
        "contexts": [
            "question: which party won the kestrel 2 district [table title] table_d-104-1 "
            "[table content] [header] District ; Candidate ; Party ; Votes "
            "[row] Kestrel 1 ; Rhea Sharp ; unity ; 5102 "
            "[row] Kestrel 2 ; Owen Veil ; concord ; 4890",
            "question: which party won the kestrel 2 district [text title] Kestrel Notes "
            "[text content] The kestrel districts vote in spring.",
        ],
        "beam_size": 3,
    }
}


def reranker_toy() -> list[dict]:
    rng = random.Random(7)
    topics = [
        ("bridge", "engineered by Clara Voss"), ("lighthouse", "rises 47 metres"),
        ("orchard", "founded by Edwin Hale"), ("railway", "opened in 1887"),
        ("telescope", "called Lumen"), ("glassworks", "produces cobalt glass"),
        ("falls", "plunges 92 metres"), ("ferry", "takes 35 minutes"),
        ("inn", "built from oak"), ("mill", "grinds barley flour"),
        ("canal", "stretches 120 kilometres"), ("caves", "found by Ada Pryce"),
        ("vineyard", "grows the perlan grape"), ("tower", "chimes each quarter"),
        ("archive", "holds 60000 manuscripts"), ("harbour", "shelters forty boats"),
        ("forge", "tempers blue steel"), ("quarry", "cuts pale granite"),
        ("brewery", "ferments heather ale"), ("stables", "keeps nine grey mares"),
    ]
    noise = ["the weather was mild that year", "records from the period are thin",
             "a market is held on fridays", "the road climbs past the common"]
    batches = []
    for i, (topic, fact) in enumerate(topics):
        negatives = [
            {"title": f"note {j}", "content": f"{rng.choice(noise)} near the {topics[(i + j + 1) % 20][0]}"}
            for j in range(8)
        ]
        batches.append({
            "question_id": f"toy{i:02d}",
            "question": f"what is known about the {topic}",
            "positives": [{"title": topic.title(), "content": f"the {topic} {fact}"}],
            "negatives": negatives,
        })
    return batches


def generator_toy() -> list[dict]:
    """Nine questions, ten prefixed targets (one question carries both)."""
    items = [
        ("g01", "who engineered the aurora bridge",
         "[text title] Aurora Bridge [text content] engineered by Clara Voss",
         ["answer: Clara Voss"]),
        ("g02", "how tall is the kestrel lighthouse",
         "[text title] Kestrel Lighthouse [text content] rises 47 metres",
         ["answer: 47 metres"]),
        ("g03", "who founded the tamsin orchard",
         "[text title] Tamsin Orchard [text content] founded by Edwin Hale",
         ["answer: Edwin Hale"]),
        ("g04", "when did the port callow railway open",
         "[text title] Port Callow Railway [text content] opened in 1887",
         ["answer: 1887"]),
        ("g05", "what is the telescope at miro valley called",
         "[text title] Miro Valley [text content] telescope called Lumen",
         ["answer: Lumen"]),
        ("g06", "what glass does the harlan glassworks produce",
         "[text title] Harlan Glassworks [text content] produces cobalt glass",
         ["answer: cobalt glass"]),
        ("g07", "which party won the kestrel 2 district",
         "[table title] table_d-104-1 [table content] [header] District ; Party "
         "[row] Kestrel 2 ; concord",
         ["answer: concord",
          'sql: SELECT Party FROM table_d-104-1 WHERE District = "Kestrel 2"']),
        ("g08", "what is the capacity of ravenport arena",
         "[table title] table_d-101-1 [table content] [header] Stadium ; Capacity "
         "[row] Ravenport Arena ; 64000",
         ['sql: SELECT Capacity FROM table_d-101-1 WHERE Stadium = "Ravenport Arena"']),
        ("g09", "how many stadium grounds opened after 1950",
         "[table title] table_d-101-1 [table content] [header] Stadium ; Opened "
         "[row] Ravenport Arena ; 1998",
         ["sql: SELECT COUNT(Stadium) FROM table_d-101-1 WHERE Opened > 1950"]),
    ]
    return [
        {"qid": qid, "contexts": [f"question: {q} {ctx}"], "targets": targets}
        for qid, q, ctx, targets in items
    ]


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "loss_cases.json").write_text(json.dumps(loss_cases(), indent=2) + "\n")
    (FIXTURES / "golden_score.json").write_text(json.dumps(GOLDEN_SCORE, indent=2) + "\n")
    (FIXTURES / "golden_generate.json").write_text(json.dumps(GOLDEN_GENERATE, indent=2) + "\n")
    with open(FIXTURES / "reranker_toy.jsonl", "w") as fh:
        for record in reranker_toy():
            fh.write(json.dumps(record) + "\n")
    with open(FIXTURES / "generator_toy.jsonl", "w") as fh:
        for record in generator_toy():
            fh.write(json.dumps(record) + "\n")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
