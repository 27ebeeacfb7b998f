"""Rule-generated NLI corpora in the standard line-delimited JSON format.

Used by the test suite and the demo scripts: labels follow simple lexical
rules (hypothesis vocabulary subset -> entailment, negation or antonym ->
contradiction, novel content word -> neutral), which a small encoder can
learn quickly, so training dynamics can be exercised without shipping a
real corpus.
"""

from __future__ import annotations

import json

import numpy as np

from .data import NLIExample, tokenize

MATCHED_GENRES = ("fiction", "government", "slate", "telephone", "travel")
MISMATCHED_GENRES = ("nineeleven", "facetoface", "letters", "oup", "verbatim")

_SUBJECTS = (
    "man", "woman", "boy", "girl", "dog", "cat", "bird", "horse",
    "worker", "teacher", "doctor", "artist",
)
_VERB_ANTONYMS = {
    "opening": "closing",
    "buying": "selling",
    "entering": "leaving",
    "raising": "lowering",
    "pushing": "pulling",
    "finding": "losing",
}
_VERBS = tuple(_VERB_ANTONYMS)
_OBJECTS = (
    "door", "book", "car", "ball", "window", "guitar", "box", "apple",
    "ticket", "letter", "bottle", "basket",
)
_ADJECTIVES = ("old", "young", "tall", "short", "happy", "tired", "busy", "quiet")
_LOCATIONS = ("park", "store", "office", "street", "kitchen", "garden", "station", "library")
_COUNTS = ("2", "3", "1,200", "7")


def synthetic_records(n: int, rng: np.random.Generator, genres=MATCHED_GENRES) -> list[dict]:
    """Balanced three-way labeled records; deterministic given the generator."""
    records = []
    labels = ("entailment", "contradiction", "neutral")
    for i in range(n):
        label = labels[i % 3]
        subj = rng.choice(_SUBJECTS)
        verb = rng.choice(_VERBS)
        obj = rng.choice(_OBJECTS)
        adj = rng.choice(_ADJECTIVES)
        loc = rng.choice(_LOCATIONS)
        premise = f"the {adj} {subj} is {verb} the {obj} in the {loc} ."
        if rng.random() < 0.15:
            premise = f"the {adj} {subj} is {verb} {rng.choice(_COUNTS)} {obj}s in the {loc} ."

        if label == "entailment":
            # strictly a subset of the premise's content words
            hypothesis = f"the {subj} is {verb} the {obj} ."
        elif label == "contradiction":
            if rng.random() < 0.5:
                hypothesis = f"the {subj} is not {verb} the {obj} ."
            else:
                hypothesis = f"the {subj} is {_VERB_ANTONYMS[verb]} the {obj} ."
        else:  # neutral: introduces a content word the premise never mentions
            new_obj = rng.choice([o for o in _OBJECTS if o != obj])
            hypothesis = f"the {subj} is {verb} the {new_obj} ."

        records.append(
            {
                "pairID": f"synth-{i}",
                "gold_label": label,
                "genre": str(rng.choice(genres)),
                "sentence1": premise,
                "sentence2": hypothesis,
            }
        )
    return records


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def examples_from_records(records: list[dict]) -> list[NLIExample]:
    return [
        NLIExample(
            pair_id=str(r.get("pairID", i)),
            genre=str(r.get("genre", "unknown")),
            premise_tokens=tokenize(r, "sentence1"),
            hypothesis_tokens=tokenize(r, "sentence2"),
            label=r["gold_label"],
        )
        for i, r in enumerate(records)
    ]


def synthetic_examples(n: int, seed: int = 0, genres=MATCHED_GENRES) -> list[NLIExample]:
    return examples_from_records(synthetic_records(n, np.random.default_rng(seed), genres))
