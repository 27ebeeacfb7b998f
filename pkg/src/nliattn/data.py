"""Corpus ingestion, token normalization, vocabularies, embeddings, batching.

The corpus format is line-delimited JSON with at least ``gold_label``,
``sentence1`` and ``sentence2``; ``sentence{1,2}_binary_parse``, ``genre``
and ``pairID`` are used when present.  Everything here is a pure function
of (files, seed): vocabularies are immutable once built and batches are
reproducible from the shuffle generator handed in.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError

LABELS = ("entailment", "neutral", "contradiction")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
NUM_TOKEN = "<num>"

# optional sign, digit groups optionally separated by commas, optional
# single decimal part: "3", "1,200", "3.5", "-7", "+12,345.67"
_NUMERIC_RE = re.compile(r"^[+-]?\d+(?:,\d+)*(?:\.\d+)?$")


def normalize_token(raw: str) -> str:
    """Lowercase a token; collapse anything numeric to the <num> placeholder."""
    if _NUMERIC_RE.match(raw):
        return NUM_TOKEN
    return raw.lower()


def parse_leaves(binary_parse: str) -> list[str]:
    """Leaf tokens of a binary parse string: drop the bracket symbols."""
    return [t for t in binary_parse.split() if t not in ("(", ")")]


def tokenize(record: dict, side: str) -> list[str]:
    """Tokens for one side ("sentence1"/"sentence2") of a corpus record.

    Prefers the binary-parse leaves when the record carries them, otherwise
    whitespace-splits the plain text.  Normalization is applied per token.
    """
    parse = record.get(f"{side}_binary_parse")
    raw = parse_leaves(parse) if parse else str(record.get(side, "")).split()
    return [normalize_token(t) for t in raw if t]


@dataclass
class NLIExample:
    pair_id: str
    genre: str
    premise_tokens: list[str]
    hypothesis_tokens: list[str]
    label: str  # one of LABELS

    @property
    def label_index(self) -> int:
        return LABEL_TO_INDEX[self.label]


@dataclass
class DatasetLoad:
    examples: list[NLIExample]
    kept: int = 0
    dropped_no_label: int = 0
    skipped_empty: int = 0

    def __iter__(self):
        return iter(self.examples)

    def __len__(self):
        return len(self.examples)


def load_dataset(path, split_role: str = "train") -> DatasetLoad:
    """Read a corpus file into NLIExamples.

    Pairs labeled "-" are dropped for every role; records that end up with
    an empty token list on either side are skipped and counted.
    """
    if split_role not in ("train", "dev", "test"):
        raise ConfigError(f"unknown split role {split_role!r}")
    result = DatasetLoad(examples=[])
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: not a valid record: {exc}") from exc
            for required in ("gold_label", "sentence1", "sentence2"):
                if required not in record:
                    raise DataError(f"{path}:{lineno}: missing field {required!r}")
            label = record["gold_label"]
            if label == "-":
                result.dropped_no_label += 1
                continue
            if label not in LABEL_TO_INDEX:
                raise DataError(f"{path}:{lineno}: unknown gold_label {label!r}")
            premise = tokenize(record, "sentence1")
            hypothesis = tokenize(record, "sentence2")
            if not premise or not hypothesis:
                result.skipped_empty += 1
                continue
            result.examples.append(
                NLIExample(
                    pair_id=str(record.get("pairID", lineno)),
                    genre=str(record.get("genre", "unknown")),
                    premise_tokens=premise,
                    hypothesis_tokens=hypothesis,
                    label=label,
                )
            )
            result.kept += 1
    return result


def mix_snli(
    multinli_train: Sequence[NLIExample],
    snli_train: Sequence[NLIExample],
    fraction: float = 0.15,
    rng: np.random.Generator | None = None,
) -> list[NLIExample]:
    """Append a seeded uniform sample (without replacement) of the second
    corpus to the first; sample size is floor(fraction * len)."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"fraction must be in [0, 1], got {fraction}")
    rng = rng or np.random.default_rng(0)
    k = math.floor(fraction * len(snli_train))
    combined = list(multinli_train)
    if k:
        picked = np.sort(rng.choice(len(snli_train), size=k, replace=False))
        combined.extend(snli_train[int(i)] for i in picked)
    return combined


# ---------------------------------------------------------------------------
# Vocabularies


class Vocabulary:
    """Normalized token -> index map with reserved PAD/UNK/NUM entries."""

    def __init__(self, dim: int = 300):
        self.dim = dim
        self._index: dict[str, int] = {}
        for reserved in (PAD_TOKEN, UNK_TOKEN, NUM_TOKEN):
            self._index[reserved] = len(self._index)

    pad = property(lambda self: self._index[PAD_TOKEN])
    unk = property(lambda self: self._index[UNK_TOKEN])
    num = property(lambda self: self._index[NUM_TOKEN])

    def __len__(self):
        return len(self._index)

    def __contains__(self, token):
        return token in self._index

    def add(self, token: str) -> int:
        token = normalize_token(token)
        if token not in self._index:
            self._index[token] = len(self._index)
        return self._index[token]

    def lookup(self, token: str) -> int:
        return self._index.get(token, self.unk)

    def tokens(self) -> list[str]:
        return list(self._index)  # insertion order == index order

    @classmethod
    def from_examples(cls, examples: Iterable[NLIExample], dim: int = 300) -> "Vocabulary":
        vocab = cls(dim=dim)
        for ex in examples:
            for token in ex.premise_tokens:
                vocab.add(token)
            for token in ex.hypothesis_tokens:
                vocab.add(token)
        return vocab

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#reserved pad={self.pad} unk={self.unk} num={self.num} dim={self.dim}\n")
            for token in self.tokens():
                fh.write(token + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header.startswith("#reserved "):
                raise DataError(f"{path}: missing vocabulary header")
            fields = dict(kv.split("=") for kv in header[len("#reserved "):].split())
            vocab = cls(dim=int(fields["dim"]))
            vocab._index.clear()
            for lineno, line in enumerate(fh):
                vocab._index[line.rstrip("\n")] = lineno
        for name, attr in (("pad", PAD_TOKEN), ("unk", UNK_TOKEN), ("num", NUM_TOKEN)):
            if vocab._index.get(attr) != int(fields[name]):
                raise DataError(f"{path}: reserved token {attr!r} misplaced")
        return vocab

    def content_hash(self) -> str:
        payload = f"dim={self.dim}\n" + "\n".join(self.tokens())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CharVocabulary:
    """Character -> index map built from training tokens, first-seen order."""

    def __init__(self, dim: int = 20):
        self.dim = dim
        self._index: dict[str, int] = {PAD_TOKEN: 0, UNK_TOKEN: 1}

    pad = property(lambda self: self._index[PAD_TOKEN])
    unk = property(lambda self: self._index[UNK_TOKEN])

    def __len__(self):
        return len(self._index)

    def add(self, ch: str) -> int:
        if ch not in self._index:
            self._index[ch] = len(self._index)
        return self._index[ch]

    def lookup(self, ch: str) -> int:
        return self._index.get(ch, self.unk)

    def chars(self) -> list[str]:
        return list(self._index)

    @classmethod
    def from_examples(cls, examples: Iterable[NLIExample], dim: int = 20) -> "CharVocabulary":
        vocab = cls(dim=dim)
        for ex in examples:
            for token in ex.premise_tokens:
                for ch in token:
                    vocab.add(ch)
            for token in ex.hypothesis_tokens:
                for ch in token:
                    vocab.add(ch)
        return vocab

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#reserved pad={self.pad} unk={self.unk} dim={self.dim}\n")
            for ch in self.chars():
                fh.write(ch + "\n")

    @classmethod
    def load(cls, path) -> "CharVocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header.startswith("#reserved "):
                raise DataError(f"{path}: missing char-vocabulary header")
            fields = dict(kv.split("=") for kv in header[len("#reserved "):].split())
            vocab = cls(dim=int(fields["dim"]))
            vocab._index.clear()
            for lineno, line in enumerate(fh):
                vocab._index[line.rstrip("\n")] = lineno
        if vocab._index.get(PAD_TOKEN) != int(fields["pad"]):
            raise DataError(f"{path}: reserved PAD character misplaced")
        return vocab

    def content_hash(self) -> str:
        payload = f"dim={self.dim}\n" + "\n".join(self.chars())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Embeddings


def _init_embedding_matrix(
    vocab: Vocabulary, rng: np.random.Generator, scale: float = 0.05
) -> np.ndarray:
    matrix = rng.uniform(-scale, scale, size=(len(vocab), vocab.dim)).astype(np.float32)
    matrix[vocab.pad] = 0.0
    return matrix


def random_embeddings(vocab: Vocabulary, rng: np.random.Generator, scale: float = 0.05):
    """Frozen embedding matrix with every non-PAD row drawn uniform(-scale, scale).

    Stand-in for pretrained vectors when none are available; the default
    scale matches the unknown-word initialization.
    """
    from .autodiff import Parameter

    return Parameter(
        _init_embedding_matrix(vocab, rng, scale), name="word_embeddings", trainable=False
    )


@dataclass
class EmbeddingLoad:
    parameter: object
    found: int
    skipped_lines: int


def load_embeddings(path, vocab: Vocabulary, rng: np.random.Generator) -> EmbeddingLoad:
    """Load pretrained vectors for the vocabulary.

    File rows are copied verbatim; vocabulary tokens absent from the file
    (UNK and NUM included) keep their uniform(-0.05, 0.05) initialization;
    the PAD row stays zero.  Malformed lines are skipped and counted; a file
    whose vector width disagrees with the vocabulary dimension is rejected.
    The resulting parameter is frozen: these vectors are never fine-tuned.
    """
    from .autodiff import Parameter

    matrix = _init_embedding_matrix(vocab, rng)
    found = 0
    skipped = 0
    file_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                skipped += 1
                continue
            if file_dim is None:
                file_dim = len(parts) - 1
                if file_dim != vocab.dim:
                    raise ConfigError(
                        f"{path}: embedding width {file_dim} != vocabulary dimension {vocab.dim}"
                    )
            if len(parts) - 1 != file_dim:
                skipped += 1
                continue
            token = parts[0]
            if token not in vocab or token == PAD_TOKEN:
                continue
            try:
                vector = np.array([float(v) for v in parts[1:]], dtype=np.float32)
            except ValueError:
                skipped += 1
                continue
            matrix[vocab.lookup(token)] = vector
            found += 1
    parameter = Parameter(matrix, name="word_embeddings", trainable=False)
    return EmbeddingLoad(parameter=parameter, found=found, skipped_lines=skipped)


# ---------------------------------------------------------------------------
# Batching


@dataclass
class Batch:
    premise_ids: np.ndarray  # [b x Lp] int64
    premise_mask: np.ndarray  # [b x Lp] bool, True exactly at non-PAD
    hypothesis_ids: np.ndarray
    hypothesis_mask: np.ndarray
    premise_char_ids: np.ndarray  # [b x Lp x Cp] int64
    premise_char_mask: np.ndarray
    hypothesis_char_ids: np.ndarray
    hypothesis_char_mask: np.ndarray
    labels: np.ndarray  # [b] int64
    genres: list[str] = field(default_factory=list)
    pair_ids: list[str] = field(default_factory=list)

    def __len__(self):
        return self.premise_ids.shape[0]


def _encode_side(token_lists, vocab, char_vocab):
    b = len(token_lists)
    max_len = max(len(t) for t in token_lists)
    max_chars = max((len(tok) for toks in token_lists for tok in toks), default=1)
    ids = np.zeros((b, max_len), dtype=np.int64)  # 0 == PAD id
    mask = np.zeros((b, max_len), dtype=bool)
    char_ids = np.zeros((b, max_len, max_chars), dtype=np.int64)
    char_mask = np.zeros((b, max_len, max_chars), dtype=bool)
    for i, tokens in enumerate(token_lists):
        for j, token in enumerate(tokens):
            idx = vocab.lookup(token)
            # a literal "<pad>" in running text must not alias the padding id
            ids[i, j] = vocab.unk if idx == vocab.pad else idx
            mask[i, j] = True
            for c, ch in enumerate(token):
                char_ids[i, j, c] = char_vocab.lookup(ch)
                char_mask[i, j, c] = True
    return ids, mask, char_ids, char_mask


def make_batches(
    examples: Sequence[NLIExample],
    batch_size: int,
    role: str,
    vocab: Vocabulary,
    char_vocab: CharVocabulary,
    max_premise_len: int = 200,
    rng: np.random.Generator | None = None,
) -> list[Batch]:
    """Assemble padded batches with masks.

    Training drops pairs whose premise exceeds ``max_premise_len`` tokens
    and draws a fresh seeded shuffle (pass the per-epoch generator); dev and
    test keep every pair in file order.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if role == "train":
        kept = [ex for ex in examples if len(ex.premise_tokens) <= max_premise_len]
        order = np.arange(len(kept))
        if rng is not None:
            rng.shuffle(order)
        kept = [kept[int(i)] for i in order]
    else:
        kept = list(examples)

    batches = []
    for start in range(0, len(kept), batch_size):
        chunk = kept[start : start + batch_size]
        p_ids, p_mask, p_cids, p_cmask = _encode_side(
            [ex.premise_tokens for ex in chunk], vocab, char_vocab
        )
        h_ids, h_mask, h_cids, h_cmask = _encode_side(
            [ex.hypothesis_tokens for ex in chunk], vocab, char_vocab
        )
        batches.append(
            Batch(
                premise_ids=p_ids,
                premise_mask=p_mask,
                hypothesis_ids=h_ids,
                hypothesis_mask=h_mask,
                premise_char_ids=p_cids,
                premise_char_mask=p_cmask,
                hypothesis_char_ids=h_cids,
                hypothesis_char_mask=h_cmask,
                labels=np.array([ex.label_index for ex in chunk], dtype=np.int64),
                genres=[ex.genre for ex in chunk],
                pair_ids=[ex.pair_id for ex in chunk],
            )
        )
    return batches
