"""RMSProp training loop with per-epoch dev selection and checkpointing.

Every source of randomness (shuffling, dropout) derives from the single
configured seed, so a (seed, data, config) triple fixes the whole
trajectory.  The best checkpoint by matched-dev accuracy is retained; a
non-finite loss or gradient halts training with the last good checkpoint
intact.

Checkpoint file layout: an 8-byte little-endian length, a canonical JSON
manifest (config, vocabularies, hashes, parameter order), then the raw
little-endian float32 parameter blob in manifest order.
"""

from __future__ import annotations

import json
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tape
from .data import CharVocabulary, Vocabulary, make_batches
from .errors import ConfigError, IntegrityError, NumericError
from .model import ModelConfig, NLIModel

CHECKPOINT_MAGIC = "nliattn-checkpoint"


@dataclass
class TrainConfig:
    """Knobs of the optimization loop (model structure lives in ModelConfig)."""

    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 10
    seed: int = 0
    max_premise_len: int = 200
    rho: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("learning_rate, batch_size and max_epochs must be positive")


class RMSProp:
    """Plain RMSProp: s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps).

    No momentum, no centering.  Frozen parameters are never updated.
    """

    def __init__(
        self,
        params: dict[str, Parameter],
        learning_rate: float = 0.001,
        rho: float = 0.9,
        eps: float = 1e-8,
    ):
        self.params = params
        self.learning_rate = learning_rate
        self.rho = rho
        self.eps = eps
        self.square_avg = {
            name: np.zeros_like(p.data) for name, p in params.items() if p.trainable
        }

    def step(self) -> None:
        for name, p in self.params.items():
            if not p.trainable:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in parameter {name!r}")
            s = self.square_avg[name]
            s *= self.rho
            s += (1.0 - self.rho) * g * g
            p.value.data -= self.learning_rate * g / (np.sqrt(s) + self.eps)

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float
    wall_time_s: float

    def format(self) -> str:
        return (
            f"epoch={self.epoch} train_loss={self.train_loss:.6f} "
            f"dev_accuracy={self.dev_accuracy:.6f} wall_time_s={self.wall_time_s:.3f}"
        )


@dataclass
class TrainResult:
    best_epoch: int
    best_dev_accuracy: float
    epochs: list[EpochRecord] = field(default_factory=list)
    checkpoint_path: str | None = None
    halted: str | None = None  # reason, when training stopped on a numeric failure


def _dev_accuracy(model: NLIModel, dev_examples, batch_size: int) -> float:
    batches = make_batches(dev_examples, batch_size, "dev", model.vocab, model.char_vocab)
    correct = 0
    total = 0
    for batch in batches:
        for dist, label in zip(model.predict_batch(batch), batch.labels):
            correct += int(dist.predicted_class == int(label))
            total += 1
    return correct / total if total else 0.0


def train(
    model: NLIModel,
    train_examples,
    dev_examples,
    config: TrainConfig,
    checkpoint_path=None,
    log_path=None,
    target_dev_accuracy: float | None = None,
) -> TrainResult:
    """Optimize the model, keeping the checkpoint with best dev accuracy.

    Writes one key=value record per epoch to ``log_path`` when given.
    ``target_dev_accuracy`` stops early once the best accuracy reaches it.
    """
    optimizer = RMSProp(
        model.parameters(), learning_rate=config.learning_rate, rho=config.rho, eps=config.eps
    )
    result = TrainResult(best_epoch=0, best_dev_accuracy=-1.0)
    best_snapshot: dict[str, np.ndarray] | None = None

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        shuffle_rng = np.random.default_rng([config.seed, epoch, 1])
        dropout_rng = np.random.default_rng([config.seed, epoch, 2])
        batches = make_batches(
            train_examples,
            config.batch_size,
            "train",
            model.vocab,
            model.char_vocab,
            max_premise_len=config.max_premise_len,
            rng=shuffle_rng,
        )
        loss_sum = 0.0
        seen = 0
        try:
            for batch in batches:
                optimizer.zero_grads()
                with Tape() as tape:
                    loss, _ = model.batch_loss(batch, training=True, rng=dropout_rng)
                loss_value = loss.item()
                if not np.isfinite(loss_value):
                    raise NumericError(f"non-finite training loss in epoch {epoch}")
                tape.backward(loss)
                optimizer.step()
                loss_sum += loss_value * len(batch)
                seen += len(batch)
        except NumericError as exc:
            result.halted = str(exc)
            break

        dev_accuracy = _dev_accuracy(model, dev_examples, config.batch_size)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / max(seen, 1),
            dev_accuracy=dev_accuracy,
            wall_time_s=time.perf_counter() - started,
        )
        result.epochs.append(record)
        if log_path is not None:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(record.format() + "\n")

        if dev_accuracy > result.best_dev_accuracy:
            result.best_dev_accuracy = dev_accuracy
            result.best_epoch = epoch
            if checkpoint_path is not None:
                save_checkpoint(
                    model,
                    checkpoint_path,
                    epoch=epoch,
                    dev_accuracy=dev_accuracy,
                    seed=config.seed,
                )
                result.checkpoint_path = str(checkpoint_path)
            else:
                best_snapshot = {
                    name: p.data.copy() for name, p in model.parameters().items()
                }
        if target_dev_accuracy is not None and result.best_dev_accuracy >= target_dev_accuracy:
            break

    # leave the model holding its best parameters when nothing was written to disk
    if checkpoint_path is None and best_snapshot is not None:
        for name, p in model.parameters().items():
            p.value.data[:] = best_snapshot[name]
    return result


# ---------------------------------------------------------------------------
# Checkpoints


def _manifest_for(model: NLIModel, epoch, dev_accuracy, seed) -> dict:
    return {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "config": model.config.to_dict(),
        "vocab": {"dim": model.vocab.dim, "tokens": model.vocab.tokens()},
        "char_vocab": {"dim": model.char_vocab.dim, "chars": model.char_vocab.chars()},
        "vocab_hash": model.vocab_hash,
        "char_vocab_hash": model.char_vocab_hash,
        "epoch": epoch,
        "dev_accuracy": dev_accuracy,
        "seed": seed,
        "parameters": [
            {"name": name, "shape": list(p.shape), "trainable": p.trainable}
            for name, p in model.parameters().items()
        ],
    }


def save_checkpoint(model: NLIModel, path, epoch=None, dev_accuracy=None, seed=None) -> None:
    """Write manifest + float32 parameter blob; the round trip is bit-exact."""
    manifest = _manifest_for(model, epoch, dev_accuracy, seed)
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for p in model.parameters().values():
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


@dataclass
class LoadedCheckpoint:
    model: NLIModel
    manifest: dict


def _rebuild_vocab(payload: dict) -> Vocabulary:
    vocab = Vocabulary(dim=int(payload["dim"]))
    vocab._index = {token: i for i, token in enumerate(payload["tokens"])}
    return vocab


def _rebuild_char_vocab(payload: dict) -> CharVocabulary:
    vocab = CharVocabulary(dim=int(payload["dim"]))
    vocab._index = {ch: i for i, ch in enumerate(payload["chars"])}
    return vocab


def load_checkpoint(
    path,
    vocab: Vocabulary | None = None,
    char_vocab: CharVocabulary | None = None,
) -> LoadedCheckpoint:
    """Reconstruct a model from a checkpoint file.

    The manifest carries the vocabularies, so the file is self-contained;
    passing vocabularies in addition verifies their hashes against the
    manifest and rejects mismatches.
    """
    with open(path, "rb") as fh:
        file_size = os.fstat(fh.fileno()).st_size
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise IntegrityError(f"{path}: too short for a checkpoint header")
        (header_len,) = struct.unpack("<Q", raw_len)
        if header_len > file_size - 8:
            raise IntegrityError(f"{path}: declared manifest length exceeds the file")
        header = fh.read(header_len)
        if len(header) != header_len:
            raise IntegrityError(f"{path}: truncated manifest")
        try:
            manifest = json.loads(header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IntegrityError(f"{path}: manifest is not valid JSON: {exc}") from exc
        if manifest.get("format") != CHECKPOINT_MAGIC:
            raise IntegrityError(f"{path}: not a checkpoint file")
        blob = fh.read()

    expected = sum(
        int(np.prod(entry["shape"])) for entry in manifest["parameters"]
    )
    if len(blob) != expected * 4:
        raise IntegrityError(
            f"{path}: parameter blob holds {len(blob)} bytes, manifest declares {expected * 4}"
        )

    saved_vocab = _rebuild_vocab(manifest["vocab"])
    saved_chars = _rebuild_char_vocab(manifest["char_vocab"])
    if saved_vocab.content_hash() != manifest["vocab_hash"]:
        raise IntegrityError(f"{path}: vocabulary does not match its recorded hash")
    if vocab is not None and vocab.content_hash() != manifest["vocab_hash"]:
        raise ConfigError(f"{path}: checkpoint was built against a different vocabulary")
    if char_vocab is not None and char_vocab.content_hash() != manifest["char_vocab_hash"]:
        raise ConfigError(f"{path}: checkpoint was built against a different char vocabulary")

    config = ModelConfig.from_dict(manifest["config"])
    embeddings = Parameter(
        np.zeros((len(saved_vocab), saved_vocab.dim), dtype=np.float32),
        name="word_embeddings",
        trainable=False,
    )
    model = NLIModel(config, saved_vocab, saved_chars, embeddings, np.random.default_rng(0))

    params = model.parameters()
    declared = [entry["name"] for entry in manifest["parameters"]]
    if declared != list(params):
        raise IntegrityError(f"{path}: parameter order does not match this build")
    offset = 0
    for entry in manifest["parameters"]:
        p = params[entry["name"]]
        if list(p.shape) != entry["shape"]:
            raise IntegrityError(
                f"{path}: parameter {entry['name']} has shape {entry['shape']}, "
                f"expected {list(p.shape)}"
            )
        count = int(np.prod(entry["shape"]))
        values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        p.value.data[:] = values.reshape(p.shape)
        offset += count * 4
    return LoadedCheckpoint(model=model, manifest=manifest)
