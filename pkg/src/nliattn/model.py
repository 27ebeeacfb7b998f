"""The full sentence-pair model: shared encoder, aggregation, MLP classifier.

A model owns every parameter (container for checkpointing and the
optimizer) plus the vocabulary hashes its inputs were built against, so
mismatched artifacts are caught instead of silently mis-predicting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import classifier as clf
from .autodiff import Parameter, Tensor
from .data import Batch, CharVocabulary, Vocabulary
from .encoder import Encoder, EncoderConfig, POOLING_METHODS
from .errors import ConfigError


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    pooling: str = "mean"
    mlp_widths: tuple[int, ...] = (2000, 2000, 2000)
    dropout: float = 0.25

    def __post_init__(self):
        if self.pooling not in POOLING_METHODS:
            raise ConfigError(
                f"unknown pooling {self.pooling!r}; choose from {POOLING_METHODS}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        self.mlp_widths = tuple(int(w) for w in self.mlp_widths)

    def to_dict(self) -> dict:
        e = self.encoder
        return {
            "use_chars": e.use_chars,
            "word_dim": e.word_dim,
            "char_dim": e.char_dim,
            "char_hidden": e.char_hidden,
            "hidden_per_dir": e.hidden_per_dir,
            "pooling": self.pooling,
            "mlp_widths": list(self.mlp_widths),
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig(
                use_chars=bool(d["use_chars"]),
                word_dim=int(d["word_dim"]),
                char_dim=int(d["char_dim"]),
                char_hidden=int(d["char_hidden"]),
                hidden_per_dir=int(d["hidden_per_dir"]),
            ),
            pooling=d["pooling"],
            mlp_widths=tuple(d["mlp_widths"]),
            dropout=float(d["dropout"]),
        )


class NLIModel:
    """Inner-attention sentence-pair classifier with tied encoders."""

    def __init__(
        self,
        config: ModelConfig,
        vocab: Vocabulary,
        char_vocab: CharVocabulary,
        embeddings: Parameter,
        rng: np.random.Generator,
    ):
        if embeddings.shape != (len(vocab), config.encoder.word_dim):
            raise ConfigError(
                f"embedding shape {embeddings.shape} does not match vocabulary "
                f"({len(vocab)} x {config.encoder.word_dim})"
            )
        self.config = config
        self.vocab = vocab
        self.char_vocab = char_vocab
        self.vocab_hash = vocab.content_hash()
        self.char_vocab_hash = char_vocab.content_hash()
        self.encoder = Encoder(config.encoder, embeddings, n_chars=len(char_vocab), rng=rng)
        self.mlp = clf.MLPParams(
            input_dim=4 * config.encoder.rep_dim,
            rng=rng,
            widths=config.mlp_widths,
            dropout=config.dropout,
        )

    @property
    def rep_dim(self) -> int:
        return self.config.encoder.rep_dim

    def parameters(self) -> dict[str, Parameter]:
        """All parameters in a stable declared order (checkpoint blob order)."""
        params = self.encoder.parameters()
        params.update(self.mlp.parameters())
        return params

    def zero_grads(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    # -- forward ------------------------------------------------------------

    def encode(self, word_ids, mask=None, char_ids=None, char_mask=None):
        return self.encoder.encode_sentence(
            word_ids,
            self.config.pooling,
            mask=mask,
            char_ids=char_ids,
            char_mask=char_mask,
        )

    def pair_logits(
        self,
        premise: tuple,
        hypothesis: tuple,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, clf.PredictionDistribution]:
        """Logits for one (premise, hypothesis) id/mask/char tuple pair."""
        p_rep = self.encode(*premise)
        h_rep = self.encode(*hypothesis)
        r = clf.aggregate(p_rep.refined, h_rep.refined)
        return clf.classify(r, self.mlp, training=training, rng=rng)

    def batch_loss(
        self,
        batch: Batch,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, int]:
        """Mean cross entropy over a batch, plus the number of correct argmaxes."""
        logit_rows = []
        correct = 0
        for i in range(len(batch)):
            logits, dist = self.pair_logits(
                self._premise_slice(batch, i),
                self._hypothesis_slice(batch, i),
                training=training,
                rng=rng,
            )
            logit_rows.append(logits)
            if dist.predicted_class == int(batch.labels[i]):
                correct += 1
        loss = ad.cross_entropy_from_logits(ad.stack(logit_rows), batch.labels)
        return loss, correct

    def predict_batch(self, batch: Batch) -> list[clf.PredictionDistribution]:
        """Inference-mode distributions for every pair in a batch."""
        return [
            self.pair_logits(
                self._premise_slice(batch, i), self._hypothesis_slice(batch, i)
            )[1]
            for i in range(len(batch))
        ]

    def predict_tokens(
        self, premise_tokens: list[str], hypothesis_tokens: list[str]
    ) -> clf.PredictionDistribution:
        """Distribution for one raw token-list pair (unknown tokens -> UNK)."""
        return self.pair_logits(
            self.tokens_to_inputs(premise_tokens),
            self.tokens_to_inputs(hypothesis_tokens),
        )[1]

    # -- input plumbing -----------------------------------------------------

    @staticmethod
    def _premise_slice(batch: Batch, i: int) -> tuple:
        return (
            batch.premise_ids[i],
            batch.premise_mask[i],
            batch.premise_char_ids[i],
            batch.premise_char_mask[i],
        )

    @staticmethod
    def _hypothesis_slice(batch: Batch, i: int) -> tuple:
        return (
            batch.hypothesis_ids[i],
            batch.hypothesis_mask[i],
            batch.hypothesis_char_ids[i],
            batch.hypothesis_char_mask[i],
        )

    def tokens_to_inputs(self, tokens: list[str]) -> tuple:
        """Map a raw token list to the (ids, mask, char_ids, char_mask) tuple
        the encoder consumes; unknown tokens fall back to UNK."""
        if not tokens:
            raise ConfigError("cannot encode an empty token list")
        ids = np.array([self.vocab.lookup(t) for t in tokens], dtype=np.int64)
        mask = np.ones(len(tokens), dtype=bool)
        max_chars = max(len(t) for t in tokens)
        char_ids = np.zeros((len(tokens), max_chars), dtype=np.int64)
        char_mask = np.zeros((len(tokens), max_chars), dtype=bool)
        for j, token in enumerate(tokens):
            for c, ch in enumerate(token):
                char_ids[j, c] = self.char_vocab.lookup(ch)
                char_mask[j, c] = True
        return ids, mask, char_ids, char_mask
