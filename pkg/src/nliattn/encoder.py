"""Sentence encoder: char-aware embedding, BiLSTM context layer, pooling,
and attention-based refinement.

One encoder instance serves both sentences of a pair: premise and
hypothesis are encoded independently but with the same weights.  All
operations run per sentence on [n x d] tensors with a boolean mask marking
the real (non-PAD) positions; masked rows stay exactly zero and never
influence pooling or attention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigError, DataError, DimensionError, InvalidInputError

POOLING_METHODS = ("mean", "sum", "last", "max")


@dataclass
class EncoderConfig:
    """Structural hyperparameters of the encoder.

    ``hidden_per_dir`` defaults to 300 (chars off) or 350 (chars on), so the
    context vectors are 600- or 700-dimensional and the attention matrix is
    square with twice that size on each side.
    """

    use_chars: bool = False
    word_dim: int = 300
    char_dim: int = 20
    char_hidden: int = 50
    hidden_per_dir: int | None = None

    def __post_init__(self):
        if self.hidden_per_dir is None:
            self.hidden_per_dir = 350 if self.use_chars else 300
        for name in ("word_dim", "char_dim", "char_hidden", "hidden_per_dir"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def input_dim(self) -> int:
        return self.word_dim + (self.char_hidden if self.use_chars else 0)

    @property
    def rep_dim(self) -> int:
        """Width of a context vector h_i and of the sentence representations."""
        return 2 * self.hidden_per_dir

    @property
    def attention_dim(self) -> int:
        """Width of the concatenated [raw; h_i] vector the scorer sees."""
        return 2 * self.rep_dim


class LSTMCellParams:
    """Weights of one LSTM direction; gate order is input, forget, cell, output.

    Matrices start uniform(-1/sqrt(h), 1/sqrt(h)); biases start at zero
    except the forget-gate slots, which start at 1.
    """

    def __init__(self, name: str, input_dim: int, hidden: int, rng: np.random.Generator):
        bound = 1.0 / math.sqrt(hidden)
        self.hidden = hidden
        self.input_dim = input_dim
        self.w_ih = Parameter(
            rng.uniform(-bound, bound, (4 * hidden, input_dim)), name=f"{name}.w_ih"
        )
        self.w_hh = Parameter(
            rng.uniform(-bound, bound, (4 * hidden, hidden)), name=f"{name}.w_hh"
        )
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        self.bias = Parameter(bias, name=f"{name}.bias")

    def parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in (self.w_ih, self.w_hh, self.bias)}


def lstm_step(params: LSTMCellParams, x_t: Tensor, h_prev: Tensor, c_prev: Tensor):
    """One LSTM cell update; returns (h_t, c_t)."""
    h = params.hidden
    if x_t.shape != (params.input_dim,):
        raise DimensionError(
            f"lstm_step: input shape {x_t.shape} != ({params.input_dim},)"
        )
    gates = ad.add(
        ad.add(ad.matmul(params.w_ih.value, x_t), ad.matmul(params.w_hh.value, h_prev)),
        params.bias.value,
    )
    i = ad.sigmoid(ad.narrow(gates, 0, 0, h))
    f = ad.sigmoid(ad.narrow(gates, 0, h, h))
    g = ad.tanh(ad.narrow(gates, 0, 2 * h, h))
    o = ad.sigmoid(ad.narrow(gates, 0, 3 * h, h))
    c_t = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h_t = ad.mul(o, ad.tanh(c_t))
    return h_t, c_t


def char_encode(char_ids, char_embeddings: Parameter, cell: LSTMCellParams) -> Tensor:
    """Final hidden state of a unidirectional LSTM over a word's characters."""
    char_ids = np.asarray(char_ids, dtype=np.int64)
    if char_ids.size == 0:
        raise DataError("char_encode: empty character sequence")
    embeds = ad.take_rows(char_embeddings.value, char_ids)
    h = ad.zeros(cell.hidden)
    c = ad.zeros(cell.hidden)
    for t in range(char_ids.size):
        x_t = ad.reshape(ad.narrow(embeds, 0, t, 1), (cell.input_dim,))
        h, c = lstm_step(cell, x_t, h, c)
    return h


@dataclass
class ContextualSequence:
    """Context-aware token vectors [n x d] plus their mask and the final
    per-direction states (used by 'last' pooling)."""

    H: Tensor
    mask: np.ndarray
    final_forward: Tensor  # forward state after the last real token
    final_backward: Tensor  # backward state after the first real token


@dataclass
class SentenceRepresentation:
    raw: Tensor  # pooled representation
    refined: Tensor  # attention-weighted combination of the context vectors
    attention_weights: Tensor  # [n], zero on masked positions


def bilstm(
    x: Tensor,
    mask: np.ndarray | None,
    forward_cell: LSTMCellParams,
    backward_cell: LSTMCellParams,
) -> ContextualSequence:
    """Run both LSTM directions from zero states over the unmasked positions.

    Row i of the result is [forward_i ; backward_i]; masked rows are zero.
    """
    n = x.shape[0]
    if mask is None:
        mask = np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise DimensionError(f"bilstm: mask shape {mask.shape} != ({n},)")
    live = np.flatnonzero(mask)
    if live.size == 0:
        raise InvalidInputError("bilstm: all positions are masked")

    rows_in = {
        int(i): ad.reshape(ad.narrow(x, 0, int(i), 1), (x.shape[1],)) for i in live
    }

    forward: dict[int, Tensor] = {}
    h = ad.zeros(forward_cell.hidden)
    c = ad.zeros(forward_cell.hidden)
    for i in live:
        h, c = lstm_step(forward_cell, rows_in[int(i)], h, c)
        forward[int(i)] = h
    final_forward = h

    backward: dict[int, Tensor] = {}
    h = ad.zeros(backward_cell.hidden)
    c = ad.zeros(backward_cell.hidden)
    for i in reversed(live):
        h, c = lstm_step(backward_cell, rows_in[int(i)], h, c)
        backward[int(i)] = h
    final_backward = h

    d = forward_cell.hidden + backward_cell.hidden
    rows = [
        ad.concat([forward[i], backward[i]]) if mask[i] else ad.zeros(d)
        for i in range(n)
    ]
    return ContextualSequence(
        H=ad.stack(rows),
        mask=mask,
        final_forward=final_forward,
        final_backward=final_backward,
    )


def pool(seq: ContextualSequence, method: str) -> Tensor:
    """Reduce the context vectors to one fixed-size raw representation."""
    if method == "mean":
        return ad.reduce_mean(seq.H, seq.mask)
    if method == "sum":
        return ad.reduce_sum(seq.H, seq.mask)
    if method == "max":
        return ad.reduce_max(seq.H, seq.mask)
    if method == "last":
        return ad.concat([seq.final_forward, seq.final_backward])
    raise ConfigError(f"unknown pooling method {method!r}; choose from {POOLING_METHODS}")


def inner_attention(
    seq: ContextualSequence, raw: Tensor, W: Parameter, v: Parameter
) -> tuple[Tensor, Tensor]:
    """Refine the raw representation by attending over the context vectors.

    Each position is scored by comparing it with the raw representation
    through a tanh bottleneck; the scores pass through a masked softmax and
    the refined vector is the weighted sum of the context rows.
    """
    n = seq.H.shape[0]
    queries = ad.stack([raw] * n)
    combined = ad.concat([queries, seq.H], axis=1)  # rows [raw ; h_i]
    scores = ad.matmul(ad.tanh(ad.matmul(combined, ad.transpose(W.value))), v.value)
    alpha = ad.masked_softmax(scores, seq.mask)
    refined = ad.matmul(alpha, seq.H)
    return refined, alpha


class Encoder:
    """Shared sentence encoder: embedding, context BiLSTM, pooling, attention."""

    def __init__(
        self,
        config: EncoderConfig,
        word_embeddings: Parameter,
        n_chars: int,
        rng: np.random.Generator,
    ):
        self.config = config
        self.word_embeddings = word_embeddings
        if word_embeddings.shape[1] != config.word_dim:
            raise ConfigError(
                f"embedding width {word_embeddings.shape[1]} != word_dim {config.word_dim}"
            )
        if config.use_chars:
            char_matrix = rng.uniform(-0.05, 0.05, (n_chars, config.char_dim))
            char_matrix[0] = 0.0  # PAD character row
            self.char_embeddings = Parameter(char_matrix, name="char_embeddings")
            self.char_cell = LSTMCellParams(
                "char_lstm", config.char_dim, config.char_hidden, rng
            )
        else:
            self.char_embeddings = None
            self.char_cell = None
        self.forward_cell = LSTMCellParams(
            "context_forward", config.input_dim, config.hidden_per_dir, rng
        )
        self.backward_cell = LSTMCellParams(
            "context_backward", config.input_dim, config.hidden_per_dir, rng
        )
        a = config.attention_dim
        self.attention_w = Parameter(rng.uniform(-0.005, 0.005, (a, a)), name="attention.w")
        self.attention_v = Parameter(rng.uniform(-0.005, 0.005, a), name="attention.v")

    def parameters(self) -> dict[str, Parameter]:
        params: dict[str, Parameter] = {
            self.word_embeddings.name: self.word_embeddings
        }
        if self.config.use_chars:
            params[self.char_embeddings.name] = self.char_embeddings
            params.update(self.char_cell.parameters())
        params.update(self.forward_cell.parameters())
        params.update(self.backward_cell.parameters())
        params[self.attention_w.name] = self.attention_w
        params[self.attention_v.name] = self.attention_v
        return params

    def embed_tokens(
        self,
        word_ids,
        mask: np.ndarray | None = None,
        char_ids=None,
        char_mask=None,
    ) -> Tensor:
        """Per-token input vectors: frozen word vector, plus the char-LSTM
        summary when character features are on.  PAD rows come out all-zero."""
        word_ids = np.asarray(word_ids, dtype=np.int64)
        n = word_ids.shape[0]
        if mask is None:
            mask = np.ones(n, dtype=bool)
        if word_ids.min(initial=0) < 0 or word_ids.max(initial=0) >= self.word_embeddings.shape[0]:
            raise InvalidInputError("embed_tokens: token id outside the vocabulary")
        if not self.config.use_chars:
            # frozen lookup: a constant leaf, nothing to backpropagate into
            return Tensor(self.word_embeddings.data[word_ids])

        if char_ids is None or char_mask is None:
            raise ConfigError("embed_tokens: character ids required when use_chars is on")
        rows = []
        for j in range(n):
            if not mask[j]:
                rows.append(ad.zeros(self.config.input_dim))
                continue
            word_row = Tensor(self.word_embeddings.data[word_ids[j]])
            ids_j = np.asarray(char_ids[j])[np.asarray(char_mask[j], dtype=bool)]
            char_vec = char_encode(ids_j, self.char_embeddings, self.char_cell)
            rows.append(ad.concat([word_row, char_vec]))
        return ad.stack(rows)

    def encode_sentence(
        self,
        word_ids,
        method: str,
        mask: np.ndarray | None = None,
        char_ids=None,
        char_mask=None,
    ) -> SentenceRepresentation:
        """Embed, contextualize, pool and refine one sentence."""
        x = self.embed_tokens(word_ids, mask, char_ids, char_mask)
        seq = bilstm(x, mask, self.forward_cell, self.backward_cell)
        raw = pool(seq, method)
        refined, alpha = inner_attention(seq, raw, self.attention_w, self.attention_v)
        return SentenceRepresentation(raw=raw, refined=refined, attention_weights=alpha)
