"""Sentence-pair aggregation and the MLP that maps the matching vector to
class probabilities.

The matching vector concatenates both refined representations with their
elementwise product and absolute difference.  The MLP applies three hidden
layers with ReLU, dropout between consecutive layers, and a final affine
projection to the three class logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import DimensionError, UsageError

N_CLASSES = 3


def aggregate(p: Tensor, h: Tensor) -> Tensor:
    """Matching vector [p ; h ; p*h ; |p-h|] of two refined representations."""
    if p.shape != h.shape:
        raise DimensionError(f"aggregate: representation shapes disagree: {p.shape} vs {h.shape}")
    product = ad.mul(p, h)
    difference = ad.absolute(ad.sub(p, h))
    return ad.concat([p, h, product, difference])


@dataclass
class PredictionDistribution:
    """Per-class probabilities over (entailment, neutral, contradiction)."""

    probs: np.ndarray
    predicted_class: int  # argmax, lowest index on exact ties


class MLPParams:
    """Affine stack: hidden widths with ReLU + dropout, then a 3-way projection.

    Weights start uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases at zero.
    """

    def __init__(
        self,
        input_dim: int,
        rng: np.random.Generator,
        widths: tuple[int, ...] = (2000, 2000, 2000),
        dropout: float = 0.25,
    ):
        self.input_dim = input_dim
        self.widths = tuple(widths)
        self.dropout = dropout
        self.layers: list[tuple[Parameter, Parameter]] = []
        fan_in = input_dim
        for i, width in enumerate(list(self.widths) + [N_CLASSES]):
            bound = 1.0 / math.sqrt(fan_in)
            w = Parameter(rng.uniform(-bound, bound, (width, fan_in)), name=f"mlp.{i}.w")
            b = Parameter(np.zeros(width), name=f"mlp.{i}.b")
            self.layers.append((w, b))
            fan_in = width

    def parameters(self) -> dict[str, Parameter]:
        params: dict[str, Parameter] = {}
        for w, b in self.layers:
            params[w.name] = w
            params[b.name] = b
        return params


def classify(
    r: Tensor,
    params: MLPParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, PredictionDistribution]:
    """Map a matching vector to logits and a probability distribution.

    Dropout fires only in training mode, between consecutive layers of the
    stack (after each hidden ReLU, including before the final projection).
    """
    if r.shape != (params.input_dim,):
        raise DimensionError(f"classify: input shape {r.shape} != ({params.input_dim},)")
    if training and params.dropout > 0 and rng is None:
        raise UsageError("classify: training with dropout needs a generator")
    x = r
    *hidden, (w_out, b_out) = params.layers
    for w, b in hidden:
        x = ad.relu(ad.add(ad.matmul(w.value, x), b.value))
        x = ad.dropout(x, params.dropout, training, rng)
    logits = ad.add(ad.matmul(w_out.value, x), b_out.value)
    probs = ad.softmax_probs(logits.data)
    return logits, PredictionDistribution(probs=probs, predicted_class=int(np.argmax(probs)))
