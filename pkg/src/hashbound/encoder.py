"""A small tanh MLP encoder with hand-rolled backprop and momentum SGD.

The network maps a D-dimensional feature vector through one tanh hidden
layer to an L-dimensional relaxed code:

    u = W_out @ tanh(W_hidden @ x + b_hidden) + b_out

Gradients are computed analytically by the chain rule (no autograd) and are
checked against finite differences in the test suite.  Training is
single-threaded and fully deterministic for a given seed: weight init and
epoch shuffling both draw from the package's xorshift64* streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bounds import BoundProblem, MarginSet, derive_margins, margins_from_negative
from .codes import BinaryCode, codebook_min_distance, pack_sign_rows, codes_from_word_rows
from .data import DatasetSplits
from .evaluation import class_center_codes, mean_average_precision
from .losses import (
    ClassCenters,
    classwise_total_loss,
    pairs_from_labels,
    total_loss,
    update_centers,
)
from .prng import Xorshift64Star

__all__ = [
    "EncoderParams",
    "TrainConfig",
    "EpochRecord",
    "TrainHistory",
    "TrainingDivergedError",
    "init_params",
    "forward",
    "backward",
    "sgd_step",
    "zeros_like_params",
    "encode",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

# Substream ids for the experiment seed.
_STREAM_INIT = 0
_STREAM_SHUFFLE = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the loss stops being finite (learning rate too high)."""


@dataclass(frozen=True)
class EncoderParams:
    """Weights of the D -> H -> L network (also reused for grads/velocity).

    Shape consistency is enforced here; finiteness is checked where values
    enter from outside (checkpoint load) and by the training loop's
    divergence guard, so that a blowing-up run fails as a divergence rather
    than a validation error on its gradient containers.
    """

    hidden_weights: np.ndarray  # (H, D)
    hidden_bias: np.ndarray  # (H,)
    output_weights: np.ndarray  # (L, H)
    output_bias: np.ndarray  # (L,)

    def __post_init__(self) -> None:
        hw, hb = np.asarray(self.hidden_weights), np.asarray(self.hidden_bias)
        ow, ob = np.asarray(self.output_weights), np.asarray(self.output_bias)
        if hw.ndim != 2 or ow.ndim != 2:
            raise ValueError("weight matrices must be 2-d")
        if hb.shape != (hw.shape[0],) or ob.shape != (ow.shape[0],):
            raise ValueError("bias shapes must match their weight matrices")
        if ow.shape[1] != hw.shape[0]:
            raise ValueError("output layer width must match the hidden size")

    @property
    def input_dim(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def code_bits(self) -> int:
        return self.output_weights.shape[0]


def init_params(input_dim: int, hidden_dim: int, code_bits: int, seed: int) -> EncoderParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if min(input_dim, hidden_dim, code_bits) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = Xorshift64Star(seed, stream=_STREAM_INIT)

    def uniform_matrix(rows: int, cols: int, fan_in: int) -> np.ndarray:
        scale = 1.0 / np.sqrt(fan_in)
        flat = rng.uniforms(rows * cols)
        return (2.0 * flat - 1.0).reshape(rows, cols) * scale

    return EncoderParams(
        hidden_weights=uniform_matrix(hidden_dim, input_dim, input_dim),
        hidden_bias=np.zeros(hidden_dim),
        output_weights=uniform_matrix(code_bits, hidden_dim, hidden_dim),
        output_bias=np.zeros(code_bits),
    )


def zeros_like_params(params: EncoderParams) -> EncoderParams:
    return EncoderParams(
        hidden_weights=np.zeros_like(params.hidden_weights),
        hidden_bias=np.zeros_like(params.hidden_bias),
        output_weights=np.zeros_like(params.output_weights),
        output_bias=np.zeros_like(params.output_bias),
    )


def _check_features(params: EncoderParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.input_dim:
        raise ValueError(
            f"expected (n, {params.input_dim}) features, got {features.shape}"
        )
    return features


def forward(params: EncoderParams, features: np.ndarray) -> np.ndarray:
    """Relaxed codes for a feature batch, shape (n, code_bits)."""
    features = _check_features(params, features)
    hidden = np.tanh(features @ params.hidden_weights.T + params.hidden_bias)
    return hidden @ params.output_weights.T + params.output_bias


def backward(
    params: EncoderParams, features: np.ndarray, code_grads: np.ndarray
) -> EncoderParams:
    """Parameter gradients given d(loss)/d(relaxed codes) for the batch."""
    features = _check_features(params, features)
    code_grads = np.asarray(code_grads, dtype=np.float64)
    if code_grads.shape != (features.shape[0], params.code_bits):
        raise ValueError(
            f"expected ({features.shape[0]}, {params.code_bits}) code grads, "
            f"got {code_grads.shape}"
        )
    pre_hidden = features @ params.hidden_weights.T + params.hidden_bias
    hidden = np.tanh(pre_hidden)
    grad_output_weights = code_grads.T @ hidden
    grad_output_bias = code_grads.sum(axis=0)
    grad_hidden = code_grads @ params.output_weights
    grad_pre = grad_hidden * (1.0 - hidden**2)
    return EncoderParams(
        hidden_weights=grad_pre.T @ features,
        hidden_bias=grad_pre.sum(axis=0),
        output_weights=grad_output_weights,
        output_bias=grad_output_bias,
    )


def sgd_step(
    params: EncoderParams,
    grads: EncoderParams,
    velocity: EncoderParams,
    learning_rate: float,
    momentum: float,
) -> tuple[EncoderParams, EncoderParams]:
    """Momentum SGD: v <- momentum*v - lr*g; theta <- theta + v."""

    def step(p: np.ndarray, g: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v_new = momentum * v - learning_rate * g
        return p + v_new, v_new

    hw, vhw = step(params.hidden_weights, grads.hidden_weights, velocity.hidden_weights)
    hb, vhb = step(params.hidden_bias, grads.hidden_bias, velocity.hidden_bias)
    ow, vow = step(params.output_weights, grads.output_weights, velocity.output_weights)
    ob, vob = step(params.output_bias, grads.output_bias, velocity.output_bias)
    return (
        EncoderParams(hw, hb, ow, ob),
        EncoderParams(vhw, vhb, vow, vob),
    )


def encode(params: EncoderParams, features: np.ndarray) -> list[BinaryCode]:
    """Binarized codes for a feature batch."""
    words = pack_sign_rows(forward(params, features))
    return codes_from_word_rows(words, params.code_bits)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    code_bits: int
    hidden_dim: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.5
    quant_weight: float = 0.002
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    classwise: bool = False
    margin_override: int | None = None  # explicit negative margin for sweeps
    center_momentum: float = 0.9

    def __post_init__(self) -> None:
        if self.code_bits < 1 or self.hidden_dim < 1:
            raise ValueError("code_bits and hidden_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.quant_weight < 0:
            raise ValueError("quant_weight must be >= 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.margin_override is not None:
            # validates parity and range up front
            margins_from_negative(self.code_bits, self.margin_override)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    pairwise: float
    quantization: float
    total: float
    val_map: float
    min_center_distance: int


@dataclass(frozen=True)
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    margins: MarginSet | None = None


def _resolve_margins(config: TrainConfig, num_classes: int) -> MarginSet:
    if config.margin_override is not None:
        return margins_from_negative(config.code_bits, config.margin_override)
    return derive_margins(BoundProblem(config.code_bits, num_classes))


def train(
    splits: DatasetSplits, config: TrainConfig
) -> tuple[EncoderParams, TrainHistory]:
    """Train the encoder on the train split; track validation MAP per epoch.

    Per epoch: seeded shuffle, then per mini-batch forward -> loss (pairwise
    or class-center variant) -> backward -> momentum step.  In class-center
    mode the centers are EMA-updated after each step from that batch's
    relaxed codes, and are initialized from a full forward pass over the
    train split before the first epoch.  A trailing batch of fewer than two
    samples is skipped (no pairs can be formed from it).

    The per-epoch record holds the batch-mean loss components, the MAP of
    the validation split queried against the database split, and the minimum
    pairwise distance among the per-class center codes of the database.

    Raises:
        TrainingDivergedError: if any loss value stops being finite.
    """
    dataset = splits.dataset
    train_labels = dataset.labels[splits.train]
    num_classes = dataset.num_classes
    if len(np.unique(train_labels)) < 2:
        raise ValueError("training split must contain at least two classes")
    if len(splits.database) == 0 or len(splits.validation) == 0:
        raise ValueError("training needs nonempty database and validation splits")

    margins = _resolve_margins(config, num_classes)
    params = init_params(dataset.dim, config.hidden_dim, config.code_bits, config.seed)
    velocity = zeros_like_params(params)
    shuffle_rng = Xorshift64Star(config.seed, stream=_STREAM_SHUFFLE)

    train_features = dataset.features[splits.train]
    centers: ClassCenters | None = None
    if config.classwise:
        centers = update_centers(
            ClassCenters.empty(num_classes, config.code_bits, config.center_momentum),
            forward(params, train_features),
            train_labels,
        )

    records: list[EpochRecord] = []
    n = len(splits.train)

    def check_finite(value, epoch: int) -> None:
        if not np.all(np.isfinite(value)):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch}; "
                "the learning rate is likely too high"
            )

    # Hinge overflow during a diverging run shows up as inf/nan; the
    # explicit finiteness checks turn that into a clean error.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(n)
            sum_pair = sum_quan = sum_total = 0.0
            batches = 0
            for start in range(0, n, config.batch_size):
                rows = order[start : start + config.batch_size]
                if len(rows) < 2:
                    continue
                feats = train_features[rows]
                labels = train_labels[rows]
                relaxed = forward(params, feats)
                check_finite(relaxed, epoch)
                if config.classwise:
                    report = classwise_total_loss(
                        relaxed, labels, centers, margins, config.quant_weight
                    )
                else:
                    report = total_loss(
                        relaxed, pairs_from_labels(labels), margins, config.quant_weight
                    )
                check_finite(report.total, epoch)
                grads = backward(params, feats, report.code_grads)
                params, velocity = sgd_step(
                    params, grads, velocity, config.learning_rate, config.momentum
                )
                if config.classwise:
                    centers = update_centers(centers, relaxed, labels)
                sum_pair += report.pairwise
                sum_quan += report.quantization
                sum_total += report.total
                batches += 1

            db_relaxed = forward(params, dataset.features[splits.database])
            check_finite(db_relaxed, epoch)
            db_codes = codes_from_word_rows(
                pack_sign_rows(db_relaxed), config.code_bits
            )
            db_labels = dataset.labels[splits.database]
            val_relaxed = forward(params, dataset.features[splits.validation])
            check_finite(val_relaxed, epoch)
            val_codes = codes_from_word_rows(
                pack_sign_rows(val_relaxed), config.code_bits
            )
            report = mean_average_precision(
                val_codes,
                dataset.labels[splits.validation],
                db_codes,
                db_labels,
                include_per_query=False,
            )
            min_dist = codebook_min_distance(class_center_codes(db_codes, db_labels))
            records.append(
                EpochRecord(
                    epoch=epoch,
                    pairwise=sum_pair / batches,
                    quantization=sum_quan / batches,
                    total=sum_total / batches,
                    val_map=report.map,
                    min_center_distance=min_dist,
                )
            )
    return params, TrainHistory(records=records, margins=margins)


_CHECKPOINT_KEYS = ("hidden_weights", "hidden_bias", "output_weights", "output_bias")


def save_checkpoint(
    path, params: EncoderParams, config: TrainConfig, epoch: int
) -> None:
    """Write a JSON checkpoint: dims, seed, epoch, config, flat row-major weights.

    Floats are emitted via Python's repr, which round-trips float64 exactly.
    """
    doc: dict[str, Any] = {
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "code_bits": params.code_bits,
        "seed": config.seed,
        "epoch": epoch,
        "config": {
            "code_bits": config.code_bits,
            "hidden_dim": config.hidden_dim,
            "learning_rate": config.learning_rate,
            "momentum": config.momentum,
            "quant_weight": config.quant_weight,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "seed": config.seed,
            "classwise": config.classwise,
            "margin_override": config.margin_override,
            "center_momentum": config.center_momentum,
        },
    }
    for key in _CHECKPOINT_KEYS:
        doc[key] = [float(v) for v in getattr(params, key).ravel()]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[EncoderParams, dict[str, Any]]:
    """Read a checkpoint back; returns the params and the metadata dict."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        d, h, l = doc["input_dim"], doc["hidden_dim"], doc["code_bits"]
        shapes = {
            "hidden_weights": (h, d),
            "hidden_bias": (h,),
            "output_weights": (l, h),
            "output_bias": (l,),
        }
        arrays = {
            key: np.array(doc[key], dtype=np.float64).reshape(shapes[key])
            for key in _CHECKPOINT_KEYS
        }
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed checkpoint: {exc}") from exc
    for key, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{path}: malformed checkpoint: non-finite {key}")
    meta = {k: doc[k] for k in doc if k not in _CHECKPOINT_KEYS}
    return EncoderParams(**arrays), meta
