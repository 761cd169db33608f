"""The scorer role: a natively trained multinomial logistic-regression text
classifier plus simple baseline scorers, all behind one scoring contract
(labels + score_batch), so the leave-one-word-out engine is scorer-agnostic.

The native model is a K x V weight matrix over bag-of-words counts, trained
by mini-batch SGD on L2-regularized multinomial cross-entropy. Training is
deterministic given the seed (zero init, seeded epoch shuffles).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix

from .corpus import Dataset, RegionScheme
from .errors import ModelFormatError, ScorerProtocolError, TrainingDivergedError, ValidationError
from .features import Vocabulary, build_vocab, to_csr, vectorize

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PROB_SUM_TOL = 1e-6


@dataclass
class Hyperparams:
    epochs: int = 10
    batch_size: int = 64
    max_len: int = 256
    learning_rate: float = 0.1
    l2: float = 1e-6
    seed: int = 0

    def validate(self) -> None:
        if self.epochs <= 0 or self.batch_size <= 0 or self.max_len <= 0:
            raise ValidationError("epochs, batch_size and max_len must be > 0")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")


@dataclass
class Model:
    vocab: Vocabulary
    weights: np.ndarray  # (K, V)
    bias: np.ndarray  # (K,)
    manifest: list[str]
    scheme: RegionScheme | None = None
    max_len: int = 256
    format_version: int = FORMAT_VERSION


@dataclass
class Prediction:
    probs: list[float]
    predicted: int
    score: float


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; accepts a vector or a matrix."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def batch_loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    x: csr_matrix,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over the batch plus 0.5*l2*||W||^2 (bias is not
    regularized), with analytic gradients."""
    n = x.shape[0]
    probs = softmax(x @ weights.T + bias)
    rows = np.arange(n)
    with np.errstate(divide="ignore"):
        nll = -np.log(probs[rows, y])
    loss = float(nll.mean() + 0.5 * l2 * float((weights**2).sum()))
    delta = probs
    delta[rows, y] -= 1.0
    delta /= n
    grad_w = np.asarray(x.T @ delta).T + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train(
    train_data: Dataset,
    dev_data: Dataset,
    hp: Hyperparams,
    min_count: int = 2,
    scheme: RegionScheme | None = None,
) -> Model:
    """Train the native classifier by mini-batch SGD with seeded per-epoch
    shuffling; the vocabulary is built from the training split only. Reports
    dev accuracy after each epoch and returns the final-epoch model."""
    hp.validate()
    if train_data.manifest != dev_data.manifest:
        raise ValidationError("train and dev manifests differ")
    vocab = build_vocab(train_data, min_count)
    k = len(train_data.manifest)
    x = to_csr([inst.text for inst in train_data.instances], vocab, hp.max_len)
    y = np.asarray([inst.label for inst in train_data.instances], dtype=np.int64)
    x_dev = to_csr([inst.text for inst in dev_data.instances], vocab, hp.max_len)
    y_dev = np.asarray([inst.label for inst in dev_data.instances], dtype=np.int64)
    n = x.shape[0]
    weights = np.zeros((k, len(vocab)), dtype=np.float64)
    bias = np.zeros(k, dtype=np.float64)
    rng = np.random.default_rng(hp.seed)
    for epoch in range(1, hp.epochs + 1):
        perm = rng.permutation(n)
        epoch_losses = []
        for batch_no, start in enumerate(range(0, n, hp.batch_size)):
            idx = perm[start : start + hp.batch_size]
            loss, grad_w, grad_b = batch_loss_and_gradient(weights, bias, x[idx], y[idx], hp.l2)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}: "
                    "lower the learning rate"
                )
            weights -= hp.learning_rate * grad_w
            bias -= hp.learning_rate * grad_b
            epoch_losses.append(loss)
        dev_pred = np.argmax(x_dev @ weights.T + bias, axis=1)
        dev_acc = float((dev_pred == y_dev).mean()) if len(y_dev) else float("nan")
        logger.info(
            "epoch %d/%d: train loss %.6f, dev accuracy %.4f",
            epoch, hp.epochs, float(np.mean(epoch_losses)), dev_acc,
        )
    return Model(
        vocab=vocab,
        weights=weights,
        bias=bias,
        manifest=list(train_data.manifest),
        scheme=scheme,
        max_len=hp.max_len,
    )


class Scorer:
    """Scoring contract: `labels` in manifest order plus `score_batch(texts)`
    returning one probability vector per text, aligned with the input order.
    Scorers must be deterministic: same input, same output."""

    labels: list[str]
    parallel_safe: bool = False

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class NativeScorer(Scorer):
    parallel_safe = True

    def __init__(self, model: Model):
        self.model = model
        self.labels = list(model.manifest)

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        m = self.model
        x = to_csr(texts, m.vocab, m.max_len)
        probs = softmax(x @ m.weights.T + m.bias)
        return probs.tolist()


class UniformScorer(Scorer):
    """Assigns 1/K to every class; argmax ties resolve to class 0."""

    parallel_safe = True

    def __init__(self, labels: list[str]):
        self.labels = list(labels)

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        k = len(self.labels)
        return [[1.0 / k] * k for _ in texts]


class ConstantScorer(Scorer):
    """Always predicts one fixed class (one-hot output)."""

    parallel_safe = True

    def __init__(self, labels: list[str], index: int = 0):
        self.labels = list(labels)
        self.index = index

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        k = len(self.labels)
        vec = [0.0] * k
        vec[self.index] = 1.0
        return [list(vec) for _ in texts]


class RandomBaselineScorer(Scorer):
    """Uniform-random class guesses, made deterministic per text by hashing
    (seed, text), so repeated scoring of the same input agrees."""

    parallel_safe = True

    def __init__(self, labels: list[str], seed: int = 0):
        self.labels = list(labels)
        self.seed = seed

    def _pick(self, text: str) -> int:
        digest = blake2b(f"{self.seed}|{text}".encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % len(self.labels)

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        k = len(self.labels)
        out = []
        for text in texts:
            vec = [0.0] * k
            vec[self._pick(text)] = 1.0
            out.append(vec)
        return out


def score_batch(scorer: Scorer, texts: list[str]) -> list[list[float]]:
    """Score a batch through any scorer and validate the contract: one vector
    per text, each of manifest length, finite, and summing to 1 within 1e-6."""
    if not isinstance(texts, list) or not texts:
        raise ValidationError("score_batch requires a non-empty list of texts")
    result = scorer.score_batch(texts)
    if len(result) != len(texts):
        raise ScorerProtocolError(
            f"scorer returned {len(result)} vectors for {len(texts)} texts: "
            f"missing output at index {len(result)}"
        )
    k = len(scorer.labels)
    for i, vec in enumerate(result):
        if len(vec) != k:
            raise ScorerProtocolError(
                f"probability vector at index {i} has length {len(vec)}, expected {k}"
            )
        total = 0.0
        for p in vec:
            if not np.isfinite(p):
                raise ScorerProtocolError(f"non-finite probability at index {i}")
            total += p
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ScorerProtocolError(
                f"probability vector at index {i} sums to {total!r}, not 1"
            )
    return result


def predict(model: Model, text: str) -> Prediction:
    """Score one text: softmax(weights @ counts + bias). Empty or all-OOV
    text scores as softmax(bias)."""
    probs = NativeScorer(model).score_batch([text])[0]
    predicted = int(np.argmax(probs))
    return Prediction(probs=probs, predicted=predicted, score=probs[predicted])


def save_model(model: Model, path: str | Path) -> None:
    """Serialize to a UTF-8 JSON envelope; weights and bias are written as
    full-precision decimal strings so the round trip is exact everywhere."""
    envelope = {
        "format_version": model.format_version,
        "scheme": model.scheme.to_dict() if model.scheme else None,
        "manifest": model.manifest,
        "vocab": model.vocab.words,
        "min_count": model.vocab.min_count,
        "max_len": model.max_len,
        "weights": [repr(v) for v in model.weights.ravel(order="C").tolist()],
        "bias": [repr(v) for v in model.bias.tolist()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str | Path) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            env = json.load(fh)
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt or truncated model file {path}: {exc}")
    if not isinstance(env, dict):
        raise ModelFormatError(f"corrupt model file {path}: not a JSON object")
    version = env.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})"
        )
    try:
        manifest = env["manifest"]
        vocab = Vocabulary(words=env["vocab"], min_count=int(env["min_count"]))
        k, v = len(manifest), len(vocab)
        weights_flat = [float(s) for s in env["weights"]]
        bias = [float(s) for s in env["bias"]]
        if len(weights_flat) != k * v or len(bias) != k:
            raise ModelFormatError(
                f"model file {path} has inconsistent shapes: "
                f"{len(weights_flat)} weights for K={k}, V={v}"
            )
        scheme = RegionScheme.from_dict(env["scheme"]) if env.get("scheme") else None
        return Model(
            vocab=vocab,
            weights=np.asarray(weights_flat, dtype=np.float64).reshape(k, v),
            bias=np.asarray(bias, dtype=np.float64),
            manifest=manifest,
            scheme=scheme,
            max_len=int(env["max_len"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}")
