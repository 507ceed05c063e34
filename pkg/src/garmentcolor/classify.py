"""Feature extraction and linear classifiers (softmax, independent logistic).

Training is full-batch gradient descent from a seeded initialization, so a
fixed (data, hyperparameters, seed) triple always produces the same weights.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .colorspace import chroma, hue_angle, srgb_array_to_lab
from .errors import EmptyData, EmptyMask, SchemaMismatch, UnknownLabel
from .palette import MaskedImage, Palette, unique_rows

SWATCH = "swatch"
HISTOGRAM = "histogram"
ANCHOR_SUFFIX = "+anchor"

SOFTMAX = "softmax"
MULTILABEL = "multilabel"
MAJORITY = "majority"

MODEL_FORMAT_VERSION = 1

_LAB_LO = np.array([0.0, -128.0, -128.0])
_LAB_HI = np.array([100.0, 128.0, 128.0])


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def swatch_features(p: Palette) -> FeatureVector:
    """[L, a, b, chroma, hue] of the dominant slot, scaled to roughly unit range."""
    c1 = p.c1
    return FeatureVector(
        np.array([c1.L / 100.0, c1.a / 128.0, c1.b / 128.0, chroma(c1) / 128.0, hue_angle(c1) / (2 * math.pi)]),
        SWATCH,
    )


def lab_histogram(lab: np.ndarray, bins_per_axis: int = 8) -> np.ndarray:
    lab = np.asarray(lab, dtype=float).reshape(-1, 3)
    idx = np.floor((lab - _LAB_LO) / (_LAB_HI - _LAB_LO) * bins_per_axis).astype(int)
    idx = np.clip(idx, 0, bins_per_axis - 1)
    flat = (idx[:, 0] * bins_per_axis + idx[:, 1]) * bins_per_axis + idx[:, 2]
    counts = np.bincount(flat, minlength=bins_per_axis**3).astype(float)
    return counts / counts.sum()


def histogram_features(img: MaskedImage, bins_per_axis: int = 8) -> FeatureVector:
    """Normalized 3-D LAB histogram over masked pixels (L over [0,100], a/b over [-128,128])."""
    if bins_per_axis < 1:
        raise ValueError("bins_per_axis must be positive")
    rgb = img.pixels[img.mask]
    if rgb.shape[0] == 0:
        raise EmptyMask("mask selects no pixels")
    # Convert distinct colors once; flat swatches have very few.
    uniq, inverse, _ = unique_rows(rgb)
    lab = srgb_array_to_lab(uniq)[inverse]
    return FeatureVector(lab_histogram(lab, bins_per_axis), HISTOGRAM)


def anchor_features(f: FeatureVector, anchor: str, vocab: Sequence[str]) -> FeatureVector:
    vocab = list(vocab)
    if anchor not in vocab:
        raise UnknownLabel(f"anchor {anchor!r} not in vocabulary")
    onehot = np.zeros(len(vocab))
    onehot[vocab.index(anchor)] = 1.0
    return FeatureVector(np.concatenate([f.values, onehot]), f.schema + ANCHOR_SUFFIX)


@dataclass(frozen=True)
class LabelDistribution:
    labels: tuple[str, ...]
    probs: np.ndarray

    def top1(self) -> str:
        # argmax keeps the first maximum, i.e. vocabulary order breaks ties.
        return self.labels[int(np.argmax(self.probs))]

    def as_dict(self) -> dict[str, float]:
        return {l: float(p) for l, p in zip(self.labels, self.probs)}


@dataclass(eq=False)
class ClassifierModel:
    kind: str
    schema: str
    vocab: tuple[str, ...]
    weights: np.ndarray  # (labels, features)
    bias: np.ndarray  # (labels,)
    metadata: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.vocab = tuple(self.vocab)
        if not self.vocab:
            raise ValueError("vocabulary must not be empty")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocabulary has duplicates")
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(len(self.vocab), -1)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(len(self.vocab))

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def _matrix(self, feats) -> np.ndarray:
        if isinstance(feats, FeatureVector):
            feats = [feats]
        feats = list(feats)
        if self.kind == MAJORITY:
            return np.zeros((len(feats), 0))
        for f in feats:
            if f.schema != self.schema or len(f) != self.n_features:
                raise SchemaMismatch(
                    f"model expects {self.schema}[{self.n_features}], got {f.schema}[{len(f)}]"
                )
        return np.array([f.values for f in feats]).reshape(len(feats), self.n_features)

    def scores(self, feats) -> np.ndarray:
        X = self._matrix(feats)
        return X @ self.weights.T + self.bias

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "type": "classifier",
            "kind": self.kind,
            "schema": self.schema,
            "vocab": list(self.vocab),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict, expected_schema: str | None = None) -> "ClassifierModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION or d.get("type") != "classifier":
            raise SchemaMismatch(f"not a version-{MODEL_FORMAT_VERSION} classifier file")
        if expected_schema is not None and d["schema"] != expected_schema:
            raise SchemaMismatch(f"model schema {d['schema']!r}, expected {expected_schema!r}")
        return cls(d["kind"], d["schema"], d["vocab"], d["weights"], d["bias"], d.get("metadata", {}))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def softmax_loss_grad(W, b, X, Y, l2=0.0):
    """Mean cross-entropy plus ``l2/2 * |W|^2``; ``Y`` is one-hot ``(n, labels)``."""
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    G = (P - Y) / n
    return loss, G.T @ X + l2 * W, G.sum(axis=0)


def multilabel_loss_grad(W, b, X, Y, l2=0.0):
    """Binary cross-entropy summed over labels, averaged over examples."""
    n = X.shape[0]
    Z = X @ W.T + b
    # log(1 + exp(-|z|)) form keeps the loss finite for large |z|.
    loss = np.sum(np.maximum(Z, 0) - Z * Y + np.log1p(np.exp(-np.abs(Z)))) / n + 0.5 * l2 * np.sum(W * W)
    G = (sigmoid(Z) - Y) / n
    return loss, G.T @ X + l2 * W, G.sum(axis=0)


def _check_data(data, vocab):
    data = list(data)
    if not data:
        raise EmptyData("no training examples")
    schema, n_feat = data[0][0].schema, len(data[0][0])
    for f, _ in data:
        if f.schema != schema or len(f) != n_feat:
            raise SchemaMismatch(f"mixed feature schemas: {schema}[{n_feat}] vs {f.schema}[{len(f)}]")
    vocab = tuple(vocab)
    if len(set(vocab)) != len(vocab) or not vocab:
        raise ValueError("vocabulary must be non-empty and duplicate-free")
    return data, schema, n_feat, vocab


def _gradient_descent(loss_grad, X, Y, n_labels, lr, epochs, l2, seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(scale=0.01, size=(n_labels, X.shape[1]))
    b = np.zeros(n_labels)
    history = []
    for _ in range(epochs):
        loss, gW, gb = loss_grad(W, b, X, Y, l2)
        history.append(float(loss))
        W -= lr * gW
        b -= lr * gb
    history.append(float(loss_grad(W, b, X, Y, l2)[0]))
    return W, b, history


def train_softmax(
    data: Iterable[tuple[FeatureVector, str]],
    vocab: Sequence[str],
    lr: float = 2.0,
    epochs: int = 500,
    l2: float = 1e-4,
    seed: int = 0,
) -> ClassifierModel:
    data, schema, _, vocab = _check_data(data, vocab)
    index = {l: i for i, l in enumerate(vocab)}
    X = np.array([f.values for f, _ in data])
    Y = np.zeros((len(data), len(vocab)))
    for i, (_, label) in enumerate(data):
        if label not in index:
            raise UnknownLabel(f"label {label!r} not in vocabulary")
        Y[i, index[label]] = 1.0
    W, b, history = _gradient_descent(softmax_loss_grad, X, Y, len(vocab), lr, epochs, l2, seed)
    meta = {"seed": seed, "epochs": epochs, "lr": lr, "l2": l2, "final_loss": history[-1], "n_train": len(data)}
    return ClassifierModel(SOFTMAX, schema, vocab, W, b, meta, history)


def train_multilabel(
    data: Iterable[tuple[FeatureVector, Iterable[str]]],
    vocab: Sequence[str],
    lr: float = 2.0,
    epochs: int = 500,
    l2: float = 1e-4,
    seed: int = 0,
) -> ClassifierModel:
    data, schema, _, vocab = _check_data(data, vocab)
    index = {l: i for i, l in enumerate(vocab)}
    X = np.array([f.values for f, _ in data])
    Y = np.zeros((len(data), len(vocab)))
    for i, (_, labels) in enumerate(data):
        for label in labels:
            if label not in index:
                raise UnknownLabel(f"label {label!r} not in vocabulary")
            Y[i, index[label]] = 1.0
    W, b, history = _gradient_descent(multilabel_loss_grad, X, Y, len(vocab), lr, epochs, l2, seed)
    meta = {"seed": seed, "epochs": epochs, "lr": lr, "l2": l2, "final_loss": history[-1], "n_train": len(data)}
    return ClassifierModel(MULTILABEL, schema, vocab, W, b, meta, history)


def majority_model(labels: Iterable[str], vocab: Sequence[str] | None = None) -> ClassifierModel:
    """Constant predictor; its distribution is the empirical label prior."""
    labels = list(labels)
    if not labels:
        raise EmptyData("no labels")
    vocab = tuple(vocab) if vocab is not None else tuple(sorted(set(labels)))
    counts = Counter(labels)
    unknown = set(counts) - set(vocab)
    if unknown:
        raise UnknownLabel(f"labels not in vocabulary: {sorted(unknown)}")
    freq = np.array([counts.get(l, 0) for l in vocab], dtype=float) / len(labels)
    bias = np.log(np.maximum(freq, 1e-12))
    return ClassifierModel(MAJORITY, "any", vocab, np.zeros((len(vocab), 0)), bias, {"n_train": len(labels)})


def predict_dist(m: ClassifierModel, f: FeatureVector) -> LabelDistribution:
    if m.kind == MULTILABEL:
        raise SchemaMismatch("multilabel models have no label distribution; use predict_multilabel")
    return LabelDistribution(m.vocab, softmax(m.scores(f))[0])


def predict_top1(m: ClassifierModel, feats: Sequence[FeatureVector]) -> list[str]:
    if not len(feats):
        return []
    idx = np.argmax(m.scores(feats), axis=1)
    return [m.vocab[i] for i in idx]


def predict_multilabel(m: ClassifierModel, f: FeatureVector, threshold: float = 0.5):
    """Per-label probabilities and the set of labels scoring at least ``threshold``."""
    if m.kind != MULTILABEL:
        raise SchemaMismatch(f"expected a multilabel model, got {m.kind}")
    s = sigmoid(m.scores(f))[0]
    return s, {l for l, v in zip(m.vocab, s) if v >= threshold}


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True, indent=1), encoding="utf-8")


def load_model(path, expected_schema: str | None = None):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("type") == "regressor":
        from .pipeline import RegressorModel

        return RegressorModel.from_dict(d, expected_schema)
    return ClassifierModel.from_dict(d, expected_schema)
