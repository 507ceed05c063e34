"""Three-stage BK -> CSS -> constrained LAB predictor and its ablations.

Stage 1 picks a Berlin-Kay family, stage 2 a CSS color inside that family
(one softmax per family), stage 3 regresses a LAB point and projects it onto
a Euclidean ball around the chosen CSS centroid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import (
    MAJORITY,
    ClassifierModel,
    FeatureVector,
    majority_model,
    save_model,
    load_model,
    train_softmax,
)
from .colorspace import LabColor, delta_e_2000_array
from .errors import EmptyCandidateSet, EmptyData, SchemaMismatch, SingularSystem
from .naming import BK_FAMILIES, ColorTable, NamedColor, check_family, css_table

DEFAULT_RADIUS = 10.0
PIPELINE_FORMAT_VERSION = 1

PREDICTED = "predicted"
ORACLE = "oracle"
REGRESSED = "regressed"
CENTROID = "centroid"
UNCONSTRAINED = "unconstrained"

STAGE_ROWS = ("unconstrained", "css_centroid_only", "predicted_pipeline", "oracle_pipeline")


@dataclass(eq=False)
class RegressorModel:
    schema: str
    weights: np.ndarray  # (features, 3)
    bias: np.ndarray  # (3,)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1, 3)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(3)

    def predict_array(self, feats: Sequence[FeatureVector]) -> np.ndarray:
        for f in feats:
            if f.schema != self.schema or len(f) != self.weights.shape[0]:
                raise SchemaMismatch(
                    f"regressor expects {self.schema}[{self.weights.shape[0]}], got {f.schema}[{len(f)}]"
                )
        X = np.array([f.values for f in feats]).reshape(len(feats), self.weights.shape[0])
        out = X @ self.weights + self.bias
        out[:, 0] = np.clip(out[:, 0], 0.0, 100.0)
        return out

    def predict(self, f: FeatureVector) -> LabColor:
        return LabColor.from_array(self.predict_array([f])[0])

    def to_dict(self) -> dict:
        return {
            "format_version": PIPELINE_FORMAT_VERSION,
            "type": "regressor",
            "schema": self.schema,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict, expected_schema: str | None = None) -> "RegressorModel":
        if d.get("format_version") != PIPELINE_FORMAT_VERSION or d.get("type") != "regressor":
            raise SchemaMismatch("not a regressor model file")
        if expected_schema is not None and d["schema"] != expected_schema:
            raise SchemaMismatch(f"regressor schema {d['schema']!r}, expected {expected_schema!r}")
        return cls(d["schema"], d["weights"], d["bias"], d.get("metadata", {}))


def train_lab_regressor(data: Sequence[tuple[FeatureVector, Sequence[float]]], ridge: float = 1e-3) -> RegressorModel:
    """Closed-form ridge regression to LAB; the intercept is not penalized."""
    data = list(data)
    if not data:
        raise EmptyData("no regression examples")
    schema = data[0][0].schema
    if any(f.schema != schema or len(f) != len(data[0][0]) for f, _ in data):
        raise SchemaMismatch("mixed feature schemas in regression data")
    X = np.array([f.values for f, _ in data])
    Y = np.array([list(y) for _, y in data], dtype=float)
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - x_mean, Y - y_mean
    A = Xc.T @ Xc
    if ridge == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystem("rank-deficient features with ridge=0")
    W = np.linalg.solve(A + ridge * np.eye(A.shape[0]), Xc.T @ Yc)
    b = y_mean - x_mean @ W
    return RegressorModel(schema, W, b, {"ridge": ridge, "n_train": len(data)})


def project_to_ball(p, center, radius: float) -> LabColor:
    """Nearest point to ``p`` inside the Euclidean LAB ball around ``center``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return LabColor.from_array(_project(np.asarray(p, float)[None], np.asarray(center, float)[None], radius)[0])


def _project(p: np.ndarray, c: np.ndarray, radius: float) -> np.ndarray:
    d = p - c
    n = np.sqrt((d * d).sum(axis=1))
    scale = np.where(n > radius, radius / np.where(n > 0, n, 1.0), 1.0)
    return c + d * scale[:, None]


@dataclass(frozen=True)
class PredictionRecord:
    bk: str
    css: NamedColor
    lab: LabColor
    bk_source: str
    css_source: str
    lab_source: str

    def __post_init__(self):
        if self.css.family != self.bk:
            raise ValueError(f"CSS color {self.css.name!r} is {self.css.family}, not {self.bk}")

    def to_dict(self) -> dict:
        return {
            "bk": self.bk,
            "css": self.css.name,
            "lab": list(self.lab),
            "stage_provenance": {
                "bk_source": self.bk_source,
                "css_source": self.css_source,
                "lab_source": self.lab_source,
            },
        }


@dataclass
class PipelineModels:
    bk_model: ClassifierModel
    css_models: dict[str, ClassifierModel]
    regressor: RegressorModel
    table: ColorTable
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [f for f in BK_FAMILIES if f not in self.css_models]
        if missing:
            raise ValueError(f"CSS models missing for families: {missing}")

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_model(self.bk_model, d / "bk.json")
        for fam in BK_FAMILIES:
            save_model(self.css_models[fam], d / f"css_{fam}.json")
        (d / "regressor.json").write_text(json.dumps(self.regressor.to_dict(), sort_keys=True, indent=1), encoding="utf-8")
        meta = {"format_version": PIPELINE_FORMAT_VERSION, "table": self.table.names, **self.metadata}
        (d / "pipeline.json").write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "PipelineModels":
        d = Path(directory)
        meta = json.loads((d / "pipeline.json").read_text(encoding="utf-8"))
        if meta.get("format_version") != PIPELINE_FORMAT_VERSION:
            raise SchemaMismatch("unsupported pipeline format version")
        schema = meta.get("schema")
        bk = load_model(d / "bk.json", schema)
        css = {}
        for fam in BK_FAMILIES:
            m = load_model(d / f"css_{fam}.json")
            if m.kind != MAJORITY and m.schema != schema:
                raise SchemaMismatch(f"css_{fam} schema {m.schema!r}, expected {schema!r}")
            css[fam] = m
        reg = load_model(d / "regressor.json", schema)
        table = css_table().restrict(meta.pop("table"), subset=css_table().subset)
        return cls(bk, css, reg, table, meta)


@dataclass(frozen=True)
class Example:
    """One evaluation/training item with its ground truth."""

    features: FeatureVector
    bk: str
    css: str
    lab: LabColor


def _constant_model(names: Sequence[str]) -> ClassifierModel:
    return ClassifierModel(MAJORITY, "any", tuple(names), np.zeros((len(names), 0)), np.zeros(len(names)), {"n_train": 0})


def train_pipeline(
    examples: Sequence[Example],
    table: ColorTable | None = None,
    *,
    lr: float = 2.0,
    epochs: int = 500,
    l2: float = 1e-4,
    ridge: float = 1e-3,
    seed: int = 0,
) -> PipelineModels:
    """Fit the family model, one CSS model per family, and the LAB regressor.

    A family with no training examples gets a constant model over its table
    entries; a family with one observed color gets a majority model.
    """
    examples = list(examples)
    if not examples:
        raise EmptyData("no training examples")
    table = table or css_table()
    bk_model = train_softmax([(e.features, e.bk) for e in examples], BK_FAMILIES, lr=lr, epochs=epochs, l2=l2, seed=seed)
    css_models = {}
    for fam in BK_FAMILIES:
        sub = [e for e in examples if e.bk == fam]
        labels = sorted({e.css for e in sub})
        if not sub:
            names = [c.name for c in table.of_family(fam)]
            css_models[fam] = _constant_model(names) if names else _constant_model([fam])
        elif len(labels) == 1:
            css_models[fam] = majority_model([e.css for e in sub], labels)
        else:
            css_models[fam] = train_softmax([(e.features, e.css) for e in sub], labels, lr=lr, epochs=epochs, l2=l2, seed=seed)
    regressor = train_lab_regressor([(e.features, e.lab) for e in examples], ridge)
    # Every persisted artifact records the seed that produced it.
    for m in [bk_model, regressor, *css_models.values()]:
        m.metadata["seed"] = seed
    meta = {
        "schema": examples[0].features.schema,
        "n_features": len(examples[0].features),
        "seed": seed,
        "hyper": {"lr": lr, "epochs": epochs, "l2": l2, "ridge": ridge},
    }
    return PipelineModels(bk_model, css_models, regressor, table, meta)


def _pick_css(models: PipelineModels, fam: str, f: FeatureVector) -> NamedColor:
    m = models.css_models[fam]
    allowed = [i for i, name in enumerate(m.vocab) if name in models.table and models.table[name].family == fam]
    if not allowed:
        raise EmptyCandidateSet(f"no table entries for family {fam!r}")
    s = m.scores(f)[0]
    best = max(allowed, key=lambda i: (s[i], -i))
    return models.table[m.vocab[best]]


def predict_batch(
    feats: Sequence[FeatureVector],
    models: PipelineModels,
    radius: float = DEFAULT_RADIUS,
    oracle: Sequence[tuple[str, str]] | None = None,
) -> list[PredictionRecord]:
    feats = list(feats)
    if not feats:
        return []
    raw = models.regressor.predict_array(feats)
    if oracle is None:
        idx = np.argmax(models.bk_model.scores(feats), axis=1)
        fams = [models.bk_model.vocab[i] for i in idx]
    out = []
    for i, f in enumerate(feats):
        if oracle is not None:
            fam, name = oracle[i]
            check_family(fam)
            css = models.table[name]
            if css.family != fam:
                raise ValueError(f"oracle CSS {name!r} is not in family {fam!r}")
        else:
            fam = fams[i]
            css = _pick_css(models, fam, f)
        lab = _project(raw[i : i + 1], np.asarray(css.centroid)[None], radius)[0]
        src = ORACLE if oracle is not None else PREDICTED
        out.append(
            PredictionRecord(fam, css, LabColor.from_array(lab), src, src, REGRESSED if radius > 0 else CENTROID)
        )
    return out


def predict_hierarchical(
    f: FeatureVector,
    models: PipelineModels,
    radius: float = DEFAULT_RADIUS,
    oracle: tuple[str, str] | None = None,
) -> PredictionRecord:
    return predict_batch([f], models, radius, None if oracle is None else [oracle])[0]


@dataclass(frozen=True)
class StageRow:
    name: str
    mean_delta_e: float
    median_delta_e: float
    bk_accuracy: float
    n: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean_delta_e": self.mean_delta_e,
            "median_delta_e": self.median_delta_e,
            "bk_accuracy": self.bk_accuracy,
            "n": self.n,
        }


@dataclass(frozen=True)
class StageReport:
    rows: tuple[StageRow, ...]
    radius: float

    def __post_init__(self):
        if tuple(r.name for r in self.rows) != STAGE_ROWS:
            raise ValueError(f"stage report rows must be {STAGE_ROWS}")

    def row(self, name: str) -> StageRow:
        return next(r for r in self.rows if r.name == name)

    def to_dict(self) -> dict:
        return {"radius": self.radius, "rows": [r.to_dict() for r in self.rows]}


def _row(name: str, pred_lab: np.ndarray, true_lab: np.ndarray, pred_bk, true_bk) -> StageRow:
    from .metrics import delta_e_stats

    stats = delta_e_stats(pred_lab, true_lab)
    acc = float(np.mean([p == t for p, t in zip(pred_bk, true_bk)]))
    return StageRow(name, stats["mean"], stats["median"], acc, len(true_bk))


def compare_stages(examples: Sequence[Example], models: PipelineModels, radius: float = DEFAULT_RADIUS) -> StageReport:
    """Evaluate the four configurations on the same examples.

    The unconstrained row maps its LAB output to a family by naming it with
    the nearest CSS entry, the same rule that produced the ground truth.
    """
    examples = list(examples)
    if not examples:
        raise EmptyData("no evaluation examples")
    feats = [e.features for e in examples]
    truth_lab = np.array([e.lab for e in examples])
    truth_bk = [e.bk for e in examples]

    raw = models.regressor.predict_array(feats)
    raw_bk = [models.table.nearest(p).family for p in raw]
    centroid = predict_batch(feats, models, 0.0)
    pred = predict_batch(feats, models, radius)
    orc = predict_batch(feats, models, radius, [(e.bk, e.css) for e in examples])

    rows = (
        _row("unconstrained", raw, truth_lab, raw_bk, truth_bk),
        _row("css_centroid_only", np.array([r.lab for r in centroid]), truth_lab, [r.bk for r in centroid], truth_bk),
        _row("predicted_pipeline", np.array([r.lab for r in pred]), truth_lab, [r.bk for r in pred], truth_bk),
        _row("oracle_pipeline", np.array([r.lab for r in orc]), truth_lab, [r.bk for r in orc], truth_bk),
    )
    return StageReport(rows, float(radius))


def stage_delta_e(records: Sequence[PredictionRecord], truth: Sequence) -> np.ndarray:
    return delta_e_2000_array(np.array([r.lab for r in records]), np.asarray(truth, dtype=float))
