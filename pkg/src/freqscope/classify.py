"""Fingerprinting pipeline: feature handling, evaluation, dataset merging,
and the model file container.

Feature vectors are the raw samples of one trace. The only transform is
min-max normalization against the trace's device profile, mapping
[min_freq, turbo-ceiling-or-max] to [0, 1]; it makes traces from different
devices comparable so merged-dataset (universal model) experiments work.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .forest import ForestModel, ForestParams, forest_rank, forest_train
from .knn import KnnModel, fit_knn, knn_rank
from .profiles import get_profile

NORM_NONE = "none"
NORM_MINMAX = "minmax_per_profile"

MODEL_FORMAT = "freqscope-model"
MODEL_VERSION = 1


@dataclass
class FeatureVector:
    values: np.ndarray
    normalization: str = NORM_NONE

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValueError("feature vector must be non-empty and 1-d")
        if self.normalization not in (NORM_NONE, NORM_MINMAX):
            raise ValueError(f"unknown normalization {self.normalization!r}")


def normalize_minmax(fv: FeatureVector, device: str) -> FeatureVector:
    """Map the profile range onto [0,1]; already-normalized vectors pass
    through untouched, making the transform idempotent."""
    if fv.normalization == NORM_MINMAX:
        return fv
    profile = get_profile(device)
    lo = profile.min_freq_khz
    hi = profile.boost_cap_khz
    scaled = np.clip((fv.values - lo) / (hi - lo), 0.0, 1.0)
    return FeatureVector(values=scaled, normalization=NORM_MINMAX)


def dataset_matrix(ds: LabeledDataset, normalization: str = NORM_NONE):
    """(X, labels) in deterministic label-sorted order."""
    rows = []
    labels = []
    for label, trace in ds.items():
        fv = FeatureVector(values=np.array(trace.samples, dtype=np.float64))
        if normalization == NORM_MINMAX:
            try:
                fv = normalize_minmax(fv, trace.device)
            except KeyError as exc:
                raise ValueError(
                    f"cannot normalize trace with unknown device {trace.device!r}"
                ) from exc
        elif normalization != NORM_NONE:
            raise ValueError(f"unknown normalization {normalization!r}")
        rows.append(fv.values)
        labels.append(label)
    if not rows:
        raise ValueError("dataset holds no traces")
    return np.vstack(rows), labels


@dataclass
class TrainedModel:
    kind: str
    classifier: KnnModel | ForestModel
    normalization: str
    feature_length: int
    classes: list[str]
    metadata: dict = field(default_factory=dict)

    def rank(self, x) -> list[tuple[str, float]]:
        if self.kind == "knn":
            return knn_rank(self.classifier, x)
        return forest_rank(self.classifier, x)


def train_knn_model(train_ds: LabeledDataset, k: int = 4,
                    normalization: str = NORM_NONE,
                    metadata: dict | None = None) -> TrainedModel:
    X, labels = dataset_matrix(train_ds, normalization)
    model = fit_knn(X, labels, k=k)
    return TrainedModel(
        kind="knn",
        classifier=model,
        normalization=normalization,
        feature_length=X.shape[1],
        classes=model.classes,
        metadata=dict(metadata or {}),
    )


def train_forest_model(train_ds: LabeledDataset, params: ForestParams | None = None,
                       normalization: str = NORM_NONE,
                       metadata: dict | None = None) -> TrainedModel:
    X, labels = dataset_matrix(train_ds, normalization)
    model = forest_train(X, labels, params or ForestParams())
    return TrainedModel(
        kind="forest",
        classifier=model,
        normalization=normalization,
        feature_length=X.shape[1],
        classes=model.classes,
        metadata=dict(metadata or {}),
    )


@dataclass
class EvalReport:
    labels: list[str]
    top1_accuracy: float
    topk_accuracy: dict[int, float]
    confusion: np.ndarray
    per_class_accuracy: dict[str, float]
    total: int

    def to_text(self) -> str:
        lines = [f"test vectors: {self.total}", f"top-1 accuracy: {self.top1_accuracy:.4f}"]
        for k in sorted(self.topk_accuracy):
            if k != 1:
                lines.append(f"top-{k} accuracy: {self.topk_accuracy[k]:.4f}")
        lines.append("")
        lines.append(f"{'class':<30} {'accuracy':>8} {'n':>5}")
        for i, label in enumerate(self.labels):
            row_sum = int(self.confusion[i].sum())
            if row_sum == 0:
                continue
            lines.append(f"{label:<30} {self.per_class_accuracy[label]:>8.4f} {row_sum:>5}")
        return "\n".join(lines) + "\n"

    def key_value_lines(self) -> list[str]:
        lines = [f"total = {self.total}", f"top1 = {self.top1_accuracy:.6f}"]
        for k in sorted(self.topk_accuracy):
            if k != 1:
                lines.append(f"top{k} = {self.topk_accuracy[k]:.6f}")
        for label in self.labels:
            if int(self.confusion[self.labels.index(label)].sum()):
                lines.append(f"class.{label} = {self.per_class_accuracy[label]:.6f}")
        return lines

    def confusion_csv_lines(self) -> list[str]:
        header = "true\\pred," + ",".join(self.labels)
        rows = [header]
        for i, label in enumerate(self.labels):
            rows.append(label + "," + ",".join(str(int(v)) for v in self.confusion[i]))
        return rows


def evaluate(model: TrainedModel, test_ds: LabeledDataset,
             topk: tuple[int, ...] = (1, 5)) -> EvalReport:
    X, truth = dataset_matrix(test_ds, model.normalization)
    if X.shape[1] != model.feature_length:
        raise ValueError(
            f"test feature length {X.shape[1]} != model feature length {model.feature_length}"
        )
    labels = sorted(set(model.classes) | set(truth))
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    max_k = max(topk) if topk else 1
    hits = {k: 0 for k in topk}

    for x, true_label in zip(X, truth):
        ranking = [label for label, _ in model.rank(x)]
        confusion[index[true_label], index[ranking[0]]] += 1
        for k in topk:
            if true_label in ranking[: max(k, 1)]:
                hits[k] += 1

    total = len(truth)
    per_class = {}
    for label in labels:
        i = index[label]
        row = confusion[i].sum()
        if row:
            per_class[label] = confusion[i, i] / row
    top1 = float(np.trace(confusion)) / total
    return EvalReport(
        labels=labels,
        top1_accuracy=top1,
        topk_accuracy={k: hits[k] / total for k in topk},
        confusion=confusion,
        per_class_accuracy=per_class,
        total=total,
    )


def merge_datasets(datasets: list[LabeledDataset]) -> LabeledDataset:
    """Union measurements per class; inputs must agree on classes and shape."""
    if not datasets:
        raise ValueError("nothing to merge")
    first = datasets[0]
    classes = sorted(first.classes)
    for ds in datasets[1:]:
        if sorted(ds.classes) != classes:
            raise ValueError("datasets disagree on class sets")
        if ds.n_samples != first.n_samples:
            raise ValueError(
                f"datasets disagree on sample count: {ds.n_samples} != {first.n_samples}"
            )
        if ds.interval_ms != first.interval_ms:
            raise ValueError("datasets disagree on interval_ms")
    merged = {label: [] for label in classes}
    for ds in datasets:
        for label in classes:
            merged[label].extend(ds.measurements[label])
    return LabeledDataset(
        classes=classes,
        measurements=merged,
        split_seed=first.split_seed,
        split_fractions=first.split_fractions,
    )


def _classifier_payload(model: TrainedModel) -> dict:
    if model.kind == "knn":
        knn: KnnModel = model.classifier
        return {
            "k": knn.k,
            "metric": knn.metric,
            "train_x": knn.train_x.tolist(),
            "train_labels": list(knn.train_labels),
        }
    forest: ForestModel = model.classifier
    p = forest.params
    return {
        "params": {
            "n_trees": p.n_trees,
            "max_depth": p.max_depth,
            "min_leaf": p.min_leaf,
            "feature_subsample": p.feature_subsample,
            "seed": p.seed,
        },
        "classes": forest.classes,
        "trees": forest.trees,
    }


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "normalization": model.normalization,
        "feature_length": model.feature_length,
        "classes": model.classes,
        "metadata": model.metadata,
        "classifier": _classifier_payload(model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    payload = doc["classifier"]
    if doc["kind"] == "knn":
        classifier = KnnModel(
            k=payload["k"],
            train_x=np.array(payload["train_x"], dtype=np.float64),
            train_labels=list(payload["train_labels"]),
            metric=payload["metric"],
        )
    elif doc["kind"] == "forest":
        p = payload["params"]
        classifier = ForestModel(
            params=ForestParams(
                n_trees=p["n_trees"],
                max_depth=p["max_depth"],
                min_leaf=p["min_leaf"],
                feature_subsample=p["feature_subsample"],
                seed=p["seed"],
            ),
            classes=list(payload["classes"]),
            trees=payload["trees"],
        )
    else:
        raise ValueError(f"{path}: unknown model kind {doc['kind']!r}")
    return TrainedModel(
        kind=doc["kind"],
        classifier=classifier,
        normalization=doc["normalization"],
        feature_length=doc["feature_length"],
        classes=list(doc["classes"]),
        metadata=dict(doc.get("metadata", {})),
    )
