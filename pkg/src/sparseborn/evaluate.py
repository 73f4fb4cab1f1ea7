"""Metrics and experiment protocols: repeated random splits and holdouts.

The split generator is deliberately simple and documented so results are
portable: a seeded ``numpy.random.default_rng`` permutes the record order
once per run and the first ``ceil(N * test_fraction)`` records form the
test set.  Runs are drawn sequentially from the one generator, so a fixed
seed fixes every split.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Sequence, Tuple

import numpy as np

from .data import RawRecord, Vocabulary, encode
from .errors import InvalidRecordError
from .model import Hyperparams, Model, fit

DEFAULT_CONFIGS: Tuple[Tuple[str, Hyperparams], ...] = (
    ("quantum", Hyperparams(h=1.0, b=1.0, p=0.5)),
    ("classic", Hyperparams(h=1.0, b=0.0, p=1.0)),
)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricReport:
    """Per-class precision/recall/F1/support plus the usual aggregates.

    Weighted averages are support-weighted means; macro averages are
    unweighted means over the enumerated classes (those appearing in the
    truths or the predictions).
    """

    per_class: Dict[Hashable, ClassMetrics]
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n: int

    def to_table(self, delimiter: str = "\t") -> str:
        lines = [delimiter.join(["class", "precision", "recall", "f1", "support"])]
        for label in sorted(self.per_class, key=str):
            m = self.per_class[label]
            lines.append(
                delimiter.join(
                    [
                        _label_str(label),
                        f"{m.precision:.6f}",
                        f"{m.recall:.6f}",
                        f"{m.f1:.6f}",
                        str(m.support),
                    ]
                )
            )
        lines.append(
            delimiter.join(
                [
                    "weighted avg",
                    f"{self.weighted_precision:.6f}",
                    f"{self.weighted_recall:.6f}",
                    f"{self.weighted_f1:.6f}",
                    str(self.n),
                ]
            )
        )
        lines.append(
            delimiter.join(
                [
                    "macro avg",
                    f"{self.macro_precision:.6f}",
                    f"{self.macro_recall:.6f}",
                    f"{self.macro_f1:.6f}",
                    str(self.n),
                ]
            )
        )
        lines.append(delimiter.join(["accuracy", f"{self.accuracy:.6f}", "", "", str(self.n)]))
        return "\n".join(lines)


def _label_str(label: Hashable) -> str:
    if isinstance(label, tuple):
        return "|".join(map(str, label))
    return str(label)


def score(predictions: Sequence[Hashable], truths: Sequence[Hashable]) -> MetricReport:
    """Standard multiclass metrics over aligned prediction/truth lists.

    Undefined ratios (no predicted or no true instances of a class) count
    as 0; classes never predicted and never true are not enumerated.
    """
    if len(predictions) != len(truths):
        raise InvalidRecordError(
            f"got {len(predictions)} predictions for {len(truths)} truths"
        )
    if not truths:
        raise InvalidRecordError("nothing to score")
    labels = sorted(set(truths) | set(predictions), key=lambda x: (str(type(x)), str(x)))
    per_class: Dict[Hashable, ClassMetrics] = {}
    correct = sum(1 for p, t in zip(predictions, truths) if p == t)
    for label in labels:
        tp = sum(1 for p, t in zip(predictions, truths) if p == label and t == label)
        fp = sum(1 for p, t in zip(predictions, truths) if p == label and t != label)
        fn = sum(1 for p, t in zip(predictions, truths) if p != label and t == label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1, tp + fn)
    n = len(truths)
    supports = {label: m.support for label, m in per_class.items()}
    total_support = sum(supports.values())

    def weighted(attr):
        return math.fsum(
            getattr(per_class[label], attr) * supports[label] for label in labels
        ) / total_support

    def macro(attr):
        return math.fsum(getattr(per_class[label], attr) for label in labels) / len(labels)

    return MetricReport(
        per_class=per_class,
        accuracy=correct / n,
        weighted_precision=weighted("precision"),
        weighted_recall=weighted("recall"),
        weighted_f1=weighted("f1"),
        macro_precision=macro("precision"),
        macro_recall=macro("recall"),
        macro_f1=macro("f1"),
        n=n,
    )


@dataclass
class MeanReport:
    """Across-run means of the headline metrics."""

    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_f1: float
    accuracy: float
    n_runs: int


@dataclass
class PairwiseTable:
    """entry[a][b] = fraction of runs where a's weighted F1 strictly beat b's."""

    names: List[str]
    matrix: List[List[float]]

    def to_table(self, delimiter: str = "\t") -> str:
        lines = [delimiter.join([""] + self.names)]
        for name, row in zip(self.names, self.matrix):
            lines.append(delimiter.join([name] + [f"{v:.2f}" for v in row]))
        return "\n".join(lines)


@dataclass
class ExperimentResult:
    configs: List[str]
    means: Dict[str, MeanReport]
    pairwise: PairwiseTable
    per_run_f1: Dict[str, List[float]] = field(default_factory=dict)

    def to_table(self, delimiter: str = "\t") -> str:
        lines = [
            delimiter.join(["config", "precision", "recall", "f1", "f1-macro", "accuracy"])
        ]
        for name in self.configs:
            m = self.means[name]
            lines.append(
                delimiter.join(
                    [
                        name,
                        f"{m.weighted_precision:.3f}",
                        f"{m.weighted_recall:.3f}",
                        f"{m.weighted_f1:.3f}",
                        f"{m.macro_f1:.3f}",
                        f"{m.accuracy:.3f}",
                    ]
                )
            )
        lines.append("")
        lines.append("pairwise wins (row beats column, fraction of runs):")
        lines.append(self.pairwise.to_table(delimiter))
        return "\n".join(lines)


def split_indices(n: int, test_fraction: float, rng: np.random.Generator):
    """One train/test split: permute 0..n-1, first ceil(n*fraction) go to test."""
    n_test = math.ceil(n * test_fraction)
    perm = rng.permutation(n)
    return perm[n_test:].tolist(), perm[:n_test].tolist()


def _fit_records(
    records: Sequence[RawRecord],
    config: Hyperparams,
    mode_normalize: bool,
) -> Model:
    vocab = Vocabulary()
    observations = encode(records, vocab, grow=True, normalize=mode_normalize)
    return fit(observations, vocab, hyper=config)


def _predict_records(
    model: Model, records: Sequence[RawRecord], workers: int = 1
) -> List[Tuple[str, ...]]:
    observations = encode(records, model.vocab, grow=False)
    results = model.predict_batch(observations, k=1, workers=workers)
    return [model.vocab.decode_target(ranked[0]) for ranked, _, _ in results]


def _truth_labels(records: Sequence[RawRecord], dims: Sequence[str]) -> List[Tuple[str, ...]]:
    labels = []
    for rec in records:
        by_dim = {}
        for dim, value in rec.labels:
            by_dim.setdefault(dim, value)
        labels.append(tuple(by_dim.get(d, "") for d in dims))
    return labels


def repeated_split_experiment(
    records: Sequence[RawRecord],
    n_runs: int,
    test_fraction: float,
    configs: Sequence[Tuple[str, Hyperparams]] = DEFAULT_CONFIGS,
    seed: int = 0,
    normalize: bool = False,
    workers: int = 1,
) -> ExperimentResult:
    """Fit every config on each of ``n_runs`` seeded random splits and average.

    Splits are not stratified; a run whose training split lacks some class
    is kept.  Fixed seeds give bit-reproducible results regardless of
    ``workers``.
    """
    if n_runs < 1:
        raise InvalidRecordError("n_runs must be >= 1")
    if not 0 < test_fraction < 1:
        raise InvalidRecordError("test_fraction must be in (0, 1)")
    records = list(records)
    n = len(records)
    rng = np.random.default_rng(seed)
    splits = [split_indices(n, test_fraction, rng) for _ in range(n_runs)]
    for train_idx, test_idx in splits:
        if not train_idx or not test_idx:
            raise InvalidRecordError("degenerate split: empty train or test part")
    names = [name for name, _ in configs]
    per_run_f1: Dict[str, List[float]] = {name: [] for name in names}
    sums: Dict[str, List[float]] = {name: [0.0] * 5 for name in names}
    label_dims: List[str] = []
    for rec in records:
        for dim, _ in rec.labels:
            if dim not in label_dims:
                label_dims.append(dim)
    for train_idx, test_idx in splits:
        train = [records[i] for i in train_idx]
        test = [records[i] for i in test_idx]
        truths = _truth_labels(test, label_dims)
        for name, config in configs:
            model = _fit_records(train, config, normalize)
            predictions = _predict_records(model, test, workers=workers)
            report = score(predictions, truths)
            per_run_f1[name].append(report.weighted_f1)
            acc = sums[name]
            acc[0] += report.weighted_precision
            acc[1] += report.weighted_recall
            acc[2] += report.weighted_f1
            acc[3] += report.macro_f1
            acc[4] += report.accuracy
    means = {
        name: MeanReport(
            weighted_precision=sums[name][0] / n_runs,
            weighted_recall=sums[name][1] / n_runs,
            weighted_f1=sums[name][2] / n_runs,
            macro_f1=sums[name][3] / n_runs,
            accuracy=sums[name][4] / n_runs,
            n_runs=n_runs,
        )
        for name in names
    }
    matrix = []
    for a in names:
        row = []
        for b in names:
            if a == b:
                row.append(0.0)
            else:
                wins = sum(
                    1 for fa, fb in zip(per_run_f1[a], per_run_f1[b]) if fa > fb
                )
                row.append(wins / n_runs)
        matrix.append(row)
    return ExperimentResult(
        configs=names,
        means=means,
        pairwise=PairwiseTable(names, matrix),
        per_run_f1=per_run_f1,
    )


def holdout_experiment(
    train: Sequence[RawRecord],
    test: Sequence[RawRecord],
    config: Hyperparams = Hyperparams(),
    normalize: bool = False,
    workers: int = 1,
) -> Tuple[MetricReport, Dict[str, float]]:
    """Single fit on ``train`` scored on ``test``; wall-clock times reported."""
    if not train or not test:
        raise InvalidRecordError("train and test sets must both be nonempty")
    label_dims: List[str] = []
    for rec in train:
        for dim, _ in rec.labels:
            if dim not in label_dims:
                label_dims.append(dim)
    t0 = time.perf_counter()
    model = _fit_records(train, config, normalize)
    t1 = time.perf_counter()
    predictions = _predict_records(model, test, workers=workers)
    t2 = time.perf_counter()
    truths = _truth_labels(test, label_dims)
    report = score(predictions, truths)
    return report, {"train_seconds": t1 - t0, "predict_seconds": t2 - t1}
