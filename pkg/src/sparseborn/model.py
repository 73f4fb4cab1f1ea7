"""Training, weighting, prediction, and persistence.

The trained model owns the corpus counts plus hyperparameters.  Per
contraction level it lazily derives a column-grouped table holding the
entropy weights and the balanced corpus weights, against which queries are
evaluated with the accumulation kernels.  The prediction rule is

    X_i = | sum_j exp(i(theta_j - phi_ij)) * Ht_j^h * Ct_ij^p * X_j^p |^(1/p)

normalized over targets, with the policy's contraction chain applied
whenever every X_i is zero.
"""
from __future__ import annotations

import json
import math
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from . import _kernels
from .counts import Index, SparseCounts
from .data import EncodedObservation, Vocabulary
from .errors import ArchiveError, InvalidRecordError, ShapeError
from .policy import Policy

ARCHIVE_FORMAT = "sparseborn-model"
ARCHIVE_VERSION = 1

# All X_i below this total are treated as the degenerate all-zero estimate.
DEGENERATE_EPS = 1e-300


@dataclass(frozen=True)
class Hyperparams:
    """Entropy exponent h >= 0, balance exponent b >= 0, amplitude power p > 0.

    The defaults are the standard quantum configuration; h=0, b=0, p=1 is
    the classical rule and h=0, b=1, p=1/2 the pure Born rule.
    """

    h: float = 1.0
    b: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if not self.h >= 0:
            raise ValueError("h must be >= 0")
        if not self.b >= 0:
            raise ValueError("b must be >= 0")
        if not self.p > 0:
            raise ValueError("p must be > 0")


class PhaseTable:
    """Sparse phase angles per (target, feature) multi-index pair; absent = 0."""

    def __init__(self, phi: Mapping[Tuple[Index, Index], float] | None = None):
        self.entries: Dict[Tuple[Index, Index], float] = {}
        if phi:
            for key, angle in phi.items():
                angle = float(angle)
                if not math.isfinite(angle):
                    raise ValueError("phase angles must be finite")
                if angle != 0.0:
                    self.entries[(tuple(key[0]), tuple(key[1]))] = angle

    def get(self, tgt: Index, feat: Index) -> float:
        return self.entries.get((tgt, feat), 0.0)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, PhaseTable) and self.entries == other.entries


def _grouped_arrays(entries: Mapping[Tuple[Index, Index], float]):
    """Sort entries by (feature, target) and return the grouped arrays."""
    target_ids = sorted({t for t, _ in entries})
    feat_ids = sorted({f for _, f in entries})
    tpos = {t: i for i, t in enumerate(target_ids)}
    fpos = {f: j for j, f in enumerate(feat_ids)}
    triples = sorted(
        (fpos[f], tpos[t], w) for (t, f), w in entries.items()
    )
    cols = np.array([c for c, _, _ in triples], dtype=np.int64)
    rows = np.array([r for _, r, _ in triples], dtype=np.int32)
    weights = np.array([w for _, _, w in triples], dtype=np.float64)
    col_ptr = np.zeros(len(feat_ids) + 1, dtype=np.int64)
    np.add.at(col_ptr, cols + 1, 1)
    np.cumsum(col_ptr, out=col_ptr)
    return target_ids, feat_ids, rows, cols, weights, col_ptr


def _marginals(rows, cols, weights, n_targets, n_feats):
    row_sums = np.zeros(n_targets)
    col_sums = np.zeros(n_feats)
    np.add.at(row_sums, rows, weights)
    np.add.at(col_sums, cols, weights)
    return row_sums, col_sums


def _entropy_per_feature(rows, cols, weights, row_sums, n_feats, target_space):
    """Per-column 1 - H/H_max on the artificially balanced corpus.

    The balanced joint divides each entry by its target's total, the
    conditional renormalizes per column, and H_max = ln(target_space).
    A single-target corpus makes every feature perfect signal.
    """
    if target_space <= 1:
        return np.ones(n_feats)
    balanced = weights / row_sums[rows]
    z = np.zeros(n_feats)
    np.add.at(z, cols, balanced)
    conditional = balanced / z[cols]
    h_sum = np.zeros(n_feats)
    np.add.at(h_sum, cols, conditional * np.log(conditional))
    weights_out = 1.0 + h_sum / math.log(target_space)
    np.clip(weights_out, 0.0, 1.0, out=weights_out)
    return weights_out


def _balanced_weights(weights, rows, cols, row_sums, col_sums, b):
    """C / (colsum^(1-b) * rowsum^b) per stored entry."""
    return weights / (col_sums[cols] ** (1.0 - b) * row_sums[rows] ** b)


def entropy_weights(corpus: SparseCounts, n_targets: int | None = None) -> Dict[Index, float]:
    """Entropy weight per feature multi-index, in [0, 1].

    ``n_targets`` is the size of the target index space (H_max = ln of it);
    defaults to the number of distinct observed target multi-indices.
    """
    if not corpus.entries:
        raise InvalidRecordError("corpus is empty")
    target_ids, feat_ids, rows, cols, weights, _ = _grouped_arrays(corpus.entries)
    if n_targets is None:
        n_targets = len(target_ids)
    row_sums, _ = _marginals(rows, cols, weights, len(target_ids), len(feat_ids))
    ht = _entropy_per_feature(rows, cols, weights, row_sums, len(feat_ids), n_targets)
    return {f: float(ht[j]) for j, f in enumerate(feat_ids)}


def weight_tensor(corpus: SparseCounts, b: float) -> Dict[Tuple[Index, Index], float]:
    """Balanced corpus weights on the nonzero support.

    b=0 gives the column-conditional (targets given feature), b=1 the
    row-conditional (features given target).
    """
    if not b >= 0:
        raise ValueError("b must be >= 0")
    if not corpus.entries:
        return {}
    target_ids, feat_ids, rows, cols, weights, _ = _grouped_arrays(corpus.entries)
    row_sums, col_sums = _marginals(rows, cols, weights, len(target_ids), len(feat_ids))
    ct = _balanced_weights(weights, rows, cols, row_sums, col_sums, b)
    # the arrays are sorted by (col, row); rebuild the key order to match
    tpos = {t: i for i, t in enumerate(target_ids)}
    fpos = {f: j for j, f in enumerate(feat_ids)}
    order = sorted(((fpos[f], tpos[t]), (t, f)) for t, f in corpus.entries)
    return {key: float(ct[k]) for k, (_, key) in enumerate(order)}


class _LevelTable:
    """Column-grouped derived weights for one contraction level."""

    __slots__ = (
        "keep",
        "target_ids",
        "feat_ids",
        "feat_pos",
        "col_ptr",
        "rows",
        "amp",
        "phi",
        "entropy",
    )

    def __init__(self, keep, target_ids, feat_ids, feat_pos, col_ptr, rows, amp, phi, entropy):
        self.keep = keep
        self.target_ids = target_ids
        self.feat_ids = feat_ids
        self.feat_pos = feat_pos
        self.col_ptr = col_ptr
        self.rows = rows
        self.amp = amp
        self.phi = phi
        self.entropy = entropy


@dataclass
class Prediction:
    """Normalized target distribution plus the per-feature evidence behind it.

    ``contributions`` maps (target, feature) multi-index pairs to the
    (modulus, angle) of that feature's addend in the prediction rule;
    ``fallback_depth`` counts applied policy steps (0 = none).
    """

    distribution: Dict[Index, float]
    magnitudes: Dict[Index, float]
    contributions: Dict[Tuple[Index, Index], Tuple[float, float]]
    fallback_depth: int
    kept_dims: Tuple[int, ...]

    def top(self, k: int = 1) -> List[Tuple[Index, float]]:
        """Top-k targets by probability; ties go to the smaller multi-index."""
        ranked = sorted(self.distribution.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]


class Model:
    """A trained classifier: corpus, vocabulary, hyperparameters, phases, policy.

    Derived per-level tables and the target marginal are cached lazily and
    invalidated by :meth:`update`.  A model with warm caches is safe for
    concurrent prediction; updates require exclusive access.
    """

    def __init__(
        self,
        corpus: SparseCounts,
        vocab: Vocabulary,
        hyper: Hyperparams | None = None,
        phases: PhaseTable | None = None,
        policy: Policy | None = None,
    ):
        if corpus.target_dims != vocab.n_target_dims or corpus.feature_dims != vocab.n_feature_dims:
            raise ShapeError("corpus shape does not match vocabulary")
        self.corpus = corpus
        self.vocab = vocab
        self.hyper = hyper or Hyperparams()
        self.phases = phases or PhaseTable()
        self.policy = policy or Policy.default(vocab.n_feature_dims)
        if self.policy.n_dims != vocab.n_feature_dims:
            raise ShapeError("policy dimension count does not match vocabulary")
        self._tables: Dict[FrozenSet[int], _LevelTable] = {}
        self._marginal: Dict[Index, float] | None = None
        self._prior: Dict[Index, float] | None = None
        self._lock = threading.Lock()

    # -- bookkeeping ---------------------------------------------------

    @property
    def n_feature_dims(self) -> int:
        return self.vocab.n_feature_dims

    def _invalidate(self) -> None:
        self._tables.clear()
        self._marginal = None
        self._prior = None

    def _check_query(self, obs: EncodedObservation) -> None:
        if obs.n_feature_dims != self.n_feature_dims:
            raise ShapeError(
                f"query has {obs.n_feature_dims} feature dimensions, "
                f"model has {self.n_feature_dims}"
            )
        for d, dim_map in enumerate(obs.feature_weights):
            size = len(self.vocab.feature_dims[d])
            for idx in dim_map:
                if not 0 <= idx < size:
                    raise ShapeError(
                        f"feature index {idx} out of bounds for dimension "
                        f"{self.vocab.feature_dims[d].name!r} (size {size})"
                    )

    def target_marginal(self) -> Dict[Index, float]:
        """Raw per-target corpus weight (exact, order-independent sums)."""
        if self._marginal is None:
            grouped: Dict[Index, list] = defaultdict(list)
            for (tgt, _), w in self.corpus.entries.items():
                grouped[tgt].append(w)
            self._marginal = {t: math.fsum(ws) for t, ws in sorted(grouped.items())}
        return self._marginal

    def target_prior(self) -> Dict[Index, float]:
        """Normalized target marginal: the terminal fallback distribution."""
        if self._prior is None:
            marginal = self.target_marginal()
            total = math.fsum(marginal.values())
            self._prior = {t: w / total for t, w in marginal.items()}
        return self._prior

    # -- derived tables ------------------------------------------------

    def _table(self, keep: FrozenSet[int]) -> _LevelTable:
        table = self._tables.get(keep)
        if table is not None:
            return table
        with self._lock:
            table = self._tables.get(keep)
            if table is None:
                table = self._build_table(keep)
                self._tables[keep] = table
        return table

    def _build_table(self, keep: FrozenSet[int]) -> _LevelTable:
        full = keep == frozenset(range(self.n_feature_dims))
        corpus = self.corpus if full else self.corpus.keep_feature_dims(keep)
        if not corpus.entries:
            raise InvalidRecordError("cannot derive weights from an empty corpus")
        target_ids, feat_ids, rows, cols, weights, col_ptr = _grouped_arrays(corpus.entries)
        row_sums, col_sums = _marginals(rows, cols, weights, len(target_ids), len(feat_ids))
        entropy = _entropy_per_feature(
            rows, cols, weights, row_sums, len(feat_ids), self.vocab.target_space_size()
        )
        ct = _balanced_weights(weights, rows, cols, row_sums, col_sums, self.hyper.b)
        amp = entropy[cols] ** self.hyper.h * ct ** self.hyper.p
        phi = None
        if self.phases and full:
            tpos = {t: i for i, t in enumerate(target_ids)}
            fpos = {f: j for j, f in enumerate(feat_ids)}
            order = sorted(((fpos[f], tpos[t]), (t, f)) for t, f in corpus.entries)
            phi = np.array(
                [self.phases.get(t, f) for _, (t, f) in order], dtype=np.float64
            )
            if not phi.any():
                phi = None
        feat_pos = {f: j for j, f in enumerate(feat_ids)}
        return _LevelTable(
            keep, target_ids, feat_ids, feat_pos, col_ptr, rows, amp, phi, entropy
        )

    # -- prediction ----------------------------------------------------

    def _query_arrays(self, obs: EncodedObservation, keep: FrozenSet[int], table: _LevelTable):
        feats = obs.features_at(keep)
        if not feats:
            return None
        use_theta = bool(obs.phases) and len(keep) == self.n_feature_dims
        items = []
        for fidx, w in feats.items():
            col = table.feat_pos.get(fidx)
            if col is None:
                continue
            theta = obs.phases.get(fidx, 0.0) if use_theta else 0.0
            items.append((col, w, theta))
        if not items:
            return None
        items.sort()
        qcols = np.array([c for c, _, _ in items], dtype=np.int64)
        qvals = np.array([w for _, w, _ in items], dtype=np.float64)
        qtheta = None
        if use_theta:
            qtheta = np.array([th for _, _, th in items], dtype=np.float64)
            if not qtheta.any():
                qtheta = None
        return qcols, qvals, qtheta

    def _evaluate(self, table: _LevelTable, qcols, qpow, qtheta):
        """Magnitudes X_i over the table's targets for one query."""
        n = len(table.target_ids)
        if table.phi is None and qtheta is None:
            acc = np.zeros(n)
            _kernels.accum_real(table.col_ptr, table.rows, table.amp, qcols, qpow, acc)
            modulus = np.abs(acc)
        else:
            phi = table.phi
            if phi is None:
                phi = np.zeros_like(table.amp)
            theta = qtheta
            if theta is None:
                theta = np.zeros_like(qpow)
            acc_re = np.zeros(n)
            acc_im = np.zeros(n)
            _kernels.accum_complex(
                table.col_ptr, table.rows, table.amp, phi, qcols, qpow, theta,
                acc_re, acc_im,
            )
            modulus = np.hypot(acc_re, acc_im)
        return modulus ** (1.0 / self.hyper.p)

    def _predict_internal(self, obs: EncodedObservation):
        """Walk the policy until a nonzero estimate emerges.

        Returns (distribution, magnitudes, depth, kept, detail) where detail
        carries the level table and query arrays for contribution building,
        or None at the terminal step.
        """
        self._check_query(obs)
        for depth, keep in enumerate(self.policy.steps):
            if not keep:
                dist = dict(self.target_prior())
                return dist, dict(self.target_marginal()), depth, (), None
            table = self._table(keep)
            arrays = self._query_arrays(obs, keep, table)
            if arrays is None:
                continue
            qcols, qvals, qtheta = arrays
            qpow = qvals ** self.hyper.p
            magnitudes = self._evaluate(table, qcols, qpow, qtheta)
            total = float(magnitudes.sum())
            if total < DEGENERATE_EPS:
                continue
            dist = {
                t: float(magnitudes[r] / total) for r, t in enumerate(table.target_ids)
            }
            mags = {t: float(magnitudes[r]) for r, t in enumerate(table.target_ids)}
            detail = (table, qcols, qpow, qtheta)
            return dist, mags, depth, tuple(sorted(keep)), detail
        raise AssertionError("policy terminal step did not produce a distribution")

    def predict(self, obs: EncodedObservation, with_contributions: bool = True) -> Prediction:
        """Evaluate the prediction rule with fallback for one query."""
        dist, mags, depth, kept, detail = self._predict_internal(obs)
        contributions: Dict[Tuple[Index, Index], Tuple[float, float]] = {}
        if with_contributions and detail is not None:
            table, qcols, qpow, qtheta = detail
            col_ptr, rows, amp, phi = table.col_ptr, table.rows, table.amp, table.phi
            for q in range(len(qcols)):
                col = int(qcols[q])
                theta = float(qtheta[q]) if qtheta is not None else 0.0
                feat = table.feat_ids[col]
                for k in range(col_ptr[col], col_ptr[col + 1]):
                    angle = theta - (float(phi[k]) if phi is not None else 0.0)
                    key = (table.target_ids[rows[k]], feat)
                    contributions[key] = (float(amp[k] * qpow[q]), angle)
        return Prediction(dist, mags, contributions, depth, kept)

    def predict_labels(self, obs: EncodedObservation, k: int = 1) -> List[Tuple[str, ...]]:
        """Top-k decoded target tuples (multilabel when targets are multi-dimensional)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        dist, _, _, _, _ = self._predict_internal(obs)
        ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
        return [self.vocab.decode_target(t) for t, _ in ranked[:k]]

    def predict_at_dims(self, obs: EncodedObservation, dims: Iterable[int]):
        """Distribution using only the given feature dimensions; None when degenerate."""
        dims = frozenset(dims)
        if not dims:
            return dict(self.target_prior())
        table = self._table(dims)
        arrays = self._query_arrays(obs, dims, table)
        if arrays is None:
            return None
        qcols, qvals, qtheta = arrays
        magnitudes = self._evaluate(table, qcols, qvals ** self.hyper.p, qtheta)
        total = float(magnitudes.sum())
        if total < DEGENERATE_EPS:
            return None
        return {t: float(magnitudes[r] / total) for r, t in enumerate(table.target_ids)}

    def predict_batch(
        self,
        queries: Sequence[EncodedObservation],
        k: int = 1,
        workers: int = 1,
    ) -> List[Tuple[List[Index], Dict[Index, float], int]]:
        """Rank targets for many queries; output is independent of worker count."""
        if k < 1:
            raise ValueError("k must be >= 1")
        # warm every policy level once so worker threads only read
        for keep in self.policy.steps:
            if keep:
                self._table(keep)
        self.target_prior()

        def one(obs):
            dist, _, depth, _, _ = self._predict_internal(obs)
            ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
            return [t for t, _ in ranked[:k]], dist, depth

        if workers <= 1 or len(queries) < 2:
            return [one(q) for q in queries]
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, queries))

    # -- training ------------------------------------------------------

    def update(self, observations: Sequence[EncodedObservation]) -> "Model":
        """Accumulate new observations into the corpus and drop caches."""
        for obs in observations:
            counts = obs.counts(self.corpus.target_dims, self.corpus.feature_dims)
            self.corpus.iadd(counts)
        if observations:
            self._invalidate()
        return self

    # -- persistence ---------------------------------------------------

    def save(self, sink) -> None:
        """Write a self-describing JSON archive; deterministic byte-for-byte."""
        payload = {
            "format": ARCHIVE_FORMAT,
            "version": ARCHIVE_VERSION,
            "hyper": {"h": self.hyper.h, "b": self.hyper.b, "p": self.hyper.p},
            "target_dims": [
                {"name": d.name, "values": d.values} for d in self.vocab.target_dims
            ],
            "feature_dims": [
                {"name": d.name, "values": d.values} for d in self.vocab.feature_dims
            ],
            "policy": self.policy.to_lists(),
            "corpus": [
                [list(t), list(f), w]
                for (t, f), w in sorted(self.corpus.entries.items())
            ],
        }
        if self.phases:
            payload["phases"] = [
                [list(t), list(f), angle]
                for (t, f), angle in sorted(self.phases.entries.items())
            ]
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            with open(sink, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, separators=(",", ":"))
                fh.write("\n")
        else:
            json.dump(payload, sink, separators=(",", ":"))
            sink.write("\n")


def fit(
    observations: Sequence[EncodedObservation],
    vocab: Vocabulary,
    hyper: Hyperparams | None = None,
    phases: PhaseTable | None = None,
    policy: Policy | None = None,
) -> Model:
    """Accumulate observations into a corpus and wrap it as a model.

    The vocabulary is copied, so growing the caller's copy later does not
    alias the model.
    """
    if not observations:
        raise InvalidRecordError("empty training set")
    corpus = SparseCounts(vocab.n_target_dims, vocab.n_feature_dims)
    for obs in observations:
        if len(obs.label_weights) != vocab.n_target_dims or obs.n_feature_dims != vocab.n_feature_dims:
            raise ShapeError("observation shape does not match vocabulary")
        corpus.iadd(obs.counts(vocab.n_target_dims, vocab.n_feature_dims))
    return Model(corpus, vocab.copy(), hyper=hyper, phases=phases, policy=policy)


def load(source) -> Model:
    """Read a model archive written by :meth:`Model.save`."""
    try:
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            with open(source, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        else:
            payload = json.load(source)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"cannot read model archive: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError("not a sparseborn model archive")
    if payload.get("version") != ARCHIVE_VERSION:
        raise ArchiveError(
            f"unsupported archive version {payload.get('version')!r}"
        )
    try:
        vocab = Vocabulary()
        for spec in payload["target_dims"]:
            d = vocab.target_dim(spec["name"], create=True)
            for value in spec["values"]:
                vocab.target_dims[d].encode(value, grow=True)
        for spec in payload["feature_dims"]:
            d = vocab.feature_dim(spec["name"], create=True)
            for value in spec["values"]:
                vocab.feature_dims[d].encode(value, grow=True)
        hyper = Hyperparams(**payload["hyper"])
        corpus = SparseCounts(vocab.n_target_dims, vocab.n_feature_dims)
        for tgt, feat, weight in payload["corpus"]:
            corpus.add(tuple(tgt), tuple(feat), float(weight))
        phases = PhaseTable(
            {
                (tuple(tgt), tuple(feat)): float(angle)
                for tgt, feat, angle in payload.get("phases", [])
            }
        )
        policy = Policy.from_lists(payload["policy"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"malformed model archive: {exc}") from exc
    return Model(corpus, vocab, hyper=hyper, phases=phases, policy=policy)
