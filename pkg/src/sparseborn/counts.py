"""Sparse multi-index count tensors.

The corpus and per-observation joint counts are maps from a pair of
multi-indices (one tuple of target coordinates, one tuple of feature
coordinates) to a positive weight.  Zeros are never stored, so every
operation runs in time proportional to the number of nonzeros.
"""
from __future__ import annotations

from typing import Dict, Iterable, Mapping, Tuple

from .errors import ShapeError

Index = Tuple[int, ...]
Key = Tuple[Index, Index]


class SparseCounts:
    """Nonnegative co-occurrence weights keyed by (target, feature) multi-indices.

    ``target_dims`` and ``feature_dims`` fix the lengths of the two index
    tuples.  ``feature_dims == 0`` is the fully contracted target marginal;
    ``target_dims == 0`` is allowed for feature-only observations used at
    prediction time.
    """

    __slots__ = ("target_dims", "feature_dims", "entries")

    def __init__(
        self,
        target_dims: int,
        feature_dims: int,
        entries: Mapping[Key, float] | Iterable[tuple[Key, float]] | None = None,
    ):
        if target_dims < 0 or feature_dims < 0:
            raise ShapeError("dimension counts must be nonnegative")
        self.target_dims = int(target_dims)
        self.feature_dims = int(feature_dims)
        self.entries: Dict[Key, float] = {}
        if entries is not None:
            items = entries.items() if isinstance(entries, Mapping) else entries
            for (tgt, feat), weight in items:
                self.add(tgt, feat, weight)

    def _check_key(self, tgt: Index, feat: Index) -> None:
        if len(tgt) != self.target_dims or len(feat) != self.feature_dims:
            raise ShapeError(
                f"index shape ({len(tgt)},{len(feat)}) does not match tensor "
                f"shape ({self.target_dims},{self.feature_dims})"
            )

    def add(self, tgt: Index, feat: Index, weight: float) -> None:
        """Accumulate ``weight`` at one cell, dropping the entry if it lands on zero."""
        self._check_key(tgt, feat)
        if weight < 0:
            raise ValueError("weights must be nonnegative")
        if weight == 0:
            return
        key = (tuple(tgt), tuple(feat))
        total = self.entries.get(key, 0.0) + weight
        if total <= 0.0:
            self.entries.pop(key, None)
        else:
            self.entries[key] = total

    def same_shape(self, other: "SparseCounts") -> bool:
        return (
            self.target_dims == other.target_dims
            and self.feature_dims == other.feature_dims
        )

    def total_weight(self) -> float:
        return sum(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseCounts)
            and self.same_shape(other)
            and self.entries == other.entries
        )

    def __repr__(self) -> str:
        return (
            f"SparseCounts(target_dims={self.target_dims}, "
            f"feature_dims={self.feature_dims}, nnz={len(self.entries)})"
        )

    def copy(self) -> "SparseCounts":
        out = SparseCounts(self.target_dims, self.feature_dims)
        out.entries = dict(self.entries)
        return out

    def iadd(self, other: "SparseCounts") -> "SparseCounts":
        """In-place entrywise accumulation; see :func:`accumulate`."""
        if not self.same_shape(other):
            raise ShapeError(
                f"cannot accumulate ({other.target_dims},{other.feature_dims}) "
                f"into ({self.target_dims},{self.feature_dims})"
            )
        for (tgt, feat), weight in other.entries.items():
            self.add(tgt, feat, weight)
        return self

    def contract_feature_dim(self, k: int) -> "SparseCounts":
        """Sum out feature dimension ``k``, preserving total weight."""
        if not 0 <= k < self.feature_dims:
            raise ShapeError(
                f"feature dimension {k} out of range [0, {self.feature_dims})"
            )
        out = SparseCounts(self.target_dims, self.feature_dims - 1)
        for (tgt, feat), weight in self.entries.items():
            out.add(tgt, feat[:k] + feat[k + 1 :], weight)
        return out

    def keep_feature_dims(self, keep: Iterable[int]) -> "SparseCounts":
        """Contract every feature dimension not listed in ``keep``."""
        kept = sorted(set(keep))
        for d in kept:
            if not 0 <= d < self.feature_dims:
                raise ShapeError(f"feature dimension {d} out of range")
        out = SparseCounts(self.target_dims, len(kept))
        for (tgt, feat), weight in self.entries.items():
            out.add(tgt, tuple(feat[d] for d in kept), weight)
        return out

    def marginal_over_targets(self) -> Dict[Index, float]:
        """Per feature multi-index, the weight summed over all targets."""
        out: Dict[Index, float] = {}
        for (_, feat), weight in self.entries.items():
            out[feat] = out.get(feat, 0.0) + weight
        return out

    def marginal_over_features(self) -> Dict[Index, float]:
        """Per target multi-index, the weight summed over all features."""
        out: Dict[Index, float] = {}
        for (tgt, _), weight in self.entries.items():
            out[tgt] = out.get(tgt, 0.0) + weight
        return out


def accumulate(acc: SparseCounts, obs: SparseCounts) -> SparseCounts:
    """Entrywise sum of two tensors of identical shape."""
    return acc.copy().iadd(obs)
