"""State partitions shared by the metric, transport, and aggregation code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Partition"]


@dataclass(frozen=True)
class Partition:
    """A partition of states ``0..n-1`` into contiguous-numbered blocks.

    ``labels[s]`` is the block id of state ``s``. Block ids run from 0 to
    ``n_blocks - 1`` and every block is nonempty. Construction canonicalizes
    nothing; use :meth:`from_labels` to renumber blocks by first occurrence.
    """

    labels: np.ndarray
    n_blocks: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("labels must be a nonempty 1-D integer array")
        if labels.min() < 0 or labels.max() >= self.n_blocks:
            raise ValueError("block ids must lie in [0, n_blocks)")
        counts = np.bincount(labels, minlength=self.n_blocks)
        if (counts == 0).any():
            raise ValueError("every block must be nonempty")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Build a partition from arbitrary hashable labels, renumbering blocks
        in order of first occurrence."""
        labels = list(labels)
        ids = {}
        out = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels):
            if lab not in ids:
                ids[lab] = len(ids)
            out[i] = ids[lab]
        return cls(out, len(ids))

    @classmethod
    def singletons(cls, n_states: int) -> "Partition":
        return cls(np.arange(n_states), n_states)

    @classmethod
    def single_block(cls, n_states: int) -> "Partition":
        return cls(np.zeros(n_states, dtype=np.int64), 1)

    @property
    def n_states(self) -> int:
        return self.labels.size

    def blocks(self) -> list[np.ndarray]:
        """Member state indices of each block, in block-id order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.n_blocks + 1))
        return [order[bounds[b]:bounds[b + 1]] for b in range(self.n_blocks)]

    def same_block(self, s: int, t: int) -> bool:
        return bool(self.labels[s] == self.labels[t])
