"""Motion label pools.

A motion label is a pair of signed speed indices (x, y) with at most one
moving axis: x picks a horizontal speed, y a vertical one, and x*y = 0.
Speeds come from the set {-K, ..., -1, 0, 1, ..., K} where K is the
granularity (number of distinct nonzero speeds per direction).  Positive x
moves right, positive y moves down.

A pool over both axes therefore holds 4K+1 labels (2K per axis plus the
shared static label); restricting to one axis leaves 2K+1.  Class indices
are assigned by sorting labels lexicographically by (x, y), which keeps
them stable across runs and processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigError

AXES = ("both", "x", "y")

_AXIS_ALIASES = {
    "both": "both",
    "x": "x",
    "x-only": "x",
    "y": "y",
    "y-only": "y",
}


class MotionLabel(NamedTuple):
    x: int
    y: int


def normalize_axis(axis: str) -> str:
    try:
        return _AXIS_ALIASES[axis]
    except KeyError:
        raise ConfigError(f"unknown axis restriction {axis!r}; expected one of {AXES}") from None


@dataclass(frozen=True)
class LabelPool:
    """Ordered set of valid motion labels for one (K, axis) choice."""

    K: int
    axis: str
    labels: tuple[MotionLabel, ...]
    index: dict[MotionLabel, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index_of(self, label: MotionLabel) -> int:
        try:
            return self.index[MotionLabel(*label)]
        except KeyError:
            raise KeyError(f"label {tuple(label)} not in pool (K={self.K}, axis={self.axis})") from None

    def label_at(self, i: int) -> MotionLabel:
        return self.labels[i]


def build_label_pool(K: int, axis: str = "both") -> LabelPool:
    """Construct the label pool for granularity K and an axis restriction.

    Parameters
    ----------
    K : int
        Speed granularity, >= 1.
    axis : str
        "both", "x" (or "x-only"), or "y" (or "y-only").

    Returns
    -------
    LabelPool
        Labels sorted lexicographically by (x, y); index maps each label
        to its 0-based class.
    """
    if not isinstance(K, int) or K < 1:
        raise ConfigError(f"speed granularity K must be a positive integer, got {K!r}")
    axis = normalize_axis(axis)

    labels = set()
    speeds = range(-K, K + 1)
    if axis in ("both", "x"):
        labels.update(MotionLabel(s, 0) for s in speeds)
    if axis in ("both", "y"):
        labels.update(MotionLabel(0, s) for s in speeds)

    ordered = tuple(sorted(labels))
    return LabelPool(K=K, axis=axis, labels=ordered, index={lab: i for i, lab in enumerate(ordered)})


def per_axis_speed_count_to_K(C: int) -> int:
    """Convert a per-axis speed count C (odd, >= 3) to the granularity K = (C-1)/2."""
    if not isinstance(C, int) or C < 3 or C % 2 == 0:
        raise ConfigError(f"per-axis speed count must be an odd integer >= 3, got {C!r}")
    return (C - 1) // 2
