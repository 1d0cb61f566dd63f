"""Pseudo-motion trajectory planning.

A trajectory pans an L x L crop window across a W x H source image.  The
total displacement for a label (x, y) at granularity K is

    D_x = (W - L) * x / K   (0 when x = 0)
    D_y = (H - L) * y / K   (0 when y = 0)

so the extreme speeds +-K sweep the full available range exactly.  The
start corner is sampled uniformly from the positions that keep both the
first and the last crop inside the source; N crop positions are then
placed at uniform gaps between start and start + D.

Offsets are kept real-valued until the per-index rounding

    positions[i] = start + round_half_away(D * i / (N - 1))

which keeps endpoints exact (positions[N-1] - positions[0] equals the
rounded total displacement) and bounds per-step rounding drift by one
pixel per axis.  Rounding halves away from zero is an odd function, so
mirrored labels produce exactly negated offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TrajectoryError
from .labels import MotionLabel


def round_half_away(v: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if v >= 0:
        return int(math.floor(v + 0.5))
    return -int(math.floor(-v + 0.5))


@dataclass(frozen=True)
class TrajectoryPlan:
    """Start corner, real displacement and the N rounded crop corners.

    All coordinates are (x, y) pixel pairs of crop top-left corners.
    """

    start: tuple[int, int]
    distance: tuple[float, float]
    positions: tuple[tuple[int, int], ...]
    N: int
    L: int
    source_dims: tuple[int, int]

    def validate(self) -> None:
        W, H = self.source_dims
        if len(self.positions) != self.N:
            raise TrajectoryError(f"expected {self.N} positions, got {len(self.positions)}")
        if self.positions[0] != tuple(self.start):
            raise TrajectoryError("positions[0] must equal the start corner")
        end = (
            self.start[0] + round_half_away(self.distance[0]),
            self.start[1] + round_half_away(self.distance[1]),
        )
        if self.positions[-1] != end:
            raise TrajectoryError("positions[-1] must equal start + rounded distance")
        for px, py in self.positions:
            if not (0 <= px <= W - self.L and 0 <= py <= H - self.L):
                raise TrajectoryError(
                    f"crop corner ({px}, {py}) leaves the {W}x{H} source for L={self.L}"
                )


def motion_distance(
    label: MotionLabel, W: int, H: int, L: int, K: int
) -> tuple[float, float]:
    """Total displacement (D_x, D_y) in pixels for `label` on a W x H source."""
    if K < 1:
        raise ConfigError(f"speed granularity K must be >= 1, got {K}")
    x, y = label
    if abs(x) > K or abs(y) > K:
        raise ConfigError(f"label {tuple(label)} outside granularity K={K}")
    if L > W or L > H:
        raise TrajectoryError(f"crop side {L} exceeds source dims {W}x{H}")
    dx = (W - L) * x / K if x != 0 else 0.0
    dy = (H - L) * y / K if y != 0 else 0.0
    return dx, dy


def sample_start(
    rng: np.random.Generator,
    distance: tuple[float, float],
    W: int,
    H: int,
    L: int,
) -> tuple[int, int]:
    """Uniformly sample a start corner whose end corner also stays in bounds.

    For each axis the valid interval is
    [max(0, -round(D)), (W - L) - max(0, round(D))]; for the static label
    this degenerates to the whole valid area.  The x coordinate is drawn
    first, then y.
    """
    if L > W or L > H:
        raise TrajectoryError(f"crop side {L} exceeds source dims {W}x{H}")
    rd = (round_half_away(distance[0]), round_half_away(distance[1]))
    coords = []
    for d, extent in ((rd[0], W - L), (rd[1], H - L)):
        lo = max(0, -d)
        hi = extent - max(0, d)
        if hi < lo:
            raise TrajectoryError(
                f"no valid start positions: displacement {d} does not fit in extent {extent}"
            )
        coords.append(int(rng.integers(lo, hi + 1)))
    return coords[0], coords[1]


def interpolate_positions(
    start: tuple[int, int], distance: tuple[float, float], N: int
) -> tuple[tuple[int, int], ...]:
    """Place N crop corners at uniform gaps from start to start + distance."""
    if N < 2:
        raise ConfigError(f"frame count must be >= 2, got {N}")
    sx, sy = int(start[0]), int(start[1])
    dx, dy = distance
    out = []
    for i in range(N):
        t = i / (N - 1)
        out.append((sx + round_half_away(dx * t), sy + round_half_away(dy * t)))
    return tuple(out)


def plan_trajectory(
    label: MotionLabel,
    source_dims: tuple[int, int],
    L: int,
    K: int,
    N: int,
    rng: np.random.Generator,
) -> TrajectoryPlan:
    """Sample a complete, validated trajectory plan for one label."""
    W, H = source_dims
    distance = motion_distance(label, W, H, L, K)
    start = sample_start(rng, distance, W, H, L)
    positions = interpolate_positions(start, distance, N)
    plan = TrajectoryPlan(
        start=start,
        distance=distance,
        positions=positions,
        N=N,
        L=L,
        source_dims=(W, H),
    )
    plan.validate()
    return plan
