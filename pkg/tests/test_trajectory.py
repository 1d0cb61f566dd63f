import numpy as np
import pytest

from stillmotion.errors import ConfigError, TrajectoryError
from stillmotion.labels import MotionLabel, build_label_pool
from stillmotion.trajectory import (
    TrajectoryPlan,
    interpolate_positions,
    motion_distance,
    plan_trajectory,
    round_half_away,
    sample_start,
)


def test_round_half_away():
    assert round_half_away(2.5) == 3
    assert round_half_away(-2.5) == -3
    assert round_half_away(2.4) == 2
    assert round_half_away(-2.4) == -2
    assert round_half_away(0.0) == 0
    # odd function, so mirrored labels get exactly negated offsets
    for v in (0.5, 1.2, 7.5, 13.49):
        assert round_half_away(-v) == -round_half_away(v)


def test_motion_distance_examples():
    assert motion_distance(MotionLabel(2, 0), 320, 320, 112, 2) == (208.0, 0.0)
    assert motion_distance(MotionLabel(1, 0), 320, 320, 112, 2) == (104.0, 0.0)
    assert motion_distance(MotionLabel(0, 0), 320, 320, 112, 2) == (0.0, 0.0)
    assert motion_distance(MotionLabel(0, -2), 500, 300, 112, 2) == (0.0, -188.0)


def test_motion_distance_matches_direct_evaluation():
    rng = np.random.default_rng(11)
    for _ in range(300):
        K = int(rng.integers(1, 6))
        L = int(rng.integers(8, 128))
        W = L + int(rng.integers(0, 400))
        H = L + int(rng.integers(0, 400))
        x = int(rng.integers(-K, K + 1))
        y = 0 if x != 0 else int(rng.integers(-K, K + 1))
        dx, dy = motion_distance(MotionLabel(x, y), W, H, L, K)
        assert dx == (0.0 if x == 0 else (W - L) * x / K)
        assert dy == (0.0 if y == 0 else (H - L) * y / K)
        if abs(x) == K:
            assert abs(dx) == W - L


def test_motion_distance_crop_too_large():
    with pytest.raises(TrajectoryError):
        motion_distance(MotionLabel(1, 0), 100, 320, 112, 2)


def test_motion_distance_label_outside_granularity():
    with pytest.raises(ConfigError):
        motion_distance(MotionLabel(3, 0), 320, 320, 112, 2)


def _brute_force_starts(d_rounded, extent):
    return [s for s in range(extent + 1) if 0 <= s + d_rounded <= extent]


def test_sample_start_max_speed_pins_one_axis():
    rng = np.random.default_rng(0)
    xs, ys = set(), set()
    for _ in range(300):
        x, y = sample_start(rng, (208.0, 0.0), 320, 320, 112)
        xs.add(x)
        ys.add(y)
    assert xs == {0}
    assert min(ys) >= 0 and max(ys) <= 208
    assert len(ys) > 100  # actually spreads over the free axis


def test_sample_start_static_covers_whole_area():
    rng = np.random.default_rng(1)
    pts = [sample_start(rng, (0.0, 0.0), 320, 320, 112) for _ in range(2000)]
    xs = {p[0] for p in pts}
    ys = {p[1] for p in pts}
    assert min(xs) >= 0 and max(xs) <= 208
    assert min(ys) >= 0 and max(ys) <= 208
    assert len(xs) > 150 and len(ys) > 150


def test_sample_start_negative_distance_interval():
    rng = np.random.default_rng(2)
    xs = {sample_start(rng, (-104.0, 0.0), 320, 320, 112)[0] for _ in range(2000)}
    brute = _brute_force_starts(round_half_away(-104.0), 208)
    assert min(xs) == min(brute) == 104
    assert max(xs) == max(brute) == 208
    assert xs <= set(brute)


def test_sample_start_infeasible():
    with pytest.raises(TrajectoryError):
        sample_start(np.random.default_rng(0), (300.0, 0.0), 320, 320, 112)


def test_interpolate_static():
    assert interpolate_positions((0, 0), (0.0, 0.0), 16) == tuple([(0, 0)] * 16)


def test_interpolate_full_sweep():
    positions = interpolate_positions((0, 0), (208.0, 0.0), 16)
    assert positions[0] == (0, 0)
    assert positions[-1] == (208, 0)
    xs = [p[0] for p in positions]
    # rounded per index, strictly monotone for this speed
    expected = [round_half_away(208.0 * i / 15) for i in range(16)]
    assert xs == expected
    assert all(b > a for a, b in zip(xs, xs[1:]))
    assert all(p[1] == 0 for p in positions)


def test_interpolate_rejects_single_frame():
    with pytest.raises(ConfigError):
        interpolate_positions((0, 0), (10.0, 0.0), 1)


def test_plan_validation_catches_out_of_bounds():
    # y_start=50 cannot carry a -104 pan inside a 320px source
    positions = interpolate_positions((10, 50), (0.0, -104.0), 8)
    plan = TrajectoryPlan(
        start=(10, 50),
        distance=(0.0, -104.0),
        positions=positions,
        N=8,
        L=112,
        source_dims=(320, 320),
    )
    with pytest.raises(TrajectoryError):
        plan.validate()


def test_random_plans_satisfy_all_invariants():
    rng = np.random.default_rng(123)
    for _ in range(500):
        K = int(rng.integers(1, 5))
        pool = build_label_pool(K, "both")
        label = pool.labels[int(rng.integers(0, pool.size))]
        L = int(rng.integers(16, 129))
        W = L + int(rng.integers(0, 300))
        H = L + int(rng.integers(0, 300))
        N = int(rng.integers(2, 33))
        plan = plan_trajectory(label, (W, H), L, K, N, rng)

        for px, py in plan.positions:
            assert 0 <= px <= W - L and 0 <= py <= H - L
        dx, dy = plan.distance
        end = plan.positions[-1]
        assert end[0] - plan.positions[0][0] == round_half_away(dx)
        assert end[1] - plan.positions[0][1] == round_half_away(dy)

        step = (dx / (N - 1), dy / (N - 1))
        for a, b in zip(plan.positions, plan.positions[1:]):
            assert abs((b[0] - a[0]) - step[0]) <= 1.0 + 1e-9
            assert abs((b[1] - a[1]) - step[1]) <= 1.0 + 1e-9

        xs = [p[0] for p in plan.positions]
        ys = [p[1] for p in plan.positions]
        if label.x == 0:
            assert len(set(xs)) == 1
        elif label.x > 0:
            assert xs == sorted(xs)
        else:
            assert xs == sorted(xs, reverse=True)
        if label.y == 0:
            assert len(set(ys)) == 1
        elif label.y > 0:
            assert ys == sorted(ys)
        else:
            assert ys == sorted(ys, reverse=True)


def test_reversal_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(200):
        K = int(rng.integers(1, 5))
        x = int(rng.integers(-K, K + 1))
        label = MotionLabel(x, 0) if rng.integers(2) else MotionLabel(0, x)
        L, W, H = 112, 320, 320
        d_fwd = motion_distance(label, W, H, L, K)
        d_rev = motion_distance(MotionLabel(-label.x, -label.y), W, H, L, K)
        assert d_rev == (-d_fwd[0], -d_fwd[1])
        fwd = interpolate_positions((0, 0), d_fwd, 16)
        rev = interpolate_positions((0, 0), d_rev, 16)
        assert all((rx, ry) == (-fx, -fy) for (fx, fy), (rx, ry) in zip(fwd, rev))
