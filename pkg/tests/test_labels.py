import pytest

from stillmotion.errors import ConfigError
from stillmotion.labels import MotionLabel, build_label_pool, per_axis_speed_count_to_K


def test_default_two_axis_pool_has_nine_classes():
    assert build_label_pool(2, "both").size == 9


def test_small_pools():
    assert build_label_pool(1, "both").size == 5
    pool = build_label_pool(2, "x")
    assert pool.labels == (
        MotionLabel(-2, 0),
        MotionLabel(-1, 0),
        MotionLabel(0, 0),
        MotionLabel(1, 0),
        MotionLabel(2, 0),
    )


@pytest.mark.parametrize("axis,alias", [("x", "x-only"), ("y", "y-only"), ("both", "both")])
def test_axis_aliases(axis, alias):
    assert build_label_pool(3, alias).labels == build_label_pool(3, axis).labels


def test_pool_size_formula_and_invariants():
    for K in range(1, 9):
        for axis in ("both", "x", "y"):
            pool = build_label_pool(K, axis)
            expected = 4 * K + 1 if axis == "both" else 2 * K + 1
            assert pool.size == expected
            # exactly one static label
            assert sum(1 for lab in pool.labels if lab == (0, 0)) == 1
            for lab in pool.labels:
                assert lab.x * lab.y == 0
                assert abs(lab.x) <= K and abs(lab.y) <= K
                # antisymmetry
                assert MotionLabel(-lab.x, -lab.y) in pool.index
            # index is a bijection onto 0..size-1
            assert sorted(pool.index.values()) == list(range(pool.size))
            assert all(pool.label_at(pool.index_of(lab)) == lab for lab in pool.labels)


def test_ordering_is_lexicographic_and_stable():
    pool = build_label_pool(2, "both")
    assert list(pool.labels) == sorted(pool.labels)
    again = build_label_pool(2, "both")
    assert again.labels == pool.labels
    assert again.index == pool.index


def test_index_of_rejects_foreign_labels():
    pool = build_label_pool(1, "both")
    with pytest.raises(KeyError):
        pool.index_of(MotionLabel(2, 0))
    with pytest.raises(KeyError):
        pool.index_of(MotionLabel(1, 1))


@pytest.mark.parametrize("bad_k", [0, -1, -5])
def test_invalid_granularity(bad_k):
    with pytest.raises(ConfigError):
        build_label_pool(bad_k, "both")


def test_unknown_axis():
    with pytest.raises(ConfigError):
        build_label_pool(2, "diagonal")


def test_speed_count_conversion():
    assert per_axis_speed_count_to_K(5) == 2
    assert per_axis_speed_count_to_K(3) == 1
    assert per_axis_speed_count_to_K(9) == 4


@pytest.mark.parametrize("bad_c", [4, 2, 1, 0, -3])
def test_speed_count_rejects_even_or_small(bad_c):
    with pytest.raises(ConfigError):
        per_axis_speed_count_to_K(bad_c)
