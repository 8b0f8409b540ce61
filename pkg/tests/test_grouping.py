import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grouping_fixpoint, same_partition, windowed_majority
from pseudoheat.core import ClassTable, GridConfig, seeded_rng, semantic_kitti_table
from pseudoheat.grouping import (
    DisjointSet,
    GridClassMap,
    SparseClassMap,
    grid_class_majority,
    group_centers,
    radius_for_class,
    singleton_groups,
    window_sums,
)
from pseudoheat.heatmap import CenterSet, PseudoImage

CFG = GridConfig(bev_extent=6.4)  # 64 x 64 cells
TABLE = ClassTable({1, 2, 3}, {9}, {1: (1.8, 4.5, 1.6), 2: (0.6, 0.8, 1.7), 3: (2.9, 11.0, 3.5)})


def img_of(counts):
    return PseudoImage(np.asarray(counts, dtype=np.int64), 0.2, 0.0)


def centers_at(cells, scores=None):
    rows = [r for r, _ in cells]
    cols = [c for _, c in cells]
    scores = scores if scores is not None else [1] * len(cells)
    return CenterSet.from_cells(rows, cols, scores, 0.2, 0.0, shape=(64, 64))


def const_map(cls, shape=(64, 64)):
    return GridClassMap(np.full(shape, cls, dtype=np.int64))


# -- class majority -------------------------------------------------------------

def test_window_of_only_cars():
    c = np.zeros((10, 10, 4), np.int64)
    c[4, 4, 1] = 3
    m = grid_class_majority(img_of(c), CFG)
    assert m.classes[4, 4] == 1 and m.classes[6, 6] == 1
    assert m.classes[7, 7] == 0  # outside the 5-cell window: empty


def test_majority_tie_prefers_smaller_class():
    c = np.zeros((5, 5, 4), np.int64)
    c[2, 2, 3] = 2
    c[2, 1, 2] = 2
    assert grid_class_majority(img_of(c), CFG).classes[2, 2] == 2


def test_ignore_channel_never_wins():
    c = np.zeros((5, 5, 3), np.int64)
    c[2, 2, 0] = 9
    c[2, 2, 1] = 1
    assert grid_class_majority(img_of(c), CFG).classes[2, 2] == 1


@pytest.mark.parametrize("window", [1, 3, 5, 7])
def test_window_sums_match_brute_force(window):
    c = seeded_rng(window).integers(0, 3, size=(13, 17, 2))
    got = window_sums(c, window)
    r = window // 2
    for i in range(13):
        for j in range(17):
            assert np.array_equal(got[i, j], c[max(0, i - r):i + r + 1, max(0, j - r):j + r + 1].sum((0, 1)))


def test_majority_matches_windowed_count_oracle():
    rng = seeded_rng(10)
    c = rng.integers(0, 3, size=(30, 30, 5)) * (rng.random((30, 30, 5)) < 0.15)
    img = img_of(c)
    expect = windowed_majority(c, 5)
    assert np.array_equal(grid_class_majority(img, CFG).classes, expect)
    rows, cols = np.nonzero(np.ones((30, 30)))
    assert np.array_equal(SparseClassMap(img, 5).at(rows, cols), expect[rows, cols])


def test_even_avgpool_window_rejected():
    with pytest.raises(ValueError):
        grid_class_majority(img_of(np.zeros((3, 3, 2))), CFG, window=2)


# -- radius -----------------------------------------------------------------------

def test_radius_is_min_footprint_side():
    assert radius_for_class(1, TABLE) == 1.8
    assert radius_for_class(3, TABLE) == 2.9


def test_radius_kitti_car_from_statistics():
    assert radius_for_class(1, semantic_kitti_table()) == 1.6


def test_radius_unknown_class():
    with pytest.raises(ValueError):
        radius_for_class(9, TABLE)


# -- grouping ---------------------------------------------------------------------

def test_close_pair_merges():
    cs = centers_at([(10, 10), (10, 12)])  # 0.4 m apart
    g = group_centers(cs, const_map(1), TABLE)
    assert g.n_groups == 1


def test_far_pair_stays_apart():
    cs = centers_at([(10, 10), (10, 30)])  # 4 m apart, car radius 1.8 m
    assert group_centers(cs, const_map(1), TABLE).n_groups == 2


def test_bus_chain_merges():
    # four peaks along a bus body 2.4 m apart; the ends are 7.2 m apart
    cells = [(20, 5), (20, 17), (20, 29), (20, 41)]
    g = group_centers(centers_at(cells, [5, 7, 6, 4]), const_map(3), TABLE)
    assert g.n_groups == 1
    assert g.representative.tolist() == [0]  # highest score first in order


def test_different_classes_never_merge():
    cls = np.full((64, 64), 1)
    cls[:, 32:] = 2
    cs = centers_at([(10, 31), (10, 32)])
    g = group_centers(cs, GridClassMap(cls), TABLE)
    assert g.n_groups == 2


def test_ignore_class_keeps_singletons():
    cs = centers_at([(10, 10), (10, 11)])
    g = group_centers(cs, const_map(0), TABLE)
    assert g.group_of.tolist() == [0, 1]


def test_boundary_distance_is_inclusive():
    t = ClassTable({1}, set(), {1: (1.0, 2.0, 1.0)})
    # 0.25 m cells put both cell centers on binary fractions: exactly 1.0 m apart
    cs = CenterSet.from_cells([10, 10], [10, 14], [1, 1], 0.25, 0.0)
    assert np.linalg.norm(cs.xy[0] - cs.xy[1]) == 1.0
    assert group_centers(cs, const_map(1), t).n_groups == 1
    assert group_centers(cs, const_map(1), t, radius_scale=0.999).n_groups == 2


def test_singleton_groups_and_empty():
    cs = centers_at([(1, 1), (2, 2)])
    assert singleton_groups(cs).group_of.tolist() == [0, 1]
    empty = centers_at([])
    assert group_centers(empty, const_map(1), TABLE).n_groups == 0


def random_centers(seed, n):
    rng = seeded_rng(seed)
    flat = rng.choice(64 * 64, size=n, replace=False)
    cells = list(zip(flat // 64, flat % 64))
    scores = rng.integers(1, 6, n).tolist()
    cls = rng.integers(0, 4, size=(64, 64))
    return centers_at(cells, scores), GridClassMap(cls)


def test_matches_fixpoint_oracle():
    for seed in range(100):
        n = 1 + seed % 25
        cs, cmap = random_centers(seed, n)
        g = group_centers(cs, cmap, TABLE)
        cls = cmap.at(cs.rows, cs.cols)
        radii = [radius_for_class(c, TABLE) if c else 0.0 for c in cls]
        expect = grouping_fixpoint(cs.xy.tolist(), cls.tolist(), radii)
        assert same_partition(g.group_of, expect)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.floats(0.1, 3.0))
def test_partition_properties(seed, n, scale):
    cs, cmap = random_centers(seed, n)
    g = group_centers(cs, cmap, TABLE, radius_scale=scale)
    # group ids are 0..G-1 numbered by first appearance in score order
    first = [int(np.flatnonzero(g.group_of == k)[0]) for k in range(g.n_groups)]
    assert first == sorted(first)
    assert g.representative.tolist() == first
    # class purity
    for k in range(g.n_groups):
        assert len(set(g.center_class[g.group_of == k].tolist())) == 1
    # enlarging every radius never adds groups
    assert group_centers(cs, cmap, TABLE, radius_scale=scale * 1.5).n_groups <= g.n_groups


def test_chain_merges_transitively():
    # A-B and B-C within 1.8 m, A-C 3.2 m apart
    cs = centers_at([(10, 10), (10, 18), (10, 26)])
    assert group_centers(cs, const_map(1), TABLE).n_groups == 1


def test_disjoint_set():
    ds = DisjointSet(5)
    assert ds.union(0, 1) and ds.union(3, 4) and not ds.union(1, 0)
    r = ds.roots()
    assert r[0] == r[1] and r[3] == r[4] and len(set(r.tolist())) == 3
