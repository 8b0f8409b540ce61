import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import local_argmax_centers
from pseudoheat.core import GridConfig, seeded_rng
from pseudoheat.heatmap import (
    CenterSet,
    Heatmap,
    PseudoImage,
    build_pseudo_image,
    class_agnostic,
    extract_centers,
    read_pgm,
    write_pgm,
)

CFG = GridConfig()
SMALL = GridConfig(bev_extent=3.2)  # 32 x 32 cells


def hm_of(scores, cell=0.2, origin=0.0):
    return Heatmap(np.asarray(scores, dtype=np.int64), cell, origin)


def centers_as_tuples(cs: CenterSet):
    return [(int(r), int(c), int(s)) for r, c, s in zip(cs.rows, cs.cols, cs.scores)]


# -- projection ---------------------------------------------------------------

def test_single_voxel_at_origin():
    img = build_pseudo_image([[0.0, 0.0]], [1], CFG, n_classes=2)
    assert img.counts.shape == (512, 512, 2)
    assert img.total == 1 and img.overflow == 0
    assert img.counts[256, 256, 1] == 1


def test_ten_voxels_same_cell():
    img = build_pseudo_image(np.full((10, 2), 1.05), np.full(10, 3), CFG, n_classes=4)
    r = c = int(math.floor((1.05 + 51.2) / 0.2))
    assert img.counts[r, c, 3] == 10
    assert img.total == 10


def test_row_follows_y_col_follows_x():
    img = build_pseudo_image([[1.0, -1.0]], [1], SMALL)
    r, c, _ = np.argwhere(img.counts)[0]
    xy = hm_of(img.counts.sum(2), img.cell, img.origin).cell_xy([r], [c])[0]
    assert xy[0] > 0 > xy[1]


def test_histogram_oracle_with_overflow():
    rng = seeded_rng(0)
    pts = rng.uniform(-60, 60, size=(10_000, 2))
    cls = rng.integers(1, 5, 10_000)
    img = build_pseudo_image(pts, cls, CFG, n_classes=5)
    expect = np.zeros((512, 512, 5), dtype=np.int64)
    overflow = 0
    for (x, y), c in zip(pts, cls):
        col = math.floor((x + 51.2) / 0.2)
        row = math.floor((y + 51.2) / 0.2)
        if 0 <= row < 512 and 0 <= col < 512:
            expect[row, col, c] += 1
        else:
            overflow += 1
    assert np.array_equal(img.counts, expect)
    assert img.overflow == overflow


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 300))
def test_projection_conserves_count(seed, m):
    rng = seeded_rng(seed)
    pts = rng.uniform(-5, 5, size=(m, 2))
    img = build_pseudo_image(pts, rng.integers(1, 3, m), SMALL, n_classes=3)
    assert img.total + img.overflow == m


def test_projection_rejects_bad_input():
    with pytest.raises(ValueError):
        build_pseudo_image([[np.nan, 0.0]], [1], CFG)
    with pytest.raises(ValueError):
        build_pseudo_image([[0.0, 0.0]], [1, 2], CFG)
    with pytest.raises(ValueError):
        build_pseudo_image([[0.0, 0.0]], [5], CFG, n_classes=3)


def test_class_agnostic():
    single = PseudoImage(np.arange(4).reshape(2, 2, 1), 0.2, 0.0)
    assert np.array_equal(class_agnostic(single).scores, single.counts[:, :, 0])
    assert not class_agnostic(PseudoImage(np.zeros((3, 3, 4), np.int64), 0.2, 0.0)).scores.any()
    rand = seeded_rng(1).integers(0, 9, size=(16, 16, 6))
    s = class_agnostic(PseudoImage(rand, 0.2, 0.0)).scores
    for r in range(16):
        for c in range(16):
            assert s[r, c] == sum(rand[r, c, k] for k in range(6))


# -- center extraction --------------------------------------------------------

def test_single_nonzero_cell():
    s = np.zeros((20, 20), np.int64)
    s[7, 11] = 3
    cs = extract_centers(hm_of(s), SMALL)
    assert centers_as_tuples(cs) == [(7, 11, 3)]
    assert np.allclose(cs.xy, [[(11 + 0.5) * 0.2, (7 + 0.5) * 0.2]])


def test_equal_adjacent_cells_keep_row_major_first():
    s = np.zeros((20, 20), np.int64)
    s[5, 6] = s[5, 7] = 4
    s[9, 3] = s[8, 4] = 2
    assert centers_as_tuples(extract_centers(hm_of(s), SMALL)) == [(5, 6, 4), (8, 4, 2)]


def test_min_score_and_ordering():
    s = np.zeros((30, 30), np.int64)
    s[2, 2], s[10, 10], s[20, 5], s[20, 25] = 1, 5, 3, 3
    cfg = GridConfig(bev_extent=3.2, min_center_score=2)
    assert centers_as_tuples(extract_centers(hm_of(s), cfg)) == [(10, 10, 5), (20, 5, 3), (20, 25, 3)]


def test_boundary_uses_shrunken_window():
    s = np.zeros((10, 10), np.int64)
    s[0, 0] = 2
    s[9, 9] = 1
    assert centers_as_tuples(extract_centers(hm_of(s), SMALL)) == [(0, 0, 2), (9, 9, 1)]


def test_even_window_rejected():
    with pytest.raises(ValueError):
        extract_centers(hm_of(np.zeros((4, 4))), SMALL, window=4)


@pytest.mark.parametrize("window", [1, 3, 5, 7])
def test_matches_local_argmax_oracle(window):
    rng = seeded_rng(window)
    for _ in range(20):
        # sparse small integers give plenty of plateaus and ties
        s = rng.integers(0, 4, size=(40, 40)) * (rng.random((40, 40)) < 0.3)
        got = centers_as_tuples(extract_centers(hm_of(s), SMALL, window))
        assert got == local_argmax_centers(s, window, SMALL.min_center_score)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.sampled_from([3, 5, 7]))
def test_isolated_clusters_give_one_center_each(seed, n_clusters, window):
    rng = seeded_rng(seed)
    r = window // 2
    side = r + 1  # every pair inside a cluster is within one window radius
    pitch = side + r + 1  # clusters farther apart than the window radius
    s = np.zeros((pitch * 3 + 2, pitch * 3 + 2), np.int64)
    slots = rng.permutation(9)[:n_clusters]
    for k in slots:
        r0, c0 = 1 + (k // 3) * pitch, 1 + (k % 3) * pitch
        block = rng.integers(0, 4, size=(side, side))
        block[rng.integers(side), rng.integers(side)] = rng.integers(1, 5)
        s[r0:r0 + side, c0:c0 + side] = block
    assert len(extract_centers(hm_of(s), SMALL, window)) == n_clusters


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-5, 5), st.integers(-5, 5))
def test_translation_equivariance(seed, dr, dc):
    rng = seeded_rng(seed)
    s = np.zeros((40, 40), np.int64)
    s[10:30, 10:30] = rng.integers(0, 5, size=(20, 20))
    a = extract_centers(hm_of(s), SMALL)
    b = extract_centers(hm_of(np.roll(s, (dr, dc), axis=(0, 1))), SMALL)
    assert sorted(centers_as_tuples(b)) == sorted((r + dr, c + dc, v) for r, c, v in centers_as_tuples(a))


def test_centers_respect_invariants():
    s = seeded_rng(3).integers(0, 6, size=(32, 32))
    cs = extract_centers(hm_of(s, 0.2, -3.2), SMALL)
    assert np.all(cs.scores >= SMALL.min_center_score)
    assert np.all(np.abs(cs.xy) < 3.2)
    keys = list(zip(-cs.scores, cs.rows, cs.cols))
    assert keys == sorted(keys)


# -- PGM ----------------------------------------------------------------------

def test_pgm_round_trip(tmp_path):
    s = seeded_rng(4).integers(0, 300, size=(7, 11))
    s[0, 0] = 70000  # clipped to the 16-bit range
    p = tmp_path / "h.pgm"
    write_pgm(p, hm_of(s))
    back = read_pgm(p)
    s[0, 0] = 65535
    assert np.array_equal(back, s)
    assert p.read_bytes().startswith(b"P5\n11 7\n65535\n")
