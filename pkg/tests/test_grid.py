import json

import numpy as np
import numpy.testing as npt
import pytest

from singmix import DomainSpec, Grid, boundary_strip, build_grid, probe_mask
from singmix.errors import DegenerateGridError
from singmix.grid import strip_covers_interior

from conftest import SYM_INTERVAL, UNIT_DISC, UNIT_INTERVAL, UNIT_SQUARE


def test_interval_interior_nodes():
    g = build_grid(UNIT_INTERVAL, 0.25, min_interior_per_axis=1)
    npt.assert_allclose(np.sort(g.interior_points().ravel()), [0.25, 0.5, 0.75])


def test_rectangle_single_interior_node():
    g = build_grid(UNIT_SQUARE, 0.5, min_interior_per_axis=1)
    assert g.n_interior == 1
    npt.assert_allclose(g.interior_points(), [[0.5, 0.5]])


def test_disc_interior_count_matches_enumeration():
    g = build_grid(DomainSpec("disc", center=(0, 0), radius=1.0), 0.5,
                   min_interior_per_axis=1)
    # independent oracle: enumerate the lattice and test |p| < 1 directly
    axis = -1.0 + 0.5 * np.arange(5)
    count = sum(1 for x in axis for y in axis if x * x + y * y < 1.0)
    assert g.n_interior == count == 9


def test_degenerate_grid_rejected_by_default():
    with pytest.raises(DegenerateGridError):
        build_grid(UNIT_SQUARE, 0.5)


def test_h_too_large_rejected():
    with pytest.raises(ValueError):
        build_grid(UNIT_INTERVAL, 1.5)


def test_interior_measure_first_order_on_disc():
    errs = []
    for h in (0.1, 0.05, 0.025):
        g = build_grid(UNIT_DISC, h)
        errs.append(abs(g.interior_measure() - np.pi))
        assert errs[-1] <= 2 * np.pi * h
    assert errs[-1] < errs[0]


def test_boundary_strip_interval():
    g = build_grid(UNIT_INTERVAL, 1 / 16)
    mask = boundary_strip(g, 0.3)
    x = g.nodes[:, 0]
    expected = g.interior_mask & ((x < 0.3) | (x > 0.7))
    npt.assert_array_equal(mask, expected)


def test_boundary_strip_rectangle():
    g = build_grid(UNIT_SQUARE, 1 / 16)
    mask = boundary_strip(g, 0.1)
    x, y = g.nodes[:, 0], g.nodes[:, 1]
    near = (x < 0.1) | (x > 0.9) | (y < 0.1) | (y > 0.9)
    npt.assert_array_equal(mask, g.interior_mask & near)


def test_boundary_strip_disc():
    g = build_grid(UNIT_DISC, 1 / 16)
    mask = boundary_strip(g, 0.2)
    r = np.linalg.norm(g.nodes, axis=1)
    npt.assert_array_equal(mask, g.interior_mask & (r > 0.8) & (r < 1.0))


def test_strips_are_nested():
    g = build_grid(UNIT_DISC, 1 / 16)
    for e1, e2 in [(0.05, 0.1), (0.1, 0.3), (0.3, 2.0)]:
        m1, m2 = boundary_strip(g, e1), boundary_strip(g, e2)
        assert np.all(m2[m1])


def test_strip_covers_interior_flag():
    g = build_grid(UNIT_SQUARE, 1 / 8)
    assert not strip_covers_interior(g, 0.1)
    assert strip_covers_interior(g, 0.6)


def test_builds_are_bit_identical():
    a = build_grid(UNIT_DISC, 0.07)
    b = build_grid(UNIT_DISC, 0.07)
    npt.assert_array_equal(a.nodes, b.nodes)
    npt.assert_array_equal(a.interior_mask, b.interior_mask)


def test_json_round_trip():
    g = build_grid(SYM_INTERVAL, 1 / 8)
    g2 = Grid.from_json(g.to_json())
    npt.assert_array_equal(g.nodes, g2.nodes)
    assert json.loads(g.to_json())["h"] == 1 / 8


def test_nondividing_h_is_centered():
    g = build_grid(UNIT_INTERVAL, 0.3, min_interior_per_axis=1)
    x = g.nodes[:, 0]
    # symmetric overhang: first and last node equidistant from the ends
    npt.assert_allclose(x[0] - 0.0, 1.0 - x[-1])
    npt.assert_allclose(np.diff(x), 0.3)


def test_probe_masks_shrink():
    g = build_grid(UNIT_SQUARE, 1 / 16)
    m50, m75 = probe_mask(g, 0.5), probe_mask(g, 0.75)
    assert m50.sum() < m75.sum() < g.n_interior
    assert np.all(m75[m50])


def test_embed_restrict_round_trip(square16, rng):
    u = rng.standard_normal(square16.n_interior)
    npt.assert_array_equal(square16.restrict(square16.embed(u)), u)
