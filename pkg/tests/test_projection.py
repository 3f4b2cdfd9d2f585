"""Nearest-point projection: exact feet, multiplicity, and brute-force
agreement."""

import numpy as np
import pytest

from sigma_eikonal.geometry import Ball, OffsetBody, make_random_polytope
from sigma_eikonal.projection import (
    ProjectionError,
    default_tau_multi,
    project,
)

from conftest import dense_boundary_distance


def test_circle_projection_analytic(unit_disk):
    res = project(unit_disk, (0.3, 0.4))
    assert res.distance == pytest.approx(0.5, abs=1e-12)
    assert res.is_singleton
    assert np.allclose(res.nearest[0], (0.6, 0.8), atol=1e-12)

    out = project(unit_disk, (3.0, 4.0))
    assert out.distance == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(out.nearest[0], (0.6, 0.8), atol=1e-12)


def test_ball_center_is_a_continuum_tie(unit_disk):
    res = project(unit_disk, (0.0, 0.0))
    assert res.distance == pytest.approx(1.0, abs=1e-12)
    assert not res.is_singleton
    assert res.spread == pytest.approx(2.0, abs=1e-9)


def test_square_center_has_four_feet(unit_square):
    res = project(unit_square, (0.0, 0.0))
    assert res.distance == pytest.approx(1.0, abs=1e-12)
    assert not res.is_singleton
    assert res.nearest.shape[0] == 4
    assert res.spread == pytest.approx(2.0, abs=1e-12)
    feet = set(map(tuple, np.round(res.nearest, 9)))
    assert feet == {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}


def test_square_diagonal_point_has_two_feet(unit_square):
    res = project(unit_square, (0.5, 0.5))
    assert res.distance == pytest.approx(0.5, abs=1e-12)
    assert not res.is_singleton
    assert res.nearest.shape[0] == 2
    feet = set(map(tuple, np.round(res.nearest, 9)))
    assert feet == {(1.0, 0.5), (0.5, 1.0)}


def test_square_off_diagonal_is_singleton(unit_square):
    res = project(unit_square, (0.5, 0.2))
    assert res.is_singleton
    assert np.allclose(res.nearest[0], (1.0, 0.2), atol=1e-12)


def test_polytope_projection_matches_dense_scan(tilted_polytope):
    poly = tilted_polytope
    rng = np.random.default_rng(17)
    lo, hi = poly.bbox()
    pts = rng.uniform(lo - 0.5, hi + 0.5, size=(60, 2))
    d_oracle = dense_boundary_distance(poly, pts, spacing=0.002)
    for p, d_ref in zip(pts, d_oracle):
        res = project(poly, p)
        assert res.distance <= d_ref + 1e-9
        assert res.distance >= d_ref - 0.002


def test_exterior_of_convex_body_is_singleton():
    rng = np.random.default_rng(23)
    for seed in (1, 6):
        poly = make_random_polytope(9, seed=seed)
        lo, hi = poly.bbox()
        pts = rng.uniform(lo - 1.0, hi + 1.0, size=(200, 2))
        outside = ~poly.contains(pts)
        for p in pts[outside]:
            assert project(poly, p).is_singleton


def test_offset_projection_in_three_zones(offset_square):
    body = offset_square
    # deep inside the base square: foot on the nearest offset edge
    res = project(body, (0.2, 0.0))
    assert res.distance == pytest.approx(0.5 + 0.8, abs=1e-12)
    assert np.allclose(res.nearest[0], (1.5, 0.0), atol=1e-12)
    # in the shell between base and offset boundary
    res = project(body, (1.2, 0.0))
    assert res.distance == pytest.approx(0.3, abs=1e-12)
    # outside
    res = project(body, (2.0, 0.0))
    assert res.distance == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(res.nearest[0], (1.5, 0.0), atol=1e-12)


def test_offset_corner_arc_foot_exact(offset_square):
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    x = np.array([1.0, 1.0]) + 1.2 * u
    res = project(offset_square, x)
    assert res.distance == pytest.approx(0.7, abs=1e-12)
    assert np.allclose(res.nearest[0], np.array([1.0, 1.0]) + 0.5 * u,
                       atol=1e-12)


def test_offset_distance_matches_dense_scan(offset_square):
    rng = np.random.default_rng(31)
    pts = rng.uniform(-2.2, 2.2, size=(60, 2))
    d_oracle = dense_boundary_distance(offset_square, pts, spacing=0.002)
    for p, d_ref in zip(pts, d_oracle):
        res = project(offset_square, p)
        assert abs(res.distance - d_ref) <= 0.002


def test_sampled_circle_matches_exact(unit_disk):
    surf = unit_disk.boundary_sample(0.01)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.8, 1.8, size=(80, 2))
    for p in pts:
        if np.linalg.norm(p) < 0.05:
            continue
        exact = abs(1.0 - np.linalg.norm(p))
        res = project(surf, p)
        assert abs(res.distance - exact) <= 0.006


def test_sampled_circle_center_ties_whole_circle(unit_disk):
    surf = unit_disk.boundary_sample(0.01)
    res = project(surf, (0.0, 0.0))
    assert not res.is_singleton
    assert res.spread >= 1.0


def test_sampled_square_center_multiplicity(unit_square):
    surf = unit_square.boundary_sample(0.01)
    res = project(surf, (0.0, 0.0))
    assert not res.is_singleton
    assert res.spread == pytest.approx(2.0, abs=0.05)


def test_distance_is_one_lipschitz(tilted_polytope):
    rng = np.random.default_rng(77)
    pts = rng.uniform(-2.0, 2.0, size=(80, 2))
    d = np.array([project(tilted_polytope, p).distance for p in pts])
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = np.linalg.norm(pts[i] - pts[j])
            assert abs(d[i] - d[j]) <= gap + 1e-9


def test_tau_multi_widens_the_tie_window(unit_square):
    # a point slightly off the diagonal: strict tie detection misses it,
    # a coarse tolerance treats the two near-equal feet as a tie
    x = (0.5, 0.498)
    strict = project(unit_square, x, tau_multi=1e-9)
    coarse = project(unit_square, x, tau_multi=0.05)
    assert strict.is_singleton
    assert not coarse.is_singleton


def test_default_tau_multi_scales_with_diameter(unit_square, unit_disk):
    assert default_tau_multi(unit_square) > 0.0
    big = Ball((0.0, 0.0), 100.0)
    assert default_tau_multi(big) > default_tau_multi(unit_disk)


def test_project_rejects_bad_input(unit_square):
    with pytest.raises(ProjectionError):
        project(unit_square, (0.0, 0.0, 0.0))
