"""Admissible covers, the symmetric-difference metric, and the
discrete-geometry checks behind the coarse approximation of interiors."""

import math

import pytest

from lrfim.coarse import (
    admissible_cover,
    approximation_radius,
    check_coarse_cover_bounds,
    check_cube_pair_bound,
    check_projection_bound,
    count_coarse_images,
    d2,
)
from lrfim.contour import Contour, enumerate_origin_contours
from lrfim.entropy import PROJECTION_LAMBDA, compute_constants
from lrfim.lattice import (
    Cube,
    Rectangle,
    boundaries,
    box,
    centered_box,
    random_percolation_region,
    random_polyomino,
)
from lrfim.params import Params, rng_from

P2 = Params(d=2, alpha=4.0)
P3 = Params()
P_SMALL = Params(d=2, alpha=4.0, M=2, a=3, delta=4, r=2)
P_EPS = Params(d=2, alpha=4.0, M=2, a=3, delta=4, r=2, eps=1.0)

LAM = PROJECTION_LAMBDA

_CACHE: dict = {}


def contours_on(side: int, n: int) -> list:
    """Origin contours of size n on the centered side^2 box, memoised so
    the exhaustive sweeps only pay for each enumeration once."""
    key = (side, n)
    if key not in _CACHE:
        region = centered_box(side, 2)
        _CACHE[key] = enumerate_origin_contours(region, n, P_SMALL, cap=side * side)
    return _CACHE[key]


def wrap(region) -> Contour:
    """Contour record with a prescribed minus interior, for desk checks
    that only read the interior and the support size."""
    region = frozenset(region)
    return Contour(boundaries(region).outer, 1, ((region, -1),))


def neighbour_cubes(c: Cube):
    for i in range(len(c.anchor)):
        for s in (-1, 1):
            a = list(c.anchor)
            a[i] += s
            yield Cube(c.scale, tuple(a))


# === admissible covers =====================================================


def test_cover_level_zero_is_interior():
    for n in range(4, 10):
        for g in contours_on(3, n):
            cover = admissible_cover(g, 0, P_SMALL)
            assert cover.region == g.I_minus
            assert all(c.scale == 0 for c in cover.cubes)
            assert admissible_cover(g, 0, P_SMALL, strict=True).region == g.I_minus


def test_cover_level_zero_on_prescribed_interiors():
    rng = rng_from(P_SMALL.seed, 31)
    for _ in range(50):
        region = random_polyomino(rng, 2, int(rng.integers(1, 14)))
        cover = admissible_cover(wrap(region), 0, P_SMALL)
        assert cover.region == frozenset(region)
        strict = admissible_cover(wrap(region), 0, P_SMALL, strict=True)
        assert strict.region == frozenset(region)


def test_cover_single_aligned_cube():
    interior = box((0, 0), (3, 3))
    cover = admissible_cover(wrap(interior), 1, P_SMALL)
    assert cover.cubes == frozenset({Cube(2, (0, 0))})
    assert cover.region == interior
    assert cover.inner_boundary == cover.cubes
    assert len(cover.edge_boundary) == 4


def test_cover_half_cube_convention():
    half = box((0, 0), (3, 1))  # 8 of the 16 sites of the level-1 cube
    cover = admissible_cover(wrap(half), 1, P_SMALL)
    assert cover.cubes == frozenset({Cube(2, (0, 0))})
    assert cover.region == box((0, 0), (3, 3))
    strict = admissible_cover(wrap(half), 1, P_SMALL, strict=True)
    assert strict.cubes == frozenset()
    assert strict.region == frozenset()
    with pytest.raises(ValueError):
        admissible_cover(wrap(half), -1, P_SMALL)


def test_cover_boundary_reconstruction_fuzz():
    rng = rng_from(P_SMALL.seed, 32)
    for _ in range(60):
        side = int(rng.integers(4, 12))
        region = random_percolation_region(rng, 2, side, float(rng.uniform(0.3, 0.8)))
        if not region:
            continue
        g = wrap(region)
        for ell in (0, 1, 2):
            cover = admissible_cover(g, ell, P_SMALL)
            rebuilt = frozenset(
                (c, nb)
                for c in cover.inner_boundary
                for nb in neighbour_cubes(c)
                if nb not in cover.cubes
            )
            assert rebuilt == cover.edge_boundary
            assert cover.inner_boundary == frozenset(c for c, _ in cover.edge_boundary)
            assert cover.region == frozenset(x for c in cover.cubes for x in c.sites())
            for c in cover.cubes:
                assert 2 * sum(1 for x in c.sites() if x in region) >= c.size


# === the symmetric-difference metric =======================================


def test_d2_examples():
    A = frozenset({(0, 0), (1, 0), (2, 2)})
    assert d2(A, A, 0.7) == 0.0
    assert d2(frozenset(), A, 0.5) == pytest.approx(2 * 0.5 * math.sqrt(3))
    with pytest.raises(ValueError):
        d2(A, A, -1.0)


def test_d2_triangle_fuzz():
    rng = rng_from(P_SMALL.seed, 33)
    for _ in range(400):
        regions = []
        for _ in range(3):
            if rng.random() < 0.5:
                regions.append(random_polyomino(rng, 2, int(rng.integers(1, 12))))
            else:
                regions.append(
                    random_percolation_region(rng, 2, 5, float(rng.uniform(0.2, 0.8)))
                )
        a, b, c = map(frozenset, regions)
        eps = float(rng.uniform(0.0, 2.0))
        assert d2(a, c, eps) <= d2(a, b, eps) + d2(b, c, eps) + 1e-9


# === projection bound ======================================================


def test_projection_trivial_and_small_example():
    R = Rectangle((0, 0), (5, 5))
    empty = check_projection_bound(frozenset(), R, LAM, P2)
    assert empty.hypotheses_met and empty.all_passed
    assert empty.checks[0].lhs == 0.0

    A = frozenset({(2, 0), (2, 1), (2, 2)})
    rep = check_projection_bound(A, R, LAM, P2)
    assert rep.hypotheses_met
    assert rep.projection_sizes == (3, 1)
    assert rep.boundary_size == 7
    assert rep.checks[0].lhs == 4.0
    assert rep.all_passed


def test_projection_hypothesis_gate():
    R = Rectangle((0, 0), (4, 4))
    rep = check_projection_bound(R.sites(), R, LAM, P2)
    assert not rep.hypotheses_met
    assert rep.checks[0].passed is None
    assert not rep.all_passed


def test_projection_validation():
    with pytest.raises(ValueError):
        check_projection_bound(frozenset(), Rectangle((0, 0), (2, 5)), LAM, P2)
    with pytest.raises(ValueError):
        check_projection_bound(frozenset(), Rectangle((0, 0), (1, 2)), LAM, P2)
    with pytest.raises(ValueError):
        check_projection_bound(frozenset(), Rectangle((0, 0), (3, 3)), 1.0, P2)
    with pytest.raises(ValueError):
        check_projection_bound(frozenset(), Rectangle((0, 0, 0), (3, 3, 3)), LAM, P2)


def test_projection_fuzz_no_violations():
    rng = rng_from(P_SMALL.seed, 34)
    met = 0
    for d, par, trials in ((2, P2, 300), (3, P3, 150)):
        for _ in range(trials):
            base = int(rng.integers(2, 5))
            extents = tuple(int(rng.integers(base, 2 * base + 1)) for _ in range(d))
            corner = tuple(int(rng.integers(-3, 4)) for _ in range(d))
            R = Rectangle(corner, extents)
            window = box(
                tuple(c - 2 for c in corner),
                tuple(c + e + 1 for c, e in zip(corner, extents)),
            )
            fill = float(rng.uniform(0.15, 0.6))
            A = frozenset(x for x in window if rng.random() < fill)
            rep = check_projection_bound(A, R, LAM, par)
            if rep.hypotheses_met:
                met += 1
                assert rep.all_passed
    assert met >= 150


# === cube-pair bound =======================================================


def test_cube_pair_single_site_example():
    rep = check_cube_pair_bound(
        frozenset({(0, 0)}), Cube(0, (0, 0)), Cube(0, (1, 0)), P2
    )
    assert rep.hypotheses_met
    assert rep.occupancies == (1, 0)
    assert rep.boundary_size == 1
    assert rep.checks[0].lhs == 1.0
    assert rep.all_passed
    rep3 = check_cube_pair_bound(
        frozenset({(0, 0, 0)}), Cube(0, (0, 0, 0)), Cube(0, (0, 0, 1)), P3
    )
    assert rep3.hypotheses_met and rep3.all_passed


def test_cube_pair_half_space_example():
    cube, other = Cube(2, (0, 0)), Cube(2, (1, 0))
    A = box((-2, -2), (3, 5))  # fills the first cube, misses the second
    rep = check_cube_pair_bound(A, cube, other, P2)
    assert rep.hypotheses_met
    assert rep.occupancies == (16, 0)
    assert rep.boundary_size == 4
    assert rep.checks[0].lhs == 4.0
    assert rep.all_passed


def test_cube_pair_gates_and_validation():
    cube, other = Cube(1, (0, 0)), Cube(1, (1, 0))
    full = box((0, 0), (3, 1))  # fills both cubes
    rep = check_cube_pair_bound(full, cube, other, P2)
    assert not rep.hypotheses_met and rep.checks[0].passed is None
    apart = check_cube_pair_bound(full, cube, Cube(1, (2, 0)), P2)
    assert not apart.hypotheses_met
    with pytest.raises(ValueError):
        check_cube_pair_bound(full, cube, Cube(2, (1, 0)), P2)
    with pytest.raises(ValueError):
        check_cube_pair_bound(full, Cube(1, (0, 0, 0)), Cube(1, (0, 0, 1)), P2)


def test_cube_pair_fuzz_no_violations():
    rng = rng_from(P_SMALL.seed, 35)
    met = 0
    for d, par, scales, trials in ((2, P2, (1, 2), 250), (3, P3, (1,), 120)):
        for _ in range(trials):
            m = int(rng.choice(scales))
            anchor = tuple(int(rng.integers(-2, 3)) for _ in range(d))
            axis = int(rng.integers(0, d))
            sign = 1 if rng.random() < 0.5 else -1
            other = Cube(
                m, tuple(a + (sign if i == axis else 0) for i, a in enumerate(anchor))
            )
            cube = Cube(m, anchor)
            dense = float(rng.uniform(0.55, 1.0))
            sparse = float(rng.uniform(0.0, 0.45))
            A = {x for x in cube.sites() if rng.random() < dense}
            A |= {x for x in other.sites() if rng.random() < sparse}
            lo = tuple(min(a, b) - 2 for a, b in zip(cube.low(), other.low()))
            hi = tuple(max(a, b) + 2 for a, b in zip(cube.high(), other.high()))
            A |= {
                x
                for x in box(lo, hi)
                if not cube.contains(x)
                and not other.contains(x)
                and rng.random() < 0.3
            }
            rep = check_cube_pair_bound(frozenset(A), cube, other, par)
            if rep.hypotheses_met:
                met += 1
                assert rep.all_passed
    assert met >= 100


# === cover boundary and drift ==============================================


def test_cover_bounds_exhaustive_small_boxes():
    t = compute_constants(P_SMALL)
    for side in (3, 4):
        for n in range(4, side * side + 1):
            for g in contours_on(side, n):
                for ell in range(6):
                    rep = check_coarse_cover_bounds(g, ell, P_SMALL)
                    assert rep.all_passed
                    top = t.b1 * g.size / 2.0 ** (P_SMALL.r * ell)
                    if top < 1.0:
                        names = [c.name for c in rep.checks]
                        assert "cutoff_forces_empty_cover" in names
                        assert rep.n_cubes == 0


def test_cover_cutoff_levels_are_empty():
    g = next(g for n in range(4, 10) for g in contours_on(3, n))
    rep = check_coarse_cover_bounds(g, 5, P_SMALL)
    assert "cutoff_forces_empty_cover" in [c.name for c in rep.checks]
    assert rep.all_passed and rep.n_cubes == 0
    low = check_coarse_cover_bounds(g, 0, P_SMALL)
    assert [c.name for c in low.checks] == [
        "inner_cubes_vs_interior_boundary",
        "interior_boundary_vs_support",
        "cover_difference_vs_support",
    ]
    with pytest.raises(ValueError):
        check_coarse_cover_bounds(g, -1, P_SMALL)


def test_cover_bounds_on_prescribed_interiors():
    rng = rng_from(P_SMALL.seed, 37)
    for _ in range(40):
        region = random_percolation_region(rng, 2, 8, float(rng.uniform(0.4, 0.9)))
        if not region:
            continue
        g = wrap(region)
        for ell in range(4):
            assert check_coarse_cover_bounds(g, ell, P_SMALL).all_passed


# === approximation radius ==================================================


def test_approximation_radius_examples():
    interior = box((0, 0), (3, 2))  # 12 of 16 sites of the level-1 cube
    bigger = interior | frozenset({(0, 3)})
    ring = boundaries(bigger).outer
    g1 = Contour(ring, 1, ((interior, -1),))
    g2 = Contour(ring, 1, ((bigger, -1),))
    same = approximation_radius(g1, g1, 1, P_EPS)
    assert same.actual == 0.0 and same.all_passed
    rep = approximation_radius(g1, g2, 1, P_EPS)
    assert rep.actual == pytest.approx(2.0)
    assert rep.all_passed and rep.actual <= rep.bound
    zero = approximation_radius(g1, g2, 1, P_SMALL)  # eps = 0 scales both sides out
    assert zero.actual == 0.0 and zero.bound == 0.0 and zero.all_passed


def test_approximation_radius_preconditions():
    interior = box((0, 0), (3, 2))
    ring = boundaries(interior).outer
    g1 = Contour(ring, 1, ((interior, -1),))
    flipped = Contour(ring, 1, ((interior, 1),))
    with pytest.raises(ValueError):
        approximation_radius(g1, flipped, 1, P_EPS)
    short = Contour(frozenset(sorted(ring)[:-1]), 1, ((interior, -1),))
    with pytest.raises(ValueError):
        approximation_radius(g1, short, 1, P_EPS)
    with pytest.raises(ValueError):
        approximation_radius(g1, g1, -1, P_EPS)


def test_approximation_radius_enumerated_pairs():
    groups: dict = {}
    for n in range(4, 10):
        for g in contours_on(3, n):
            cover = admissible_cover(g, 1, P_EPS)
            groups.setdefault((n, cover.region), []).append(g)
    pairs = 0
    for gs in groups.values():
        for i in range(len(gs)):
            for j in range(i + 1, len(gs)):
                assert approximation_radius(gs[i], gs[j], 1, P_EPS).all_passed
                pairs += 1
    assert pairs > 0


def test_approximation_radius_prescribed_pairs():
    rng = rng_from(P_SMALL.seed, 36)
    cube_sites = sorted(box((0, 0), (3, 3)))
    for _ in range(40):
        pick = lambda m: frozenset(cube_sites[i] for i in rng.permutation(16)[:m])
        A = pick(int(rng.integers(8, 17)))
        B = pick(int(rng.integers(8, 17)))
        ring = boundaries(A | B).outer
        g1 = Contour(ring, 1, ((A, -1),))
        g2 = Contour(ring, 1, ((B, -1),))
        rep = approximation_radius(g1, g2, 1, P_EPS)
        assert rep.all_passed
        assert rep.actual == pytest.approx(d2(A, B, 1.0))


# === image counts ==========================================================


def test_count_images_small_sizes_and_levels():
    region = centered_box(3, 2)
    none = count_coarse_images(2, 1, region, P_SMALL, cap=9)
    assert none.count == 0 and none.n_contours == 0 and none.all_passed
    n_star = next(n for n in range(4, 10) if contours_on(3, n))
    past = count_coarse_images(n_star, 6, region, P_SMALL, cap=9)
    assert past.count == 1 and past.all_passed
    with pytest.raises(ValueError):
        count_coarse_images(n_star, 0, region, P_SMALL, cap=9)


def test_count_images_sweep_small_boxes():
    for side, cap, sizes in ((3, 9, range(4, 10)), (4, 16, (5, 7))):
        region = centered_box(side, 2)
        for n in sizes:
            for ell in (1, 2):
                rep = count_coarse_images(n, ell, region, P_SMALL, cap=cap)
                assert rep.all_passed
                assert rep.count <= rep.n_contours
                assert (rep.count == 0) == (rep.n_contours == 0)
