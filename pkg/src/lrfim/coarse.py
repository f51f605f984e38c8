"""Coarse approximation of contour interiors by half-occupied grid cubes.

The minus interior of a contour is replaced, level by level, with the
union of the side-2^(r ell) grid cubes that hold at least half of it.
This module builds those covers, measures how far they may drift from
the interior in the root symmetric-difference pseudometric, and checks
the discrete-geometry bounds behind the construction on desk-scale
instances: axis projections of a set inside a rectangle, the boundary
forced through a face-sharing cube pair, the cover boundary and drift
rates, the approximation radius of interiors sharing a cover, and the
number of distinct cover regions over all contours of one size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .contour import BoundCheck, Contour, enumerate_origin_contours
from .entropy import compute_constants, cube_pair_constant, projection_constant
from .lattice import Cube, Rectangle, Region, boundaries, collection_boundaries, project
from .model import EXACT_CAP
from .params import Params

__all__ = [
    "AdmissibleCover",
    "ApproximationRadius",
    "CoarseCoverReport",
    "CoarseImageCount",
    "CubePairReport",
    "ProjectionReport",
    "admissible_cover",
    "approximation_radius",
    "check_coarse_cover_bounds",
    "check_cube_pair_bound",
    "check_projection_bound",
    "count_coarse_images",
    "d2",
]


# === covers ================================================================


@dataclass(frozen=True)
class AdmissibleCover:
    """Scale-(r ell) grid cubes holding at least half of an interior.

    region is the union of the cubes, inner_boundary the cubes with a
    face neighbour outside the collection, edge_boundary the (inside,
    outside) face pairs.  At level 0 the cubes are single sites and the
    region is the interior itself.
    """

    level: int
    cubes: frozenset  # of Cube, all at scale r * level
    region: Region
    inner_boundary: frozenset  # of Cube
    edge_boundary: frozenset  # of (Cube, Cube) pairs, first one inside


def admissible_cover(
    gamma: Contour, ell: int, p: Params, strict: bool = False
) -> AdmissibleCover:
    """Cover the minus interior of gamma with the grid cubes of side
    2^(r ell) that hold at least half of their sites in it.

    With strict=True a cube must hold strictly more than half.  The two
    conventions agree at level 0, where cubes are single sites, so the
    level-0 region equals the interior under either one.
    """
    if ell < 0:
        raise ValueError("cover level must be >= 0")
    m = p.r * ell
    counts: dict = {}
    for x in gamma.I_minus:
        a = tuple(c >> m for c in x)
        counts[a] = counts.get(a, 0) + 1
    full = 1 << (m * p.d)
    if strict:
        kept = [a for a, k in counts.items() if 2 * k > full]
    else:
        kept = [a for a, k in counts.items() if 2 * k >= full]
    cubes = frozenset(Cube(m, a) for a in kept)
    region = frozenset(x for c in cubes for x in c.sites())
    edges = collection_boundaries(cubes)
    return AdmissibleCover(ell, cubes, region, edges.inner, edges.edges)


def d2(A: Region, B: Region, eps: float) -> float:
    """Root symmetric-difference distance 2 eps |A Delta B|^(1/2).

    A pseudometric on finite regions for any eps >= 0; the disorder
    strength enters only as an overall scale.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return 2.0 * eps * math.sqrt(len(A ^ B))


# === projection and cube-pair bounds =======================================


class ProjectionReport(NamedTuple):
    checks: tuple
    hypotheses_met: bool
    projection_sizes: tuple  # per axis
    boundary_size: int  # exterior boundary sites of A inside the rectangle

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_projection_bound(
    A: Region, R: Rectangle, lam: float, p: Params
) -> ProjectionReport:
    """Sum of the axis projections of A inside a rectangle against
    c(d, lam) times the exterior boundary of A inside the rectangle.

    The extents must lie in a band [R0, 2 R0] for some R0 >= 2.  The
    occupancy hypothesis asks every projection to fill at most a lam
    fraction of its face; when it fails the comparison is skipped, not
    reported as a violation.
    """
    d = len(R.extents)
    if d != p.d:
        raise ValueError("rectangle dimension disagrees with the parameters")
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must be in (0, 1)")
    lo, hi = min(R.extents), max(R.extents)
    if lo < 2 or hi > 2 * lo:
        raise ValueError("extents must lie in [R0, 2 R0] for some R0 >= 2")
    sizes = tuple(len(project(A, R, i)[0]) for i in range(d))
    faces = [R.size() // e for e in R.extents]
    met = all(s <= lam * f for s, f in zip(sizes, faces))
    boundary = len(boundaries(A).outer & R.sites())
    lhs = float(sum(sizes))
    rhs = projection_constant(d, lam) * boundary
    check = BoundCheck(
        "projection_sum_vs_rectangle_boundary", lhs, rhs, lhs <= rhs if met else None
    )
    return ProjectionReport((check,), met, sizes, boundary)


class CubePairReport(NamedTuple):
    checks: tuple
    hypotheses_met: bool
    occupancies: tuple  # sites of A in the first cube, in the second
    boundary_size: int  # exterior boundary sites of A inside the union

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_cube_pair_bound(A: Region, cube: Cube, other: Cube, p: Params) -> CubePairReport:
    """Face area of a grid cube against b(d) times the exterior boundary
    of A inside the union of two face-sharing cubes, the first at least
    half filled by A and the second less than half.

    Face adjacency and both occupancy conditions are hypotheses; a pair
    missing them yields a skipped comparison, not a violation.  Cubes of
    different scales never share a face and are rejected outright.
    """
    if cube.scale != other.scale:
        raise ValueError("cube pair must share one scale")
    if len(cube.anchor) != p.d or len(other.anchor) != p.d:
        raise ValueError("cube dimension disagrees with the parameters")
    adjacent = sum(abs(a - b) for a, b in zip(cube.anchor, other.anchor)) == 1
    in_cube = sum(1 for x in A if cube.contains(x))
    in_other = sum(1 for x in A if other.contains(x))
    met = adjacent and 2 * in_cube >= cube.size and 2 * in_other < other.size
    union = frozenset(cube.sites()) | frozenset(other.sites())
    boundary = len(boundaries(A).outer & union)
    lhs = float(cube.side ** (p.d - 1))
    rhs = cube_pair_constant(p.d) * boundary
    check = BoundCheck(
        "face_area_vs_union_boundary", lhs, rhs, lhs <= rhs if met else None
    )
    return CubePairReport((check,), met, (in_cube, in_other), boundary)


# === cover boundary, drift, and image counts ===============================


class CoarseCoverReport(NamedTuple):
    checks: tuple
    n_cubes: int
    n_inner: int
    difference_size: int  # |region at ell  Delta  region at ell + 1|

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_coarse_cover_bounds(gamma: Contour, ell: int, p: Params) -> CoarseCoverReport:
    """Boundary and drift controls for the level-ell cover of gamma.

    Checked chain: the inner cube boundary against b1 |exterior boundary
    of the interior| / 2^(r ell (d-1)), that against b1 |gamma| at the
    same scale, and the symmetric difference between the level-ell and
    level-(ell+1) regions against b2 2^(r ell) |gamma|.  When
    b1 |gamma| / 2^(r ell (d-1)) drops below one the cover must be empty
    outright, and that is checked too.
    """
    if ell < 0:
        raise ValueError("cover level must be >= 0")
    t = compute_constants(p)
    cover = admissible_cover(gamma, ell, p)
    nxt = admissible_cover(gamma, ell + 1, p)
    ext = len(boundaries(gamma.I_minus).outer)
    denom = float(2 ** (p.r * ell * (p.d - 1)))
    mid = t.b1 * ext / denom
    top = t.b1 * gamma.size / denom
    diff = len(cover.region ^ nxt.region)
    drift = t.b2 * 2 ** (p.r * ell) * gamma.size
    checks = [
        BoundCheck(
            "inner_cubes_vs_interior_boundary",
            float(len(cover.inner_boundary)),
            mid,
            len(cover.inner_boundary) <= mid,
        ),
        BoundCheck("interior_boundary_vs_support", mid, top, mid <= top),
        BoundCheck("cover_difference_vs_support", float(diff), drift, diff <= drift),
    ]
    if top < 1.0:
        checks.append(
            BoundCheck(
                "cutoff_forces_empty_cover",
                float(len(cover.cubes)),
                0.0,
                not cover.cubes,
            )
        )
    return CoarseCoverReport(
        tuple(checks), len(cover.cubes), len(cover.inner_boundary), diff
    )


class ApproximationRadius(NamedTuple):
    checks: tuple
    actual: float
    bound: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def approximation_radius(
    gamma1: Contour, gamma2: Contour, ell: int, p: Params
) -> ApproximationRadius:
    """Distance between two interiors sharing a level-ell cover region,
    against the radius 4 eps b3_diam 2^(r ell / 2) |gamma|^(1/2).

    Both contours must have one support size and one cover region at
    this level.  The disorder strength scales both sides alike, so the
    pass flag compares the strength-free cores and stays meaningful when
    eps is zero; the reported values carry eps.
    """
    if ell < 0:
        raise ValueError("cover level must be >= 0")
    if gamma1.size != gamma2.size:
        raise ValueError("contours must have the same support size")
    one = admissible_cover(gamma1, ell, p)
    two = admissible_cover(gamma2, ell, p)
    if one.region != two.region:
        raise ValueError("contours must share the cover region at this level")
    t = compute_constants(p)
    core_actual = math.sqrt(len(gamma1.I_minus ^ gamma2.I_minus))
    core_bound = 2.0 * t.b3_diam * 2.0 ** (p.r * ell / 2.0) * math.sqrt(gamma1.size)
    actual = 2.0 * p.eps * core_actual
    bound = 2.0 * p.eps * core_bound
    check = BoundCheck(
        "interior_distance_vs_radius", actual, bound, core_actual <= core_bound
    )
    return ApproximationRadius((check,), actual, bound)


class CoarseImageCount(NamedTuple):
    checks: tuple
    count: int
    n_contours: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def count_coarse_images(
    n: int, ell: int, region: Region, p: Params, cap: int = EXACT_CAP
) -> CoarseImageCount:
    """Distinct level-ell cover regions over all size-n contours around
    the origin in the region, against exp{c4 ell^(kappa+1) n /
    2^(r ell (d-1))}, compared in log space.

    The rate starts at level 1.  Sizes below the smallest contour give
    zero images; levels past the cover cutoff give the empty region as
    the single image.
    """
    if ell < 1:
        raise ValueError("image counting starts at level 1")
    t = compute_constants(p)
    contours = enumerate_origin_contours(region, n, p, cap=cap)
    images = {admissible_cover(g, ell, p).region for g in contours}
    count = len(images)
    lhs = math.log(count) if count else -math.inf
    rhs = t.c4 * ell ** (t.kappa + 1.0) * n / 2 ** (p.r * ell * (p.d - 1))
    check = BoundCheck("log_image_count_vs_c4_rate", lhs, rhs, lhs <= rhs)
    return CoarseImageCount((check,), count, len(contours))
