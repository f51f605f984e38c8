"""Discrete geometry of Z^d: regions, dyadic cubes, boundaries, volumes,
coverings, projections.

A Site is a plain tuple of ints, a Region is a frozenset of sites.  All
metric notions use the l1 norm; adjacency means l1 distance 1.  The scale-m
grid cube anchored at x is prod_i [2^m x_i, 2^m (x_i + 1)), so grid cubes
of one scale tile Z^d and two of them share a face iff their anchors are
adjacent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

Site = tuple[int, ...]
Region = frozenset  # of Site


def as_region(sites: Iterable[Site]) -> Region:
    return frozenset(tuple(map(int, s)) for s in sites)


def box(lo: Site, hi: Site) -> Region:
    """All sites with lo_i <= x_i <= hi_i (inclusive corners)."""
    return frozenset(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))))


def centered_box(side: int, d: int) -> Region:
    """Side^d box roughly centered at the origin: coordinates in
    [-side//2, side - side//2 - 1]."""
    lo = -(side // 2)
    return box((lo,) * d, (lo + side - 1,) * d)


def l1(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


def neighbors(x: Site) -> Iterator[Site]:
    for i in range(len(x)):
        for s in (-1, 1):
            yield x[:i] + (x[i] + s,) + x[i + 1 :]


def closed_ball(x: Site) -> Iterator[Site]:
    """x and its 2d lattice neighbors (the l1 ball of radius 1)."""
    yield x
    yield from neighbors(x)


def bbox(region: Region) -> tuple[Site, Site]:
    if not region:
        raise ValueError("empty region")
    d = len(next(iter(region)))
    mins = tuple(min(s[i] for s in region) for i in range(d))
    maxs = tuple(max(s[i] for s in region) for i in range(d))
    return mins, maxs


def diameter(region: Region) -> int:
    """max l1 distance between two sites (0 for a singleton)."""
    mins, maxs = bbox(region)
    if len(region) <= 1:
        return 0
    # l1 diameter of a finite set is attained on extreme points; a safe exact
    # value needs the pairwise max, but for the region sizes handled here the
    # direct scan is affordable only for small sets, so use the standard
    # rewrite: max_{x,y} sum_i s_i (x_i - y_i) over sign vectors s.
    d = len(mins)
    best = 0
    for signs in itertools.product((1, -1), repeat=d):
        vals = [sum(s * c for s, c in zip(signs, site)) for site in region]
        best = max(best, max(vals) - min(vals))
    return best


# === cubes =================================================================


@dataclass(frozen=True, order=True)
class Cube:
    """Scale-m dyadic grid cube anchored at x: prod_i [2^m x_i, 2^m(x_i+1))."""

    scale: int
    anchor: Site

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("cube scale must be >= 0")

    @property
    def side(self) -> int:
        return 1 << self.scale

    @property
    def size(self) -> int:
        return self.side ** len(self.anchor)

    def low(self) -> Site:
        return tuple(a << self.scale for a in self.anchor)

    def high(self) -> Site:
        """Inclusive upper corner."""
        return tuple((a + 1 << self.scale) - 1 for a in self.anchor)

    def contains(self, x: Site) -> bool:
        return all(c >> self.scale == a for c, a in zip(x, self.anchor))

    def sites(self) -> Iterator[Site]:
        lo, hi = self.low(), self.high()
        return iter(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))))


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box: corner + positive extents, sites
    prod_i [corner_i, corner_i + extent_i)."""

    corner: Site
    extents: tuple[int, ...]

    def __post_init__(self):
        if len(self.corner) != len(self.extents):
            raise ValueError("corner and extents disagree on dimension")
        if any(e < 1 for e in self.extents):
            raise ValueError("extents must be >= 1")

    def sites(self) -> Region:
        return frozenset(
            itertools.product(
                *(range(c, c + e) for c, e in zip(self.corner, self.extents))
            )
        )

    def contains(self, x: Site) -> bool:
        return all(c <= v < c + e for v, c, e in zip(x, self.corner, self.extents))

    def size(self) -> int:
        return math.prod(self.extents)


def cube_dist(c1: Cube, c2: Cube) -> int:
    """Exact l1 distance between two cubes, per-axis interval gaps."""
    total = 0
    for a1, b1, a2, b2 in zip(c1.low(), c1.high(), c2.low(), c2.high()):
        total += max(0, a2 - b1, a1 - b2)
    return total


def site_cube_dist(x: Site, c: Cube) -> int:
    total = 0
    for v, a, b in zip(x, c.low(), c.high()):
        total += max(0, a - v, v - b)
    return total


def l1_distance(a, b) -> int:
    """l1 distance between sites, cubes, or non-empty regions (min over pairs).

    Site and cube arguments use closed forms; region pairs fall back to the
    pairwise minimum.
    """
    a_site = isinstance(a, tuple)
    b_site = isinstance(b, tuple)
    if a_site and b_site:
        return l1(a, b)
    if isinstance(a, Cube) and isinstance(b, Cube):
        return cube_dist(a, b)
    if isinstance(a, Cube) and b_site:
        return site_cube_dist(b, a)
    if a_site and isinstance(b, Cube):
        return site_cube_dist(a, b)
    ra = frozenset([a]) if a_site else a
    rb = frozenset([b]) if b_site else b
    if isinstance(ra, Cube) or isinstance(rb, Cube):
        ca, cb = ra, rb
        if isinstance(ca, Cube):
            return min(site_cube_dist(y, ca) for y in cb)
        return min(site_cube_dist(x, cb) for x in ca)
    if not ra or not rb:
        raise ValueError("empty region")
    return min(l1(x, y) for x in ra for y in rb)


# === volume and boundaries =================================================


class VolumeInfo(NamedTuple):
    volume: Region  # V = region plus every bounded complement component
    interior: Region  # I = V minus the region
    interior_components: tuple[Region, ...]  # nearest-neighbor components of I


def _components(sites: Region) -> tuple[Region, ...]:
    """Nearest-neighbor connected components, deterministic order
    (sorted by lexicographically smallest member)."""
    remaining = set(sites)
    comps = []
    while remaining:
        seed = next(iter(remaining))
        comp = {seed}
        queue = [seed]
        remaining.discard(seed)
        while queue:
            cur = queue.pop()
            for nb in neighbors(cur):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    queue.append(nb)
        comps.append(frozenset(comp))
    comps.sort(key=lambda c: min(c))
    return tuple(comps)


connected_components = _components


def volume_interior(region: Region) -> VolumeInfo:
    """Volume V = Z^d minus the unbounded complement component, and the
    interior I = V minus the region, split into connected components.

    Flood fill runs on the bounding box inflated by 1; every cell of the
    inflated shell belongs to the unbounded component.
    """
    if not region:
        return VolumeInfo(frozenset(), frozenset(), ())
    mins, maxs = bbox(region)
    lo = tuple(m - 1 for m in mins)
    hi = tuple(m + 1 for m in maxs)
    inside = lambda x: all(a <= v <= b for v, a, b in zip(x, lo, hi))
    start = lo
    seen = {start}
    queue = [start]
    while queue:
        cur = queue.pop()
        for nb in neighbors(cur):
            if nb not in seen and inside(nb) and nb not in region:
                seen.add(nb)
                queue.append(nb)
    pocket = frozenset(
        x
        for x in itertools.product(*(range(a, b + 1) for a, b in zip(mins, maxs)))
        if x not in region and x not in seen
    )
    comps = _components(pocket)
    return VolumeInfo(region | pocket, pocket, comps)


class Boundaries(NamedTuple):
    edges: frozenset  # of (x, y) with x in the region, y outside, adjacent
    inner: Region
    outer: Region


def boundaries(region: Region) -> Boundaries:
    edges = []
    inner = set()
    outer = set()
    for x in region:
        for y in neighbors(x):
            if y not in region:
                edges.append((x, y))
                inner.add(x)
                outer.add(y)
    return Boundaries(frozenset(edges), frozenset(inner), frozenset(outer))


def isoperimetric_check(region: Region) -> bool:
    """|Lambda|^((d-1)/d) <= |inner boundary|, compared exactly in integers."""
    if not region:
        raise ValueError("empty region")
    d = len(next(iter(region)))
    n = len(region)
    k = len(boundaries(region).inner)
    return n ** (d - 1) <= k**d


# === coverings and the cube graph ==========================================


def min_cover(region: Region, m: int) -> frozenset:
    """The grid m-cubes meeting the region (the minimal covering, since
    grid cubes tile Z^d)."""
    anchors = {tuple(c >> m for c in site) for site in region}
    return frozenset(Cube(m, a) for a in anchors)


def _below_threshold(dist: int, M: float, a: float, n: int) -> bool:
    """dist <= M * 2^(a n), safe for exponents far beyond float range."""
    if dist <= 0:
        return True
    exponent = math.log2(M) + a * n
    if exponent >= 63:
        return True  # every desk-scale distance is below 2^63
    if exponent <= -1:
        return False  # threshold < 1/2 < any positive integer distance
    return dist <= M * 2.0 ** (a * n)


class CubeGraph(NamedTuple):
    scale: int
    cubes: tuple  # of Cube, sorted
    edges: frozenset  # of (i, j) index pairs, i < j
    components: tuple  # of frozenset of Cube
    covered: tuple  # of Region, aligned with components: Lambda ^ G


def cube_graph(region: Region, n: int, M: float, a: float) -> CubeGraph:
    """Graph on min_cover(region, n) with edges where the cube distance is
    at most M 2^(a n), plus its connected components and the area of the
    region each component covers."""
    if not region:
        raise ValueError("empty region")
    cubes = tuple(sorted(min_cover(region, n)))
    k = len(cubes)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges = set()
    for i in range(k):
        for j in range(i + 1, k):
            if _below_threshold(cube_dist(cubes[i], cubes[j]), M, a, n):
                edges.add((i, j))
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    comp_list = sorted(groups.values(), key=lambda g: cubes[g[0]])
    components = tuple(frozenset(cubes[i] for i in g) for g in comp_list)
    by_cube = {}
    for ci, comp in enumerate(components):
        for c in comp:
            by_cube[c] = ci
    covered_sets: list[set] = [set() for _ in components]
    for site in region:
        anchor = tuple(c >> n for c in site)
        covered_sets[by_cube[Cube(n, anchor)]].add(site)
    return CubeGraph(
        n, cubes, frozenset(edges), components, tuple(map(frozenset, covered_sets))
    )


def collection_boundaries(cubes: frozenset) -> Boundaries:
    """Inner/outer/edge boundaries of a same-scale cube collection, via the
    anchor bijection (same-scale grid cubes share a face iff their anchors
    are adjacent)."""
    if not cubes:
        return Boundaries(frozenset(), frozenset(), frozenset())
    scales = {c.scale for c in cubes}
    if len(scales) > 1:
        raise ValueError("mixed scales in cube collection")
    (m,) = scales
    anchors = frozenset(c.anchor for c in cubes)
    b = boundaries(anchors)
    lift = lambda a: Cube(m, a)
    return Boundaries(
        frozenset((lift(x), lift(y)) for x, y in b.edges),
        frozenset(map(lift, b.inner)),
        frozenset(map(lift, b.outer)),
    )


# === projections ===========================================================


def project(A: Region, R: Rectangle, axis: int):
    """Projection of A ∩ R along `axis` onto the rectangle face, with the
    good/bad split: a face point is occupied when its full line through R
    meets A, and good when the line also meets R minus A.

    Returns (occupied, good, bad) as frozensets of (d-1)-tuples.
    """
    d = len(R.corner)
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for d={d}")
    lo = R.corner[axis]
    hi = lo + R.extents[axis]
    meets_a: set = set()
    meets_rest: set = set()
    in_r = A if isinstance(A, frozenset) else frozenset(A)
    base = lambda x: x[:axis] + x[axis + 1 :]
    for x in R.sites():
        b = base(x)
        if x in in_r:
            meets_a.add(b)
        else:
            meets_rest.add(b)
    occupied = frozenset(meets_a)
    good = frozenset(meets_a & meets_rest)
    return occupied, good, occupied - good


# === random-region generators for fuzz campaigns ===========================


def random_percolation_region(rng, d: int, side: int, p: float) -> Region:
    """Uniform site percolation in a centered side^d box (non-empty)."""
    cells = sorted(centered_box(side, d))
    while True:
        mask = rng.random(len(cells)) < p
        sites = frozenset(c for c, m in zip(cells, mask) if m)
        if sites:
            return sites


def random_polyomino(rng, d: int, size: int) -> Region:
    """Connected set grown from the origin by uniform boundary accretion."""
    current = {(0,) * d}
    frontier = set(neighbors((0,) * d))
    while len(current) < size:
        pick = sorted(frontier)[rng.integers(len(frontier))]
        current.add(pick)
        frontier.discard(pick)
        frontier.update(nb for nb in neighbors(pick) if nb not in current)
    return frozenset(current)


def random_cube_union(rng, d: int, n_cubes: int, max_scale: int, spread: int) -> Region:
    """Union of random grid cubes at random scales inside a spread^d window."""
    sites: set = set()
    for _ in range(n_cubes):
        m = int(rng.integers(0, max_scale + 1))
        lim = max(1, spread >> m)
        anchor = tuple(int(v) for v in rng.integers(-lim, lim, size=d))
        sites.update(Cube(m, anchor).sites())
    return frozenset(sites)
