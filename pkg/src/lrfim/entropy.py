"""Counting layer: every named constant of the coarse-graining estimates,
subordinated cube collections, partial volumes, a graph-covering utility,
and desk-scale verification of the counting bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

from .contour import (
    BoundCheck,
    Contour,
    enumerate_origin_contours,
    peierls_constant,
    peierls_feasible,
)
from .lattice import Cube, Region, diameter, min_cover
from .model import EXACT_CAP, lattice_constant
from .params import Params, feasibility_threshold, kappa_constants

__all__ = [
    "PROJECTION_LAMBDA",
    "FORMULAS",
    "ConstantTable",
    "SubordinationCount",
    "VolumeBound",
    "CoveringBound",
    "FamilyBound",
    "CoveringCount",
    "projection_constant",
    "cube_pair_constant",
    "compute_constants",
    "is_subordinated",
    "count_subordinated",
    "top_scale",
    "partial_volume",
    "cover_graph_by_subgraphs",
    "check_volume_bound",
    "check_covering_bound",
    "check_family_bound",
    "check_covering_counts",
]

# The admissibility threshold lambda = 7/8 used by every bound in this
# package; the lemma chain needs lambda > 3/4 and 7/8 is the value the
# downstream constants are computed with.
PROJECTION_LAMBDA = 0.875


# === geometric constants ====================================================


def projection_constant(d: int, lam: float) -> float:
    """Axis-projection constant c(d, lam), by its recursion:

        c(2, .) = 4
        c(d, lam) = d/(d-1) [c(d-1, (lam+1)/2) + (d-1) 2^(d-1)/(1-lam)]

    which closes to 2d + (d-2) d 2^(d-1)/(1-lam).  Defined for d >= 2 and
    0 < lam < 1; the package uses lam = 7/8 throughout.
    """
    if d < 2:
        raise ValueError("projection constant needs d >= 2")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie strictly between 0 and 1, got {lam}")
    if d == 2:
        return 4.0
    inner = projection_constant(d - 1, (lam + 1.0) / 2.0)
    return d / (d - 1.0) * (inner + (d - 1.0) * 2.0 ** (d - 1) / (1.0 - lam))


def cube_pair_constant(d: int) -> float:
    """b = max{8, (2 c(d, 7/8) + 1) 2^(1-1/d)}: a half-occupied cube next to
    a less-than-half-occupied one forces at least 2^(m(d-1))/b exterior
    boundary sites of the occupying set inside the pair (side 2^m)."""
    c = projection_constant(d, PROJECTION_LAMBDA)
    return max(8.0, (2.0 * c + 1.0) * 2.0 ** (1.0 - 1.0 / d))


FORMULAS = {
    "c_alpha": "sum over nonzero y in Z^d of |y|_1^(-alpha); exact shell "
    "series up to a cutoff with the tail below tol",
    "kappa1": "J 2^(d-1+alpha) e^(d-1)/(alpha-d) + 3 zeta(a/(d+1)-1); nan "
    "when a <= 2(d+1), where the zeta argument drops to 1 and the series "
    "diverges",
    "kappa2": "kappa1 (1/J + 1)",
    "c2": "min{J c_alpha/((2d+1) 2^alpha), 1/((2d+1) 2^(alpha+1)) - "
    "12 kappa2 / M^min(alpha-d,1)}; positive iff M above M_threshold",
    "M_threshold": "(24 kappa2 2^(alpha+1) (2d+1))^(1/min(alpha-d,1))",
    "c_proj": "projection constant c(d, 7/8): c(2,.) = 4, c(d, lam) = "
    "d/(d-1) [c(d-1, (lam+1)/2) + (d-1) 2^(d-1)/(1-lam)]",
    "b": "max{8, (2 c_proj + 1) 2^(1-1/d)}",
    "b1": "2d b: each non-admissible face neighbor of an inner-boundary "
    "cube meets >= 2^(rl(d-1))/b exterior boundary sites, and a site lies "
    "in at most 2d such cube pairs",
    "b2": "b 2^(rd+1)",
    "b3_diam": "2 sqrt(b2), the approximation-radius constant; distinct "
    "from b3_vol though the two are conventionally written with one symbol",
    "b3_vol": "2 (b3' + 1), b3' = max{2^(r-d+2) (2 + a/(d-1)) "
    "(b_v + log_{2^r}(2 M d^a) + 3)^((r-d-1)/log2 a), 3 + log_{2^r}(2M)}, "
    "b_v = (a + 2 + log_{2^r}(2M))/(a - 1); the first branch's exponent "
    "mix is used as stated, not re-derived, so campaigns test only the "
    "final inequality",
    "b4": "max{2^(d+1+r(1-1/d)(abar/(abar-1)+1) bbar), 1/min_j (j v 1)^kappa "
    "2^(-r a' j)} over integers 0 <= j <= bbar, with abar = a + 1 - 1/d",
    "b4p": "2 (16 M d)^d b4 2^(r a')",
    "b5": "(rd+1) ln 2 + 2 + d ln 3",
    "b6": "2 b5 b3_vol (b4 + b4p)",
    "c4": "b6 b1 ((d-1)a/a')^(kappa+1) ceil(2^(r a'/a)) + c4' + 2d b1 ln 2, "
    "where c4' = [1 + ln(2d (b4+b4p) ((d-1)a/a')^kappa ceil(2^(r a'/a))) "
    "+ kappa + ((d-1)(a d/a' - 1) - 1) r ln 2] 2 b1",
    "a_prime": "(1 - 1/d)/(a - 1/d)",
    "kappa": "(d + 1 + r (1 - 1/d) b_bar)/log2(a + 1 - 1/d)",
    "b_bar": "(abar + 1 + log_{2^r}(2M))/(abar - 1), abar = a + 1 - 1/d",
}


@dataclass(frozen=True)
class ConstantTable:
    """Every named constant of the energy and counting bounds, evaluated
    from its defining formula at one parameter point.

    Pure function of Params (tol included), so two computations from equal
    Params are bit-identical.  The formula behind each field is in
    FORMULAS.  kappa1, kappa2, c2 and M_threshold are nan when the zeta
    series inside kappa1 diverges (a <= 2(d+1), possible only under an
    overridden a); `notes` says so and `feasible` is False then.
    """

    c_alpha: float
    kappa1: float
    kappa2: float
    c2: float
    M_threshold: float
    c_proj: float
    b: float
    b1: float
    b2: float
    b3_diam: float
    b3_vol: float
    b4: float
    b4p: float
    b5: float
    b6: float
    c4: float
    a_prime: float
    kappa: float
    b_bar: float
    feasible: bool
    notes: tuple

    def as_rows(self) -> tuple:
        """(name, value, formula) for each numeric field, in field order."""
        return tuple(
            (f.name, getattr(self, f.name), FORMULAS[f.name])
            for f in fields(self)
            if f.name in FORMULAS
        )


@lru_cache(maxsize=64)
def compute_constants(p: Params) -> ConstantTable:
    """Evaluate the full constant table at p.

    d >= 2 is required: the projection recursion bases at d = 2 and the
    cube-pair geometry has no d = 1 analogue.  a must exceed 1 (the volume
    constant divides by a - 1 and takes log2(a)).
    """
    if p.d < 2:
        raise ValueError("constants are defined for d >= 2")
    if p.a <= 1.0:
        raise ValueError("counting constants need a > 1")
    d, r, a, M = p.d, p.r, p.a, p.M
    ln2 = math.log(2.0)

    def logr(x: float) -> float:
        return math.log2(x) / r

    c_alpha = lattice_constant(p).c_alpha
    k1, k2 = kappa_constants(d, p.alpha, p.J, a)
    c2 = peierls_constant(p)
    m_thr = feasibility_threshold(d, p.alpha, p.J, a)
    notes = []
    if math.isnan(k1):
        notes.append(
            "kappa1 undefined for this a (zeta argument <= 1); kappa2, c2 "
            "and M_threshold are nan with it"
        )

    c_proj = projection_constant(d, PROJECTION_LAMBDA)
    b = cube_pair_constant(d)
    b1 = 2.0 * d * b
    b2 = b * 2.0 ** (r * d + 1)
    b3_diam = 2.0 * math.sqrt(b2)

    b_v = (a + 2.0 + logr(2.0 * M)) / (a - 1.0)
    base = b_v + logr(2.0 * M * d**a) + 3.0
    if base <= 0.0:
        raise ValueError("M too small for the displayed volume constant")
    b3p = max(
        2.0 ** (r - d + 2) * (2.0 + a / (d - 1.0)) * base ** ((r - d - 1.0) / math.log2(a)),
        3.0 + logr(2.0 * M),
    )
    b3_vol = 2.0 * (b3p + 1.0)

    a_bar = a + 1.0 - 1.0 / d
    a_prime = (1.0 - 1.0 / d) / (a - 1.0 / d)
    b_bar = (a_bar + 1.0 + logr(2.0 * M)) / (a_bar - 1.0)
    kappa = (d + 1.0 + r * (1.0 - 1.0 / d) * b_bar) / math.log2(a_bar)
    b4_floor = min(
        max(j, 1) ** kappa * 2.0 ** (-r * a_prime * j)
        for j in range(int(math.floor(max(b_bar, 0.0))) + 1)
    )
    b4 = max(
        2.0 ** (d + 1.0 + r * (1.0 - 1.0 / d) * (a_bar / (a_bar - 1.0) + 1.0) * b_bar),
        1.0 / b4_floor,
    )
    b4p = 2.0 * (16.0 * M * d) ** d * b4 * 2.0 ** (r * a_prime)
    b5 = (r * d + 1.0) * ln2 + 2.0 + d * math.log(3.0)
    b6 = 2.0 * b5 * b3_vol * (b4 + b4p)

    stretch = (d - 1.0) * a / a_prime
    lift = math.ceil(2.0 ** (r * a_prime / a))
    c4p = (
        1.0
        + math.log(2.0 * d)
        + math.log(b4 + b4p)
        + kappa * math.log(stretch)
        + math.log(lift)
        + kappa
        + ((d - 1.0) * (a * d / a_prime - 1.0) - 1.0) * ln2 * r
    ) * 2.0 * b1
    c4 = b6 * b1 * stretch ** (kappa + 1.0) * lift + c4p + 2.0 * d * b1 * ln2

    return ConstantTable(
        c_alpha=c_alpha,
        kappa1=k1,
        kappa2=k2,
        c2=c2,
        M_threshold=m_thr,
        c_proj=c_proj,
        b=b,
        b1=b1,
        b2=b2,
        b3_diam=b3_diam,
        b3_vol=b3_vol,
        b4=b4,
        b4p=b4p,
        b5=b5,
        b6=b6,
        c4=c4,
        a_prime=a_prime,
        kappa=kappa,
        b_bar=b_bar,
        feasible=peierls_feasible(p),
        notes=tuple(notes),
    )


# === subordinated collections ==============================================


class SubordinationCount(NamedTuple):
    exact: int
    bound: float  # (e 2^((m-n)d) |coarse| / V)^V, inf on float overflow


def is_subordinated(fine: Iterable[Cube], coarse: Iterable[Cube]) -> bool:
    """True when every fine cube lies inside some coarse cube (dyadic grid
    cubes nest, so containment is an anchor shift)."""
    coarse_by_scale = {}
    for c in coarse:
        coarse_by_scale.setdefault(c.scale, set()).add(c.anchor)
    for f in fine:
        if not any(
            m >= f.scale and tuple(x >> (m - f.scale) for x in f.anchor) in anchors
            for m, anchors in coarse_by_scale.items()
        ):
            return False
    return True


def count_subordinated(coarse: Iterable[Cube], n: int, V: int) -> SubordinationCount:
    """Number of size-V collections of scale-n cubes subordinated to
    `coarse`: exactly C(2^((m-n)d) |coarse|, V), plus the float bound
    (e 2^((m-n)d) |coarse| / V)^V."""
    if V < 0:
        raise ValueError("V must be >= 0")
    cubes = frozenset(coarse)
    if not cubes:
        return SubordinationCount(1 if V == 0 else 0, 1.0 if V == 0 else 0.0)
    scales = {c.scale for c in cubes}
    if len(scales) != 1:
        raise ValueError("coarse cubes must share one scale")
    m = scales.pop()
    if not 0 <= n <= m:
        raise ValueError(f"fine scale must satisfy 0 <= n <= {m}, got {n}")
    d = len(next(iter(cubes)).anchor)
    slots = (1 << ((m - n) * d)) * len(cubes)
    exact = math.comb(slots, V)
    if V == 0:
        bound = 1.0
    else:
        try:
            bound = (math.e * slots / V) ** V
        except OverflowError:
            bound = math.inf
    return SubordinationCount(exact, bound)


# === partial volumes =======================================================


def top_scale(region: Region, r: int) -> int:
    """Smallest n >= 0 with 2^(rn) >= l1-diameter; 0 for diameter <= 1.
    Integer arithmetic throughout, so exact at any size."""
    dia = diameter(region)
    n = 0
    while (1 << (r * n)) < dia:
        n += 1
    return n


def _partial_volume(region: Region, ell: int, r: int) -> int:
    return sum(len(min_cover(region, r * n)) for n in range(ell, top_scale(region, r) + 1))


def partial_volume(region: Region, ell: int, p: Params) -> int:
    """V_r^ell: total size of the minimal scale-rn coverings of the region
    for n from ell up to the top scale (0 when ell is past it)."""
    if not region:
        raise ValueError("partial volume needs a non-empty region")
    if ell < 0:
        raise ValueError("ell must be >= 0")
    return _partial_volume(region, ell, p.r)


# === graph covering ========================================================


def cover_graph_by_subgraphs(graph: Mapping, k: int) -> tuple:
    """Cover a connected graph by at most ceil(|v|/k) connected vertex sets
    of size at most 2k.

    `graph` maps each vertex to its neighbors (symmetrized internally).
    A closed walk along a DFS spanning tree visits 2|v|-1 vertices; cutting
    it into stretches of 2k consecutive visits gives the cover: each
    stretch is connected through tree edges and ceil((2|v|-1)/(2k)) never
    exceeds ceil(|v|/k).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    verts = sorted(graph)
    if not verts:
        raise ValueError("graph is empty")
    adj = {}
    for v in verts:
        for w in graph[v]:
            if w not in graph:
                raise ValueError(f"edge endpoint {w!r} is not a vertex")
            if w != v:
                adj.setdefault(v, set()).add(w)
                adj.setdefault(w, set()).add(v)
        adj.setdefault(v, set())
    root = verts[0]
    walk = [root]
    seen = {root}
    stack = [(root, iter(sorted(adj[root])))]
    while stack:
        v, it = stack[-1]
        for w in it:
            if w not in seen:
                seen.add(w)
                walk.append(w)
                stack.append((w, iter(sorted(adj[w]))))
                break
        else:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])
    if len(seen) != len(verts):
        raise ValueError("graph is not connected")
    return tuple(frozenset(walk[i : i + 2 * k]) for i in range(0, len(walk), 2 * k))


# === desk-scale checks of the counting bounds ==============================


class VolumeBound(NamedTuple):
    checks: tuple
    partial_volume: int
    cover_size: int
    small_diameter: bool

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_volume_bound(gamma: Contour, ell: int, p: Params) -> VolumeBound:
    """V_r^ell of the contour support against b3_vol (ell v 1) |cover|;
    when the support diameter is at most 2^(2r+1) M the sharper
    (3 + log_{2^r}(2M)) |cover| branch is checked too."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    tbl = compute_constants(p)
    sp = gamma.support
    pv = _partial_volume(sp, ell, p.r)
    cover = len(min_cover(sp, p.r * ell))
    rhs = tbl.b3_vol * max(ell, 1) * cover
    checks = [BoundCheck("partial_volume_vs_b3_vol", float(pv), rhs, pv <= rhs)]
    small = diameter(sp) <= 2.0 ** (2 * p.r + 1) * p.M
    if small:
        rhs_small = (3.0 + math.log2(2.0 * p.M) / p.r) * cover
        checks.append(
            BoundCheck(
                "partial_volume_small_diameter_branch",
                float(pv),
                rhs_small,
                pv <= rhs_small,
            )
        )
    return VolumeBound(tuple(checks), pv, cover, small)


class CoveringBound(NamedTuple):
    checks: tuple
    cover_size: int
    branch: str  # "below_step" (ell < j) or "at_or_above_step"

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_covering_bound(gamma: Contour, ell: int, j: int, p: Params) -> CoveringBound:
    """Minimal-covering size of the contour support against its decay
    bound: b4 (ell v 1)^kappa 2^(-r a' ell) |gamma| below the removal step
    j, and b4' ell^kappa (|gamma| / 2^(r (a'/a) ell) v 1) from j on."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if j < 1:
        raise ValueError("removal steps start at 1")
    tbl = compute_constants(p)
    n = gamma.size
    cover = len(min_cover(gamma.support, p.r * ell))
    if ell < j:
        rhs = tbl.b4 * max(ell, 1) ** tbl.kappa * 2.0 ** (-p.r * tbl.a_prime * ell) * n
        name, branch = "cover_size_vs_b4_rate", "below_step"
    else:
        rhs = tbl.b4p * ell**tbl.kappa * max(n / 2.0 ** (p.r * (tbl.a_prime / p.a) * ell), 1.0)
        name, branch = "cover_size_vs_b4p_rate", "at_or_above_step"
    check = BoundCheck(name, float(cover), rhs, cover <= rhs)
    return CoveringBound((check,), cover, branch)


class FamilyBound(NamedTuple):
    checks: tuple
    count: int
    examined: int
    collections: tuple  # of frozenset of Cube, sorted by anchors

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_family_bound(
    ell: int, V: int, d: int, r: int, budget: int = 200_000
) -> FamilyBound:
    """Enumerate the scale-rl cube collections whose union B has partial
    volume exactly V and satisfies B inside [-diam(B), diam(B)]^d, and
    compare the count to e^(b5 V) in log space.

    The partial-volume sum has at least one term per scale, so the top
    scale of B is at most ell + V - 1 and B lives in the box of radius
    2^(r(ell+V-1)); similarly a size-c collection has anchor diameter at
    most 2^(r(V-c)), which confines every later anchor to a shrinking l1
    ball around the first one.  Anchors are enumerated inside the box
    with extension candidates drawn from those balls, and subtrees are
    pruned once the anchor diameter alone forces a partial volume above
    V.  `examined` counts evaluated collections; past `budget` the search
    errors out rather than returning a partial count.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if V < 1:
        raise ValueError("V must be >= 1")
    if d < 1 or r < 1:
        raise ValueError("d and r must be >= 1")
    m = r * ell
    side = 1 << m
    d_max = 1 << (r * (ell + V - 1))
    lo, hi = -(d_max >> m) - 1, d_max >> m
    anchors = sorted(itertools.product(range(lo, hi + 1), repeat=d))
    index = {z: i for i, z in enumerate(anchors)}
    sign_vecs = tuple(itertools.product((1, -1), repeat=d))
    offsets_by_radius = {}
    for c in range(1, V):
        radius = 1 << (r * max(V - c - 1, 0))
        if radius not in offsets_by_radius and (2 * radius + 1) ** d <= len(anchors):
            offsets_by_radius[radius] = [
                o
                for o in itertools.product(range(-radius, radius + 1), repeat=d)
                if sum(map(abs, o)) <= radius
            ]
    b5 = (r * d + 1.0) * math.log(2.0) + 2.0 + d * math.log(3.0)

    found = []
    examined = 0

    def box_ok(sites: frozenset) -> bool:
        dia = diameter(sites)
        return all(abs(c) <= dia for x in sites for c in x)

    def visit(cand: list, proj: list) -> bool:
        """Test the collection; False when no extension can reach V."""
        nonlocal examined
        examined += 1
        if examined > budget:
            raise ValueError(f"enumeration budget {budget} exceeded")
        # exact l1 diameter of the anchor set; the union's diameter is at
        # least side * that, which caps the reachable top scale from below
        adiam = max(mx - mn for mn, mx in proj)
        n_min = 0
        while (1 << (r * n_min)) < side * adiam:
            n_min += 1
        if len(cand) + max(n_min - ell, 0) > V:
            return False
        sites = frozenset(
            itertools.chain.from_iterable(Cube(m, a).sites() for a in cand)
        )
        if _partial_volume(sites, ell, r) == V and box_ok(sites):
            found.append(frozenset(Cube(m, a) for a in cand))
        return True

    def extend(prefix: list, proj: list, z0, last_index: int) -> None:
        if len(prefix) >= V:
            return
        radius = 1 << (r * max(V - len(prefix) - 1, 0))
        if radius in offsets_by_radius:
            near = (
                index[z]
                for o in offsets_by_radius[radius]
                if (z := tuple(x + y for x, y in zip(z0, o))) in index
            )
            cand_indices = sorted(i for i in near if i > last_index)
        else:
            cand_indices = range(last_index + 1, len(anchors))
        for i in cand_indices:
            z = anchors[i]
            vals = [sum(s * c for s, c in zip(sv, z)) for sv in sign_vecs]
            new_proj = [(min(mn, v), max(mx, v)) for (mn, mx), v in zip(proj, vals)]
            cand = prefix + [z]
            if visit(cand, new_proj):
                extend(cand, new_proj, z0, i)

    for i0, z0 in enumerate(anchors):
        proj0 = [(v, v) for v in (sum(s * c for s, c in zip(sv, z0)) for sv in sign_vecs)]
        if visit([z0], proj0):
            extend([z0], proj0, z0, i0)
    count = len(found)
    lhs = math.log(count) if count else -math.inf
    check = BoundCheck("log_family_count_vs_b5V", lhs, b5 * V, lhs <= b5 * V)
    ordered = tuple(
        sorted(found, key=lambda s: tuple(sorted(c.anchor for c in s)))
    )
    return FamilyBound((check,), count, examined, ordered)


class CoveringCount(NamedTuple):
    checks: tuple
    count: int
    n_contours: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_covering_counts(
    n: int, ell: int, region: Region, p: Params, cap: int = EXACT_CAP
) -> CoveringCount:
    """Distinct minimal scale-rl coverings over all enumerated size-n
    contours around the origin, against exp{b6 (ell v 1)^(kappa+1)
    (n / 2^(r (a'/a) ell) v 1)} in log space."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    tbl = compute_constants(p)
    contours = enumerate_origin_contours(region, n, p, cap=cap)
    covers = {min_cover(g.support, p.r * ell) for g in contours}
    count = len(covers)
    exponent = (
        tbl.b6
        * max(ell, 1) ** (tbl.kappa + 1.0)
        * max(n / 2.0 ** (p.r * (tbl.a_prime / p.a) * ell), 1.0)
    )
    lhs = math.log(count) if count else -math.inf
    check = BoundCheck("log_covering_count_vs_b6_rate", lhs, exponent, lhs <= exponent)
    return CoveringCount((check,), count, len(contours))
