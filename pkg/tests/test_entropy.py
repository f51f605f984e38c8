"""Entropy tests: the constant table, subordination counts, partial
volumes, graph covering, and the desk-scale counting bound checks."""

import itertools
import math

import pytest

from lrfim.contour import Contour, enumerate_origin_contours, gamma_r_partition
from lrfim.entropy import (
    FORMULAS,
    PROJECTION_LAMBDA,
    check_covering_bound,
    check_covering_counts,
    check_family_bound,
    check_volume_bound,
    compute_constants,
    count_subordinated,
    cover_graph_by_subgraphs,
    cube_pair_constant,
    is_subordinated,
    partial_volume,
    projection_constant,
    top_scale,
)
from lrfim.lattice import (
    Cube,
    box,
    centered_box,
    min_cover,
    random_percolation_region,
    random_polyomino,
)
from lrfim.params import Params, rng_from

P2 = Params(d=2, alpha=4.0)
P3 = Params()
# small coarse-graining scales so desk-sized sets split into several parts
P_SMALL = Params(d=2, alpha=4.0, M=2, a=3, delta=4, r=2)


# === constants =============================================================


def test_projection_constant_recursion_closes():
    # the recursion telescopes to 2d + (d-2) d 2^(d-1) / (1-lam)
    for d in (2, 3, 4, 5):
        for lam in (0.76, 0.8, 0.875, 0.95):
            got = projection_constant(d, lam)
            closed = 2 * d + (d - 2) * d * 2 ** (d - 1) / (1.0 - lam)
            assert math.isclose(got, closed, rel_tol=1e-12)
    assert projection_constant(2, 0.1) == 4.0
    assert projection_constant(2, PROJECTION_LAMBDA) == 4.0
    assert projection_constant(3, PROJECTION_LAMBDA) == 102.0
    with pytest.raises(ValueError):
        projection_constant(1, 0.875)
    with pytest.raises(ValueError):
        projection_constant(3, 1.0)
    with pytest.raises(ValueError):
        projection_constant(3, 0.0)


def test_cube_pair_constant_values():
    assert math.isclose(cube_pair_constant(2), 9.0 * math.sqrt(2.0), rel_tol=1e-14)
    assert math.isclose(cube_pair_constant(3), 205.0 * 2.0 ** (2.0 / 3.0), rel_tol=1e-14)
    # the geometric branch dominates the flat floor of 8 for every d >= 2
    for d in (2, 3, 4, 5, 6):
        assert cube_pair_constant(d) > 8.0


def test_constant_table_paper_defaults():
    assert (P3.a, P3.delta, P3.r) == (12.0, 4.0, 20)
    t = compute_constants(P3)
    assert math.isclose(
        t.b5, 61.0 * math.log(2.0) + 2.0 + 3.0 * math.log(3.0), rel_tol=1e-14
    )
    assert t.c_proj == 102.0
    assert math.isclose(t.b, 205.0 * 2.0 ** (2.0 / 3.0), rel_tol=1e-14)
    assert math.isclose(t.b1, 6.0 * t.b, rel_tol=1e-14)
    assert math.isclose(t.b2, t.b * 2.0**61, rel_tol=1e-14)
    assert math.isclose(t.b3_diam, 2.0 * math.sqrt(t.b2), rel_tol=1e-14)
    rows = t.as_rows()
    assert [name for name, _, _ in rows] == list(FORMULAS)
    for _, value, formula in rows:
        assert math.isfinite(value) and value > 0
        assert formula
    assert t.feasible and t.notes == ()

    # re-derive the tower from the written formulas as a transcription check
    d, r, a, M = 3, 20, 12.0, P3.M
    logr = lambda x: math.log2(x) / r
    a_bar = a + 1 - 1 / 3
    a_prime = (1 - 1 / 3) / (a - 1 / 3)
    b_bar = (a_bar + 1 + logr(2 * M)) / (a_bar - 1)
    kappa = (d + 1 + r * (1 - 1 / d) * b_bar) / math.log2(a_bar)
    assert math.isclose(t.a_prime, a_prime, rel_tol=1e-14)
    assert math.isclose(t.b_bar, b_bar, rel_tol=1e-14)
    assert math.isclose(t.kappa, kappa, rel_tol=1e-14)
    b4_floor = min(
        max(j, 1) ** kappa * 2.0 ** (-r * a_prime * j)
        for j in range(int(b_bar) + 1)
    )
    b4 = max(
        2.0 ** (d + 1 + r * (1 - 1 / d) * (a_bar / (a_bar - 1) + 1) * b_bar),
        1.0 / b4_floor,
    )
    assert math.isclose(t.b4, b4, rel_tol=1e-12)
    assert math.isclose(t.b4p, 2.0 * (16 * M * d) ** d * b4 * 2.0 ** (r * a_prime), rel_tol=1e-12)
    assert math.isclose(t.b6, 2.0 * t.b5 * t.b3_vol * (t.b4 + t.b4p), rel_tol=1e-12)
    stretch = (d - 1) * a / a_prime
    lift = math.ceil(2.0 ** (r * a_prime / a))
    c4p = (
        1.0
        + math.log(2 * d * (b4 + t.b4p) * stretch**kappa * lift)
        + kappa
        + ((d - 1) * (a * d / a_prime - 1) - 1) * math.log(2.0) * r
    ) * 2.0 * t.b1
    c4 = t.b6 * t.b1 * stretch ** (kappa + 1) * lift + c4p + 2 * d * t.b1 * math.log(2.0)
    assert math.isclose(t.c4, c4, rel_tol=1e-12)


def test_constant_table_d2_and_reproducibility():
    t = compute_constants(P2)
    assert t.c_proj == 4.0
    assert math.isclose(t.b, 9.0 * math.sqrt(2.0), rel_tol=1e-14)
    assert math.isclose(t.b1, 36.0 * math.sqrt(2.0), rel_tol=1e-14)
    assert t.feasible
    again = compute_constants(Params(d=2, alpha=4.0))
    assert again == t and again is t


def test_constant_table_divergent_override():
    t = compute_constants(P_SMALL)
    for name in ("kappa1", "kappa2", "c2", "M_threshold"):
        assert math.isnan(getattr(t, name))
    assert not t.feasible
    assert t.notes and "kappa1" in t.notes[0]
    for name in ("c_proj", "b", "b1", "b2", "b3_diam", "b3_vol", "b4", "b4p", "b5", "b6", "c4"):
        v = getattr(t, name)
        assert math.isfinite(v) and v > 0
    with pytest.raises(ValueError):
        compute_constants(Params(d=1, alpha=2.5, M=1.0))
    with pytest.raises(ValueError):
        compute_constants(Params(d=2, alpha=4.0, M=2.0, a=0.5))


# === subordination =========================================================


def test_subordination_basics():
    c = Cube(1, (0, 0))
    assert count_subordinated([c], 0, 2) == (6, pytest.approx((math.e * 4 / 2) ** 2))
    assert count_subordinated([c], 0, 0) == (1, 1.0)
    assert count_subordinated([], 0, 0) == (1, 1.0)
    assert count_subordinated([], 0, 3) == (0, 0.0)
    assert is_subordinated([Cube(0, (1, 1))], [c])
    assert not is_subordinated([Cube(0, (2, 0))], [c])
    assert is_subordinated([], [c])
    assert is_subordinated([c], [c])
    # negative anchors shift correctly: cube of sites -4..-1 contains -2
    assert is_subordinated([Cube(0, (-2, -2))], [Cube(2, (-1, -1))])
    with pytest.raises(ValueError):
        count_subordinated([c], 0, -1)
    with pytest.raises(ValueError):
        count_subordinated([c], 2, 1)
    with pytest.raises(ValueError):
        count_subordinated([c, Cube(2, (0, 0))], 0, 1)


def test_count_subordinated_matches_enumeration():
    # exhaustive generation for every (m-n)d <= 8 regime used at desk scale
    for m, n, d, k, V in [
        (1, 0, 2, 1, 2),
        (2, 0, 2, 1, 3),
        (1, 0, 3, 2, 2),
        (2, 1, 2, 2, 4),
        (3, 2, 2, 3, 5),
        (1, 1, 2, 2, 2),
    ]:
        coarse = [Cube(m, tuple([10 * i] + [0] * (d - 1))) for i in range(k)]
        fine = []
        shift = m - n
        for cc in coarse:
            for off in itertools.product(range(1 << shift), repeat=d):
                fine.append(Cube(n, tuple((a << shift) + o for a, o in zip(cc.anchor, off))))
        assert all(is_subordinated([f], coarse) for f in fine)
        got = sum(1 for _ in itertools.combinations(fine, V))
        res = count_subordinated(coarse, n, V)
        assert got == res.exact
        assert res.bound >= res.exact


# === partial volumes =======================================================


def test_partial_volume_examples():
    single = frozenset({(3, -7)})
    # a single site has one covering cube per scale and top scale 0
    assert partial_volume(single, 0, P_SMALL) == 1
    assert partial_volume(single, 1, P_SMALL) == 0
    assert top_scale(single, P_SMALL.r) == 0
    # one full scale-2 cube at r=2: 16 sites, diameter 6, top scale 2
    cube16 = frozenset(Cube(2, (0, 0)).sites())
    assert partial_volume(cube16, 0, P_SMALL) == 16 + 1 + 1
    assert partial_volume(cube16, 1, P_SMALL) == 2
    assert partial_volume(cube16, 2, P_SMALL) == 1
    assert partial_volume(cube16, 3, P_SMALL) == 0
    # two sites at l1 distance 3, r=1: coverings of sizes 2, 2, 1
    p_r1 = Params(d=2, alpha=4.0, M=2, a=3, delta=4, r=1)
    assert partial_volume(frozenset({(0, 0), (3, 0)}), 0, p_r1) == 5
    with pytest.raises(ValueError):
        partial_volume(frozenset(), 0, P_SMALL)
    with pytest.raises(ValueError):
        partial_volume(single, -1, P_SMALL)


def test_top_scale_thresholds():
    # exactly at a power the scale does not tip over
    assert top_scale(frozenset({(0, 0), (4, 0)}), 2) == 1
    assert top_scale(frozenset({(0, 0), (5, 0)}), 2) == 2
    assert top_scale(frozenset({(0, 0), (1, 0)}), 2) == 0
    assert top_scale(frozenset({(0, 0, 0)}), 3) == 0


def test_partial_volume_monotone_and_telescoping():
    rng = rng_from(311)
    for it in range(40):
        if it % 2:
            reg = random_percolation_region(rng, 2, 7, 0.5)
        else:
            reg = random_polyomino(rng, 2, int(rng.integers(2, 20)))
        if not reg:
            continue
        vals = [partial_volume(reg, ell, P_SMALL) for ell in range(0, 6)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        for ell in range(0, 5):
            assert vals[ell] - vals[ell + 1] == (
                len(min_cover(reg, P_SMALL.r * ell))
                if ell <= top_scale(reg, P_SMALL.r)
                else 0
            )


# === graph covering ========================================================


def test_cover_graph_examples():
    path = {0: [1], 1: [0, 2], 2: [1, 3], 3: [2, 4], 4: [3]}
    pieces = cover_graph_by_subgraphs(path, 2)
    assert len(pieces) <= 3
    assert all(len(s) <= 4 for s in pieces)
    assert frozenset().union(*pieces) == {0, 1, 2, 3, 4}
    assert cover_graph_by_subgraphs({7: []}, 3) == (frozenset({7}),)
    # a graph no bigger than k fits in one piece
    tri = {0: [1, 2], 1: [0, 2], 2: [0, 1]}
    assert len(cover_graph_by_subgraphs(tri, 3)) == 1
    with pytest.raises(ValueError):
        cover_graph_by_subgraphs({0: [], 1: []}, 2)
    with pytest.raises(ValueError):
        cover_graph_by_subgraphs({}, 2)
    with pytest.raises(ValueError):
        cover_graph_by_subgraphs(path, 0)
    with pytest.raises(ValueError):
        cover_graph_by_subgraphs({0: [1]}, 2)


def _connected(vertices, adj):
    vertices = set(vertices)
    seen = {next(iter(vertices))}
    frontier = list(seen)
    while frontier:
        v = frontier.pop()
        for w in adj[v]:
            if w in vertices and w not in seen:
                seen.add(w)
                frontier.append(w)
    return seen == vertices


def test_cover_graph_fuzz():
    rng = rng_from(312)
    for _ in range(1000):
        n = int(rng.integers(1, 41))
        adj = {v: set() for v in range(n)}
        for v in range(1, n):
            w = int(rng.integers(0, v))
            adj[v].add(w)
            adj[w].add(v)
        for _ in range(int(rng.integers(0, n))):
            v, w = rng.integers(0, n, size=2)
            if v != w:
                adj[int(v)].add(int(w))
                adj[int(w)].add(int(v))
        k = int(rng.integers(1, 7))
        pieces = cover_graph_by_subgraphs(adj, k)
        assert len(pieces) <= math.ceil(n / k)
        assert all(len(s) <= 2 * k for s in pieces)
        assert frozenset().union(*pieces) == set(range(n))
        assert all(_connected(s, adj) for s in pieces)


# === volume and covering bounds ============================================


def test_volume_bound_singleton_and_names():
    g = Contour(frozenset({(0, 0)}), 1, ())
    rep = check_volume_bound(g, 0, P_SMALL)
    assert rep.all_passed
    assert rep.partial_volume == 1 and rep.cover_size == 1
    assert rep.small_diameter
    assert [c.name for c in rep.checks] == [
        "partial_volume_vs_b3_vol",
        "partial_volume_small_diameter_branch",
    ]
    with pytest.raises(ValueError):
        check_volume_bound(g, -1, P_SMALL)


def test_volume_and_covering_bounds_exhaustive():
    # every enumerated contour on 3x3 and 4x4, every scale up to past the
    # top one: zero violations
    for side, cap in ((3, 9), (4, 16)):
        reg = centered_box(side, 2)
        for n in range(4, side * side + 1):
            for g in enumerate_origin_contours(reg, n, P_SMALL, cap=cap):
                for ell in range(0, 4):
                    vb = check_volume_bound(g, ell, P_SMALL)
                    assert vb.all_passed, (side, n, ell, vb)
                    cb = check_covering_bound(g, ell, 2, P_SMALL)
                    assert cb.all_passed, (side, n, ell, cb)
                    assert cb.branch == ("below_step" if ell < 2 else "at_or_above_step")


def test_covering_bound_scale_zero_is_support_size():
    g = Contour(frozenset({(0, 0), (1, 0), (0, 1)}), 1, ())
    rep = check_covering_bound(g, 0, 1, P_SMALL)
    assert rep.cover_size == g.size
    assert rep.all_passed
    assert rep.checks[0].name == "cover_size_vs_b4_rate"
    with pytest.raises(ValueError):
        check_covering_bound(g, 0, 0, P_SMALL)


def test_covering_bound_multi_step_instance():
    # a small near block plus a large far one: removed at steps 1 and 2,
    # which exercises both branches of the bound on a real partition
    small = frozenset(centered_box(3, 2))
    big = frozenset(box((500, 500), (519, 519)))
    part = gamma_r_partition(small | big, P_SMALL)
    steps = {q: part.step_of_part[q] for q in part.parts}
    assert sorted(steps.values()) == [1, 2]
    for q, j in steps.items():
        g = Contour(q, 1, ())
        for ell in range(0, 5):
            rep = check_covering_bound(g, ell, j, P_SMALL)
            assert rep.all_passed, (j, ell, rep)
            assert rep.branch == ("below_step" if ell < j else "at_or_above_step")
            vb = check_volume_bound(g, ell, P_SMALL)
            assert vb.all_passed, (j, ell, vb)


# === family and covering-count bounds ======================================


def test_family_bound_known_counts():
    fb = check_family_bound(0, 1, 2, 2)
    assert fb.count == 1
    assert [sorted(c.anchor for c in s) for s in fb.collections] == [[(0, 0)]]
    assert fb.all_passed
    # no single scale-2 cube reaches partial volume 1 at ell=1: a full cube
    # has diameter 6 and top scale 2, giving volume 2
    assert check_family_bound(1, 1, 2, 2).count == 0
    # volume 2 at ell=0 means two adjacent sites inside [-1,1]^2
    assert check_family_bound(0, 2, 2, 2).count == 12
    # volume 2 at ell=1 means one full cube within [-6,6]^2: four anchors
    fb = check_family_bound(1, 2, 2, 2)
    assert fb.count == 4
    assert {tuple(sorted(c.anchor for c in s))[0] for s in fb.collections} == {
        (-1, -1),
        (-1, 0),
        (0, -1),
        (0, 0),
    }
    with pytest.raises(ValueError):
        check_family_bound(0, 0, 2, 2)
    with pytest.raises(ValueError):
        check_family_bound(-1, 1, 2, 2)
    with pytest.raises(ValueError):
        check_family_bound(0, 3, 2, 2, budget=100)


def test_family_bound_v3_matches_windowed_oracle():
    # independent route: volume 3 at ell=0 forces |B| <= 3 and diameter
    # <= 4, and the box condition keeps coordinates within the diameter,
    # so scanning site subsets of [-4,4]^2 is exhaustive
    def l1_diam(B):
        return max(
            (sum(abs(a - b) for a, b in zip(x, y)) for x, y in itertools.combinations(B, 2)),
            default=0,
        )

    def volume(B):
        dia = l1_diam(B)
        top = 0
        while 4**top < dia:
            top += 1
        return sum(
            len({tuple(c >> (2 * n) for c in x) for x in B}) for n in range(0, top + 1)
        )

    window = list(itertools.product(range(-4, 5), repeat=2))
    oracle = set()
    for k in (1, 2, 3):
        for comb in itertools.combinations(window, k):
            B = frozenset(comb)
            dia = l1_diam(B)
            if volume(B) == 3 and all(abs(c) <= dia for x in B for c in x):
                oracle.add(B)
    fb = check_family_bound(0, 3, 2, 2)
    got = {frozenset(c.anchor for c in s) for s in fb.collections}
    assert got == oracle
    assert fb.count == len(oracle) == 182
    assert fb.all_passed
    assert fb.examined < 50_000


def test_covering_counts_small_boxes():
    reg = centered_box(3, 2)
    # no contours of size 2 exist: zero coverings still passes
    rep = check_covering_counts(2, 0, reg, P_SMALL, cap=9)
    assert rep.count == 0 and rep.n_contours == 0 and rep.all_passed
    # at scale zero the covering is the support itself
    contours = enumerate_origin_contours(reg, 5, P_SMALL, cap=9)
    rep = check_covering_counts(5, 0, reg, P_SMALL, cap=9)
    assert rep.count == len({g.support for g in contours})
    assert rep.n_contours == len(contours)
    assert rep.all_passed
    assert rep.checks[0].name == "log_covering_count_vs_b6_rate"
    for ell in (1, 2, 3):
        rep = check_covering_counts(5, ell, reg, P_SMALL, cap=9)
        assert rep.all_passed
    reg4 = centered_box(4, 2)
    for n in (5, 7):
        for ell in (0, 1, 2):
            rep = check_covering_counts(n, ell, reg4, P_SMALL, cap=16)
            assert rep.all_passed, (n, ell, rep)
