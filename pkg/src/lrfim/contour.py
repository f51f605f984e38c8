"""Contours of a configuration: incorrect-site boundaries, separated
partitions, labels and interiors, erasing maps, enumeration of small
contours around the origin, and the energy cost of erasing."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .lattice import (
    Region,
    Site,
    boundaries,
    closed_ball,
    connected_components,
    cube_graph,
    l1_distance,
    neighbors,
    volume_interior,
)
from .model import (
    EXACT_CAP,
    Configuration,
    flip_field,
    lattice_constant,
    rel_energy,
)
from .params import Params, feasibility_threshold, kappa_constants

__all__ = [
    "FINEST_CAP",
    "InvalidContourError",
    "Partition",
    "Contour",
    "ContourFamily",
    "BoundCheck",
    "InteractionReport",
    "PeierlsGap",
    "boundary_of_config",
    "condition_b_violations",
    "gamma_r_partition",
    "finest_partition_bruteforce",
    "label_contour",
    "contours_of",
    "erase_contour",
    "flip_field",
    "interaction_F",
    "peierls_constant",
    "peierls_feasible",
    "peierls_gap",
    "enumerate_origin_contours",
    "check_interaction_bounds",
    "contour_to_line",
    "contour_from_line",
]

FINEST_CAP = 10  # set-partition enumeration stays tractable up to here


class InvalidContourError(ValueError):
    """Raised when a claimed contour does not match the configuration."""


# volume_interior is pure and the same regions recur many times when a
# partition is labelled, erased and re-extracted
_volume = lru_cache(maxsize=512)(volume_interior)


# === boundary ==============================================================


def boundary_of_config(sigma: Configuration) -> Region:
    """Sites that are neither plus- nor minus-correct: some site of their
    closed unit ball disagrees with another.

    Sites outside the region count with the boundary sign, so the result
    can poke one step outside the region.  Every incorrect site sits
    within distance one of a spin that disagrees with the boundary, which
    keeps the scan proportional to the flipped set, not the region.
    """
    spins = sigma.spins
    eta = sigma.eta
    flipped = [x for x, s in spins.items() if s != eta]
    cands = set(flipped)
    for x in flipped:
        cands.update(neighbors(x))
    out = set()
    for x in cands:
        ball = {spins.get(y, eta) for y in closed_ball(x)}
        if len(ball) == 2:
            out.add(x)
    return frozenset(out)


# === partitions ============================================================


@dataclass(frozen=True)
class Partition:
    """Disjoint parts covering the input set, separated in the sense of
    condition_b_violations, plus the step each part was carved out at."""

    parts: tuple
    method: str  # "gamma_r" or "finest_bruteforce"
    step_of_part: Mapping  # part -> removal step (gamma_r only)


def _separated(dist: int, M: float, power: float, vol: int) -> bool:
    """dist > M * vol**power with an overflow guard for huge exponents."""
    bits = math.log2(M) + power * math.log2(vol)
    if bits >= 63:
        return False  # threshold beyond any desk-scale distance
    return dist > M * vol**power


def condition_b_violations(parts: Iterable[Region], p: Params) -> list:
    """Pairs of parts that fail the separation requirement
    d > M * min(volume, volume')**(a/delta), with their distance and
    threshold.  Empty result means the family is a valid partition."""
    parts = list(parts)
    vols = [len(_volume(part).volume) for part in parts]
    power = p.a / p.delta
    bad = []
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            v = min(vols[i], vols[j])
            dist = l1_distance(parts[i], parts[j])
            if not _separated(dist, p.M, power, v):
                bits = math.log2(p.M) + power * math.log2(v)
                thr = math.inf if bits >= 63 else p.M * v**power
                bad.append((parts[i], parts[j], dist, thr))
    return bad


def gamma_r_partition(A: Region, p: Params) -> Partition:
    """Carve A into separated parts by sweeping coarser and coarser cube
    graphs.

    At step n the remaining sites are covered by cubes of scale r*n, cubes
    within distance M * 2**(a*r*n) are joined, and every component whose
    covered area has volume at most 2**(r*n*delta) is removed as one part.
    Components above the density threshold survive to the next, coarser
    step, so the loop always terminates.
    """
    if not A:
        raise ValueError("cannot partition an empty set")
    parts: list[Region] = []
    steps: dict[Region, int] = {}
    remaining = frozenset(A)
    n = 0
    while remaining:
        n += 1
        graph = cube_graph(remaining, p.r * n, p.M, p.a)
        survivors: set = set()
        for area in graph.covered:
            vol = len(_volume(area).volume)
            if math.log2(vol) <= p.r * n * p.delta + 1e-12:
                parts.append(area)
                steps[area] = n
            else:
                survivors |= area
        remaining = frozenset(survivors)
    parts.sort(key=min)
    return Partition(tuple(parts), "gamma_r", steps)


def _set_partitions(items: list):
    """All partitions of items into non-empty frozenset blocks."""
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for blocks in _set_partitions(rest):
        for i, blk in enumerate(blocks):
            yield blocks[:i] + [blk | {head}] + blocks[i + 1 :]
        yield blocks + [frozenset((head,))]


def _a1_violations(parts) -> list:
    """Ordered pairs (holder, other) where the other part meets more than
    one connected component of the holder's complement (the holder's
    interior components plus its exterior)."""
    out = []
    for holder in parts:
        comps = _volume(holder).interior_components
        for other in parts:
            if other is holder:
                continue
            seen = set()
            for x in other:
                for k, comp in enumerate(comps):
                    if x in comp:
                        seen.add(k)
                        break
                else:
                    seen.add(-1)
            if len(seen) != 1:
                out.append((holder, other))
    return out


def finest_partition_bruteforce(A: Region, p: Params) -> Partition:
    """Common refinement of every valid partition of A, by enumerating all
    set partitions: two sites end up in the same part exactly when no
    valid partition splits them.

    The result is re-checked for the separation condition and for the
    single-complement-component property; either failing is a genuine
    finding and raises RuntimeError rather than being patched over.
    """
    if not A:
        raise ValueError("cannot partition an empty set")
    if len(A) > FINEST_CAP:
        raise ValueError(
            f"brute-force finest partition handles at most {FINEST_CAP} sites, got {len(A)}"
        )
    sites = sorted(A)
    power = p.a / p.delta
    vol_of: dict = {}
    sep: dict = {}

    def volume_of(block):
        if block not in vol_of:
            vol_of[block] = len(_volume(block).volume)
        return vol_of[block]

    def separated(b1, b2):
        key = (b1, b2) if min(b1) < min(b2) else (b2, b1)
        if key not in sep:
            v = min(volume_of(b1), volume_of(b2))
            sep[key] = _separated(l1_distance(b1, b2), p.M, power, v)
        return sep[key]

    signature: dict = {x: () for x in sites}
    for blocks in _set_partitions(sites):
        if not all(separated(b1, b2) for b1, b2 in itertools.combinations(blocks, 2)):
            continue
        owner = {}
        for bi, blk in enumerate(blocks):
            for x in blk:
                owner[x] = bi
        for x in sites:
            signature[x] = signature[x] + (owner[x],)
    groups: dict = {}
    for x in sites:
        groups.setdefault(signature[x], set()).add(x)
    parts = tuple(sorted((frozenset(g) for g in groups.values()), key=min))
    if condition_b_violations(parts, p):
        raise RuntimeError("finest partition violates the separation condition")
    if _a1_violations(parts):
        raise RuntimeError(
            "finest partition has a part meeting several complement components of another part"
        )
    return Partition(parts, "finest_bruteforce", {})


# === contours and labels ===================================================


@dataclass(frozen=True)
class Contour:
    """A partition part together with the sign read around its external
    components and the sign on the rim of each interior component."""

    support: Region
    external_label: int
    interior_labels: tuple  # of (component, sign), ordered by smallest site

    def __post_init__(self):
        if not self.support:
            raise ValueError("a contour needs a non-empty support")
        if self.external_label not in (-1, 1) or any(
            s not in (-1, 1) for _, s in self.interior_labels
        ):
            raise ValueError("labels must be +1 or -1")

    @property
    def size(self) -> int:
        return len(self.support)

    @cached_property
    def I_plus(self) -> Region:
        return frozenset().union(*(c for c, s in self.interior_labels if s == 1))

    @cached_property
    def I_minus(self) -> Region:
        return frozenset().union(*(c for c, s in self.interior_labels if s == -1))

    @cached_property
    def interior(self) -> Region:
        return self.I_plus | self.I_minus

    @cached_property
    def V(self) -> Region:
        return self.support | self.interior

    @property
    def label(self) -> dict:
        """Label map keyed by "ext" and by each interior component's
        smallest site."""
        out = {"ext": self.external_label}
        for comp, s in self.interior_labels:
            out[min(comp)] = s
        return out


@dataclass(frozen=True)
class ContourFamily:
    contours: tuple
    external_flags: tuple  # aligned with contours
    origin_label: int

    def __iter__(self):
        return iter(self.contours)

    def __len__(self) -> int:
        return len(self.contours)

    @property
    def external(self) -> tuple:
        return tuple(g for g, f in zip(self.contours, self.external_flags) if f)


def _spin_reader(sigma: Configuration):
    spins = sigma.spins
    eta = sigma.eta
    return lambda x: spins.get(x, eta)


def _external_components(part: Region) -> tuple:
    """Connected components of the part whose volume is not strictly
    enclosed by another component's volume."""
    comps = connected_components(part)
    vols = {c: _volume(c).volume for c in comps}
    ext = []
    for c in comps:
        enclosed = False
        for o in comps:
            if o is c:
                continue
            if vols[o] & vols[c] and not vols[o] <= vols[c]:
                enclosed = True
                break
        if not enclosed:
            ext.append(c)
    return tuple(ext)


def label_contour(sigma: Configuration, part: Region) -> Contour:
    """Attach signs to a partition part: the sign around its external
    components, and the sign on the rim of each interior component.

    Each sign is read off a rim whose sites must all agree; disagreement
    means the part was not produced from this configuration.
    """
    if not part:
        raise InvalidContourError("empty part")
    read = _spin_reader(sigma)
    shell = frozenset().union(*_external_components(part))
    outer_rim = boundaries(_volume(shell).volume).inner
    signs = {read(x) for x in outer_rim}
    if len(signs) != 1:
        raise InvalidContourError(
            "not a valid contour of sigma: mixed sign around the external components"
        )
    external_label = signs.pop()
    labels = []
    for comp in _volume(frozenset(part)).interior_components:
        rim = boundaries(_volume(comp).volume).inner
        comp_signs = {read(x) for x in rim}
        if len(comp_signs) != 1:
            raise InvalidContourError(
                "not a valid contour of sigma: mixed sign on an interior rim"
            )
        labels.append((comp, comp_signs.pop()))
    labels.sort(key=lambda cs: min(cs[0]))
    return Contour(frozenset(part), external_label, tuple(labels))


def contours_of(sigma: Configuration, p: Params, method: str = "gamma_r") -> ContourFamily:
    """Partition the incorrect sites of sigma and label every part.

    A contour counts as external when none of its external components is
    enclosed by another contour's volume.  All external contours must
    agree on the surrounding sign; that common sign (the boundary sign for
    an empty family) is reported as origin_label.
    """
    bd = boundary_of_config(sigma)
    if not bd:
        return ContourFamily((), (), sigma.eta)
    if method == "gamma_r":
        partition = gamma_r_partition(bd, p)
    elif method == "finest_bruteforce":
        partition = finest_partition_bruteforce(bd, p)
    else:
        raise ValueError(f"unknown partition method {method!r}")
    contours = tuple(label_contour(sigma, part) for part in partition.parts)
    flags = []
    for g in contours:
        shells = [_volume(c).volume for c in _external_components(g.support)]
        buried = any(
            shell <= other.V
            for shell in shells
            for other in contours
            if other is not g
        )
        flags.append(not buried)
    outer_signs = {g.external_label for g, f in zip(contours, flags) if f}
    if len(outer_signs) > 1:
        raise InvalidContourError("external contours disagree on the surrounding sign")
    origin_label = outer_signs.pop() if outer_signs else sigma.eta
    return ContourFamily(contours, tuple(flags), origin_label)


def erase_contour(sigma: Configuration, gamma: Contour) -> Configuration:
    """Erase gamma from sigma: +1 on the support, spin flip on the
    minus-labelled interior, identity elsewhere.

    The contour is validated by re-reading its labels from sigma.  When
    that fails but the support already sits at +1 away from the current
    incorrect sites, the contour was erased before and sigma is returned
    unchanged, so erasing twice equals erasing once.
    """
    try:
        if label_contour(sigma, gamma.support) == gamma:
            spins = dict(sigma.spins)
            for x in gamma.support:
                if x in spins:
                    spins[x] = 1
            for x in gamma.I_minus:
                if x in spins:
                    spins[x] = -spins[x]
            return Configuration(sigma.region, spins, sigma.boundary)
    except InvalidContourError:
        pass
    read = _spin_reader(sigma)
    if all(read(x) == 1 for x in gamma.support) and not (
        gamma.support & boundary_of_config(sigma)
    ):
        return sigma
    raise InvalidContourError("gamma is not a contour of sigma")


# === interaction strength and the erasing cost =============================


def interaction_F(B: Region, p: Params) -> float:
    """Total coupling from B into its complement, exact through the
    lattice constant: |B| J c_alpha minus the couplings internal to B."""
    if not B:
        return 0.0
    coords = np.array(sorted(B), dtype=float)
    n = len(coords)
    total = n * p.J * lattice_constant(p).c_alpha
    internal = 0.0
    step = max(1, 4_000_000 // n)
    for i0 in range(0, n, step):
        blk = coords[i0 : i0 + step]
        dist = np.abs(blk[:, None, :] - coords[None, :, :]).sum(axis=2)
        mask = dist > 0
        internal += float((p.J * dist[mask] ** -p.alpha).sum())
    return total - internal


def _pair_sum(A: Iterable[Site], B: Iterable[Site], p: Params) -> float:
    """Sum of couplings over pairs (x, y) with x in A, y in B, x != y."""
    A, B = sorted(A), sorted(B)
    if not A or not B:
        return 0.0
    ca = np.array(A, dtype=float)
    cb = np.array(B, dtype=float)
    out = 0.0
    step = max(1, 4_000_000 // len(B))
    for i0 in range(0, len(A), step):
        blk = ca[i0 : i0 + step]
        dist = np.abs(blk[:, None, :] - cb[None, :, :]).sum(axis=2)
        mask = dist > 0
        out += float((p.J * dist[mask] ** -p.alpha).sum())
    return out


def peierls_constant(p: Params) -> float:
    """The uniform lower-bound coefficient on the cost of erasing: the
    smaller of the surface coefficient and the interior-leak coefficient.
    Positive exactly when peierls_feasible holds; nan when the constants
    behind it diverge for this choice of a."""
    k1, k2 = kappa_constants(p.d, p.alpha, p.J, p.a)
    if not math.isfinite(k2):
        return math.nan
    c = lattice_constant(p).c_alpha
    surface = p.J * c / ((2 * p.d + 1) * 2.0**p.alpha)
    leak = 1.0 / ((2 * p.d + 1) * 2.0 ** (p.alpha + 1)) - 12.0 * k2 / p.M ** min(
        p.alpha - p.d, 1.0
    )
    return min(surface, leak)


def peierls_feasible(p: Params) -> bool:
    """Whether M clears the threshold that makes the erasing-cost
    coefficient positive."""
    thr = feasibility_threshold(p.d, p.alpha, p.J, p.a)
    return math.isfinite(thr) and p.M > thr


class PeierlsGap(NamedTuple):
    gap: float  # energy released by erasing the contour
    bound: float  # peierls_constant times the weight
    ratio: float  # gap divided by the weight


def peierls_gap(sigma: Configuration, gamma: Contour, p: Params) -> PeierlsGap:
    """Field-free energy drop from erasing gamma, against the claimed
    lower bound c2 * (|support| + F_minus_interior + F_support)."""
    erased = erase_contour(sigma, gamma)
    gap = rel_energy(sigma, None, p) - rel_energy(erased, None, p)
    weight = (
        gamma.size
        + interaction_F(gamma.I_minus, p)
        + interaction_F(gamma.support, p)
    )
    return PeierlsGap(gap, peierls_constant(p) * weight, gap / weight)


# === enumeration of contours around the origin =============================


def enumerate_origin_contours(
    region: Region, n: int, p: Params, cap: int = EXACT_CAP
) -> list:
    """All distinct contours of size n whose volume contains the origin,
    over every plus-boundary configuration of the region.

    Configurations are swept as bit patterns.  Each distinct
    incorrect-site pattern is partitioned once; within a pattern the
    labels only depend on the spins at one probe site per rim, so
    configurations collapse into classes keyed by (pattern, probe spins).
    A representative of every contributing class is re-labelled through
    label_contour as a cross-check.

    The sweep needs at most 64 candidate boundary sites (the region plus
    its outer boundary), which covers compact regions up to the cap.
    """
    sites = sorted(region)
    ns = len(sites)
    if ns == 0:
        raise ValueError("empty region")
    if ns > cap:
        raise ValueError(f"region has {ns} sites, enumeration cap is {cap}")
    if n < 1:
        raise ValueError("contour size must be at least 1")
    origin = (0,) * p.d
    index = {x: i for i, x in enumerate(sites)}
    cands = sorted(frozenset(region) | boundaries(region).outer)
    if len(cands) > 64:
        raise ValueError(
            "more than 64 candidate boundary sites; the bit-parallel sweep "
            "needs a smaller or denser region"
        )
    ball_mask = []
    ball_inside = []
    for x in cands:
        m = 0
        inside = True
        for y in closed_ball(x):
            i = index.get(y)
            if i is None:
                inside = False
            else:
                m |= 1 << i
        ball_mask.append(m)
        ball_inside.append(inside)

    total = 1 << ns
    chunk = min(total, 1 << 22)

    def signatures(cfgs: np.ndarray) -> np.ndarray:
        sig = np.zeros(len(cfgs), dtype=np.uint64)
        for ci, m in enumerate(ball_mask):
            mm = np.uint64(m)
            band = cfgs & mm
            incorrect = band != 0
            if ball_inside[ci]:
                incorrect &= band != mm
            sig |= incorrect.astype(np.uint64) << np.uint64(ci)
        return sig

    seen = []
    for start in range(0, total, chunk):
        cfgs = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        seen.append(np.unique(signatures(cfgs)))
    sig_arr = np.unique(np.concatenate(seen))

    # Patterns whose span stays under the first join threshold are a single
    # part at every step, so only those with exactly n sites can carry a
    # qualifying contour; full geometry runs just for them, and for every
    # pattern wide enough that the partition might split.
    popcnt = np.zeros(len(sig_arr), dtype=np.int64)
    for ci in range(len(cands)):
        popcnt += ((sig_arr >> np.uint64(ci)) & np.uint64(1)).astype(np.int64)
    if math.log2(p.M) + p.a * p.r >= 63:
        one_part = np.ones(len(sig_arr), dtype=bool)
    else:
        lo = np.full((p.d, len(sig_arr)), np.iinfo(np.int64).max, dtype=np.int64)
        hi = np.full((p.d, len(sig_arr)), np.iinfo(np.int64).min, dtype=np.int64)
        for ci, x in enumerate(cands):
            has = ((sig_arr >> np.uint64(ci)) & np.uint64(1)).astype(bool)
            for k in range(p.d):
                np.minimum(lo[k], x[k], out=lo[k], where=has)
                np.maximum(hi[k], x[k], out=hi[k], where=has)
        span = np.where(popcnt > 0, (hi - lo).clip(min=0).sum(axis=0), 0)
        one_part = span <= p.M * 2.0 ** (p.a * p.r)

    def geometry(sig: int):
        """Probe mask and per-part label probes for the qualifying parts
        (size n, origin in the volume) of this incorrect-site pattern."""
        support = frozenset(cands[i] for i in range(len(cands)) if sig >> i & 1)
        metas = []
        probe_mask = 0
        for part in gamma_r_partition(support, p).parts:
            if len(part) != n:
                continue
            info = _volume(part)
            if origin not in info.volume:
                continue
            shell = frozenset().union(*_external_components(part))
            rim = boundaries(_volume(shell).volume).inner
            ext_probe = min((index[x] for x in rim if x in index), default=-1)
            if ext_probe >= 0:
                probe_mask |= 1 << ext_probe
            inner = []
            for comp in info.interior_components:
                comp_rim = boundaries(_volume(comp).volume).inner
                probe = min((index[x] for x in comp_rim if x in index), default=-1)
                if probe >= 0:
                    probe_mask |= 1 << probe
                inner.append((comp, probe))
            metas.append((part, ext_probe, tuple(inner)))
        return probe_mask, tuple(metas)

    metas_of: dict = {}
    mask_arr = np.zeros(len(sig_arr), dtype=np.uint64)
    live_arr = np.zeros(len(sig_arr), dtype=bool)
    candidates = np.flatnonzero(
        (popcnt > 0) & (~one_part | (popcnt == n))
    )
    for si in candidates.tolist():
        mask, metas = geometry(int(sig_arr[si]))
        if metas:
            metas_of[si] = metas
            mask_arr[si] = mask
            live_arr[si] = True

    reps: dict = {}
    for start in range(0, total, chunk):
        cfgs = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        idx = np.searchsorted(sig_arr, signatures(cfgs))
        live = live_arr[idx]
        if not live.any():
            continue
        pos = np.nonzero(live)[0]
        sub_idx = idx[pos].astype(np.uint64)
        masked = cfgs[pos] & mask_arr[sub_idx]
        keys = (sub_idx << np.uint64(ns)) | masked
        uniq, first = np.unique(keys, return_index=True)
        for kv, fi in zip(uniq.tolist(), first.tolist()):
            reps.setdefault(int(kv), int(cfgs[pos[fi]]))

    out: set = set()
    for key, rep in sorted(reps.items()):
        masked = key & ((1 << ns) - 1)
        metas = metas_of[key >> ns]
        rep_conf = None
        for part, ext_probe, inner in metas:
            def sign_at(probe: int) -> int:
                return -1 if probe >= 0 and masked >> probe & 1 else 1

            labels = tuple(
                sorted(
                    ((comp, sign_at(probe)) for comp, probe in inner),
                    key=lambda cs: min(cs[0]),
                )
            )
            g = Contour(part, sign_at(ext_probe), labels)
            if g in out:
                continue
            if rep_conf is None:
                spins = {x: -1 if rep >> index[x] & 1 else 1 for x in sites}
                rep_conf = Configuration(region, spins, "plus")
            if label_contour(rep_conf, part) != g:
                raise RuntimeError(
                    "bit-parallel labelling disagreed with label_contour "
                    "on a representative configuration"
                )
            out.add(g)

    return sorted(out, key=_contour_sort_key)


def _contour_sort_key(g: Contour):
    return (
        sorted(g.support),
        g.external_label,
        [(min(c), s) for c, s in g.interior_labels],
    )


# === interaction bounds between a contour and the rest of its family ======


class BoundCheck(NamedTuple):
    name: str
    lhs: float
    rhs: float
    passed: bool | None  # None when the constants diverge for this a


class InteractionReport(NamedTuple):
    checks: tuple
    kappa1: float
    kappa2: float
    hypotheses_met: bool

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def check_interaction_bounds(
    sigma: Configuration, gamma: Contour, p: Params
) -> InteractionReport:
    """Exact interaction sums between gamma and the other contours of
    sigma, against their kappa bounds.

    Five checks: the far-field bound from the support and from the
    minus-labelled interior, the support against every other contour's
    volume, the minus interior against the volumes outside it, and the
    complement of the minus interior against the volumes enclosed in it.
    """
    family = contours_of(sigma, p)
    if gamma not in family.contours:
        raise InvalidContourError("gamma is not a contour of sigma")
    others = [g for g in family.contours if g != gamma]
    k1, k2 = kappa_constants(p.d, p.alpha, p.J, p.a)
    ok = math.isfinite(k1)
    vol = len(gamma.V)
    slow = min(p.alpha - p.d, 1.0)
    c_alpha = lattice_constant(p).c_alpha

    def outside_volumes(B):
        return frozenset().union(*(g.V for g in others if not (g.support & B)))

    def enclosed_volumes(B):
        return frozenset().union(*(g.V for g in others if g.support <= B))

    f_sp = interaction_F(gamma.support, p)
    f_im = interaction_F(gamma.I_minus, p)

    checks = []
    for name, B, fb in (
        ("support", gamma.support, f_sp),
        ("minus_interior", gamma.I_minus, f_im),
    ):
        lhs = _pair_sum(B, outside_volumes(B), p)
        rhs = k1 * (
            len(B)
            * vol ** (p.a / (p.d + 1) * (p.d - p.alpha))
            / p.M ** (p.alpha - p.d)
            + fb / p.M
        )
        checks.append(BoundCheck(f"far_field_from_{name}", lhs, rhs, lhs <= rhs if ok else None))

    lhs = _pair_sum(gamma.support, frozenset().union(*(g.V for g in others)), p)
    rhs = k2 * f_sp / p.M**slow
    checks.append(BoundCheck("support_vs_other_volumes", lhs, rhs, lhs <= rhs if ok else None))

    lhs = _pair_sum(gamma.I_minus, outside_volumes(gamma.I_minus), p)
    rhs = k2 * f_im / p.M**slow
    checks.append(
        BoundCheck("minus_interior_vs_outside_volumes", lhs, rhs, lhs <= rhs if ok else None)
    )

    enclosed = enclosed_volumes(gamma.I_minus)
    lhs = len(enclosed) * p.J * c_alpha - _pair_sum(gamma.I_minus, enclosed, p)
    rhs = k2 * f_im / p.M
    checks.append(
        BoundCheck("complement_vs_enclosed_volumes", lhs, rhs, lhs <= rhs if ok else None)
    )
    return InteractionReport(tuple(checks), k1, k2, ok)


# === serialization =========================================================

_LINE = re.compile(r"support=\[([^\]]*)\]\s+labels=\[([^\]]*)\]\s*$")
_SITE = re.compile(r"\(([-\d,]+)\)")
_INNER_LABEL = re.compile(r"\(\(([-\d,]+)\),([+-]?\d+)\)$")


def _site_text(x: Site) -> str:
    return "(" + ",".join(str(c) for c in x) + ")"


def contour_to_line(gamma: Contour) -> str:
    """One-line form: `support=[(x,y);...] labels=[(id,sign);...]` where
    id is "ext" or the smallest site of an interior component."""
    sup = ";".join(_site_text(x) for x in sorted(gamma.support))
    labs = [f"(ext,{gamma.external_label:+d})"]
    labs += [f"({_site_text(min(c))},{s:+d})" for c, s in gamma.interior_labels]
    return f"support=[{sup}] labels=[{';'.join(labs)}]"


def contour_from_line(line: str) -> Contour:
    """Parse the one-line form; interior components are recomputed from
    the support geometry and matched to their ids."""
    m = _LINE.match(line.strip())
    if not m:
        raise ValueError("unrecognised contour line")
    support = frozenset(
        tuple(int(c) for c in grp.split(",")) for grp in _SITE.findall(m.group(1))
    )
    if not support:
        raise ValueError("empty support")
    comps = {min(c): c for c in _volume(support).interior_components}
    external = None
    signs: dict = {}
    for item in m.group(2).split(";"):
        item = item.strip()
        if not item:
            continue
        if item.startswith("(ext,"):
            external = int(item[5:-1])
            continue
        mm = _INNER_LABEL.match(item)
        if not mm:
            raise ValueError(f"unrecognised label entry {item!r}")
        site = tuple(int(c) for c in mm.group(1).split(","))
        signs[site] = int(mm.group(2))
    if external is None:
        raise ValueError("missing external label")
    if set(signs) != set(comps):
        raise ValueError("labels do not match the interior components of the support")
    labels = tuple(
        sorted(((comps[site], s) for site, s in signs.items()), key=lambda cs: min(cs[0]))
    )
    return Contour(support, external, labels)
