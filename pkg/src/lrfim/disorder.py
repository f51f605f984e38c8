"""Quenched-disorder statistics for the plus-boundary measure.

Flipping the external field on a set A changes the partition function,
and delta_A measures that change in energy units.  The module verifies
the sub-Gaussian tail bounds for these increments under Gaussian and
fair-sign fields, compares the joint density of a configuration with
its contour-erased image against the claimed exponential bound, and
estimates the probability that some origin contour's interior increment
exceeds a quarter of its erasing cost.  A separate enumerator ranks
lattice animals (connected sets through the origin, or enumerated
contour interiors) by field sum per boundary edge.

All partition functions here are the unrestricted plus-boundary ones.
Their energies are relative to the all-plus state, whose own field
energy differs between h and a flipped field; the increment functions
restore that reference term explicitly, which is what makes the
single-site closed form come out as a ratio of hyperbolic cosines.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .contour import (
    BoundCheck,
    Contour,
    contours_of,
    enumerate_origin_contours,
    erase_contour,
    peierls_constant,
    peierls_feasible,
)
from .lattice import Region, Site, neighbors
from .model import (
    ENSEMBLE_CAP,
    EXACT_CAP,
    Configuration,
    FieldSample,
    SpinEnsemble,
    flip_field,
    partition_function,
    rel_energy,
    sample_field,
)
from .params import Params, rng_from

__all__ = [
    "ANIMAL_CAP",
    "ANIMAL_VARIANTS",
    "AnimalResult",
    "BadEventEstimate",
    "ConcentrationReport",
    "DeltaRecord",
    "DensityRatioReport",
    "SupEstimate",
    "bad_event_probability",
    "delta_A",
    "delta_record",
    "density_ratio",
    "estimate_sup_expectation",
    "greedy_animal",
    "verify_concentration",
]

ANIMAL_CAP = 10  # connected-set enumeration grows like the polyomino counts
BAD_EVENT_THRESHOLD = 0.25

# derived-seed stream keys, one per sampling operation, so campaigns with
# the same base seed never share field draws across operations
_CONCENTRATION_STREAM = 23
_BAD_EVENT_STREAM = 29
_SUP_STREAM = 31


# === field-flip increments =================================================


class DeltaRecord(NamedTuple):
    """One evaluated increment: the flipped set, the field, the value."""

    A: Region
    h: FieldSample
    value: float


def _require_positive_beta(p: Params) -> None:
    if p.beta == 0:
        raise ValueError("field-flip increments divide by beta; beta must be positive")


def delta_A(A: Region, h: FieldSample, region: Region, p: Params, cap: int = EXACT_CAP) -> float:
    """-(1/beta) log of Z(h) over Z with the field sign-flipped on A.

    Exact through two partition-function enumerations.  Those energies
    are relative to the all-plus state, so the h-dependent reference
    term 2 eps sum_A h_x is subtracted to recover the ratio of absolute
    partition functions; the empty set gives exactly zero, and flipping
    the field on A negates the value.
    """
    region = frozenset(region)
    A = frozenset(A)
    if not A <= region:
        raise ValueError("the flipped set must lie inside the region")
    if h.region != region:
        raise ValueError("field and region disagree")
    _require_positive_beta(p)
    if not A:
        return 0.0
    zh = partition_function(region, h, p, cap=cap)
    zt = partition_function(region, flip_field(h, A), p, cap=cap)
    shift = 2.0 * p.eps * sum(h.values[x] for x in A)
    return -(math.log(zh) - math.log(zt)) / p.beta - shift


def delta_record(A: Region, h: FieldSample, region: Region, p: Params, cap: int = EXACT_CAP) -> DeltaRecord:
    return DeltaRecord(frozenset(A), h, delta_A(A, h, region, p, cap=cap))


def _delta_matrix(
    ens: SpinEnsemble, sets: Sequence[Region], fields: Sequence[FieldSample], p: Params
) -> np.ndarray:
    """Increment of every set against every field, shape (sets, fields).

    One shared occupancy product per column block; each set then costs a
    thin correction product over its own columns, so campaigns scale with
    the state table once instead of once per set.
    """
    free = ens.free
    pos = {x: i for i, x in enumerate(free)}
    H = np.column_stack([f.vector(free) for f in fields])
    m = H.shape[1]
    out = np.zeros((len(sets), m))
    n_states = ens.occ.shape[0]
    step = max(1, (1 << 22) // n_states)
    scale = 2.0 * p.eps
    rows_of = [sorted(pos[x] for x in A) for A in sets]
    for j0 in range(0, m, step):
        hb = H[:, j0 : j0 + step]
        occ_h = ens.occ @ hb
        eb = -p.beta * (ens.E0[:, None] + scale * occ_h)
        mb = eb.max(axis=0)
        base = mb + np.log(np.exp(eb - mb).sum(axis=0))
        for i, rows in enumerate(rows_of):
            if not rows:
                continue
            flipped = occ_h - 2.0 * (ens.occ[:, rows] @ hb[rows, :])
            ea = -p.beta * (ens.E0[:, None] + scale * flipped)
            ma = ea.max(axis=0)
            logs = ma + np.log(np.exp(ea - ma).sum(axis=0))
            shift = scale * hb[rows, :].sum(axis=0)
            out[i, j0 : j0 + step] = -(base - logs) / p.beta - shift
    return out


def _draw_fields(region: Region, distribution: str, p: Params, stream: int, n: int) -> list:
    master = rng_from(p.seed, stream)
    return [
        sample_field(region, distribution, int(s))
        for s in master.integers(0, 2**63 - 1, size=n)
    ]


# === concentration of the increments =======================================


class ConcentrationReport(NamedTuple):
    checks: tuple
    lambdas: tuple
    delta_tails: tuple
    difference_tails: tuple
    delta_bounds: tuple
    difference_bounds: tuple
    n_samples: int
    distribution: str

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _tail_bound(lam: float, eps: float, size: int) -> float:
    if lam <= 0.0:
        return 2.0
    denom = 8.0 * eps * eps * size
    if denom == 0.0:
        return 0.0  # the increment is identically zero
    return 2.0 * math.exp(-lam * lam / denom)


def _sampling_slack(bound: float, n_samples: int) -> float:
    b = min(bound, 1.0)
    return 3.0 * math.sqrt(b * (1.0 - b) / n_samples)


def verify_concentration(
    A: Region,
    A_prime: Region,
    region: Region,
    p: Params,
    n_samples: int,
    lambda_grid: Iterable[float],
    distribution: str = "gaussian01",
    cap: int = ENSEMBLE_CAP,
) -> ConcentrationReport:
    """Empirical tails of |delta_A| and |delta_A - delta_A'| against the
    sub-Gaussian bounds 2 exp(-lambda^2 / (8 eps^2 |A|)) and the same with
    the symmetric difference.

    A grid point passes when the observed frequency stays below the bound
    plus three binomial standard deviations.  The bounds hold conditionally
    on the field outside the flipped sets, so they hold for the plain
    i.i.d. draws used here as well.
    """
    region = frozenset(region)
    A = frozenset(A)
    A2 = frozenset(A_prime)
    if not (A <= region and A2 <= region):
        raise ValueError("both flipped sets must lie inside the region")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    grid = tuple(float(l) for l in lambda_grid)
    if not grid:
        raise ValueError("empty lambda grid")
    _require_positive_beta(p)
    ens = SpinEnsemble(region, p, cap=cap)
    fields = _draw_fields(region, distribution, p, _CONCENTRATION_STREAM, n_samples)
    dm = _delta_matrix(ens, (A, A2), fields, p)
    diff = dm[0] - dm[1]
    checks = []
    delta_tails = []
    diff_tails = []
    delta_bounds = []
    diff_bounds = []
    for k, lam in enumerate(grid):
        tail = float(np.mean(np.abs(dm[0]) >= lam))
        bound = _tail_bound(lam, p.eps, len(A))
        rhs = bound + _sampling_slack(bound, n_samples)
        checks.append(BoundCheck(f"delta_tail_{k}", tail, rhs, tail <= rhs))
        delta_tails.append(tail)
        delta_bounds.append(bound)

        tail = float(np.mean(np.abs(diff) > lam))
        bound = _tail_bound(lam, p.eps, len(A ^ A2))
        rhs = bound + _sampling_slack(bound, n_samples)
        checks.append(BoundCheck(f"difference_tail_{k}", tail, rhs, tail <= rhs))
        diff_tails.append(tail)
        diff_bounds.append(bound)
    return ConcentrationReport(
        tuple(checks),
        grid,
        tuple(delta_tails),
        tuple(diff_tails),
        tuple(delta_bounds),
        tuple(diff_bounds),
        n_samples,
        distribution,
    )


# === joint-density ratio under contour erasure =============================


class DensityRatioReport(NamedTuple):
    checks: tuple
    ratio: float
    bound: float
    z_ratio: float  # Z with the field flipped on the minus interior, over Z(h)
    hypotheses_met: bool  # the erasing-cost rate is finite and positive

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def density_ratio(
    sigma: Configuration,
    gamma: Contour,
    h: FieldSample,
    region: Region,
    p: Params,
    cap: int = EXACT_CAP,
) -> DensityRatioReport:
    """Joint density of (sigma, h) over the density of the erased pair.

    Erasing flips the spins on the minus interior and on the minus part
    of the support while the field is flipped on the minus interior only.
    The field's own density is symmetric, so the ratio reduces to the
    energy difference times the partition-function quotient; the claimed
    upper bound replaces the energy difference with
    exp(-beta c2 |gamma| - 2 beta eps sum of h over the minus support).
    The comparison is performed in log space and gated on the erasing
    rate c2 being positive.
    """
    region = frozenset(region)
    if sigma.region != region or h.region != region:
        raise ValueError("configuration, field and region must agree")
    if sigma.boundary != "plus":
        raise ValueError("the joint-density comparison is a plus-boundary construction")
    family = contours_of(sigma, p)
    if gamma not in family.contours:
        raise ValueError("gamma is not a contour of sigma")
    if not gamma.I_minus <= region:
        raise ValueError("the minus interior pokes outside the region")
    sp_minus = frozenset(x for x in gamma.support if sigma.spins.get(x, 1) == -1)
    erased = erase_contour(sigma, gamma)
    tau_h = flip_field(h, gamma.I_minus)
    d_energy = rel_energy(erased, tau_h, p) - rel_energy(sigma, h, p)
    zh = partition_function(region, h, p, cap=cap)
    zt = partition_function(region, tau_h, p, cap=cap)
    log_z_ratio = math.log(zt) - math.log(zh)
    field_sum = sum(h.values[x] for x in sp_minus)
    log_ratio = p.beta * d_energy + log_z_ratio
    c2 = peierls_constant(p)
    feasible = peierls_feasible(p)
    log_bound = -p.beta * c2 * gamma.size - 2.0 * p.beta * p.eps * field_sum + log_z_ratio
    passed = bool(log_ratio <= log_bound) if feasible else None
    checks = (BoundCheck("log_density_ratio_vs_erasing_bound", log_ratio, log_bound, passed),)
    return DensityRatioReport(
        checks, math.exp(log_ratio), math.exp(log_bound), math.exp(log_z_ratio), feasible
    )


# === the bad event =========================================================


class BadEventEstimate(NamedTuple):
    probability: float
    std: float
    n_samples: int
    n_contours: int  # distinct (interior, size) classes enumerated
    n_interiors: int  # distinct interior sets among them
    sup_values: tuple  # per-draw suprema of delta / (c2 |gamma|)


def _interior_classes(region: Region, p: Params, n_max: int, cap: int) -> list:
    """Distinct (minus interior, contour size) pairs over the origin
    contours of every size up to n_max."""
    classes = set()
    for n in range(1, n_max + 1):
        for g in enumerate_origin_contours(region, n, p, cap=cap):
            if not g.I_minus <= region:
                raise ValueError(
                    "a contour interior pokes outside the region; "
                    "the field flip is undefined there"
                )
            classes.add((g.I_minus, g.size))
    return sorted(classes, key=lambda c: (sorted(map(sorted, c[0])), c[1]))


def bad_event_probability(
    region: Region,
    p: Params,
    n_max: int,
    n_samples: int,
    distribution: str = "gaussian01",
    cap: int = ENSEMBLE_CAP,
) -> BadEventEstimate:
    """Fraction of field draws whose worst origin contour has an interior
    increment above a quarter of its erasing cost c2 |gamma|.

    Contours are enumerated once, to size n_max, and collapsed to their
    distinct (interior, size) classes; each draw then prices every class
    from one shared state table.  The estimate is coupled across eps
    values with the same base seed because the drawn field values carry
    no strength factor.
    """
    region = frozenset(region)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    _require_positive_beta(p)
    if not peierls_feasible(p):
        raise ValueError("the erasing-cost rate is not positive for these parameters")
    c2 = peierls_constant(p)
    classes = _interior_classes(region, p, n_max, EXACT_CAP)
    if not classes:
        return BadEventEstimate(0.0, 0.0, n_samples, 0, 0, ())
    interiors = sorted({I for I, _ in classes}, key=lambda I: sorted(I))
    pos = {I: i for i, I in enumerate(interiors)}
    ens = SpinEnsemble(region, p, cap=cap)
    fields = _draw_fields(region, distribution, p, _BAD_EVENT_STREAM, n_samples)
    dm = _delta_matrix(ens, interiors, fields, p)
    sups = np.full(n_samples, -math.inf)
    for interior, size in classes:
        np.maximum(sups, dm[pos[interior]] / (c2 * size), out=sups)
    hits = sups > BAD_EVENT_THRESHOLD
    prob = float(hits.mean())
    std = math.sqrt(prob * (1.0 - prob) / n_samples)
    return BadEventEstimate(
        prob, std, n_samples, len(classes), len(interiors), tuple(float(v) for v in sups)
    )


# === expected supremum over one contour size ===============================


class SupEstimate(NamedTuple):
    value: float
    std: float  # standard error of the mean
    scale: float  # eps times the contour size, the claimed growth rate
    n_samples: int
    n_contours: int
    sup_values: tuple


def estimate_sup_expectation(
    n: int,
    region: Region,
    p: Params,
    n_samples: int,
    distribution: str = "gaussian01",
    cap: int = ENSEMBLE_CAP,
) -> SupEstimate:
    """Monte Carlo mean of the per-draw supremum of the interior increment
    over all origin contours of size exactly n, reported against the
    eps * n growth scale.

    The per-draw suprema are returned so a caller can rescale one sample
    set against another; with the field values shared across eps choices
    the increments are close to linear in eps at small beta * eps.
    """
    region = frozenset(region)
    if n < 1:
        raise ValueError("contour size must be at least 1")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    _require_positive_beta(p)
    gammas = enumerate_origin_contours(region, n, p, cap=EXACT_CAP)
    scale = p.eps * n
    if not gammas:
        return SupEstimate(0.0, 0.0, scale, n_samples, 0, ())
    interiors = sorted({g.I_minus for g in gammas}, key=lambda I: sorted(I))
    for interior in interiors:
        if not interior <= region:
            raise ValueError(
                "a contour interior pokes outside the region; "
                "the field flip is undefined there"
            )
    ens = SpinEnsemble(region, p, cap=cap)
    fields = _draw_fields(region, distribution, p, _SUP_STREAM, n_samples)
    dm = _delta_matrix(ens, interiors, fields, p)
    sups = dm.max(axis=0)
    value = float(sups.mean())
    std = float(sups.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return SupEstimate(
        value, std, scale, n_samples, len(gammas), tuple(float(v) for v in sups)
    )


# === greedy lattice animals ================================================


ANIMAL_VARIANTS = ("connected", "contour_interiors")


class AnimalResult(NamedTuple):
    best_region: Region
    score: float  # field sum divided by the number of boundary edges
    edge_boundary: int
    size: int


def _edge_boundary_count(A: Region) -> int:
    return sum(1 for x in A for nb in neighbors(x) if nb not in A)


def _origin_shapes(d: int, k_max: int):
    """Connected cell sets of size up to k_max whose lexicographically
    least cell is the origin, each produced exactly once.

    Growth enumeration: cells below the origin are never admitted, and a
    frontier cell skipped at one level stays excluded below it, so every
    shape has a unique growth history.
    """
    origin = (0,) * d
    yield (origin,)
    if k_max <= 1:
        return

    def grow(shape, frontier, seen):
        for i, cell in enumerate(frontier):
            cur = shape + (cell,)
            yield cur
            if len(cur) < k_max:
                fresh = tuple(
                    nb for nb in neighbors(cell) if nb > origin and nb not in seen
                )
                yield from grow(cur, frontier[i + 1 :] + fresh, seen | set(fresh))

    start = tuple(sorted(nb for nb in neighbors(origin) if nb > origin))
    yield from grow((origin,), start, set(start))


def greedy_animal(h: FieldSample, k_max: int, variant: str, p: Params, cap: int = EXACT_CAP) -> AnimalResult:
    """Exact maximizer of (sum of h over A) / |edge boundary of A| over a
    finite family of sets through the origin.

    The connected variant ranges over every connected set of up to k_max
    sites that contains the origin and stays inside the field's region;
    the contour_interiors variant ranges over the distinct non-empty minus
    interiors of origin contours of size up to k_max.  The supremum is
    over non-empty sets only, so an everywhere-negative constant field
    selects the singleton at the origin.  Ties go to the smaller set,
    then to the lexicographically smallest site list.
    """
    if variant not in ANIMAL_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; available: {ANIMAL_VARIANTS}")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    region = h.region

    if variant == "connected":
        if k_max > ANIMAL_CAP:
            raise ValueError(f"connected enumeration is capped at {ANIMAL_CAP} sites")
        origin = (0,) * p.d
        if origin not in region:
            raise ValueError("the field's region must contain the origin")

        def candidates():
            for shape in _origin_shapes(p.d, k_max):
                for cell in shape:
                    A = frozenset(
                        tuple(x[i] - cell[i] for i in range(p.d)) for x in shape
                    )
                    if A <= region:
                        yield A

    else:

        def candidates():
            found = set()
            for size in range(1, k_max + 1):
                for g in enumerate_origin_contours(region, size, p, cap=cap):
                    interior = g.I_minus
                    if interior and interior <= region and interior not in found:
                        found.add(interior)
                        yield interior

    best = None
    for A in candidates():
        total = sum(h.values[x] for x in A)
        edges = _edge_boundary_count(A)
        score = total / edges
        key = (-score, len(A), tuple(sorted(A)))
        if best is None or key < best[0]:
            best = (key, A, score, edges)
    if best is None:
        raise ValueError(
            "no candidate sets: no non-empty contour interiors up to this size"
            if variant == "contour_interiors"
            else "no candidate sets inside the region"
        )
    _, A, score, edges = best
    return AnimalResult(A, float(score), edges, len(A))
