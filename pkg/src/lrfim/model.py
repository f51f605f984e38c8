"""Couplings, Hamiltonians, exact Gibbs computations, Metropolis sampling,
and external-field sampling.

Energies are relative to the constant-boundary configuration, so the
formally infinite boundary sums reduce to the single lattice constant
c_alpha = sum_{y != 0} |y|_1^(-alpha):

    sum_{y not in Lambda} J_xy = J c_alpha - sum_{y in Lambda, y != x} J_xy.

With eta the boundary sign and W_x the exterior weight above,

    rel_energy(sigma) = - sum_{{x,y} in Lambda} J_xy (sigma_x sigma_y - 1)
                        - eta sum_x W_x (sigma_x - eta)
                        - eps sum_x h_x (sigma_x - eta).

Exact enumeration encodes a configuration as an integer whose bit i set
means spin -1 at the i-th free site in sorted order, so integer 0 is the
all-plus state with relative energy exactly 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

from .lattice import Region, Site, l1, neighbors, boundaries
from .params import Params, rng_from, tail_zeta, zeta_series

EXACT_CAP = 24  # enumeration cap, 2^24 configurations
ENSEMBLE_CAP = 20  # cached-table cap (full spin matrix held in memory)
MC_SITE_CAP = 10**4  # dense coupling matrix cap for Metropolis


# === types =================================================================


@dataclass(frozen=True)
class Configuration:
    """Spins on a finite region with a constant boundary outside it."""

    region: Region
    spins: Mapping[Site, int]
    boundary: str = "plus"

    def __post_init__(self):
        if self.boundary not in ("plus", "minus"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if set(self.spins) != set(self.region):
            raise ValueError("spins must be defined exactly on the region")
        if any(s not in (-1, 1) for s in self.spins.values()):
            raise ValueError("spins must be +1 or -1")

    @property
    def eta(self) -> int:
        return 1 if self.boundary == "plus" else -1


def constant_config(region: Region, value: int, boundary: str = "plus") -> Configuration:
    return Configuration(region, {x: value for x in region}, boundary)


@dataclass(frozen=True)
class FieldSample:
    """One realization of the i.i.d. external field on a region.

    The strength eps is applied at energy evaluation, never stored here,
    so one sample serves every eps."""

    region: Region
    values: Mapping[Site, float]
    distribution: str
    seed: int

    def __post_init__(self):
        if set(self.values) != set(self.region):
            raise ValueError("field values must be defined exactly on the region")

    def vector(self, sites: Iterable[Site]) -> np.ndarray:
        return np.array([self.values[x] for x in sites], dtype=float)


def zero_field(region: Region) -> FieldSample:
    return FieldSample(region, {x: 0.0 for x in region}, "zero", 0)


class LatticeConstant(NamedTuple):
    c_alpha: float
    tail_bound: float  # guaranteed absolute truncation error
    radius: float  # shell cutoff actually used


# === couplings and the lattice constant ====================================


def coupling(x: Site, y: Site, p: Params) -> float:
    """J |x-y|_1^(-alpha) off the diagonal, 0 on it."""
    if x == y:
        return 0.0
    return p.J * l1(x, y) ** -p.alpha


def coupling_matrix(sites: list[Site], p: Params) -> np.ndarray:
    n = len(sites)
    if n == 0:
        return np.zeros((0, 0))
    coords = np.array(sites, dtype=float).reshape(n, -1)
    dist = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    np.fill_diagonal(dist, 1.0)  # placeholder, diagonal zeroed below
    K = p.J * dist**-p.alpha
    np.fill_diagonal(K, 0.0)
    return K


def shell_count(d: int, n: int) -> int:
    """Number of sites at l1 distance exactly n >= 1 from the origin."""
    return sum(
        2**i * math.comb(d, i) * math.comb(n - 1, i - 1) for i in range(1, d + 1)
    )


def _shell_polynomial(d: int) -> list[Fraction]:
    """Exact coefficients q_k with shell_count(d, n) = sum_k q_k n^k."""
    coeffs = [Fraction(0)] * d
    for i in range(1, d + 1):
        # C(n-1, i-1) = prod_{t=1..i-1} (n - t) / (i-1)!, coefficients low to high
        poly = [Fraction(1)]
        for t in range(1, i):
            shifted = [Fraction(0)] + poly
            scaled = [-t * c for c in poly] + [Fraction(0)]
            poly = [a + b for a, b in zip(shifted, scaled)]
        scale = Fraction(2**i * math.comb(d, i), math.factorial(i - 1))
        for k, c in enumerate(poly):
            coeffs[k] += scale * c
    return coeffs


def tail_coefficient(d: int, alpha: float) -> float:
    """Decay-sum tail control: sum over |y| > R of |y|^(-alpha) is at most
    this coefficient times R^(d-alpha)."""
    return 2.0 ** (d - 1 + alpha) * math.e ** (d - 1) / (alpha - d)


@lru_cache(maxsize=None)
def _lattice_constant(d: int, alpha: float, tol: float) -> LatticeConstant:
    coef = tail_coefficient(d, alpha)
    log_radius = math.log(coef / tol) / (alpha - d)
    if log_radius > 700.0:
        achieved = coef * math.exp(-700.0 * (alpha - d))
        raise ValueError(
            f"cannot reach tol={tol:g} within the shell cutoff cap; "
            f"achieved bound {achieved:g}"
        )
    radius = max(2.0, math.ceil(math.exp(log_radius)))
    # partial shell sum in closed form: sum_{n<=R} q_k n^(k-alpha) equals
    # q_k (zeta(alpha-k) - tail(alpha-k, R)) summed over monomials
    total = 0.0
    for k, q in enumerate(_shell_polynomial(d)):
        if q == 0:
            continue
        s = alpha - k
        total += float(q) * (zeta_series(s) - tail_zeta(s, radius))
    tail_bound = coef * radius ** (d - alpha)
    return LatticeConstant(total, tail_bound, radius)


def lattice_constant(p: Params) -> LatticeConstant:
    """c_alpha = sum_{y != 0} |y|_1^(-alpha), summed over l1 shells up to a
    cutoff R chosen so the shell-count tail bound drops below p.tol.

    The partial sum over n <= R is evaluated in closed form through the
    exact shell-count polynomial and zeta partial sums, which agrees with
    term-by-term shell summation to floating-point accuracy while staying
    O(d) regardless of R."""
    return _lattice_constant(p.d, p.alpha, p.tol)


# === energies ==============================================================


def exterior_weights(sites: list[Site], K: np.ndarray, p: Params) -> np.ndarray:
    """W_x = sum over y outside the site list of J_xy, exact via c_alpha."""
    c = lattice_constant(p).c_alpha
    return p.J * c - K.sum(axis=1)


def rel_energy(sigma: Configuration, h: FieldSample | None, p: Params) -> float:
    """Energy of sigma minus the energy of the constant boundary state."""
    if h is not None and h.region != sigma.region:
        raise ValueError("configuration and field live on different regions")
    sites = sorted(sigma.region)
    K = coupling_matrix(sites, p)
    W = exterior_weights(sites, K, p)
    s = np.array([sigma.spins[x] for x in sites], dtype=float)
    eta = sigma.eta
    # sigma_x sigma_y - 1 is -2 exactly when the spins disagree, so the pair
    # sum reduces to an occupancy quadratic form that vanishes identically
    # on the constant states
    u = 0.5 * (1.0 - s)
    pair = 2.0 * float(u @ K @ (1.0 - u))
    bnd = -eta * float(W @ (s - eta))
    if h is None or p.eps == 0.0:
        fld = 0.0
    else:
        fld = -p.eps * float(h.vector(sites) @ (s - eta))
    return pair + bnd + fld


def theta_support(region: Region) -> Region:
    """Sites forced to +1 by the event "every inner-boundary site is
    +-correct" under the plus boundary: the inner boundary together with
    its neighbors inside the region."""
    inner = boundaries(region).inner
    forced = set(inner)
    for x in inner:
        forced.update(nb for nb in neighbors(x) if nb in region)
    return frozenset(forced)


# === exact enumeration =====================================================


class SpinEnsemble:
    """Energy table over all configurations of the free sites of a region,
    with any forced sites pinned at +1 and folded into the exterior weight.

    The field enters linearly, so for a fixed region the table splits into
    a field-independent part E0 and the occupation matrix I (1 where the
    spin is -1); repeated field draws then cost one matrix-vector product
    each instead of a fresh enumeration."""

    def __init__(self, region: Region, p: Params, forced_plus: Region = frozenset(), cap: int = ENSEMBLE_CAP):
        if not region:
            raise ValueError("empty region")
        if not forced_plus <= region:
            raise ValueError("forced sites must lie inside the region")
        self.region = region
        self.p = p
        self.free = [x for x in sorted(region) if x not in forced_plus]
        nf = len(self.free)
        if nf > cap:
            raise ValueError(
                f"{nf} free spins exceeds the enumeration cap {cap}; "
                "use metropolis_run instead"
            )
        K = coupling_matrix(self.free, p)
        self.W = exterior_weights(self.free, K, p)
        n_states = 1 << nf
        ints = np.arange(n_states, dtype=np.uint32)
        # occupation: bit i set means spin -1 at free[i]
        self.occ = ((ints[:, None] >> np.arange(nf, dtype=np.uint32)) & 1).astype(
            np.float64
        )
        pair = 2.0 * ((self.occ @ K) * (1.0 - self.occ)).sum(axis=1)
        self.E0 = pair + 2.0 * (self.occ @ self.W)

    def energies(self, h: FieldSample | None) -> np.ndarray:
        if h is None or self.p.eps == 0.0:
            return self.E0
        hv = h.vector(self.free)
        return self.E0 + 2.0 * self.p.eps * (self.occ @ hv)

    def boltzmann(self, h: FieldSample | None) -> np.ndarray:
        return np.exp(-self.p.beta * self.energies(h))

    def z(self, h: FieldSample | None) -> float:
        return float(self.boltzmann(h).sum())

    def log_z(self, h: FieldSample | None) -> float:
        e = -self.p.beta * self.energies(h)
        m = e.max()
        return float(m + np.log(np.exp(e - m).sum()))

    def spins_of(self, index: int) -> dict[Site, int]:
        out = {x: 1 for x in self.region}
        for i, x in enumerate(self.free):
            if (index >> i) & 1:
                out[x] = -1
        return out

    def configurations(self):
        for idx in range(1 << len(self.free)):
            yield idx, Configuration(self.region, self.spins_of(idx))


def partition_function(
    region: Region,
    h: FieldSample | None,
    p: Params,
    constraint: Region | Callable[[Configuration], bool] | None = None,
    cap: int = EXACT_CAP,
) -> float:
    """Z over the plus-boundary configurations of the region, with energies
    relative to all-plus. The relative offset cancels in every ratio taken
    downstream.

    constraint: None for the full sum; a frozenset of sites to pin at +1
    (the fast path, used for the boundary-correctness event); or a
    predicate on Configuration (slow path, evaluated per state).
    """
    if len(region) > cap:
        raise ValueError(
            f"|region| = {len(region)} exceeds the enumeration cap {cap}; "
            "use metropolis_run instead"
        )
    if callable(constraint):
        ens = SpinEnsemble(region, p, cap=cap)
        weights = ens.boltzmann(h)
        total = 0.0
        for idx, cfg in ens.configurations():
            if constraint(cfg):
                total += weights[idx]
        return float(total)
    forced = constraint if constraint is not None else frozenset()
    sites = sorted(region)
    free = [x for x in sites if x not in forced]
    nf = len(free)
    K = coupling_matrix(free, p)
    W = exterior_weights(free, K, p)
    lin = 2.0 * W.copy()
    if h is not None and p.eps != 0.0:
        lin += 2.0 * p.eps * h.vector(free)
    total = 0.0
    chunk = 1 << 19
    idx_bits = np.arange(nf, dtype=np.uint64)
    for start in range(0, 1 << nf, chunk):
        ints = np.arange(start, min(start + chunk, 1 << nf), dtype=np.uint64)
        occ = ((ints[:, None] >> idx_bits) & 1).astype(np.float64)
        pair = 2.0 * ((occ @ K) * (1.0 - occ)).sum(axis=1)
        E = pair + occ @ lin
        total += float(np.exp(-p.beta * E).sum())
    return total


def gibbs_probability(
    event: Callable[[Configuration], bool],
    region: Region,
    h: FieldSample | None,
    p: Params,
    conditioned_on_theta: bool = False,
    cap: int = EXACT_CAP,
) -> float:
    """Exact Gibbs probability of an event, optionally conditioned on the
    inner boundary being entirely +-correct."""
    forced = theta_support(region) if conditioned_on_theta else frozenset()
    ens = SpinEnsemble(region, p, forced_plus=forced, cap=cap)
    weights = ens.boltzmann(h)
    hit = 0.0
    for idx, cfg in ens.configurations():
        if event(cfg):
            hit += weights[idx]
    return hit / float(weights.sum())


# === Metropolis ============================================================


class MCEstimate(NamedTuple):
    value: float
    stderr: float


@dataclass
class MCResult:
    estimates: dict[str, MCEstimate]
    sweeps: int
    burn_in: int
    acceptance_rate: float
    frozen_sites: int


OBSERVABLES = ("magnetization", "p_minus_origin", "rb_p_minus_origin")


def _mc_python(K, lin, spins, free_idx, beta, picks, uniforms, n_burn, n_meas, origin):
    """Reference sampler used when numba is unavailable; same contract as
    the jit kernel."""
    n = spins.shape[0]
    L = K @ spins + lin
    nf = free_idx.shape[0]
    mag = np.empty(n_meas)
    ind = np.empty(n_meas)
    rb = np.empty(n_meas)
    accepted = 0
    t = 0
    for sweep in range(n_burn + n_meas):
        for _ in range(nf):
            x = free_idx[picks[t]]
            dE = 2.0 * spins[x] * L[x]
            if dE <= 0.0 or uniforms[t] < math.exp(-beta * dE):
                spins[x] = -spins[x]
                L += 2.0 * spins[x] * K[:, x]
                accepted += 1
            t += 1
        if sweep >= n_burn:
            m = sweep - n_burn
            mag[m] = spins[free_idx].mean()
            ind[m] = 1.0 if spins[origin] == -1 else 0.0
            rb[m] = 1.0 / (1.0 + math.exp(min(2.0 * beta * L[origin], 700.0)))
    return mag, ind, rb, accepted


try:  # pragma: no cover - exercised implicitly everywhere numba is present
    import numba

    @numba.njit(cache=True)
    def _mc_kernel(K, lin, spins, free_idx, beta, picks, uniforms, n_burn, n_meas, origin):
        n = spins.shape[0]
        nf = free_idx.shape[0]
        L = np.empty(n)
        for x in range(n):
            acc = lin[x]
            for y in range(n):
                acc += K[x, y] * spins[y]
            L[x] = acc
        mag = np.empty(n_meas)
        ind = np.empty(n_meas)
        rb = np.empty(n_meas)
        accepted = 0
        t = 0
        for sweep in range(n_burn + n_meas):
            for _ in range(nf):
                x = free_idx[picks[t]]
                dE = 2.0 * spins[x] * L[x]
                ok = dE <= 0.0
                if not ok:
                    ok = uniforms[t] < math.exp(-beta * dE)
                if ok:
                    s_new = -spins[x]
                    spins[x] = s_new
                    delta = 2.0 * s_new
                    for y in range(n):
                        L[y] += delta * K[y, x]
                    accepted += 1
                t += 1
            if sweep >= n_burn:
                m = sweep - n_burn
                tot = 0.0
                for i in range(nf):
                    tot += spins[free_idx[i]]
                mag[m] = tot / nf
                ind[m] = 1.0 if spins[origin] == -1 else 0.0
                arg = 2.0 * beta * L[origin]
                if arg > 700.0:
                    arg = 700.0
                rb[m] = 1.0 / (1.0 + math.exp(arg))
        return mag, ind, rb, accepted

except ImportError:  # pragma: no cover
    _mc_kernel = _mc_python


def flip_energy_change(sigma: Configuration, x: Site, h: FieldSample | None, p: Params) -> float:
    """Exact energy change of flipping the spin at x, the quantity the
    sampler exponentiates."""
    sites = sorted(sigma.region)
    K = coupling_matrix(sites, p)
    W = exterior_weights(sites, K, p)
    i = sites.index(x)
    s = np.array([sigma.spins[y] for y in sites], dtype=float)
    hx = 0.0 if h is None else p.eps * h.values[x]
    L = float(K[i] @ s) + W[i] + hx
    return 2.0 * sigma.spins[x] * L


def metropolis_run(
    region: Region,
    h: FieldSample | None,
    p: Params,
    sweeps: int,
    seed: int,
    observables: Iterable[str] = OBSERVABLES,
    condition_theta: bool = False,
    burn_in: int | None = None,
    origin: Site | None = None,
    n_batches: int = 20,
) -> MCResult:
    """Single-spin-flip Metropolis under the plus boundary.

    Boundary-correctness conditioning freezes the forced sites at +1 and
    proposes flips only elsewhere; on any region this reproduces the exact
    conditional law because the conditioning event is precisely "those
    sites are all +1". Randomness is pregenerated from the seed, so runs
    are reproducible bit for bit.
    """
    if len(region) > MC_SITE_CAP:
        raise ValueError(f"|region| = {len(region)} exceeds the dense-matrix cap {MC_SITE_CAP}")
    if sweeps < 1:
        raise ValueError("need at least one measurement sweep")
    bad = [o for o in observables if o not in OBSERVABLES]
    if bad:
        raise ValueError(f"unknown observables {bad}; available: {OBSERVABLES}")
    sites = sorted(region)
    index = {x: i for i, x in enumerate(sites)}
    if origin is None:
        d = len(sites[0])
        origin = (0,) * d if (0,) * d in index else sites[0]
    frozen = theta_support(region) if condition_theta else frozenset()
    free_idx = np.array([i for i, x in enumerate(sites) if x not in frozen], dtype=np.int64)
    if free_idx.size == 0:
        # everything pinned: the conditional law is the point mass at all-plus
        est = {"magnetization": MCEstimate(1.0, 0.0), "p_minus_origin": MCEstimate(0.0, 0.0), "rb_p_minus_origin": MCEstimate(0.0, 0.0)}
        return MCResult({k: est[k] for k in observables}, sweeps, 0, 0.0, len(frozen))
    K = coupling_matrix(sites, p)
    lin = exterior_weights(sites, K, p)
    if h is not None and p.eps != 0.0:
        lin = lin + p.eps * h.vector(sites)
    if burn_in is None:
        burn_in = max(100, sweeps // 5)
    spins = np.ones(len(sites), dtype=np.float64)
    rng = rng_from(seed)
    n_attempts = (burn_in + sweeps) * free_idx.size
    picks = rng.integers(0, free_idx.size, size=n_attempts)
    uniforms = rng.random(n_attempts)
    mag, ind, rb, accepted = _mc_kernel(
        K, lin, spins, free_idx, p.beta, picks, uniforms, burn_in, sweeps, index[origin]
    )
    series = {"magnetization": mag, "p_minus_origin": ind, "rb_p_minus_origin": rb}
    nb = min(n_batches, sweeps)
    estimates = {}
    for name in observables:
        data = series[name]
        batches = np.array_split(data, nb)
        means = np.array([b.mean() for b in batches])
        se = means.std(ddof=1) / math.sqrt(nb) if nb > 1 else float("nan")
        estimates[name] = MCEstimate(float(data.mean()), float(se))
    return MCResult(estimates, sweeps, burn_in, accepted / n_attempts, len(frozen))


# === field sampling ========================================================


DISTRIBUTIONS = ("gaussian01", "bernoulli")


def sample_field(region: Region, distribution: str, seed: int) -> FieldSample:
    """I.i.d. field draw, one value per site in sorted order, deterministic
    in the seed. The strength eps multiplies these values only inside
    energy evaluations."""
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}; available: {DISTRIBUTIONS}")
    sites = sorted(region)
    rng = rng_from(seed)
    if distribution == "gaussian01":
        vals = rng.standard_normal(len(sites))
    else:
        vals = rng.integers(0, 2, size=len(sites)) * 2.0 - 1.0
    return FieldSample(region, dict(zip(sites, map(float, vals))), distribution, seed)


def flip_field(h: FieldSample, A: Region) -> FieldSample:
    """Sign-flip the field on A, identity elsewhere."""
    if not A <= h.region:
        raise ValueError("flip set must lie inside the field's region")
    vals = {x: (-v if x in A else v) for x, v in h.values.items()}
    return FieldSample(h.region, vals, h.distribution, h.seed)
