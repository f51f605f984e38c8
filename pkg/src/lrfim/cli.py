"""Command-line front end: deterministic campaigns with CSV output.

Configuration precedence, lowest to highest:

1. built-in defaults,
2. the LRFIM_OUT_DIR environment variable (output directory only),
3. a flat key=value config file passed with --config,
4. command-line flags.

Every output file starts with ``# key = value`` header lines recording the
tool version, the schema name, the full parameter set, a hash of the
derived constant table, and the seed.  No timestamps or machine state go
into any output, so identical configurations produce byte-identical files.

Exit codes: 0 success, 1 usage or parameter error (including any failed
verify check), 2 feasibility failure under --require-feasible, 64 unknown
subcommand or verify suite.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .coarse import (
    admissible_cover,
    check_coarse_cover_bounds,
    check_cube_pair_bound,
    check_projection_bound,
    count_coarse_images,
)
from .contour import (
    BoundCheck,
    check_interaction_bounds,
    condition_b_violations,
    contour_from_line,
    contour_to_line,
    contours_of,
    enumerate_origin_contours,
    gamma_r_partition,
    peierls_feasible,
    peierls_gap,
)
from .disorder import (
    ANIMAL_VARIANTS,
    bad_event_probability,
    delta_A,
    greedy_animal,
    verify_concentration,
)
from .entropy import (
    PROJECTION_LAMBDA,
    check_covering_bound,
    check_covering_counts,
    check_family_bound,
    check_volume_bound,
    compute_constants,
)
from .lattice import (
    Cube,
    Rectangle,
    box,
    centered_box,
    random_cube_union,
    random_percolation_region,
    random_polyomino,
)
from .model import (
    EXACT_CAP,
    Configuration,
    DISTRIBUTIONS,
    FieldSample,
    flip_field,
    gibbs_probability,
    metropolis_run,
    sample_field,
)
from .params import Params, rng_from

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_UNKNOWN = 64

OUT_DIR_ENV = "LRFIM_OUT_DIR"

VERIFY_SUITES = ("partitions", "geometry", "peierls", "entropy", "concentration")

# seed-stream indices; disjoint from the streams disorder.py reserves
_PARTITION_STREAM = 41
_GEOMETRY_STREAM = 43
_PEIERLS_STREAM = 47
_PHASE_STREAM = 53
_ANTISYMMETRY_STREAM = 59


# === run configuration =====================================================


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation depends on; hashable and immutable, so
    two equal configs produce byte-identical outputs."""

    params: Params
    experiment: str = "desk"
    exact_cap: int = EXACT_CAP
    k_max: int = 6
    n_samples: int = 200
    sweeps: int = 2000
    out_dir: str = "."
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        for name in ("exact_cap", "k_max", "n_samples", "sweeps", "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


_PARAM_KEYS = {
    "d": int,
    "alpha": float,
    "J": float,
    "beta": float,
    "eps": float,
    "M": float,
    "a": float,
    "delta": float,
    "r": int,
    "tol": float,
}
_RUN_KEYS = {
    "experiment": str,
    "exact_cap": int,
    "k_max": int,
    "n_samples": int,
    "sweeps": int,
    "out_dir": str,
    "seed": int,
    "jobs": int,
}


def read_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and # comments are skipped."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            conv = _PARAM_KEYS.get(key) or _RUN_KEYS.get(key)
            if conv is None:
                raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
            try:
                values[key] = conv(text)
            except ValueError:
                raise ValueError(
                    f"{path}:{ln}: cannot read {text!r} as {conv.__name__} for {key!r}"
                ) from None
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in list(_PARAM_KEYS) + list(_RUN_KEYS):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    out_dir = values.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "."
    seed = values.get("seed", 0)
    params = Params(
        **{k: values[k] for k in _PARAM_KEYS if k in values}, seed=seed
    )
    return RunConfig(
        params=params,
        experiment=values.get("experiment", "desk"),
        exact_cap=values.get("exact_cap", EXACT_CAP),
        k_max=values.get("k_max", 6),
        n_samples=values.get("n_samples", 200),
        sweeps=values.get("sweeps", 2000),
        out_dir=out_dir,
        seed=seed,
        jobs=values.get("jobs", 1),
    )


# === deterministic formatting and file writing =============================


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "skipped"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _site_text(x) -> str:
    return "(" + ",".join(str(c) for c in x) + ")"


def _region_text(sites) -> str:
    return ";".join(_site_text(x) for x in sorted(sites))


def constants_hash(p: Params) -> str:
    tbl = compute_constants(p)
    text = ";".join(f"{name}={value!r}" for name, value, _ in tbl.as_rows())
    text += f";feasible={tbl.feasible}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def header_lines(cfg: RunConfig, command: str, schema: str, extra: dict | None = None) -> list:
    p = cfg.params
    lines = [
        f"# tool_version = {__version__}",
        f"# schema = {schema}",
        f"# command = {command}",
        f"# experiment = {cfg.experiment}",
        f"# seed = {cfg.seed}",
    ]
    for name in ("d", "alpha", "J", "beta", "eps", "M", "a", "delta", "r", "tol"):
        lines.append(f"# params.{name} = {_fmt(getattr(p, name))}")
    lines.append(f"# params.label = {p.label()}")
    lines.append(f"# constants_hash = {constants_hash(p)}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    return lines


def write_csv(path: str, header: list, columns: list, rows: list) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _run_units(worker, tasks: list, jobs: int) -> list:
    """Map worker over tasks, optionally on a process pool; results come
    back in task order either way, so output order never depends on
    scheduling."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    workers = min(jobs, len(tasks))
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=chunk))


def _check_rows(instance, checks) -> list:
    return [(instance, c.name, c.lhs, c.rhs, c.rhs - c.lhs, c.passed) for c in checks]


def _desk_side(d: int) -> int:
    return 4 if d == 2 else 2


VERIFY_COLUMNS = ["instance", "lemma", "lhs", "rhs", "margin", "pass"]
TAIL_COLUMNS = ["check", "seed", "eps", "beta", "n", "statistic", "bound", "pass"]


# === verify suite workers (module level so a process pool can pickle) =====


def _partition_unit(task) -> list:
    index, seed_i, p = task
    rng = rng_from(seed_i)
    d = p.d
    kind = index % 3
    if kind == 0:
        side = 7 if d == 2 else 4
        A = random_percolation_region(rng, d, side, float(rng.uniform(0.25, 0.6)))
    elif kind == 1:
        A = random_polyomino(rng, d, int(rng.integers(2, 40 if d == 2 else 28)))
    else:
        A = random_cube_union(rng, d, int(rng.integers(1, 4)), 2 if d == 2 else 1, 6)
    part = gamma_r_partition(A, p)
    union = frozenset().union(*part.parts)
    overlap = sum(len(q) for q in part.parts) - len(union)
    missed = len(union ^ A)
    bad = len(condition_b_violations(part.parts, p))
    checks = (
        BoundCheck("parts_cover_input", float(missed), 0.0, missed == 0),
        BoundCheck("parts_disjoint", float(overlap), 0.0, overlap == 0),
        BoundCheck("separation_condition", float(bad), 0.0, bad == 0),
    )
    return _check_rows(seed_i, checks)


def _geometry_unit(task) -> list:
    index, seed_i, p = task
    rng = rng_from(seed_i)
    d = p.d
    rows = []

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
    rows += _check_rows(seed_i, check_projection_bound(A, R, PROJECTION_LAMBDA, p).checks)

    scales = (1, 2) if d == 2 else (1,)
    m = int(rng.choice(scales))
    anchor = tuple(int(rng.integers(-2, 3)) for _ in range(d))
    axis = int(rng.integers(0, d))
    sign = 1 if rng.random() < 0.5 else -1
    cube = Cube(m, anchor)
    other = Cube(m, tuple(a + (sign if i == axis else 0) for i, a in enumerate(anchor)))
    dense = float(rng.uniform(0.55, 1.0))
    sparse = float(rng.uniform(0.0, 0.45))
    B = {x for x in cube.sites() if rng.random() < dense}
    B |= {x for x in other.sites() if rng.random() < sparse}
    lo = tuple(min(a, b) - 2 for a, b in zip(cube.low(), other.low()))
    hi = tuple(max(a, b) + 2 for a, b in zip(cube.high(), other.high()))
    B |= {
        x
        for x in box(lo, hi)
        if not cube.contains(x) and not other.contains(x) and rng.random() < 0.3
    }
    rows += _check_rows(seed_i, check_cube_pair_bound(frozenset(B), cube, other, p).checks)
    return rows


def _peierls_unit(task) -> list:
    index, seed_i, p, side = task
    rng = rng_from(seed_i)
    region = centered_box(side, p.d)
    sites = sorted(region)
    p_minus = 0.2 if index % 2 == 0 else 0.5
    mask = rng.random(len(sites)) < p_minus
    sigma = Configuration(
        region, {x: -1 if m else 1 for x, m in zip(sites, mask)}, "plus"
    )
    family = contours_of(sigma, p)
    feasible = peierls_feasible(p)
    rows = []
    for k, g in enumerate(family.external):
        pg = peierls_gap(sigma, g, p)
        rows.append(
            (seed_i, f"erasing_gap_positive[contour={k}]", 0.0, pg.gap, pg.gap, pg.gap > 0.0)
        )
        rows.append(
            (
                seed_i,
                f"erasing_gap_vs_c2_weight[contour={k}]",
                pg.bound,
                pg.gap,
                pg.gap - pg.bound,
                (pg.bound <= pg.gap) if feasible else None,
            )
        )
    if len(family.contours) >= 2:
        for k, g in enumerate(family.contours):
            rep = check_interaction_bounds(sigma, g, p)
            rows += [
                (seed_i, f"{c.name}[contour={k}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed)
                for c in rep.checks
            ]
    return rows


def _run_partitions(cfg: RunConfig) -> list:
    master = rng_from(cfg.seed, _PARTITION_STREAM)
    seeds = master.integers(0, 2**63 - 1, size=cfg.n_samples)
    tasks = [(i, int(s), cfg.params) for i, s in enumerate(seeds)]
    return [row for unit in _run_units(_partition_unit, tasks, cfg.jobs) for row in unit]


def _run_geometry(cfg: RunConfig) -> list:
    master = rng_from(cfg.seed, _GEOMETRY_STREAM)
    seeds = master.integers(0, 2**63 - 1, size=cfg.n_samples)
    tasks = [(i, int(s), cfg.params) for i, s in enumerate(seeds)]
    return [row for unit in _run_units(_geometry_unit, tasks, cfg.jobs) for row in unit]


def _run_peierls(cfg: RunConfig, side: int) -> list:
    master = rng_from(cfg.seed, _PEIERLS_STREAM)
    seeds = master.integers(0, 2**63 - 1, size=cfg.n_samples)
    tasks = [(i, int(s), cfg.params, side) for i, s in enumerate(seeds)]
    return [row for unit in _run_units(_peierls_unit, tasks, cfg.jobs) for row in unit]


def _run_entropy(cfg: RunConfig, side: int) -> list:
    p = cfg.params
    region = centered_box(side, p.d)
    tbl = compute_constants(p)
    rows = []
    by_size = {}
    for n in range(1, min(len(region), 14) + 1):
        contours = enumerate_origin_contours(region, n, p, cap=cfg.exact_cap)
        if contours:
            by_size[n] = contours
            lhs = math.log(len(contours))
            rows.append(
                (n, "log_origin_contours_vs_b6n", lhs, tbl.b6 * n, tbl.b6 * n - lhs, lhs <= tbl.b6 * n)
            )
    budget = max(1, cfg.n_samples // max(1, len(by_size)))
    for n, contours in by_size.items():
        for j, g in enumerate(contours[:budget]):
            inst = f"{n}/{j}"
            for ell in (0, 1, 2):
                for c in check_coarse_cover_bounds(g, ell, p).checks:
                    rows.append((inst, f"{c.name}[ell={ell}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
                for c in check_volume_bound(g, ell, p).checks:
                    rows.append((inst, f"{c.name}[ell={ell}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
                for c in check_covering_bound(g, ell, 1, p).checks:
                    rows.append((inst, f"{c.name}[ell={ell}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
        for ell in (1, 2):
            for c in check_covering_counts(n, ell, region, p, cap=cfg.exact_cap).checks:
                rows.append((n, f"{c.name}[ell={ell}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
            for c in count_coarse_images(n, ell, region, p, cap=cfg.exact_cap).checks:
                rows.append((n, f"{c.name}[ell={ell}]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
    if p.r <= 4:
        for V in (1, 2):
            for c in check_family_bound(0, V, p.d, p.r).checks:
                rows.append((V, f"{c.name}[ell=0]", c.lhs, c.rhs, c.rhs - c.lhs, c.passed))
    return rows


def _run_concentration(cfg: RunConfig) -> list:
    p = cfg.params
    region = centered_box(2, p.d)
    sites = sorted(region)
    A = frozenset(sites[0::2])
    A2 = frozenset({sites[0]})
    grid = tuple(0.35 * k for k in range(1, 21))
    rows = []
    for dist in DISTRIBUTIONS:
        rep = verify_concentration(A, A2, region, p, cfg.n_samples, grid, distribution=dist)
        named = {c.name: c for c in rep.checks}
        for k, lam in enumerate(grid):
            c = named[f"delta_tail_{k}"]
            rows.append(
                (f"delta_tail[{dist},lam={_fmt(lam)}]", cfg.seed, p.eps, p.beta, len(A), c.lhs, c.rhs, c.passed)
            )
            c = named[f"difference_tail_{k}"]
            rows.append(
                (
                    f"difference_tail[{dist},lam={_fmt(lam)}]",
                    cfg.seed,
                    p.eps,
                    p.beta,
                    len(A ^ A2),
                    c.lhs,
                    c.rhs,
                    c.passed,
                )
            )
    master = rng_from(cfg.seed, _ANTISYMMETRY_STREAM)
    worst = 0.0
    for s in master.integers(0, 2**63 - 1, size=min(cfg.n_samples, 200)):
        h = sample_field(region, "gaussian01", int(s))
        worst = max(worst, abs(delta_A(A, h, region, p) + delta_A(A, flip_field(h, A), region, p)))
    rows.append(
        ("delta_antisymmetry[gaussian01]", cfg.seed, p.eps, p.beta, len(A), worst, 1e-10, worst <= 1e-10)
    )
    return rows


# === phase worker ==========================================================


def _phase_unit(task):
    region_sites, base, beta, eps, dist, field_seed, chain_seed, sweeps, exact_cap = task
    region = frozenset(region_sites)
    p = Params(**base, beta=beta, eps=eps)
    h = sample_field(region, dist, field_seed)
    origin = (0,) * p.d
    if len(region) <= exact_cap:
        prob = gibbs_probability(
            lambda s: s.spins[origin] == -1, region, h, p, cap=exact_cap
        )
        return (prob, 0.0, math.nan, "exact")
    res = metropolis_run(region, h, p, sweeps, chain_seed, observables=("rb_p_minus_origin",))
    est = res.estimates["rb_p_minus_origin"]
    return (est.value, est.stderr, res.acceptance_rate, "metropolis")


# === subcommand handlers ===================================================


def cmd_constants(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    tbl = compute_constants(p)
    param_rows = [("params." + name, getattr(p, name), "input") for name in ("d", "alpha", "J", "beta", "eps", "M", "tol")]
    derived = {
        "a": "3(d+1)/min(alpha-d,1)",
        "delta": "d+1",
        "r": "4 ceil(log2(a+1)) + d + 1",
    }
    for name, formula in derived.items():
        how = "input (override)" if name in p.overridden else formula
        param_rows.append(("params." + name, getattr(p, name), how))
    rows = param_rows + list(tbl.as_rows())
    rows.append(("feasible", tbl.feasible, "M > M_threshold"))
    if args.json:
        payload = {
            "tool_version": __version__,
            "seed": cfg.seed,
            "params": {name: getattr(p, name) for name in ("d", "alpha", "J", "beta", "eps", "M", "a", "delta", "r", "tol")},
            "constants": {name: value for name, value, _ in tbl.as_rows()},
            "feasible": tbl.feasible,
            "notes": list(tbl.notes),
            "constants_hash": constants_hash(p),
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        width = max(len(str(r[0])) for r in rows)
        for name, value, formula in rows:
            print(f"{name:<{width}}  {_fmt(value):<24}  {formula}")
        for note in tbl.notes:
            print(f"note: {note}")
    extra = {f"note.{i}": note for i, note in enumerate(tbl.notes)}
    path = os.path.join(cfg.out_dir, "constants.csv")
    write_csv(
        path,
        header_lines(cfg, "constants", "lrfim.constants.v1", extra),
        ["name", "value", "formula"],
        rows,
    )
    print(f"wrote {path}", file=sys.stderr if args.json else sys.stdout)
    if args.require_feasible and not tbl.feasible:
        print("error: M is below the feasibility threshold", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args: argparse.Namespace) -> int:
    suite = args.suite
    p = cfg.params
    side = args.side or _desk_side(p.d)
    if suite == "partitions":
        rows, columns = _run_partitions(cfg), VERIFY_COLUMNS
    elif suite == "geometry":
        rows, columns = _run_geometry(cfg), VERIFY_COLUMNS
    elif suite == "peierls":
        rows, columns = _run_peierls(cfg, side), VERIFY_COLUMNS
        if not peierls_feasible(p):
            print(
                "warning: M is below the feasibility threshold; the erasing "
                "bound is reported but not asserted",
                file=sys.stderr,
            )
    elif suite == "entropy":
        rows, columns = _run_entropy(cfg, side), VERIFY_COLUMNS
    else:
        rows, columns = _run_concentration(cfg), TAIL_COLUMNS
    flags = [row[-1] for row in rows]
    passed = sum(1 for f in flags if f is True)
    failed = sum(1 for f in flags if f is False)
    skipped = sum(1 for f in flags if f is None)
    extra = {"suite": suite, "n_samples": cfg.n_samples}
    if suite in ("peierls", "entropy"):
        extra["side"] = side
    if suite == "entropy" and p.r > 4:
        extra["family_bound"] = "skipped (enumeration needs r <= 4)"
    path = os.path.join(cfg.out_dir, f"verify_{suite}.csv")
    write_csv(path, header_lines(cfg, "verify", f"lrfim.verify.{suite}.v1", extra), columns, rows)
    print(f"{suite}: {len(rows)} checks, {passed} passed, {failed} failed, {skipped} skipped")
    print(f"wrote {path}")
    print("result = " + ("FAIL" if failed else "PASS"))
    return EXIT_USAGE if failed else EXIT_OK


def cmd_phase(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    betas = [float(v) for v in args.betas.split(",") if v != ""]
    epsilons = [float(v) for v in args.epsilons.split(",") if v != ""]
    if not betas or not epsilons:
        raise ValueError("the (beta, eps) grid must be non-empty")
    realizations = args.realizations
    if realizations < 1:
        raise ValueError("realizations must be a positive integer")
    side = args.side
    region = centered_box(side, p.d)
    base = {"d": p.d, "alpha": p.alpha, "J": p.J, "M": p.M, "tol": p.tol, "seed": p.seed}
    for name in p.overridden:
        base[name] = getattr(p, name)
    master = rng_from(cfg.seed, _PHASE_STREAM)
    field_seeds = [int(s) for s in master.integers(0, 2**63 - 1, size=realizations)]
    chain_seeds = [int(s) for s in master.integers(0, 2**63 - 1, size=realizations)]
    region_sites = tuple(sorted(region))
    tasks = [
        (region_sites, base, b, e, args.distribution, field_seeds[k], chain_seeds[k], cfg.sweeps, cfg.exact_cap)
        for b in betas
        for e in epsilons
        for k in range(realizations)
    ]
    results = _run_units(_phase_unit, tasks, cfg.jobs)
    rows = []
    i = 0
    for b in betas:
        for e in epsilons:
            chunk = results[i : i + realizations]
            i += realizations
            vals = np.array([c[0] for c in chunk])
            errs = np.array([c[1] for c in chunk])
            accs = np.array([c[2] for c in chunk])
            method = chunk[0][3]
            mean = float(vals.mean())
            std = float(vals.std(ddof=1)) if realizations > 1 else 0.0
            stderr = float(np.sqrt((errs**2).mean()))
            acceptance = float(accs.mean())
            rows.append((b, e, side, method, realizations, mean, std, stderr, acceptance))
            print(
                f"beta={_fmt(b)} eps={_fmt(e)} {method}: "
                f"p_minus_origin = {_fmt(mean)} (std {_fmt(std)})"
            )
    extra = {
        "side": side,
        "realizations": realizations,
        "distribution": args.distribution,
        "estimator": "exact enumeration below exact_cap sites, else Metropolis rb_p_minus_origin",
        "betas": args.betas,
        "epsilons": args.epsilons,
        "sweeps": cfg.sweeps,
    }
    path = os.path.join(cfg.out_dir, "phase.csv")
    write_csv(
        path,
        header_lines(cfg, "phase", "lrfim.phase.v1", extra),
        ["beta", "eps", "side", "method", "n_realizations", "mean", "std", "mc_stderr", "acceptance"],
        rows,
    )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_animal(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    variant = args.variant
    if args.side is not None:
        side = args.side
    elif variant == "connected":
        side = 2 * cfg.k_max + 1
    else:
        side = _desk_side(p.d)
    region = centered_box(side, p.d)
    if args.field == "ones":
        h = FieldSample(region, {x: 1.0 for x in region}, "ones", cfg.seed)
    else:
        h = sample_field(region, args.field, cfg.seed)
    result = greedy_animal(h, cfg.k_max, variant, p, cap=cfg.exact_cap)
    row = (
        variant,
        cfg.k_max,
        args.field,
        result.score,
        result.size,
        result.edge_boundary,
        _region_text(result.best_region),
    )
    extra = {"side": side, "field": args.field, "variant": variant, "k_max": cfg.k_max}
    path = os.path.join(cfg.out_dir, "animal.csv")
    write_csv(
        path,
        header_lines(cfg, "animal", "lrfim.animal.v1", extra),
        ["variant", "k_max", "field", "score", "size", "edge_boundary", "sites"],
        [row],
    )
    print(f"score = {_fmt(result.score)} on {result.size} sites (boundary {result.edge_boundary})")
    print(f"wrote {path}")
    return EXIT_OK


def _badevent_unit(task):
    region_sites, base, eps, n_max, n_samples, dist = task
    p = Params(**base, eps=eps)
    return bad_event_probability(frozenset(region_sites), p, n_max, n_samples, distribution=dist)


def cmd_badevent(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    epsilons = [float(v) for v in args.epsilons.split(",") if v != ""]
    if not epsilons:
        raise ValueError("the eps sweep must be non-empty")
    side = args.side or _desk_side(p.d)
    region = centered_box(side, p.d)
    base = {
        "d": p.d,
        "alpha": p.alpha,
        "J": p.J,
        "beta": p.beta,
        "M": p.M,
        "tol": p.tol,
        "seed": p.seed,
    }
    for name in p.overridden:
        base[name] = getattr(p, name)
    region_sites = tuple(sorted(region))
    tasks = [
        (region_sites, base, e, args.n_max, cfg.n_samples, args.distribution)
        for e in epsilons
    ]
    results = _run_units(_badevent_unit, tasks, cfg.jobs)
    rows = []
    for e, est in zip(epsilons, results):
        rows.append(
            ("bad_event_probability", cfg.seed, e, p.beta, cfg.n_samples, est.probability, math.nan, None)
        )
        print(
            f"eps={_fmt(e)}: probability = {_fmt(est.probability)} "
            f"(std {_fmt(est.std)}, {est.n_contours} contour classes)"
        )
    for e, est in zip(epsilons, results):
        rows.append(
            ("bad_event_std_error", cfg.seed, e, p.beta, cfg.n_samples, est.std, math.nan, None)
        )
    extra = {
        "side": side,
        "n_max": args.n_max,
        "distribution": args.distribution,
        "epsilons": args.epsilons,
        "n_contour_classes": results[0].n_contours,
        "n_interiors": results[0].n_interiors,
        "note": "estimate rows assert no bound; the pass column is skipped",
    }
    path = os.path.join(cfg.out_dir, "badevent.csv")
    write_csv(path, header_lines(cfg, "badevent", "lrfim.badevent.v1", extra), TAIL_COLUMNS, rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_coarsen(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    level = args.level
    if level < 0:
        raise ValueError("level must be >= 0")
    contours = []
    with open(args.infile, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                contours.append(contour_from_line(line))
    if not contours:
        raise ValueError(f"no contour lines in {args.infile}")
    rows = []
    for idx, g in enumerate(contours):
        cover = admissible_cover(g, level, p)
        rows.append(
            (
                idx,
                level,
                g.size,
                len(g.I_minus),
                len(cover.cubes),
                len(cover.region),
                cover.region == g.I_minus,
                _region_text(cover.region),
            )
        )
        print(f"contour {idx}: |B_{level}| = {len(cover.region)} from {len(cover.cubes)} cubes")
    extra = {"level": level, "source": os.path.basename(args.infile)}
    path = os.path.join(cfg.out_dir, "coarsen.csv")
    write_csv(
        path,
        header_lines(cfg, "coarsen", "lrfim.coarsen.v1", extra),
        ["index", "level", "support_size", "interior_size", "n_cubes", "cover_size", "equals_interior", "sites"],
        rows,
    )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_contours(cfg: RunConfig, args: argparse.Namespace) -> int:
    p = cfg.params
    if args.action == "dump":
        side = args.side or _desk_side(p.d)
        region = centered_box(side, p.d)
        lines = []
        for n in range(1, args.n_max + 1):
            for g in enumerate_origin_contours(region, n, p, cap=cfg.exact_cap):
                lines.append(contour_to_line(g))
        path = os.path.join(cfg.out_dir, "contours.txt")
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        header = header_lines(
            cfg, "contours", "lrfim.contours.v1", {"side": side, "n_max": args.n_max, "count": len(lines)}
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(line + "\n")
            for line in lines:
                fh.write(line + "\n")
        print(f"dumped {len(lines)} contours")
        print(f"wrote {path}")
        return EXIT_OK
    if args.action == "extract":
        rows = []
        with open(args.infile, encoding="utf-8") as fh:
            raw_lines = [ln.strip() for ln in fh]
        idx = 0
        for line in raw_lines:
            if not line or line.startswith("#"):
                continue
            g = contour_from_line(line)
            rows.append(
                (
                    idx,
                    g.size,
                    len(g.interior_labels),
                    g.external_label,
                    len(g.I_minus),
                    contour_to_line(g) == line,
                )
            )
            idx += 1
        if not rows:
            raise ValueError(f"no contour lines in {args.infile}")
        extra = {"source": os.path.basename(args.infile), "count": len(rows)}
        path = os.path.join(cfg.out_dir, "contours_extract.csv")
        write_csv(
            path,
            header_lines(cfg, "contours", "lrfim.contours_extract.v1", extra),
            ["index", "size", "interior_components", "external_label", "interior_minus_size", "roundtrip_ok"],
            rows,
        )
        print(f"parsed {len(rows)} contours")
        print(f"wrote {path}")
        return EXIT_OK
    print(f"error: unknown contours action {args.action!r}", file=sys.stderr)
    return EXIT_UNKNOWN


# === argument parsing ======================================================


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1, keeping 2 free
    for the feasibility gate."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", metavar="FILE", help="flat key=value config file")
    group.add_argument("--out-dir", dest="out_dir", metavar="DIR", help=f"output directory (default: ${OUT_DIR_ENV} or .)")
    group.add_argument("--experiment", help="experiment id recorded in headers")
    group.add_argument("--seed", type=int, help="base seed (default 0)")
    group.add_argument("--jobs", type=int, help="worker processes (default 1)")
    group.add_argument("--exact-cap", dest="exact_cap", type=int, help="max sites for exact enumeration")
    group.add_argument("--k-max", dest="k_max", type=int, help="animal size cutoff")
    group.add_argument("--n-samples", dest="n_samples", type=int, help="campaign instances / field draws")
    group.add_argument("--sweeps", type=int, help="Metropolis measurement sweeps")
    group.add_argument("--require-feasible", action="store_true", help="exit 2 when M is below the feasibility threshold")
    model = parser.add_argument_group("model parameters")
    model.add_argument("--d", type=int, help="dimension")
    model.add_argument("--alpha", type=float, help="interaction decay exponent")
    model.add_argument("--J", type=float, help="coupling strength")
    model.add_argument("--beta", type=float, help="inverse temperature")
    model.add_argument("--eps", type=float, help="field strength")
    model.add_argument("--M", type=float, help="separation constant")
    model.add_argument("--a", type=float, help="separation exponent (flags the run as non-paper)")
    model.add_argument("--delta", type=float, help="volume exponent (flags the run as non-paper)")
    model.add_argument("--r", type=int, help="scale step (flags the run as non-paper)")
    model.add_argument("--tol", type=float, help="numeric tolerance")


def _build_parser(cmd: str) -> _Parser:
    parser = _Parser(prog=f"lrfim {cmd}", description=_COMMANDS[cmd][1])
    if cmd == "constants":
        parser.add_argument("--json", action="store_true", help="print a machine-readable table")
    elif cmd == "verify":
        parser.add_argument("suite", help="one of: " + ", ".join(VERIFY_SUITES))
        parser.add_argument("--side", type=int, help="box side for the desk region")
    elif cmd == "phase":
        parser.add_argument("--betas", default="0.0,0.3,1.0", help="comma-separated beta grid")
        parser.add_argument("--epsilons", default="0.0,0.5", help="comma-separated eps grid")
        parser.add_argument("--side", type=int, default=3, help="box side (default 3)")
        parser.add_argument("--realizations", type=int, default=20, help="field realizations per grid point")
        parser.add_argument("--distribution", default="gaussian01", choices=DISTRIBUTIONS)
    elif cmd == "animal":
        parser.add_argument("--variant", default="connected", choices=ANIMAL_VARIANTS)
        parser.add_argument("--field", default="ones", choices=("ones",) + DISTRIBUTIONS)
        parser.add_argument("--side", type=int, help="box side (default fits k_max)")
    elif cmd == "badevent":
        parser.add_argument("--epsilons", default="0.004,0.005,0.0065,0.008", help="comma-separated eps sweep")
        parser.add_argument("--n-max", dest="n_max", type=int, default=12, help="largest contour size")
        parser.add_argument("--side", type=int, help="box side for the desk region")
        parser.add_argument("--distribution", default="gaussian01", choices=DISTRIBUTIONS)
    elif cmd == "coarsen":
        parser.add_argument("--in", dest="infile", required=True, metavar="FILE", help="contour lines to coarsen")
        parser.add_argument("--level", type=int, default=0, help="cover level (default 0)")
    elif cmd == "contours":
        parser.add_argument("action", help="dump or extract")
        parser.add_argument("--in", dest="infile", metavar="FILE", help="contour lines to extract")
        parser.add_argument("--side", type=int, help="box side for dump")
        parser.add_argument("--n-max", dest="n_max", type=int, default=8, help="largest dumped size")
    _add_common(parser)
    return parser


_COMMANDS = {
    "constants": (cmd_constants, "print and save the derived constant table"),
    "verify": (cmd_verify, "run a check campaign and report pass/fail"),
    "phase": (cmd_phase, "estimate the minus probability at the origin over a (beta, eps) grid"),
    "animal": (cmd_animal, "maximize the boundary-normalized greedy animal score"),
    "badevent": (cmd_badevent, "estimate the bad-event probability over an eps sweep"),
    "coarsen": (cmd_coarsen, "compute admissible covers of stored contours"),
    "contours": (cmd_contours, "dump enumerated contours to text or parse them back"),
}


def _usage() -> str:
    lines = ["usage: lrfim <command> [options]", "", "commands:"]
    for name, (_, blurb) in _COMMANDS.items():
        lines.append(f"  {name:<10} {blurb}")
    lines.append("")
    lines.append("run 'lrfim <command> --help' for the command's options")
    return "\n".join(lines)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print(_usage(), file=sys.stderr)
        return EXIT_USAGE
    head = argv[0]
    if head in ("-h", "--help"):
        print(_usage())
        return EXIT_OK
    if head == "--version":
        print(f"lrfim {__version__}")
        return EXIT_OK
    if head not in _COMMANDS:
        print(f"lrfim: unknown command {head!r}\n{_usage()}", file=sys.stderr)
        return EXIT_UNKNOWN
    parser = _build_parser(head)
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as exc:
        return int(exc.code or 0)
    if head == "verify" and args.suite not in VERIFY_SUITES:
        print(
            f"lrfim verify: unknown suite {args.suite!r}; available: {', '.join(VERIFY_SUITES)}",
            file=sys.stderr,
        )
        return EXIT_UNKNOWN
    if head == "contours" and args.action not in ("dump", "extract"):
        print(f"lrfim contours: unknown action {args.action!r}; use dump or extract", file=sys.stderr)
        return EXIT_UNKNOWN
    if head == "contours" and args.action == "extract" and not args.infile:
        print("lrfim contours: extract needs --in FILE", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = build_config(args)
        if args.require_feasible and head != "constants" and not peierls_feasible(cfg.params):
            print("error: M is below the feasibility threshold", file=sys.stderr)
            return EXIT_INFEASIBLE
        handler = _COMMANDS[head][0]
        return handler(cfg, args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
