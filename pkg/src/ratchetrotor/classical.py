"""Classical engine: the kicked-rotor standard map with cyclic kick phases.

One period of the dynamics is an impulse followed by a unit free flight:

    p' = p + K * sin(x + a_n)
    x' = x + p'

The alternative ordering (drift first) is a canonical change of section and
does not affect the observables computed here.  Momenta are evolved on the
real line so directed transport stays visible; x is only ever needed modulo
2*pi and the ensemble path folds it each step to keep sin() arguments small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distribution import MomentumDistribution, deposit
from .errors import ConfigError, NumericsError, OrbitSearchError
from .model import SimParams

TWO_PI = 2.0 * math.pi


class PhasePoint(NamedTuple):
    x: float
    p: float


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Point ensemble with a kick counter.

    xs, ps are parallel 1-D arrays; n_kicks_applied is the number of kicks
    already applied, which also fixes the phase index of the next kick.
    """

    xs: np.ndarray
    ps: np.ndarray
    n_kicks_applied: int = 0

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ps = np.asarray(self.ps, dtype=float)
        if xs.ndim != 1 or xs.shape != ps.shape or xs.size == 0:
            raise NumericsError("ensemble arrays must be 1-D, nonempty and the same length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ps))):
            raise NumericsError("ensemble contains non-finite coordinates")
        if self.n_kicks_applied < 0:
            raise NumericsError("n_kicks_applied must be >= 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ps", ps)

    def __len__(self) -> int:
        return self.xs.size


def kick_map_step(pt: PhasePoint, params: SimParams, n: int) -> PhasePoint:
    """Advance a single phase-space point by kick n (impulse, then drift)."""
    p_new = pt.p + params.kick_strength * math.sin(pt.x + params.phase(n))
    return PhasePoint(pt.x + p_new, p_new)


def sample_initial_ensemble(count: int, params: SimParams, rng: np.random.Generator) -> ClassicalEnsemble:
    """x0 uniform on [0, 2*pi), p0 Gaussian with width sigma; x drawn first."""
    if count < 1:
        raise ConfigError(f"ensemble count must be >= 1, got {count}")
    xs = rng.uniform(0.0, TWO_PI, count)
    ps = rng.normal(0.0, params.sigma_resolved, count)
    return ClassicalEnsemble(xs=xs, ps=ps, n_kicks_applied=0)


def _kick_arrays(xs: np.ndarray, ps: np.ndarray, kick_strength: float, phase: float) -> None:
    """In-place vectorized map step; folds x back into [0, 2*pi)."""
    ps += kick_strength * np.sin(xs + phase)
    xs += ps
    np.mod(xs, TWO_PI, out=xs)


def evolve(ensemble: ClassicalEnsemble, params: SimParams, n_kicks: int) -> ClassicalEnsemble:
    """Apply kicks n_kicks_applied .. n_kicks_applied + n_kicks - 1."""
    if n_kicks < 0:
        raise ConfigError(f"n_kicks must be >= 0, got {n_kicks}")
    xs = ensemble.xs.copy()
    ps = ensemble.ps.copy()
    k = params.kick_strength
    for n in range(ensemble.n_kicks_applied, ensemble.n_kicks_applied + n_kicks):
        _kick_arrays(xs, ps, k, params.phase(n))
    return ClassicalEnsemble(xs=xs, ps=ps, n_kicks_applied=ensemble.n_kicks_applied + n_kicks)


@dataclass(frozen=True)
class PhasePortrait:
    """2-D occupation histogram of the unit cell [0,2*pi) x [0,2*pi)."""

    counts: np.ndarray
    x_edges: np.ndarray
    p_edges: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def folded_phase_portrait(ensemble: ClassicalEnsemble, bins_x: int, bins_p: int) -> PhasePortrait:
    if bins_x < 1 or bins_p < 1:
        raise ConfigError("portrait bin counts must be >= 1")
    counts, x_edges, p_edges = np.histogram2d(
        np.mod(ensemble.xs, TWO_PI),
        np.mod(ensemble.ps, TWO_PI),
        bins=(bins_x, bins_p),
        range=((0.0, TWO_PI), (0.0, TWO_PI)),
    )
    return PhasePortrait(counts=counts.astype(np.int64), x_edges=x_edges, p_edges=p_edges)


def momentum_histogram(ensemble: ClassicalEnsemble, grid: np.ndarray) -> MomentumDistribution:
    """Normalized momentum density; out-of-range points end up in overflow_fraction."""
    dist = deposit(grid, ensemble.ps)
    return MomentumDistribution(
        grid=dist.grid,
        density=dist.density,
        overflow_fraction=dist.overflow_fraction,
        n_kicks=ensemble.n_kicks_applied,
        n_samples=len(ensemble),
    )


@dataclass(frozen=True)
class AcceleratorOrbit:
    """Period-3 orbit translating by -2*pi in momentum each period."""

    x: float
    p: float
    residual: float


def _three_step_with_jacobian(xs, ps, params: SimParams):
    """Vectorized 3-kick map and its 2x2 Jacobian for a batch of points.

    Per step the Jacobian in (x, p) ordering is [[1 + K c, 1], [K c, 1]]
    with c = cos(x + a_n); the product over the three kicks is accumulated.
    """
    k = params.kick_strength
    j11 = np.ones_like(xs)
    j12 = np.zeros_like(xs)
    j21 = np.zeros_like(xs)
    j22 = np.ones_like(xs)
    x, p = xs.copy(), ps.copy()
    for n in range(3):
        c = np.cos(x + params.phase(n))
        kc = k * c
        s11 = (1.0 + kc) * j11 + j21
        s12 = (1.0 + kc) * j12 + j22
        s21 = kc * j11 + j21
        s22 = kc * j12 + j22
        j11, j12, j21, j22 = s11, s12, s21, s22
        p = p + k * np.sin(x + params.phase(n))
        x = x + p
    return x, p, (j11, j12, j21, j22)


def find_accelerator_orbit(
    params: SimParams,
    seeds_per_axis: int = 32,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> AcceleratorOrbit:
    """Newton search for q with map^3(q) = q - (0, 2*pi).

    Seeds an evenly spaced grid over one cell and iterates all seeds in
    parallel.  Raises OrbitSearchError when no seed converges below tol,
    which is the expected outcome for kick strengths below 2*pi/3.
    """
    def wrap(angle):
        # x is periodic: compare the 3-step angle displacement modulo 2*pi
        return (angle + math.pi) % TWO_PI - math.pi

    g = (np.arange(seeds_per_axis) + 0.5) * TWO_PI / seeds_per_axis
    xs, ps = [a.ravel() for a in np.meshgrid(g, g)]
    for _ in range(max_iter):
        fx_x, fx_p, (j11, j12, j21, j22) = _three_step_with_jacobian(xs, ps, params)
        fx = wrap(fx_x - xs)
        fp = fx_p + TWO_PI - ps
        # Jacobian of the residual is (composite map Jacobian) - identity
        a11, a12, a21, a22 = j11 - 1.0, j12, j21, j22 - 1.0
        det = a11 * a22 - a12 * a21
        det = np.where(np.abs(det) < 1e-14, np.nan, det)
        dx = (a22 * fx - a12 * fp) / det
        dp = (-a21 * fx + a11 * fp) / det
        bad = ~(np.isfinite(dx) & np.isfinite(dp))
        dx[bad] = 0.0
        dp[bad] = 0.0
        step = np.hypot(dx, dp)
        clip = np.minimum(1.0, 1.0 / np.maximum(step, 1e-300))
        xs = xs - dx * clip
        ps = ps - dp * clip
    fx_x, fx_p, _ = _three_step_with_jacobian(xs, ps, params)
    residual = np.maximum(np.abs(wrap(fx_x - xs)), np.abs(fx_p + TWO_PI - ps))
    residual[~np.isfinite(residual)] = np.inf
    best = int(np.argmin(residual))
    if residual[best] >= tol:
        raise OrbitSearchError(
            "no period-3 translating orbit found for "
            f"kick_strength={params.kick_strength}: best residual {residual[best]:.3e} "
            f"(threshold {tol:.1e}); such an orbit requires kick_strength >= 2*pi/3"
        )
    return AcceleratorOrbit(
        x=float(np.mod(xs[best], TWO_PI)),
        p=float(np.mod(ps[best], TWO_PI)),
        residual=float(residual[best]),
    )


@dataclass(frozen=True)
class ClassicalRunResult:
    """Per-kick transport series plus snapshot distributions.

    kicks runs 0..n_kicks inclusive; p_mean/p2/p2_right are ensemble
    averages at those times (p2_right sums p^2 over p > 0 only, normalized
    by the full ensemble size).  distributions maps recorded kick counts to
    momentum histograms.  final holds the evolved ensemble.
    """

    kicks: np.ndarray
    p_mean: np.ndarray
    p2: np.ndarray
    p2_right: np.ndarray
    distributions: dict[int, MomentumDistribution]
    final: ClassicalEnsemble


# chunk size for the ensemble loop; fixed constant (never derived from the
# worker count) so partial sums reduce in the same order for any --threads
CHUNK_POINTS = 25_000


def _run_chunk(task) -> dict:
    xs, ps, params, n_kicks, record_set, grid = task
    k = params.kick_strength
    n_times = n_kicks + 1
    sum_p = np.empty(n_times)
    sum_p2 = np.empty(n_times)
    sum_p2r = np.empty(n_times)
    hists: dict[int, tuple[np.ndarray, float]] = {}
    width = grid[1] - grid[0] if grid is not None else None

    def accumulate(n: int):
        sum_p[n] = ps.sum()
        sum_p2[n] = (ps * ps).sum()
        pos = ps > 0
        sum_p2r[n] = (ps[pos] ** 2).sum()
        if grid is not None and n in record_set:
            idx = np.rint((ps - grid[0]) / width).astype(np.int64)
            inside = (idx >= 0) & (idx < grid.size)
            counts = np.bincount(idx[inside], minlength=grid.size).astype(float)
            hists[n] = (counts, float(ps.size - inside.sum()))

    accumulate(0)
    for n in range(n_kicks):
        _kick_arrays(xs, ps, k, params.phase(n))
        accumulate(n + 1)
    return {
        "sum_p": sum_p,
        "sum_p2": sum_p2,
        "sum_p2r": sum_p2r,
        "hists": hists,
        "xs": xs,
        "ps": ps,
    }


def run_classical(
    params: SimParams,
    n_points: int,
    n_kicks: int,
    record_at: list[int],
    grid: np.ndarray | None,
    threads: int = 1,
) -> ClassicalRunResult:
    """Evolve a fresh ensemble, accumulating exact per-kick moment series.

    Moments come from the points themselves at every kick; histograms are
    deposited only at the requested record times.  The ensemble is processed
    in fixed-size chunks reduced in index order, so results are identical
    for any thread count.
    """
    from .parallel import map_ordered

    if n_kicks < 0:
        raise ConfigError(f"n_kicks must be >= 0, got {n_kicks}")
    record_set = set(record_at)
    bad = [n for n in record_set if not (0 <= n <= n_kicks)]
    if bad:
        raise ConfigError(f"record times outside [0, n_kicks]: {sorted(bad)}")

    rng = np.random.default_rng(params.seed)
    ens = sample_initial_ensemble(n_points, params, rng)
    tasks = [
        (ens.xs[i : i + CHUNK_POINTS].copy(), ens.ps[i : i + CHUNK_POINTS].copy(),
         params, n_kicks, record_set, grid)
        for i in range(0, n_points, CHUNK_POINTS)
    ]
    results = map_ordered(_run_chunk, tasks, threads)

    n_times = n_kicks + 1
    sum_p = np.zeros(n_times)
    sum_p2 = np.zeros(n_times)
    sum_p2r = np.zeros(n_times)
    hist_weights = {n: np.zeros(grid.size) for n in record_set} if grid is not None else {}
    hist_overflow = dict.fromkeys(record_set, 0.0)
    for res in results:
        sum_p += res["sum_p"]
        sum_p2 += res["sum_p2"]
        sum_p2r += res["sum_p2r"]
        for n, (counts, over) in res["hists"].items():
            hist_weights[n] += counts
            hist_overflow[n] += over

    distributions = {}
    for n, counts in hist_weights.items():
        mass = float(np.trapezoid(counts, grid))
        if mass <= 0:
            raise NumericsError(f"no probability mass on the grid at kick {n}")
        distributions[n] = MomentumDistribution(
            grid=grid,
            density=counts / mass,
            overflow_fraction=hist_overflow[n] / n_points,
            n_kicks=n,
            n_samples=n_points,
        )
    final = ClassicalEnsemble(
        xs=np.concatenate([r["xs"] for r in results]),
        ps=np.concatenate([r["ps"] for r in results]),
        n_kicks_applied=n_kicks,
    )
    return ClassicalRunResult(
        kicks=np.arange(n_times),
        p_mean=sum_p / n_points,
        p2=sum_p2 / n_points,
        p2_right=sum_p2r / n_points,
        distributions=distributions,
        final=final,
    )
