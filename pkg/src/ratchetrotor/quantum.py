"""Quantum engine: split-step Floquet propagation on Bloch momentum lattices.

The spatial 2*pi periodicity of the kick potential conserves the fractional
part beta of p/hbar_eff, so each sample evolves on its own rigid lattice
p_m = (m + beta) * hbar_eff.  One Floquet period applies the kick phase
exp(-i K cos(x + a_n) / hbar_eff) diagonally in position (reached by FFT) and
the free flight exp(-i hbar_eff (m + beta)^2 / 2) diagonally in momentum.

Amplitude vectors are stored in FFT index order (m = 0..M/2-1 then
-M/2..-1, matching numpy.fft.fftfreq); m_values() gives the integer index of
each slot.  When probability reaches the outer 5% of index space the lattice
doubles, re-embedding amplitudes at fixed m, so localized long runs stay far
below the ballistic worst-case size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .distribution import MomentumDistribution
from .errors import ConfigError, GridCapError, NumericsError
from .model import SimParams

TWO_PI = 2.0 * math.pi

# probability allowed in the outer index band before the lattice must grow
LEAK_THRESHOLD = 1e-8
# width of that band, as a fraction of M/2 on each side
LEAK_BAND_FRACTION = 0.05
# hard ceiling on lattice size
MAX_LATTICE = 2**20
# samples per Monte Carlo batch; a fixed constant (never derived from the
# worker count) so the floating-point reduction order is invariant
BATCH_SAMPLES = 64
# adaptive runs start from the lattice sized for this many kicks
START_HORIZON = 100


def lattice_m_values(m_size: int) -> np.ndarray:
    """Integer lattice indices in FFT storage order."""
    return np.fft.fftfreq(m_size, 1.0 / m_size).astype(np.int64)


def _band_size(m_size: int) -> int:
    return int(math.ceil(LEAK_BAND_FRACTION * (m_size // 2)))


def _band_mask(m_size: int) -> np.ndarray:
    m = lattice_m_values(m_size)
    return np.abs(m) >= (m_size // 2 - _band_size(m_size))


@dataclass(frozen=True)
class QuantumState:
    """Single-sample wavefunction on the beta-offset momentum lattice."""

    beta: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 4 or amps.size % 2 != 0:
            raise NumericsError("amplitudes must be a 1-D complex vector of even length >= 4")
        if not (0.0 <= self.beta < 1.0):
            raise NumericsError(f"beta must lie in [0, 1), got {self.beta!r}")
        if not np.all(np.isfinite(amps.view(float))):
            raise NumericsError("amplitudes contain non-finite values")
        norm = float(np.sum(amps.real**2 + amps.imag**2))
        if abs(norm - 1.0) > 1e-10:
            raise NumericsError(f"state norm is {norm!r}, expected 1 within 1e-10")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def m_size(self) -> int:
        return self.amplitudes.size

    def m_values(self) -> np.ndarray:
        return lattice_m_values(self.m_size)

    def momenta(self, hbar_eff: float) -> np.ndarray:
        return (self.m_values() + self.beta) * hbar_eff

    def density(self) -> np.ndarray:
        a = self.amplitudes
        return a.real**2 + a.imag**2

    def leakage(self) -> float:
        """Probability in the outer index band on each side."""
        return float(self.density()[_band_mask(self.m_size)].sum())


class GridGrowthNeeded(Exception):
    """Signal that a completed step left probability in the edge band.

    Carries the post-step state (norm intact); re-embed it on a doubled
    lattice with grow_state() and continue.
    """

    def __init__(self, state: QuantumState):
        super().__init__("edge leakage exceeded threshold; lattice must grow")
        self.state = state


def grow_state(state: QuantumState) -> QuantumState:
    """Double the lattice, keeping each amplitude at its integer index m."""
    m_size = state.m_size
    if 2 * m_size > MAX_LATTICE:
        raise GridCapError(
            f"momentum lattice would exceed the cap of 2^20 = {MAX_LATTICE} points"
        )
    out = np.zeros(2 * m_size, dtype=complex)
    out[: m_size // 2] = state.amplitudes[: m_size // 2]
    out[-(m_size // 2):] = state.amplitudes[m_size // 2:]
    return QuantumState(beta=state.beta, amplitudes=out)


def initial_state(p0: float, params: SimParams, m_size: int) -> QuantumState:
    """Plane wave at momentum p0: unit amplitude at m0 = floor(p0/hbar).

    beta is the fractional part of p0/hbar_eff, so (m0 + beta)*hbar = p0
    exactly.
    """
    if m_size % 2 != 0 or m_size < 4:
        raise ConfigError(f"lattice size must be even and >= 4, got {m_size}")
    ratio = p0 / params.hbar_eff
    m0 = math.floor(ratio)
    beta = ratio - m0
    if beta >= 1.0:  # fp rounding when ratio is a hair under an integer
        beta -= 1.0
        m0 += 1
    if not (-m_size // 2 < m0 < m_size // 2 - 1):
        raise NumericsError(
            f"p0={p0} maps to lattice index {m0}, outside the interior of "
            f"[-{m_size // 2}, {m_size // 2})"
        )
    amps = np.zeros(m_size, dtype=complex)
    amps[m0 if m0 >= 0 else m_size + m0] = 1.0
    return QuantumState(beta=beta, amplitudes=amps)


def _kick_phase_vector(params: SimParams, phase: float, m_size: int) -> np.ndarray:
    x = TWO_PI * np.arange(m_size) / m_size
    return np.exp(-1j * (params.kick_strength / params.hbar_eff) * np.cos(x + phase))


def _free_phase_vector(params: SimParams, beta: float, m_size: int) -> np.ndarray:
    m = lattice_m_values(m_size)
    return np.exp(-0.5j * params.hbar_eff * (m + beta) ** 2)


def floquet_step(state: QuantumState, params: SimParams, n: int) -> QuantumState:
    """One period: kick at phase a_n, then unit free flight.

    Raises GridGrowthNeeded (carrying the completed step) when the result
    puts more than LEAK_THRESHOLD probability in the outer index band, and
    NumericsError on loss of normalization or non-finite amplitudes.
    """
    m_size = state.m_size
    psi = sfft.ifft(state.amplitudes, norm="ortho")
    psi *= _kick_phase_vector(params, params.phase(n), m_size)
    amps = sfft.fft(psi, norm="ortho")
    amps *= _free_phase_vector(params, state.beta, m_size)
    if not np.all(np.isfinite(amps.view(float))):
        raise NumericsError(f"non-finite amplitudes after kick {n}")
    new = QuantumState(beta=state.beta, amplitudes=amps)
    if new.leakage() > LEAK_THRESHOLD:
        raise GridGrowthNeeded(new)
    return new


@dataclass(frozen=True)
class DensitySnapshot:
    """Single-sample momentum density at one recorded time."""

    n_kicks: int
    momenta: np.ndarray
    density: np.ndarray


def _check_record_times(record_at, n_kicks) -> list[int]:
    times = list(record_at)
    if any(times[i] >= times[i + 1] for i in range(len(times) - 1)):
        raise ConfigError(f"record times must be strictly increasing, got {times}")
    if any(not (0 <= t <= n_kicks) for t in times):
        raise ConfigError(f"record times outside [0, {n_kicks}]: {times}")
    return times


def propagate(
    state: QuantumState, params: SimParams, n_kicks: int, record_at
) -> list[DensitySnapshot]:
    """Drive one state through n_kicks periods, snapshotting at record_at.

    The lattice grows transparently whenever a step signals edge leakage.
    Momenta in each snapshot are sorted ascending.
    """
    if n_kicks < 0:
        raise ConfigError(f"n_kicks must be >= 0, got {n_kicks}")
    times = _check_record_times(record_at, n_kicks)
    wanted = set(times)
    snaps: dict[int, DensitySnapshot] = {}

    def snap(n: int, st: QuantumState):
        p = st.momenta(params.hbar_eff)
        order = np.argsort(p)
        snaps[n] = DensitySnapshot(n_kicks=n, momenta=p[order], density=st.density()[order])

    if 0 in wanted:
        snap(0, state)
    for n in range(n_kicks):
        try:
            state = floquet_step(state, params, n)
        except GridGrowthNeeded as signal:
            state = grow_state(signal.state)
        if (n + 1) in wanted:
            snap(n + 1, state)
    return [snaps[n] for n in times]


def grid_size_for(params: SimParams, n_kicks: int, sigma: float) -> int:
    """Power-of-two lattice whose momentum window clears the ballistic bound.

    The window hbar*M/2 must exceed max(2*pi*n_kicks/3, 10*sigma) plus a
    16*hbar safety margin.  Used as the starting size; adaptive growth
    handles anything the estimate misses.
    """
    window = max(TWO_PI * n_kicks / 3.0, 10.0 * sigma) + 16.0 * params.hbar_eff
    m_size = 64
    while params.hbar_eff * m_size / 2.0 <= window:
        m_size *= 2
        if m_size > MAX_LATTICE:
            raise GridCapError(
                f"required lattice exceeds the cap of 2^20 = {MAX_LATTICE} points"
            )
    return m_size


class _BatchEvolver:
    """Vectorized propagation of a batch of samples sharing one lattice.

    All rows grow together when any sample trips the leakage threshold;
    since batch membership is fixed by BATCH_SAMPLES alone, every run of the
    same configuration makes identical growth decisions.
    """

    def __init__(self, betas: np.ndarray, m0s: np.ndarray, params: SimParams, m_size: int):
        self.params = params
        self.betas = betas
        self.m_size = m_size
        band = _band_size(m_size)
        if np.any(np.abs(m0s) >= m_size // 2 - band - 1):
            raise NumericsError("initial momenta too close to the lattice edge")
        batch = betas.size
        self.amps = np.zeros((batch, m_size), dtype=complex)
        cols = np.where(m0s >= 0, m0s, m_size + m0s)
        self.amps[np.arange(batch), cols] = 1.0
        self.growth: list[tuple[int, int]] = []
        self.norm_error = 0.0
        self._build_tables()

    def _build_tables(self):
        params, m_size = self.params, self.m_size
        self.kick_vectors = [
            _kick_phase_vector(params, a, m_size) for a in params.phases
        ]
        m = lattice_m_values(m_size)
        self.momenta = (m[None, :] + self.betas[:, None]) * params.hbar_eff
        self.free = np.exp(-0.5j * params.hbar_eff * (m[None, :] + self.betas[:, None]) ** 2)
        self.band_mask = _band_mask(m_size)

    def _grow(self, kick_index: int):
        if 2 * self.m_size > MAX_LATTICE:
            raise GridCapError(
                f"momentum lattice would exceed the cap of 2^20 = {MAX_LATTICE} points "
                f"at kick {kick_index}"
            )
        half = self.m_size // 2
        out = np.zeros((self.amps.shape[0], 2 * self.m_size), dtype=complex)
        out[:, :half] = self.amps[:, :half]
        out[:, -half:] = self.amps[:, half:]
        self.amps = out
        self.m_size *= 2
        self.growth.append((kick_index, self.m_size))
        self._build_tables()

    def step(self, n: int):
        """Apply kick n to every row; grow the lattice afterwards if needed."""
        psi = sfft.ifft(self.amps, axis=1, norm="ortho")
        psi *= self.kick_vectors[n % len(self.kick_vectors)][None, :]
        self.amps = sfft.fft(psi, axis=1, norm="ortho")
        self.amps *= self.free
        prob = self.density()
        norms = prob.sum(axis=1)
        if not np.all(np.isfinite(norms)):
            raise NumericsError(f"non-finite amplitudes after kick {n}")
        err = float(np.max(np.abs(norms - 1.0)))
        self.norm_error = max(self.norm_error, err)
        if err > 1e-9:
            raise NumericsError(f"unitarity lost after kick {n}: norm error {err:.3e}")
        if float(prob[:, self.band_mask].sum(axis=1).max()) > LEAK_THRESHOLD:
            self._grow(n + 1)

    def density(self) -> np.ndarray:
        a = self.amps
        return a.real**2 + a.imag**2


def _sample_p0(seed: int, index: int, sigma: float) -> float:
    """Counter-based per-sample draw, independent of batching and workers."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))
    return float(rng.normal(0.0, sigma))


def _run_batch(task) -> dict:
    lo, hi, params, n_kicks, record_times, grid, m_start = task
    sigma = params.sigma_resolved
    p0s = np.array([_sample_p0(params.seed, i, sigma) for i in range(lo, hi)])
    ratios = p0s / params.hbar_eff
    m0s = np.floor(ratios).astype(np.int64)
    betas = ratios - m0s
    wrap = betas >= 1.0
    betas[wrap] -= 1.0
    m0s[wrap] += 1

    m_size = m_start
    band = _band_size(m_size)
    while np.any(np.abs(m0s) >= m_size // 2 - band - 1):
        m_size *= 2
        band = _band_size(m_size)
        if m_size > MAX_LATTICE:
            raise GridCapError(f"initial momenta exceed the lattice cap of 2^20 = {MAX_LATTICE}")

    ev = _BatchEvolver(betas, m0s, params, m_size)
    n_times = n_kicks + 1
    sum_p = np.empty(n_times)
    sum_p2 = np.empty(n_times)
    sum_p2r = np.empty(n_times)
    record_set = set(record_times)
    hists: dict[int, tuple[np.ndarray, float]] = {}
    width = grid[1] - grid[0] if grid is not None else None

    def accumulate(n: int):
        prob = ev.density()
        mom = ev.momenta
        sum_p[n] = float((prob * mom).sum())
        sum_p2[n] = float((prob * mom**2).sum())
        sum_p2r[n] = float((prob * np.where(mom > 0, mom**2, 0.0)).sum())
        if grid is not None and n in record_set:
            weights = np.zeros(grid.size)
            overflow = 0.0
            idx = np.rint((mom - grid[0]) / width).astype(np.int64)
            inside = (idx >= 0) & (idx < grid.size)
            for row in range(prob.shape[0]):
                keep = inside[row]
                weights += np.bincount(idx[row][keep], weights=prob[row][keep], minlength=grid.size)
                overflow += float(prob[row][~keep].sum())
            hists[n] = (weights, overflow)

    accumulate(0)
    for n in range(n_kicks):
        ev.step(n)
        accumulate(n + 1)
    return {
        "sum_p": sum_p,
        "sum_p2": sum_p2,
        "sum_p2r": sum_p2r,
        "hists": hists,
        "growth": ev.growth,
        "final_m": ev.m_size,
        "norm_error": ev.norm_error,
    }


@dataclass(frozen=True)
class QuantumRunResult:
    """Monte Carlo transport series, snapshot distributions, grid history."""

    kicks: np.ndarray
    p_mean: np.ndarray
    p2: np.ndarray
    p2_right: np.ndarray
    distributions: dict[int, MomentumDistribution]
    initial_m: int
    final_m: int
    growth_events: int
    norm_error: float


def run_monte_carlo(
    params: SimParams,
    n_samples: int,
    n_kicks: int,
    record_at,
    grid: np.ndarray | None,
    threads: int = 1,
    start_horizon: int = START_HORIZON,
) -> QuantumRunResult:
    """Average the quantum dynamics over Gaussian-sampled initial momenta.

    Each sample i draws p0 from its own counter-based stream keyed on
    (seed, i), evolves on the beta(i) lattice, and deposits its density onto
    the shared output grid at the recorded times.  Batches are fixed-size
    contiguous index ranges reduced in order: outputs are byte-identical for
    any thread count.
    """
    from .parallel import map_ordered

    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if n_kicks < 0:
        raise ConfigError(f"n_kicks must be >= 0, got {n_kicks}")
    times = _check_record_times(record_at, n_kicks)
    if grid is not None and grid[1] - grid[0] < params.hbar_eff / 2 - 1e-12:
        raise ConfigError(
            f"output bin width {grid[1] - grid[0]} is below hbar_eff/2 = "
            f"{params.hbar_eff / 2}; beta-offset lattices would alias"
        )

    m_start = grid_size_for(params, min(n_kicks, start_horizon), params.sigma_resolved)
    tasks = [
        (lo, min(lo + BATCH_SAMPLES, n_samples), params, n_kicks, times, grid, m_start)
        for lo in range(0, n_samples, BATCH_SAMPLES)
    ]
    results = map_ordered(_run_batch, tasks, threads)

    n_times = n_kicks + 1
    sum_p = np.zeros(n_times)
    sum_p2 = np.zeros(n_times)
    sum_p2r = np.zeros(n_times)
    hist_weights = {n: np.zeros(grid.size) for n in times} if grid is not None else {}
    hist_overflow = dict.fromkeys(times, 0.0)
    growth_events = 0
    final_m = m_start
    norm_error = 0.0
    for res in results:
        sum_p += res["sum_p"]
        sum_p2 += res["sum_p2"]
        sum_p2r += res["sum_p2r"]
        for n, (weights, over) in res["hists"].items():
            hist_weights[n] += weights
            hist_overflow[n] += over
        growth_events += len(res["growth"])
        final_m = max(final_m, res["final_m"])
        norm_error = max(norm_error, res["norm_error"])

    distributions = {}
    for n in hist_weights:
        mass = float(np.trapezoid(hist_weights[n], grid))
        if mass <= 0:
            raise NumericsError(f"no probability mass on the output grid at kick {n}")
        distributions[n] = MomentumDistribution(
            grid=grid,
            density=hist_weights[n] / mass,
            overflow_fraction=hist_overflow[n] / n_samples,
            n_kicks=n,
            n_samples=n_samples,
        )
    return QuantumRunResult(
        kicks=np.arange(n_times),
        p_mean=sum_p / n_samples,
        p2=sum_p2 / n_samples,
        p2_right=sum_p2r / n_samples,
        distributions=distributions,
        initial_m=m_start,
        final_m=final_m,
        growth_events=growth_events,
        norm_error=norm_error,
    )


def monte_carlo_distribution(
    params: SimParams,
    n_samples: int,
    n_kicks: int,
    record_at,
    grid: np.ndarray,
    threads: int = 1,
) -> dict[int, MomentumDistribution]:
    """Distributions at the recorded times (see run_monte_carlo)."""
    result = run_monte_carlo(params, n_samples, n_kicks, record_at, grid, threads=threads)
    return result.distributions
