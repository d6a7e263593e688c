"""Momentum distribution container shared by the classical and quantum engines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError


@dataclass(frozen=True)
class MomentumDistribution:
    """Normalized density Pi(p) sampled on a uniform momentum grid.

    Invariants (enforced at construction):
      - grid is 1-D, strictly increasing, uniformly spaced;
      - density is nonnegative, same length as grid;
      - trapezoid integral of density equals 1 to 1e-9.

    overflow_fraction records probability that fell outside the grid when the
    distribution was accumulated (0 when fully contained).  n_kicks and
    n_samples carry provenance: the kick count the snapshot was taken at and
    the number of contributing samples (0 = unknown, e.g. synthetic data).
    """

    grid: np.ndarray
    density: np.ndarray
    overflow_fraction: float = 0.0
    n_kicks: int = 0
    n_samples: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise NumericsError("momentum grid must be 1-D with at least 2 points")
        if density.shape != grid.shape:
            raise NumericsError(
                f"density shape {density.shape} does not match grid shape {grid.shape}"
            )
        steps = np.diff(grid)
        if not np.all(steps > 0):
            raise NumericsError("momentum grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise NumericsError("momentum grid must be uniformly spaced")
        if not np.all(np.isfinite(density)):
            raise NumericsError("density contains non-finite values")
        if np.any(density < 0):
            raise NumericsError("density must be nonnegative")
        total = float(np.trapezoid(density, grid))
        if abs(total - 1.0) > 1e-9:
            raise NumericsError(f"density integrates to {total!r}, expected 1 within 1e-9")
        if not (0.0 <= self.overflow_fraction <= 1.0):
            raise NumericsError(f"overflow_fraction out of range: {self.overflow_fraction!r}")
        if self.n_kicks < 0 or self.n_samples < 0:
            raise NumericsError("n_kicks and n_samples must be >= 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)

    @property
    def bin_width(self) -> float:
        return float(self.grid[1] - self.grid[0])


def symmetric_grid(p_max: float, bin_width: float) -> np.ndarray:
    """Uniform grid covering [-p_max, p_max], symmetric about and including 0."""
    if not (p_max > 0 and bin_width > 0):
        raise NumericsError("p_max and bin_width must be positive")
    n_half = int(np.ceil(p_max / bin_width))
    return np.arange(-n_half, n_half + 1) * bin_width


def deposit(grid: np.ndarray, momenta: np.ndarray, weights: np.ndarray | None = None) -> MomentumDistribution:
    """Accumulate weighted samples onto the nearest grid point and normalize.

    Samples beyond the outermost bins are dropped and counted in
    overflow_fraction.  Weights default to uniform 1/len(momenta).
    """
    grid = np.asarray(grid, dtype=float)
    momenta = np.asarray(momenta, dtype=float)
    if weights is None:
        weights = np.full(momenta.shape, 1.0 / momenta.size)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != momenta.shape:
            raise NumericsError("weights shape must match momenta shape")
    width = grid[1] - grid[0]
    idx = np.rint((momenta - grid[0]) / width).astype(np.int64)
    inside = (idx >= 0) & (idx < grid.size)
    total = float(weights.sum())
    kept = float(weights[inside].sum())
    counts = np.bincount(idx[inside], weights=weights[inside], minlength=grid.size)
    mass = float(np.trapezoid(counts, grid))
    if mass <= 0:
        raise NumericsError("no probability mass landed on the momentum grid")
    overflow = max(0.0, (total - kept) / total) if total > 0 else 0.0
    return MomentumDistribution(grid=grid, density=counts / mass, overflow_fraction=overflow)


def from_weights(grid: np.ndarray, weights: np.ndarray, overflow_fraction: float = 0.0) -> MomentumDistribution:
    """Normalize per-bin probability weights already living on the grid."""
    grid = np.asarray(grid, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mass = float(np.trapezoid(weights, grid))
    if mass <= 0:
        raise NumericsError("no probability mass landed on the momentum grid")
    return MomentumDistribution(grid=grid, density=weights / mass, overflow_fraction=overflow_fraction)
