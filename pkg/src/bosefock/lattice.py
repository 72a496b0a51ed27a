"""One-dimensional grid discretization of the single-particle space."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Grid:
    d: int
    h: float
    periodic: bool = True
    dim: int = 1  # spatial dimension; only 1 is implemented

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"grid needs at least 2 points, got d={self.d}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got h={self.h}")
        if self.dim != 1:
            raise NotImplementedError("only one spatial dimension is supported")

    @property
    def positions(self) -> np.ndarray:
        return (np.arange(self.d) - self.d / 2) * self.h

    @property
    def length(self) -> float:
        return self.d * self.h

    def separation(self, j, k) -> np.ndarray:
        """Signed distance x_j - x_k, minimal image on periodic grids."""
        cells = np.asarray(j) - np.asarray(k)
        if self.periodic:
            cells = (cells + self.d // 2) % self.d - self.d // 2
        return cells * self.h

    def site(self, x: float) -> int:
        return int(round(x / self.h + self.d / 2))


@dataclass(frozen=True)
class WaveFn:
    grid: Grid
    amplitudes: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.d,):
            raise ValueError(f"expected {self.grid.d} amplitudes, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm() ** 2 - 1) > 1e-12:
            raise ValueError("wave function flagged normalized but <f,f> != 1")

    def inner(self, other: "WaveFn") -> complex:
        _same_grid(self, other)
        return complex(self.grid.h * np.vdot(self.amplitudes, other.amplitudes))

    def norm(self) -> float:
        return float(np.sqrt(self.grid.h * np.sum(np.abs(self.amplitudes) ** 2)))

    def normalize(self) -> "WaveFn":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero function")
        return WaveFn(self.grid, self.amplitudes / nrm, normalized=True)

    def scale(self, c: complex) -> "WaveFn":
        return WaveFn(self.grid, c * self.amplitudes)

    def __add__(self, other: "WaveFn") -> "WaveFn":
        _same_grid(self, other)
        return WaveFn(self.grid, self.amplitudes + other.amplitudes)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.amplitudes != 0)

    def mode_coefficients(self) -> np.ndarray:
        """Coefficients in the orthonormal site basis e_j = delta_j / sqrt(h)."""
        return self.amplitudes * np.sqrt(self.grid.h)


def _same_grid(f: WaveFn, g: WaveFn) -> None:
    if f.grid != g.grid:
        raise ValueError("wave functions live on different grids")


def site_function(grid: Grid, j: int) -> WaveFn:
    """Normalized indicator of site j."""
    amps = np.zeros(grid.d, dtype=complex)
    amps[j] = 1 / np.sqrt(grid.h)
    return WaveFn(grid, amps, normalized=True)


def laplacian(grid: Grid) -> np.ndarray:
    """Matrix of -Delta with the 3-point stencil (positive semidefinite)."""
    d, h = grid.d, grid.h
    lap = 2 * np.eye(d) - np.eye(d, k=1) - np.eye(d, k=-1)
    if grid.periodic:
        lap[0, -1] -= 1
        lap[-1, 0] -= 1
    return lap / h**2


def momentum(grid: Grid) -> np.ndarray:
    """Central-difference momentum -i d/dx (Hermitian)."""
    d = grid.d
    fwd = np.eye(d, k=1) - np.eye(d, k=-1)
    if grid.periodic:
        fwd[-1, 0] += 1
        fwd[0, -1] -= 1
    return -1j * fwd / (2 * grid.h)


def position_diag(grid: Grid) -> np.ndarray:
    return np.diag(grid.positions)


def wave_packet(
    grid: Grid,
    center: float,
    width: float,
    momentum: float = 0.0,
    support_radius: Optional[float] = None,
) -> WaveFn:
    """Normalized Gaussian times plane wave, optionally hard-truncated."""
    if width <= 0:
        raise ValueError("packet width must be positive")
    if support_radius is not None and support_radius < width:
        raise ValueError("support radius must be at least the width")
    x = grid.positions
    dx = x - center
    if grid.periodic:
        dx = (dx + grid.length / 2) % grid.length - grid.length / 2
    amps = np.exp(-(dx**2) / (4 * width**2) + 1j * momentum * dx)
    if support_radius is not None:
        amps = np.where(np.abs(dx) <= support_radius + 1e-12 * grid.h, amps, 0)
    if not np.any(amps != 0):
        raise ValueError("packet vanishes on the grid after truncation")
    return WaveFn(grid, amps).normalize()


def translate(f: WaveFn, cells: int) -> WaveFn:
    amps = f.amplitudes
    if not f.grid.periodic:
        nz = np.flatnonzero(amps)
        if nz.size and (nz[0] + cells < 0 or nz[-1] + cells >= f.grid.d):
            raise ValueError(f"shift by {cells} cells pushes support off the grid")
    return WaveFn(f.grid, np.roll(amps, cells), normalized=f.normalized)


def pair_potential_table(grid: Grid, V: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """T_jk = V(x_j - x_k), minimal image on periodic grids."""
    idx = np.arange(grid.d)
    r = grid.separation(idx[:, None], idx[None, :])
    vals = np.asarray(V(r), dtype=float)
    mirror = np.asarray(V(-r), dtype=float)
    if np.max(np.abs(vals - mirror)) > 1e-12:
        raise ValueError("pair potential is not symmetric under r -> -r")
    return 0.5 * (vals + vals.T)


# Potential profiles. Each returns a vectorized even function of r.

def zero_potential() -> Callable:
    return lambda r: np.zeros_like(np.asarray(r, dtype=float))


def gaussian_potential(strength: float, width: float) -> Callable:
    return lambda r: strength * np.exp(-np.asarray(r, dtype=float) ** 2 / (2 * width**2))


def square_well(depth: float, radius: float) -> Callable:
    """-depth inside |r| <= radius, zero outside (attractive for depth > 0)."""
    return lambda r: np.where(np.abs(r) <= radius + 1e-12, -depth, 0.0)


def compact_bump(strength: float, radius: float) -> Callable:
    """Smooth bump strength * (1 - (r/radius)^2)^2 supported in |r| < radius."""

    def V(r):
        u = np.asarray(r, dtype=float) / radius
        return np.where(np.abs(u) < 1, strength * (1 - u**2) ** 2, 0.0)

    return V


def table_potential(grid: Grid, profile: np.ndarray) -> Callable:
    """Potential given by values at cell separations 0, 1, ..., len-1 (zero beyond)."""
    prof = np.asarray(profile, dtype=float)

    def V(r):
        cells = np.rint(np.abs(np.asarray(r, dtype=float)) / grid.h).astype(int)
        out = np.zeros(cells.shape)
        inside = cells < prof.size
        out[inside] = prof[cells[inside]]
        return out

    return V
