"""Uniform density grid and the discretized pricing operator.

The kernel matrix G maps a gridded terminal density to option prices via the
trapezoidal rule: row i is exp(-r tau) * w_j * payoff(K_i, x_j), with the
half trapezoid weights absorbed into w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInterval, EmptyQuotes, GridMismatch
from .pricing import MarketContext, OptionKind, Quote


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of [x_min, x_max] with n_points nodes."""

    x_min: float
    x_max: float
    n_points: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise DegenerateInterval("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise DegenerateInterval(
                f"need x_max > x_min, got [{self.x_min}, {self.x_max}]"
            )
        if self.n_points < 3:
            raise DegenerateInterval(f"need at least 3 nodes, got {self.n_points}")
        nodes = np.linspace(self.x_min, self.x_max, self.n_points)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max


def make_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    return Grid(x_min, x_max, int(n_points))


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights dx * (1/2, 1, ..., 1, 1/2); sums to x_max - x_min."""
    return trapezoid_weights_for(grid.nodes)


def trapezoid_weights_for(nodes: np.ndarray) -> np.ndarray:
    """Per-node trapezoid weights for arbitrary ascending nodes.

    Covers non-uniform grids: w_j = (x_{j+1} - x_{j-1}) / 2 with one-sided
    intervals at the ends.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise DegenerateInterval("need at least 2 ascending nodes")
    gaps = np.diff(nodes)
    if np.any(gaps <= 0.0):
        raise DegenerateInterval("nodes must be strictly ascending")
    w = np.empty(nodes.size)
    w[0] = gaps[0] / 2.0
    w[-1] = gaps[-1] / 2.0
    w[1:-1] = (nodes[2:] - nodes[:-2]) / 2.0
    return w


@dataclass(frozen=True)
class Density:
    """Density values on a grid. Mass is measured with trapezoid weights."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridMismatch(
                f"density has {values.shape[0] if values.ndim == 1 else values.shape} "
                f"values for a {self.grid.n_points}-point grid"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        return float(trapezoid_weights(self.grid) @ self.values)

    def min(self) -> float:
        return float(self.values.min())


def payoff_matrix(strikes: np.ndarray, signs: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """(M, N) matrix of (±(x_j - K_i))+ payoffs."""
    diff = nodes[None, :] - strikes[:, None]
    return np.maximum(signs[:, None] * diff, 0.0)


@dataclass(frozen=True)
class KernelMatrix:
    """The M x N discretized pricing operator for a fixed quote set."""

    matrix: np.ndarray
    quotes: tuple[Quote, ...]
    grid: Grid
    ctx: MarketContext

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def strikes(self) -> np.ndarray:
        return np.array([q.strike for q in self.quotes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([q.weight for q in self.quotes])

    def price_vector(self) -> np.ndarray:
        """Observed prices with each quote's fit weight applied, matching the
        row weighting baked into the matrix."""
        return np.array([q.weight * q.price for q in self.quotes])

    @property
    def strikes_outside_grid(self) -> bool:
        """Diagnostic: some strike lies outside [x_min, x_max]; such rows price
        the payoff truncated to the grid support."""
        ks = self.strikes
        return bool(np.any((ks < self.grid.x_min) | (ks > self.grid.x_max)))


def build_kernel(quotes, grid: Grid, ctx: MarketContext) -> KernelMatrix:
    """Assemble G with rows w_j * exp(-r tau) * payoff(K_i, x_j).

    Each row (and its target price, see ``KernelMatrix.price_vector``) is
    additionally scaled by the quote's fit weight.
    """
    quotes = tuple(quotes)
    if not quotes:
        raise EmptyQuotes("need at least one quote to build a kernel")
    strikes = np.array([q.strike for q in quotes])
    signs = np.array([q.kind.sign for q in quotes])
    qweights = np.array([q.weight for q in quotes])
    w = trapezoid_weights(grid)
    payoff = payoff_matrix(strikes, signs, grid.nodes)
    matrix = (ctx.discount * qweights)[:, None] * payoff * w[None, :]
    return KernelMatrix(matrix, quotes, grid, ctx)


def price_from_density(kernel: KernelMatrix, phi) -> np.ndarray:
    """G @ phi: model prices (row-weighted) for the kernel's quotes."""
    if isinstance(phi, Density):
        if phi.grid != kernel.grid:
            raise GridMismatch("density grid differs from kernel grid")
        values = phi.values
    else:
        values = np.asarray(phi, dtype=float)
        if values.shape != (kernel.grid.n_points,):
            raise GridMismatch(
                f"expected {kernel.grid.n_points} density values, got {values.shape}"
            )
    return kernel.matrix @ values
