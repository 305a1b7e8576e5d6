"""SVD factorization of the kernel, rank truncation and conditioning diagnostics.

Truncating to the leading Q singular triplets gives the better-conditioned
surrogate operator whose Q transformed coordinates are the solver's unknowns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NumericalFailure,
    RankOutOfRange,
    SingularKernel,
)
from .kernel import Density, Grid, KernelMatrix, MarketContext

# Singular values below this multiple of s1 are reported as numerically zero.
NUMERICAL_ZERO_REL = 1e-14


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD of the kernel: G = u @ diag(s) @ vt.

    For the usual M <= N case, u is (M, M) orthogonal and vt is (M, N) with
    orthonormal rows. Carries the source grid/context when built from a
    KernelMatrix so downstream objects stay self-describing.
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    grid: Grid | None = None
    ctx: MarketContext | None = None

    def __post_init__(self):
        for name in ("u", "s", "vt"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.s.ndim != 1 or self.u.shape[1] != self.s.size or self.vt.shape[0] != self.s.size:
            raise DimensionMismatch(
                f"inconsistent factor shapes {self.u.shape}, {self.s.shape}, {self.vt.shape}"
            )

    @property
    def numerical_rank(self) -> int:
        """Count of singular values above NUMERICAL_ZERO_REL * s1."""
        if self.s.size == 0 or self.s[0] == 0.0:
            return 0
        return int(np.sum(self.s > NUMERICAL_ZERO_REL * self.s[0]))

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt


def decompose(kernel) -> SvdFactors:
    """Thin SVD of a KernelMatrix (or raw 2-D array)."""
    if isinstance(kernel, KernelMatrix):
        matrix, grid, ctx = kernel.matrix, kernel.grid, kernel.ctx
    else:
        matrix, grid, ctx = np.asarray(kernel, dtype=float), None, None
    if matrix.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D kernel, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("kernel entries must be finite")
    try:
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return SvdFactors(u, s, vt, grid=grid, ctx=ctx)


def condition_number(factors: SvdFactors) -> float:
    """s_max / s_min of the factorization."""
    s = factors.s
    if s.size == 0 or s[-1] <= 1e-300:
        raise SingularKernel("smallest singular value is zero within 1e-300")
    return float(s[0] / s[-1])


@dataclass(frozen=True)
class SparseModel:
    """Leading-Q singular triplets of a kernel: the sparse surrogate G-tilde."""

    u_t: np.ndarray
    s_t: np.ndarray
    vt_t: np.ndarray
    rank: int
    grid: Grid | None = None
    ctx: MarketContext | None = None

    def __post_init__(self):
        for name in ("u_t", "s_t", "vt_t"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def condition(self) -> float:
        if self.s_t[-1] <= 1e-300:
            raise SingularKernel("smallest retained singular value is zero within 1e-300")
        return float(self.s_t[0] / self.s_t[-1])

    @property
    def n_quotes(self) -> int:
        return self.u_t.shape[0]

    @property
    def n_grid(self) -> int:
        return self.vt_t.shape[1]

    def reconstruct(self) -> np.ndarray:
        """G-tilde = u_t @ diag(s_t) @ vt_t."""
        return (self.u_t * self.s_t) @ self.vt_t


def truncate(factors: SvdFactors, rank: int) -> SparseModel:
    """Keep the ``rank`` leading singular triplets."""
    n_sv = factors.s.size
    if not 1 <= rank <= n_sv:
        raise RankOutOfRange(f"rank must be in [1, {n_sv}], got {rank}")
    return SparseModel(
        factors.u[:, :rank],
        factors.s[:rank],
        factors.vt[:rank, :],
        rank=rank,
        grid=factors.grid,
        ctx=factors.ctx,
    )


def transform_prices(model: SparseModel, prices: np.ndarray) -> np.ndarray:
    """Prices in the left singular basis: u_t.T @ prices (length Q)."""
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (model.n_quotes,):
        raise DimensionMismatch(
            f"expected {model.n_quotes} prices, got shape {prices.shape}"
        )
    return model.u_t.T @ prices


def density_from_transformed(model: SparseModel, phi_prime: np.ndarray) -> Density:
    """Back-transform Q coordinates to grid values: phi = V_t @ phi_prime."""
    phi_prime = np.asarray(phi_prime, dtype=float)
    if phi_prime.shape != (model.rank,):
        raise DimensionMismatch(
            f"expected {model.rank} coefficients, got shape {phi_prime.shape}"
        )
    if model.grid is None:
        raise ValueError("model carries no grid; build it from a KernelMatrix")
    return Density(model.vt_t.T @ phi_prime, model.grid)


def fit_power_law(x, y) -> tuple[float, float]:
    """OLS fit of y = a * x**k on log-log data; returns (k, a)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise DimensionMismatch("need two same-length vectors with >= 2 points")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("power-law fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(np.exp(intercept))


def decay_exponent(s: np.ndarray, first: int = 10) -> float:
    """Exponent k of s_i/s_1 ~ i**-k over the leading ``first`` values."""
    s = np.asarray(s, dtype=float)
    n = min(first, s.size)
    i = np.arange(1, n + 1)
    slope, _ = fit_power_law(i, s[:n] / s[0])
    return -slope


def write_singular_value_series(factors: SvdFactors, path) -> None:
    """CSV of (i, s_i/s_1) with a numerically-zero marker column."""
    s = factors.s
    s1 = s[0] if s.size else 1.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "s_norm", "numerically_zero"])
        for i, si in enumerate(s, start=1):
            writer.writerow([i, repr(float(si / s1)), int(si <= NUMERICAL_ZERO_REL * s1)])


def write_condition_series(pairs, path) -> None:
    """CSV of (n_quotes, condition_number) pairs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_quotes", "condition"])
        for m, c in pairs:
            writer.writerow([int(m), repr(float(c))])
