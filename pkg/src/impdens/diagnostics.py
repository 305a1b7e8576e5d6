"""Fit-error metrics, distribution similarity, sparsity counting and the
regularization-weight scan with elbow selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, GridMismatch, NoConvergedEntries
from .kernel import Density, trapezoid_weights
from .solver import SolveResult, SolverConfig, solve
from .svd import SparseModel, transform_prices

DEFAULT_LAMBDAS = tuple(np.logspace(-12, -4, 33))
DEFAULT_COUNT_THRESHOLDS = (1e-2, 1e-3)
ELBOW_EPSILON = 0.10
# Overlap integrals this small count as "no overlap": report +inf.
OVERLAP_FLOOR = 1e-300


def chi_squared(model: SparseModel, prices: np.ndarray, phi_prime: np.ndarray) -> float:
    """Squared fit error in the transformed quantities, 0.5 ||U'p - S c||^2."""
    phi_prime = np.asarray(phi_prime, dtype=float)
    if phi_prime.shape != (model.rank,):
        raise DimensionMismatch(
            f"expected {model.rank} coefficients, got shape {phi_prime.shape}"
        )
    resid = transform_prices(model, prices) - model.s_t * phi_prime
    return 0.5 * float(resid @ resid)


def chi_squared_prices(model: SparseModel, prices: np.ndarray, phi_prime: np.ndarray) -> float:
    """Squared fit error against raw prices, 0.5 ||p - U S c||^2.

    Differs from chi_squared by the constant energy of the price component
    outside the retained left singular span.
    """
    phi_prime = np.asarray(phi_prime, dtype=float)
    if phi_prime.shape != (model.rank,):
        raise DimensionMismatch(
            f"expected {model.rank} coefficients, got shape {phi_prime.shape}"
        )
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (model.n_quotes,):
        raise DimensionMismatch(
            f"expected {model.n_quotes} prices, got shape {prices.shape}"
        )
    resid = prices - model.u_t @ (model.s_t * phi_prime)
    return 0.5 * float(resid @ resid)


def bhattacharyya(p: Density, q: Density) -> float:
    """-ln of the trapezoid integral of sqrt(p * q).

    Zero for identical unit-mass densities; +inf when the supports do not
    overlap; negative when the comparand carries more than unit mass (e.g. the
    positive part of an arbitrage-laden input).
    """
    if p.grid != q.grid:
        raise GridMismatch("densities live on different grids")
    if p.values.min() < 0.0 or q.values.min() < 0.0:
        raise ValueError("densities must be nonnegative; take the positive part first")
    w = trapezoid_weights(p.grid)
    overlap = float(w @ np.sqrt(p.values * q.values))
    if overlap < OVERLAP_FLOOR:
        return math.inf
    return -math.log(overlap)


def count_significant(phi_prime: np.ndarray, threshold: float) -> int:
    """Number of transformed coefficients with |c_i| > threshold."""
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return int(np.sum(np.abs(np.asarray(phi_prime, dtype=float)) > threshold))


@dataclass(frozen=True)
class ScanEntry:
    lam: float
    chi2: float
    objective: float
    d_b: float | None
    significant_counts: dict[float, int]
    result: SolveResult | None
    converged: bool
    error: str | None = None


@dataclass(frozen=True)
class ScanResult:
    """Per-lambda solves in ascending lambda order plus the elbow selection."""

    entries: tuple[ScanEntry, ...]
    selected_lambda: float | None

    def converged_entries(self) -> tuple[ScanEntry, ...]:
        return tuple(e for e in self.entries if e.converged)

    def best_by_chi2(self) -> ScanEntry:
        """Converged entry with the smallest fit error. Non-converged entries
        are flagged partial results, not meaningful minimum candidates."""
        conv = self.converged_entries()
        if not conv:
            raise NoConvergedEntries("no converged scan entry")
        return min(conv, key=lambda e: e.chi2)

    def best_by_db(self) -> ScanEntry:
        """Converged entry closest to the reference density."""
        conv = [e for e in self.converged_entries() if e.d_b is not None]
        if not conv:
            raise NoConvergedEntries("no converged scan entry with a reference distance")
        return min(conv, key=lambda e: e.d_b)


def lambda_scan(
    model: SparseModel,
    prices: np.ndarray,
    lambdas=DEFAULT_LAMBDAS,
    cfg: SolverConfig = SolverConfig(),
    reference_density: Density | None = None,
    count_thresholds=DEFAULT_COUNT_THRESHOLDS,
    elbow_epsilon: float = ELBOW_EPSILON,
) -> ScanResult:
    """Solve once per regularization weight, ascending, warm-starting each
    solve from the previous solution. Per-lambda failures become flagged
    entries; the scan itself never aborts."""
    lambdas = sorted(float(l) for l in lambdas)
    if not lambdas:
        raise ValueError("lambdas must be non-empty")
    if any(l < 0.0 for l in lambdas):
        raise ValueError("lambdas must be >= 0")

    entries = []
    state = cfg.warm_start
    for lam in lambdas:
        run_cfg = replace(cfg, lam=lam, warm_start=state)
        try:
            result = solve(model, prices, run_cfg)
        except Exception as exc:  # noqa: BLE001 - flagged entry, scan continues
            entries.append(
                ScanEntry(
                    lam=lam,
                    chi2=math.nan,
                    objective=math.nan,
                    d_b=None,
                    significant_counts={},
                    result=None,
                    converged=False,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        state = result.state
        d_b = (
            bhattacharyya(result.phi, reference_density)
            if reference_density is not None
            else None
        )
        counts = {a: count_significant(result.phi_prime, a) for a in count_thresholds}
        entries.append(
            ScanEntry(
                lam=lam,
                chi2=result.chi2,
                objective=result.objective,
                d_b=d_b,
                significant_counts=counts,
                result=result,
                converged=result.converged,
            )
        )

    scan = ScanResult(entries=tuple(entries), selected_lambda=None)
    try:
        selected = select_elbow(scan, elbow_epsilon)
    except NoConvergedEntries:
        selected = None
    return ScanResult(entries=scan.entries, selected_lambda=selected)


def select_elbow(scan: ScanResult, epsilon: float = ELBOW_EPSILON) -> float:
    """Largest lambda whose fit error stays within (1 + epsilon) of the scan
    minimum, over converged entries."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    conv = scan.converged_entries()
    if not conv:
        raise NoConvergedEntries("no converged scan entry to select from")
    best = min(e.chi2 for e in conv)
    cutoff = (1.0 + epsilon) * best
    return max(e.lam for e in conv if e.chi2 <= cutoff)


def write_scan_csv(scan: ScanResult, path, count_thresholds=DEFAULT_COUNT_THRESHOLDS) -> None:
    """Scan report: lambda, chi2, objective, d_B, one count column per
    threshold, converged flag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["lambda", "chi2", "objective", "d_B"]
        header += [f"count@{a:g}" for a in count_thresholds]
        header += ["converged"]
        writer.writerow(header)
        for e in scan.entries:
            row = [repr(e.lam), repr(e.chi2), repr(e.objective)]
            row.append("" if e.d_b is None else repr(e.d_b))
            for a in count_thresholds:
                row.append(e.significant_counts.get(a, ""))
            row.append(int(e.converged))
            writer.writerow(row)
