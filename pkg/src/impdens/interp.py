"""Linear interpolation of a fitted density and arbitrage-free price and
implied-volatility curves on arbitrary strike sets.

Pricing integrates the piecewise-linear interpolant exactly: the strike is
inserted as a breakpoint and each cell's payoff-times-density integrand (a
quadratic) is integrated in closed form. Exactness keeps emitted call-price
curves convex in strike to rounding precision for any nonnegative density,
including extrapolation beyond the quoted strike range.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfSupport
from .kernel import Density
from .pricing import MarketContext, OptionKind, implied_vol
from .errors import ImpdensError


def interp_density(phi: Density, x):
    """Piecewise-linear density value(s) at x; x must lie inside the grid."""
    grid = phi.grid
    xq = np.asarray(x, dtype=float)
    if np.any(xq < grid.x_min) or np.any(xq > grid.x_max):
        raise OutOfSupport(
            f"query outside [{grid.x_min}, {grid.x_max}]; the density is 0 there"
        )
    out = np.interp(xq, grid.nodes, phi.values)
    return float(out) if np.isscalar(x) else out


def _cell_integrals(xs: np.ndarray, vs: np.ndarray, payoff) -> float:
    """Sum of exact per-cell integrals of payoff(x) * linear-interp(x).

    Both factors are linear inside each cell, so Simpson on the cell is exact.
    """
    a, b = xs[:-1], xs[1:]
    va, vb = vs[:-1], vs[1:]
    mid = 0.5 * (a + b)
    vm = 0.5 * (va + vb)
    cells = (b - a) / 6.0 * (payoff(a) * va + 4.0 * payoff(mid) * vm + payoff(b) * vb)
    return float(cells.sum())


def _with_breakpoint(phi: Density, x0: float):
    """Grid nodes and values with x0 inserted as an extra breakpoint."""
    nodes, vals = phi.grid.nodes, phi.values
    if not phi.grid.x_min < x0 < phi.grid.x_max:
        return nodes, vals
    i = int(np.searchsorted(nodes, x0))
    v0 = float(np.interp(x0, nodes, vals))
    xs = np.concatenate([nodes[:i], [x0], nodes[i:]])
    vs = np.concatenate([vals[:i], [v0], vals[i:]])
    return xs, vs


def density_mass(phi: Density) -> float:
    """Exact integral of the interpolant (equals the trapezoid mass)."""
    xs, vs = phi.grid.nodes, phi.values
    return _cell_integrals(xs, vs, lambda x: np.ones_like(x))


def density_mean(phi: Density) -> float:
    """Exact first moment of the interpolant: the density-implied forward."""
    xs, vs = phi.grid.nodes, phi.values
    return _cell_integrals(xs, vs, lambda x: x)


def price_at_strike(phi: Density, kind: OptionKind, strike: float, ctx: MarketContext) -> float:
    """Discounted payoff expectation under the interpolated density.

    Strikes outside the grid support price the payoff truncated to the
    support: calls above x_max (puts below x_min) are worth 0.
    """
    if not math.isfinite(strike):
        raise ValueError(f"strike must be finite, got {strike}")
    grid = phi.grid
    if kind is OptionKind.CALL and strike >= grid.x_max:
        return 0.0
    if kind is OptionKind.PUT and strike <= grid.x_min:
        return 0.0
    xs, vs = _with_breakpoint(phi, strike)
    sign = kind.sign

    def payoff(x):
        return np.maximum(sign * (x - strike), 0.0)

    return ctx.discount * _cell_integrals(xs, vs, payoff)


@dataclass(frozen=True)
class SmileCurve:
    """Call/put price curves and implied vols on an ascending strike set.

    Prices derive from one nonnegative unit-mass density, so calls are
    non-increasing and convex in strike, and call minus put equals the
    discounted (implied_forward - K): parity w.r.t. the density-implied
    forward rather than the market spot.
    """

    strikes: np.ndarray
    call_prices: np.ndarray
    put_prices: np.ndarray
    implied_vols: np.ndarray
    family: str
    extrapolated: np.ndarray
    vol_ok: np.ndarray
    implied_forward: float
    ctx: MarketContext = field(repr=False)

    def __post_init__(self):
        for name in ("strikes", "call_prices", "put_prices", "implied_vols",
                     "extrapolated", "vol_ok"):
            a = np.asarray(getattr(self, name))
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def build_smile(
    phi: Density,
    strikes,
    ctx: MarketContext,
    family: str = "black-scholes",
    quoted_range: tuple[float, float] | None = None,
) -> SmileCurve:
    """Price calls and puts off the density and invert out-of-the-money vols.

    Per-strike inversion failures are recorded (vol_ok False, NaN vol), never
    fatal. ``quoted_range`` marks strikes outside the quote coverage as
    extrapolated; prices there are consistent with the density but speculative.
    """
    strikes = np.asarray(strikes, dtype=float)
    if strikes.ndim != 1 or strikes.size == 0:
        raise ValueError("strikes must be a non-empty 1-D array")
    if np.any(np.diff(strikes) <= 0.0):
        raise ValueError("strikes must be strictly ascending")
    if family in ("black-scholes", "black") and strikes[0] <= 0.0:
        raise ValueError(f"strikes must be positive for the {family!r} family")

    calls = np.array([price_at_strike(phi, OptionKind.CALL, k, ctx) for k in strikes])
    puts = np.array([price_at_strike(phi, OptionKind.PUT, k, ctx) for k in strikes])
    fwd = density_mean(phi)

    vols = np.full(strikes.size, np.nan)
    vol_ok = np.zeros(strikes.size, dtype=bool)
    for i, k in enumerate(strikes):
        # invert the out-of-the-money side; better conditioned near the wings
        if k >= ctx.fwd:
            kind, price = OptionKind.CALL, calls[i]
        else:
            kind, price = OptionKind.PUT, puts[i]
        try:
            vols[i] = implied_vol(price, kind, ctx, float(k), family)
            vol_ok[i] = True
        except ImpdensError:
            pass

    if quoted_range is not None:
        lo, hi = quoted_range
        extrapolated = (strikes < lo) | (strikes > hi)
    else:
        extrapolated = np.zeros(strikes.size, dtype=bool)

    return SmileCurve(
        strikes=strikes,
        call_prices=calls,
        put_prices=puts,
        implied_vols=vols,
        family=family,
        extrapolated=extrapolated,
        vol_ok=vol_ok,
        implied_forward=fwd,
        ctx=ctx,
    )


def write_smile_csv(curve: SmileCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strike", "call_price", "put_price", "implied_vol", "model_family",
             "extrapolated_flag"]
        )
        for i in range(curve.strikes.size):
            vol = repr(float(curve.implied_vols[i])) if curve.vol_ok[i] else ""
            writer.writerow(
                [
                    repr(float(curve.strikes[i])),
                    repr(float(curve.call_prices[i])),
                    repr(float(curve.put_prices[i])),
                    vol,
                    curve.family,
                    int(curve.extrapolated[i]),
                ]
            )
