"""Closed-form option pricers and implied-volatility inversion.

Supports the Bachelier (normal) model, Black-Scholes on spot and the Black
variant on forward. These generate synthetic test inputs and convert fitted
prices back to volatilities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .errors import NoConvergence, PriceOutOfBounds

VOL_BRACKET = (1e-9, 10.0)
VOL_TOL = 1e-12
VOL_MAX_ITER = 200

FAMILIES = ("bachelier", "black-scholes", "black")


class OptionKind(enum.Enum):
    CALL = "C"
    PUT = "P"

    @property
    def sign(self) -> int:
        """+1 for a call payoff (x - K)+, -1 for a put payoff (K - x)+."""
        return 1 if self is OptionKind.CALL else -1

    def opposite(self) -> "OptionKind":
        return OptionKind.PUT if self is OptionKind.CALL else OptionKind.CALL


@dataclass(frozen=True)
class MarketContext:
    """Rates and underlying levels shared by all quotes of one expiry.

    Either ``spot`` or ``forward`` may be omitted; the missing one is derived
    under the no-dividend convention F = S0 * exp(rate * tau). When both are
    supplied and inconsistent, ``forward_matches_spot`` is False but nothing
    is silently changed.
    """

    rate: float
    tau: float
    spot: float | None = None
    forward: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.rate) and math.isfinite(self.tau)):
            raise ValueError("rate and tau must be finite")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.spot is None and self.forward is None:
            raise ValueError("one of spot or forward is required")
        for name in ("spot", "forward"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.tau)

    @property
    def fwd(self) -> float:
        """Forward price, derived from spot when not given."""
        if self.forward is not None:
            return self.forward
        return self.spot / self.discount

    @property
    def spot_price(self) -> float:
        """Spot price, derived from forward when not given."""
        if self.spot is not None:
            return self.spot
        return self.forward * self.discount

    @property
    def forward_matches_spot(self) -> bool:
        """True unless both levels were supplied and disagree (1e-12 relative)."""
        if self.spot is None or self.forward is None:
            return True
        implied = self.spot / self.discount
        return abs(self.forward - implied) <= 1e-12 * max(1.0, abs(implied))

    def rescaled(self, factor: float) -> "MarketContext":
        """Context with spot and forward divided by ``factor``."""
        return replace(
            self,
            spot=None if self.spot is None else self.spot / factor,
            forward=None if self.forward is None else self.forward / factor,
        )


@dataclass(frozen=True)
class Quote:
    """One observed option: kind, strike, premium and an optional fit weight."""

    kind: OptionKind
    strike: float
    price: float
    weight: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.strike):
            raise ValueError(f"strike must be finite, got {self.strike}")
        if not math.isfinite(self.price) or self.price < 0.0:
            raise ValueError(f"price must be finite and >= 0, got {self.price}")
        if not math.isfinite(self.weight) or self.weight < 0.0:
            raise ValueError(f"weight must be finite and >= 0, got {self.weight}")


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _check_finite(**kwargs):
    for name, v in kwargs.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite")


def moneyness(ctx: MarketContext, strike, sigma):
    """Normal-model moneyness (F - K) / (sigma * sqrt(tau))."""
    return (ctx.fwd - np.asarray(strike, dtype=float)) / (sigma * math.sqrt(ctx.tau))


def bachelier_price(kind: OptionKind, ctx: MarketContext, strike, sigma):
    """Bachelier (normal-vol) price; ``strike`` may be an array.

    sigma = 0 returns the discounted intrinsic value exp(-r tau) * (±(F - K))+.
    """
    _check_finite(strike=strike, sigma=sigma)
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    K = np.asarray(strike, dtype=float)
    F = ctx.fwd
    disc = ctx.discount
    if sigma == 0.0:
        out = disc * np.maximum(kind.sign * (F - K), 0.0)
        return float(out) if np.isscalar(strike) else out
    sv = sigma * math.sqrt(ctx.tau)
    m = (F - K) / sv
    if kind is OptionKind.CALL:
        out = disc * ((F - K) * ndtr(m) + sv * _norm_pdf(m))
    else:
        out = disc * ((K - F) * ndtr(-m) + sv * _norm_pdf(m))
    return float(out) if np.isscalar(strike) else out


def _lognormal_forward_price(kind: OptionKind, F, K, sigma, tau):
    """Undiscounted Black-76 value E[(±(S_T - K))+] with E[S_T] = F."""
    if sigma == 0.0:
        return np.maximum(kind.sign * (F - K), 0.0)
    sv = sigma * math.sqrt(tau)
    d1 = (np.log(F / K) + 0.5 * sv * sv) / sv
    d2 = d1 - sv
    if kind is OptionKind.CALL:
        return F * ndtr(d1) - K * ndtr(d2)
    return K * ndtr(-d2) - F * ndtr(-d1)


def black_scholes_price(kind: OptionKind, ctx: MarketContext, strike, sigma):
    """Black-Scholes price parameterized on spot; ``strike`` may be an array."""
    _check_finite(strike=strike, sigma=sigma)
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    K = np.asarray(strike, dtype=float)
    if np.any(K <= 0.0):
        raise ValueError("strike must be positive for a lognormal model")
    S = ctx.spot_price
    if S <= 0.0:
        raise ValueError(f"spot must be positive, got {S}")
    out = ctx.discount * _lognormal_forward_price(kind, S / ctx.discount, K, sigma, ctx.tau)
    return float(out) if np.isscalar(strike) else out


def black_price(kind: OptionKind, ctx: MarketContext, strike, sigma):
    """Black variant: lognormal on the forward with external discounting."""
    _check_finite(strike=strike, sigma=sigma)
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    K = np.asarray(strike, dtype=float)
    if np.any(K <= 0.0):
        raise ValueError("strike must be positive for a lognormal model")
    F = ctx.fwd
    if F <= 0.0:
        raise ValueError(f"forward must be positive, got {F}")
    out = ctx.discount * _lognormal_forward_price(kind, F, K, sigma, ctx.tau)
    return float(out) if np.isscalar(strike) else out


_PRICERS = {
    "bachelier": bachelier_price,
    "black-scholes": black_scholes_price,
    "black": black_price,
}


def model_price(kind: OptionKind, ctx: MarketContext, strike, sigma, family: str):
    """Dispatch to the pricer for ``family`` (one of FAMILIES)."""
    try:
        pricer = _PRICERS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}, expected one of {FAMILIES}") from None
    return pricer(kind, ctx, strike, sigma)


@dataclass(frozen=True)
class PricingModel:
    """A volatility family plus its vol level, e.g. PricingModel('bachelier', 0.1)."""

    family: str
    sigma: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    def price(self, kind: OptionKind, ctx: MarketContext, strike):
        return model_price(kind, ctx, strike, self.sigma, self.family)


def parity_transform(quote: Quote, ctx: MarketContext) -> Quote:
    """Map a quote to the opposite-kind quote at the same strike via put-call
    parity Pr_C + K exp(-r tau) = Pr_P + S0. Applying twice is the identity."""
    if not math.isfinite(quote.price):
        raise ValueError("quote price must be finite")
    k_disc = quote.strike * ctx.discount
    if quote.kind is OptionKind.CALL:
        new_price = quote.price + k_disc - ctx.spot_price
    else:
        new_price = quote.price + ctx.spot_price - k_disc
    return Quote(quote.kind.opposite(), quote.strike, new_price, quote.weight)


def _price_bounds(kind: OptionKind, ctx: MarketContext, strike: float, family: str):
    """(lower, upper) no-arbitrage price bounds for the family.

    Lower bound is the zero-vol (discounted intrinsic) price. The Bachelier
    upper bound is the price at the top of the bisection bracket, since normal
    model prices grow without bound in sigma.
    """
    lower = model_price(kind, ctx, strike, 0.0, family)
    if family == "bachelier":
        upper = model_price(kind, ctx, strike, VOL_BRACKET[1], family)
    elif kind is OptionKind.CALL:
        upper = ctx.spot_price if family == "black-scholes" else ctx.discount * ctx.fwd
    else:
        upper = ctx.discount * strike
    return lower, upper


def implied_vol(
    price: float,
    kind: OptionKind,
    ctx: MarketContext,
    strike: float,
    family: str = "black-scholes",
) -> float:
    """Invert a closed-form pricer for volatility by bisection.

    The price must lie strictly between the zero-vol lower bound and the
    family's upper bound; bisection runs on ``VOL_BRACKET`` until the vol
    interval shrinks below ``VOL_TOL``.
    """
    _check_finite(price=price, strike=strike)
    lower, upper = _price_bounds(kind, ctx, strike, family)
    if not (lower < price < upper):
        raise PriceOutOfBounds(
            f"price {price} outside invertible range ({lower}, {upper}) "
            f"for {kind.name} K={strike} in family {family!r}"
        )
    lo, hi = VOL_BRACKET
    f_lo = model_price(kind, ctx, strike, lo, family) - price
    f_hi = model_price(kind, ctx, strike, hi, family) - price
    if f_lo > 0.0 or f_hi < 0.0:
        raise PriceOutOfBounds(
            f"price {price} not bracketed by vols in [{lo}, {hi}] for {kind.name} K={strike}"
        )
    for _ in range(VOL_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if model_price(kind, ctx, strike, mid, family) - price > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo < VOL_TOL:
            return 0.5 * (lo + hi)
    raise NoConvergence(
        f"bisection did not reach tol {VOL_TOL} in {VOL_MAX_ITER} iterations"
    )
