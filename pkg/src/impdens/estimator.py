"""Scikit-learn style estimator wrapping the full density-implication pipeline.

``OptionImpliedDensity`` consumes plain numeric quote arrays, fits the
nonnegative unit-mass terminal density and predicts arbitrage-free option
prices at arbitrary strikes, so the algorithm composes with standard
model-selection and pipeline tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .diagnostics import ELBOW_EPSILON, lambda_scan
from .interp import build_smile, price_at_strike
from .kernel import build_kernel, make_grid
from .pricing import MarketContext, OptionKind, Quote
from .solver import SolverConfig, solve
from .svd import decompose, truncate

KIND_CODES = {1.0: OptionKind.CALL, -1.0: OptionKind.PUT}


def quotes_to_arrays(quotes) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) arrays for fit(): X columns are (strike, kind code), y prices.

    Kind code is +1 for calls, -1 for puts.
    """
    X = np.array([[q.strike, q.kind.sign] for q in quotes], dtype=float)
    y = np.array([q.price for q in quotes], dtype=float)
    return X, y


def _rows_to_quotes(X, y, sample_weight):
    quotes = []
    for i in range(X.shape[0]):
        code = float(X[i, 1])
        if code not in KIND_CODES:
            raise ValueError(
                f"X[:, 1] must be +1 (call) or -1 (put); row {i} has {code}"
            )
        weight = 1.0 if sample_weight is None else float(sample_weight[i])
        quotes.append(Quote(KIND_CODES[code], float(X[i, 0]), float(y[i]), weight))
    return quotes


class OptionImpliedDensity(BaseEstimator, RegressorMixin):
    """Imply a discretized terminal density from option quotes.

    Parameters
    ----------
    x_min, x_max : float
        Support of the density grid.
    n_points : int
        Grid resolution.
    rank : int or None
        Retained singular values Q. None keeps min(n_quotes, n_points) // 2,
        following the rule of thumb Q of about half the quote count.
    lam : float
        L1 weight used when ``lambdas`` is None.
    lambdas : sequence of float or None
        When given, run an ascending warm-started scan and keep the solve at
        the elbow-selected weight.
    market : MarketContext
        Rates and underlying levels for the quote set.
    rho, max_iter, tol_primal, tol_dual, relaxation
        ADMM settings, see ``SolverConfig``.

    Attributes
    ----------
    result_ : SolveResult for the kept solve.
    density_ : fitted Density (nonnegative, unit trapezoid mass).
    scan_ : ScanResult when ``lambdas`` was given, else None.
    lambda_ : the L1 weight of the kept solve.
    """

    def __init__(
        self,
        x_min: float = -1.0,
        x_max: float = 1.0,
        n_points: int = 1000,
        rank: int | None = None,
        lam: float = 10.0**-7.5,
        lambdas=None,
        market: MarketContext | None = None,
        rho="auto",
        max_iter: int = 50000,
        tol_primal: float = 1e-10,
        tol_dual: float = 1e-10,
        relaxation: float = 1.7,
        elbow_epsilon: float = ELBOW_EPSILON,
    ):
        self.x_min = x_min
        self.x_max = x_max
        self.n_points = n_points
        self.rank = rank
        self.lam = lam
        self.lambdas = lambdas
        self.market = market
        self.rho = rho
        self.max_iter = max_iter
        self.tol_primal = tol_primal
        self.tol_dual = tol_dual
        self.relaxation = relaxation
        self.elbow_epsilon = elbow_epsilon

    def _validate_quote_arrays(self, X, y, sample_weight):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != 2:
            raise ValueError(
                f"X must have 2 columns (strike, kind code), got {X.shape[1]}"
            )
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if sample_weight is not None:
            sample_weight = np.asarray(sample_weight, dtype=float).ravel()
            if sample_weight.shape[0] != X.shape[0]:
                raise ValueError("sample_weight length differs from X")
        return X, y, sample_weight

    def fit(self, X, y, sample_weight=None):
        """Fit the density to quotes.

        X : (n_quotes, 2) array of (strike, kind code +1/-1); y : prices.
        """
        if not isinstance(self.market, MarketContext):
            raise ValueError("market must be a MarketContext")
        X, y, sample_weight = self._validate_quote_arrays(X, y, sample_weight)
        quotes = _rows_to_quotes(X, y, sample_weight)

        grid = make_grid(self.x_min, self.x_max, self.n_points)
        kern = build_kernel(quotes, grid, self.market)
        factors = decompose(kern)
        rank = self.rank if self.rank is not None else max(1, factors.s.size // 2)
        model = truncate(factors, rank)
        prices = kern.price_vector()

        cfg = SolverConfig(
            lam=self.lam,
            rho=self.rho,
            max_iter=self.max_iter,
            tol_primal=self.tol_primal,
            tol_dual=self.tol_dual,
            relaxation=self.relaxation,
        )
        if self.lambdas is not None:
            scan = lambda_scan(
                model, prices, self.lambdas, cfg, elbow_epsilon=self.elbow_epsilon
            )
            self.scan_ = scan
            if scan.selected_lambda is None:
                # nothing converged: fall back to the last (largest-lambda) entry
                entry = scan.entries[-1]
            else:
                entry = next(
                    e for e in scan.entries if e.lam == scan.selected_lambda
                )
            self.result_ = entry.result
            self.lambda_ = entry.lam
        else:
            self.scan_ = None
            self.result_ = solve(model, prices, cfg)
            self.lambda_ = self.lam

        self.model_ = model
        self.kernel_ = kern
        self.grid_ = grid
        self.density_ = self.result_.phi
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        """Arbitrage-free prices for (strike, kind code) rows."""
        check_is_fitted(self, "density_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(
                f"X must have 2 columns (strike, kind code), got {X.shape[1]}"
            )
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            code = float(X[i, 1])
            if code not in KIND_CODES:
                raise ValueError(
                    f"X[:, 1] must be +1 (call) or -1 (put); row {i} has {code}"
                )
            out[i] = price_at_strike(
                self.density_, KIND_CODES[code], float(X[i, 0]), self.market
            )
        return out

    def smile(self, strikes, family: str = "black-scholes", quoted_range=None):
        """SmileCurve from the fitted density."""
        check_is_fitted(self, "density_")
        if quoted_range is None:
            ks = self.kernel_.strikes
            quoted_range = (float(ks.min()), float(ks.max()))
        return build_smile(self.density_, strikes, self.market, family, quoted_range)
