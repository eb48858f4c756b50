"""Estimation from partially observed samples under selection.

When Gaussian-noise data go missing with probability depending on the
response, the observed rows still follow a tilted-density model whose
base measure absorbs the selection factor g1.  The same least favorable
curve machinery therefore applies verbatim on the observed subsample;
g1 is recovered from the fitted curve by dividing out the Gaussian
factor, and the fitted g1 yields both the coefficient likelihood and
the outcome-regression correction used for prediction at new covariates.

All formulas default to unit noise variance.  When the dispersion is
known and differs from one, pass it: the Gaussian factor becomes
N(dispersion * theta, dispersion) and the reported coefficients are
mapped back to the regression scale (dispersion times the canonical
coefficients).

Only a scalar covariate is supported by the two simulated missingness
mechanisms; the estimators themselves are dimension-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EstimationError
from .kernels import KernelSpec, index_bandwidth, response_bandwidth
from .lfc import LfcEvaluator, build_y_cache
from .model import Dataset
from .numerics import QUAD_POINTS, log_trapezoid, log_trapezoid_rows, uniform_grid
from .optimize import SearchConfig, maximize

MECHANISMS = ("decomposable_indicator", "nondecomposable_line")

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# exp(y^2 / (2 * dispersion)) overflows past |y| = _G1_Y_LIMIT * sqrt(dispersion).
_G1_Y_LIMIT = 38.0


@dataclass(frozen=True)
class MissingMechanism:
    """Observation-probability rule P(observed | x, y).

    ``decomposable_indicator``: probability c when both x > 0 and y > 0,
    else 0.  ``nondecomposable_line``: probability c when 1.8*x < y,
    else 0; this one cannot be written as g1(y) * g2(x).
    """

    kind: str
    c: float

    def __post_init__(self) -> None:
        if self.kind not in MECHANISMS:
            raise ValueError(f"unknown missing mechanism {self.kind!r}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("observation probability must be in [0, 1]")

    def observation_probability(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "decomposable_indicator":
            return self.c * ((x > 0) & (y > 0)).astype(float)
        return self.c * (1.8 * x < y).astype(float)


def apply_missingness(data: Dataset, mech: MissingMechanism, rng) -> Dataset:
    """Draw observation flags from the mechanism; deterministic given rng state."""
    probs = mech.observation_probability(data.x[:, 0], data.y)
    delta = (rng.random(data.n) < probs).astype(int)
    if int(delta.sum()) == 0:
        raise EstimationError("all data missing")
    return Dataset(data.x, data.y, delta)


def lfc_observed(beta, data: Dataset, index_kernel: KernelSpec,
                 y_kernel: KernelSpec, renormalize_loo: bool = True) -> LfcEvaluator:
    """Least-favorable-curve evaluator restricted to the observed rows.

    The returned evaluator is callable: ``ev(y)`` gives the curve value,
    ``ev(y, exclude=k)`` the leave-one-out variant (k indexes the
    observed subsample).
    """
    observed = data.observed()
    if observed.n < 3:
        raise EstimationError("too few observed rows")
    return LfcEvaluator(beta, observed, index_kernel, y_kernel,
                        renormalize_loo=renormalize_loo)


def g1_recover(f_m: Callable[[float], float], y: float,
               dispersion: float = 1.0) -> float:
    """Selection factor implied by a fitted observed-data base measure.

    Divides the Gaussian factor out of f_m; with unit dispersion this is
    sqrt(2*pi) * f_m(y) * exp(y^2 / 2).
    """
    if abs(y) > _G1_Y_LIMIT * np.sqrt(dispersion):
        raise EstimationError("g1 overflow")
    return float(np.sqrt(2.0 * np.pi * dispersion) * f_m(y)
                 * np.exp(0.5 * y * y / dispersion))


def g_functional(theta: float, g1: Callable, support: tuple[float, float],
                 points: int = QUAD_POINTS, dispersion: float = 1.0) -> float:
    """log integral of the Gaussian density against the selection factor.

    With unit dispersion: log of the integral of phi(y - theta) * g1(y);
    in general the Gaussian has mean dispersion * theta and variance
    dispersion.
    """
    grid = uniform_grid(support[0], support[1], points)
    g1_vals = np.asarray(g1(grid), dtype=float)
    if np.any(g1_vals < 0):
        raise ValueError("g1 must be nonnegative")
    center = dispersion * theta
    with np.errstate(divide="ignore"):
        log_integrand = (-0.5 * (grid - center) ** 2 / dispersion
                         - _HALF_LOG_2PI - 0.5 * np.log(dispersion)
                         + np.log(g1_vals))
    value = log_trapezoid(log_integrand, grid[1] - grid[0])
    if value == -np.inf:
        raise EstimationError("zero integral in selection functional")
    if not np.isfinite(value):
        raise EstimationError("selection functional overflow")
    return value


def g_correction(center: float, g1: Callable, support: tuple[float, float],
                 points: int = QUAD_POINTS, variance: float = 1.0) -> float:
    """Mean shift of a Gaussian at ``center`` reweighted by g1.

    This is the additive correction in the outcome regression
    E[Y | x, observed] = center + correction; it vanishes when g1 is
    constant.
    """
    grid = uniform_grid(support[0], support[1], points)
    g1_vals = np.asarray(g1(grid), dtype=float)
    with np.errstate(divide="ignore"):
        log_w = -0.5 * (grid - center) ** 2 / variance + np.log(g1_vals)
    shift = float(np.max(log_w))
    if not np.isfinite(shift):
        raise EstimationError("zero integral in outcome-regression correction")
    w = np.exp(log_w - shift)
    dx = grid[1] - grid[0]
    denom = np.sum(0.5 * (w[1:] + w[:-1])) * dx
    num_vals = (grid - center) * w
    numer = np.sum(0.5 * (num_vals[1:] + num_vals[:-1])) * dx
    if denom <= 0.0:
        raise EstimationError("zero integral in outcome-regression correction")
    return float(numer / denom)


@dataclass
class OutcomeRegressionFit:
    """Fitted observed-data coefficients plus the selection pieces.

    ``beta_O`` is on the regression scale (dispersion times the maximizing
    canonical coefficients).  ``predict(x)`` evaluates the empirical
    outcome regression at a new covariate vector; ``g1_tilde`` is the
    recovered selection factor on the observed response range (linear
    interpolation between grid nodes, clamped at the edges).
    """

    beta_O: np.ndarray
    g1_tilde: Callable[[float], float]
    predict: Callable[[float], float]
    loglik_at_max: float
    convergence_flag: bool


def fit_observed(data: Dataset, search: SearchConfig,
                 index_kernel: KernelSpec | None = None,
                 y_kernel: KernelSpec | None = None,
                 renormalize_loo: bool = True,
                 kernel_family: str = "gaussian",
                 dispersion: float = 1.0) -> OutcomeRegressionFit:
    """Maximum likelihood on the observed rows of a Gaussian-noise model.

    Each summand is theta*y - dispersion*theta^2/2 - (log-integral of the
    fitted selection factor against the Gaussian at theta) + log of the
    leave-one-out curve value, maximized over the canonical coefficients
    within ``search``.  The selection factor is cached on a response grid
    per candidate, so one evaluation costs O(n^2 + n * grid).
    """
    observed = data.observed()
    if observed.n < 3:
        raise EstimationError("too few observed rows")
    if search.dim != observed.d:
        raise ValueError("search box and dataset dimension mismatch")
    if not dispersion > 0:
        raise ValueError("dispersion must be positive")
    yk = y_kernel or KernelSpec(response_bandwidth(observed.x, observed.y),
                                kernel_family)
    h = yk.bandwidth
    grid = uniform_grid(float(observed.y.min()) - 3.0 * h,
                        float(observed.y.max()) + 3.0 * h, QUAD_POINTS)
    if float(np.max(np.abs(grid))) > _G1_Y_LIMIT * np.sqrt(dispersion):
        raise EstimationError("g1 overflow")
    dx = grid[1] - grid[0]
    y_cache = build_y_cache(observed, yk, renormalize_loo, grid=grid)
    cache: dict[tuple, float] = {}

    def index_kernel_for(beta: np.ndarray) -> KernelSpec:
        if index_kernel is not None:
            return index_kernel
        index_values = observed.x @ beta
        if float(np.std(index_values, ddof=1)) == 0.0:
            return KernelSpec(1.0, kernel_family)
        return KernelSpec(index_bandwidth(index_values, observed.d),
                          kernel_family)

    def evaluator_for(beta: np.ndarray) -> LfcEvaluator:
        return LfcEvaluator(beta, observed, index_kernel_for(beta), yk,
                            renormalize_loo=renormalize_loo, y_cache=y_cache)

    def log_g1_on_grid(evaluator: LfcEvaluator) -> np.ndarray:
        return (_HALF_LOG_2PI + 0.5 * np.log(dispersion)
                + evaluator.log_on_grid(grid) + 0.5 * grid * grid / dispersion)

    def objective(beta) -> float:
        beta = np.asarray(beta, dtype=float).ravel()
        key = tuple(beta)
        if key in cache:
            return cache[key]
        try:
            evaluator = evaluator_for(beta)
            log_g1 = log_g1_on_grid(evaluator)
            loo_log = evaluator.loo_log_at_samples()
            thetas = evaluator.index_values
            centers = dispersion * thetas
            log_integrand = (-0.5 * (grid[None, :] - centers[:, None]) ** 2
                             / dispersion - _HALF_LOG_2PI
                             - 0.5 * np.log(dispersion) + log_g1[None, :])
            selection_terms = log_trapezoid_rows(log_integrand, dx)
            value = float(np.sum(thetas * observed.y
                                 - 0.5 * dispersion * thetas ** 2
                                 - selection_terms + loo_log))
            if not np.isfinite(value):
                value = -np.inf
        except EstimationError:
            value = -np.inf
        cache[key] = value
        return value

    result = maximize(objective, search)
    final_evaluator = evaluator_for(result.x)
    g1_values = np.exp(log_g1_on_grid(final_evaluator))
    if not np.all(np.isfinite(g1_values)):
        raise EstimationError("g1 overflow")
    support = (float(grid[0]), float(grid[-1]))
    beta_hat = dispersion * result.x

    def g1_tilde(y: float) -> float:
        return float(np.interp(y, grid, g1_values))

    def predict(x) -> float:
        center = float(np.asarray(x, dtype=float).ravel() @ beta_hat)
        return center + g_correction(center,
                                     lambda ys: np.interp(ys, grid, g1_values),
                                     support, variance=dispersion)

    return OutcomeRegressionFit(
        beta_O=beta_hat,
        g1_tilde=g1_tilde,
        predict=predict,
        loglik_at_max=result.value,
        convergence_flag=result.converged,
    )
