"""Explicit least-favorable-curve estimation for a fixed coefficient vector.

For given beta the curve value at y is the reciprocal of a kernel-
weighted average of exp{theta_i * y} / exp{D_i}, where theta_i is the
linear index of observation i and D_i is the cumulative integral of
the index regression E[Y | index = t] from 0 to theta_i.  The D_i are
cached per evaluator because they do not depend on y; the response-
kernel weights do not depend on beta at all, so objectives that sweep
beta precompute them once through ``YSmoothingCache``.

All inner sums run in log space with max shifts: theta_i * y reaches
several hundred in the heavier simulation settings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import EstimationError, IsolatedYError
from .kernels import DENOMINATOR_FLOOR, KernelSpec, kernel_eval, nw_regress
from .model import Dataset
from .numerics import cumulative_trapezoid, trapezoid

# Node count of the base grid used for cumulative index integrals.  The
# evaluator cache augments this with the observed index values so each
# cached integral ends exactly on a grid node.
CUM_GRID_POINTS = 401


def _colwise_logsumexp(terms: np.ndarray) -> np.ndarray:
    """log(sum(exp)) down each column; consumes ``terms`` in place."""
    shift = np.max(terms, axis=0)
    safe = np.where(np.isfinite(shift), shift, 0.0)
    terms -= safe[None, :]
    np.exp(terms, out=terms)
    with np.errstate(divide="ignore"):
        out = safe + np.log(terms.sum(axis=0))
    return np.where(np.isfinite(shift), out, shift)


def cum_index_integral(beta, data: Dataset, index_kernel: KernelSpec,
                       theta: float, points: int = 201) -> float:
    """Trapezoid value of the integral from 0 to theta of the index regression.

    The integrand is the N-W estimate of E[Y | beta'X = t] from the
    sample; for theta < 0 the value is the oriented (negative) integral.
    """
    if theta == 0.0:
        return 0.0
    beta = np.asarray(beta, dtype=float).ravel()
    index_values = data.x @ beta
    grid = np.linspace(0.0, float(theta), points)
    m_hat = nw_regress(index_values, data.y, index_kernel, grid)
    return trapezoid(m_hat, grid)


@dataclass
class YSmoothingCache:
    """Beta-independent response-kernel quantities, shared across evaluations.

    ``loo_log_weights`` has the diagonal at -inf so leave-one-out sums
    drop the held-out point; ``grid_log_weights`` covers a fixed
    evaluation grid when one is supplied.
    """

    kernel_matrix: np.ndarray
    loo_log_weights: np.ndarray
    loo_densities: np.ndarray
    grid: np.ndarray | None = None
    grid_log_weights: np.ndarray | None = None


def build_y_cache(data: Dataset, y_kernel: KernelSpec, renormalize_loo: bool,
                  grid: np.ndarray | None = None) -> YSmoothingCache:
    y = data.y
    n = data.n
    kmat = kernel_eval(y_kernel, y[:, None] - y[None, :])
    col_sums = kmat.sum(axis=0)
    diag = np.diagonal(kmat)
    loo_sums = col_sums - diag if renormalize_loo else col_sums
    if np.any(loo_sums < DENOMINATOR_FLOOR):
        raise IsolatedYError("isolated y among the sample points")
    with np.errstate(divide="ignore"):
        loo_log_w = np.log(kmat) - np.log(loo_sums)[None, :]
    np.fill_diagonal(loo_log_w, -np.inf)
    loo_densities = (col_sums - diag) / y_kernel.bandwidth / (n - 1)

    grid_log_w = None
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        grid_kmat = kernel_eval(y_kernel, y[:, None] - grid[None, :])
        grid_sums = grid_kmat.sum(axis=0)
        if np.any(grid_sums < DENOMINATOR_FLOOR):
            raise IsolatedYError("isolated y on the evaluation grid")
        with np.errstate(divide="ignore"):
            grid_log_w = np.log(grid_kmat) - np.log(grid_sums)[None, :]
    return YSmoothingCache(kernel_matrix=kmat, loo_log_weights=loo_log_w,
                           loo_densities=loo_densities, grid=grid,
                           grid_log_weights=grid_log_w)


class LfcEvaluator:
    """Least-favorable-curve values for one fixed beta.

    Attributes
    ----------
    index_values : (n,) array of beta'X_i.
    log_denominators : (n,) array of cached integrals D_i; the inner sum
        divides by exp(D_i), kept in log space.
    renormalize_loo : with leave-one-out evaluation, renormalize the
        kernel weights over the remaining points so they sum to one
        (default) instead of keeping the full-sample weight denominator.
    """

    def __init__(self, beta, data: Dataset, index_kernel: KernelSpec,
                 y_kernel: KernelSpec, renormalize_loo: bool = True,
                 y_cache: YSmoothingCache | None = None):
        self.beta = np.asarray(beta, dtype=float).ravel()
        if self.beta.shape[0] != data.d:
            raise ValueError("beta and dataset dimension mismatch")
        self.data = data
        self.index_kernel = index_kernel
        self.y_kernel = y_kernel
        self.renormalize_loo = bool(renormalize_loo)
        self.index_values = data.x @ self.beta
        self.log_denominators = self._cache_log_denominators()
        self._y_cache = y_cache

    # -- caches ----------------------------------------------------------

    def _cache_log_denominators(self) -> np.ndarray:
        thetas = self.index_values
        lo = min(0.0, float(thetas.min()))
        hi = max(0.0, float(thetas.max()))
        if hi == lo:
            # All indices sit at 0: every integral is empty.
            return np.zeros(self.data.n)
        nodes = np.union1d(np.linspace(lo, hi, CUM_GRID_POINTS),
                           np.append(thetas, 0.0))
        m_hat = nw_regress(thetas, self.data.y, self.index_kernel, nodes)
        running = cumulative_trapezoid(m_hat, nodes)
        at_zero = running[np.searchsorted(nodes, 0.0)]
        return running[np.searchsorted(nodes, thetas)] - at_zero

    def y_cache(self) -> YSmoothingCache:
        if self._y_cache is None:
            self._y_cache = build_y_cache(self.data, self.y_kernel,
                                          self.renormalize_loo)
        return self._y_cache

    # -- point evaluation ----------------------------------------------

    def log_value_at(self, y: float, exclude: int | None = None) -> float:
        """log of the curve value at y, optionally excluding one observation."""
        kvals = kernel_eval(self.y_kernel, self.data.y - y)
        if exclude is None:
            keep = slice(None)
            weight_sum = kvals.sum()
        else:
            if self.data.n < 3:
                raise ValueError("leave-one-out evaluation needs n >= 3")
            keep = np.arange(self.data.n) != exclude
            weight_sum = kvals[keep].sum() if self.renormalize_loo else kvals.sum()
        if weight_sum < DENOMINATOR_FLOOR:
            raise IsolatedYError(f"isolated y at {y}")
        with np.errstate(divide="ignore"):
            log_w = np.log(kvals[keep]) - np.log(weight_sum)
        terms = self.index_values[keep] * y - self.log_denominators[keep] + log_w
        inner = float(logsumexp(terms))
        if inner == -np.inf:
            raise IsolatedYError(f"isolated y at {y}")
        if not np.isfinite(inner):
            raise EstimationError(f"lfc overflow at y={y}")
        return -inner

    def value_at(self, y: float, exclude: int | None = None) -> float:
        with np.errstate(over="ignore"):
            value = float(np.exp(self.log_value_at(y, exclude)))
        if not np.isfinite(value):
            raise EstimationError(f"lfc overflow at y={y}")
        return value

    def __call__(self, y: float, exclude: int | None = None) -> float:
        return self.value_at(y, exclude)

    # -- batch evaluation ----------------------------------------------

    def loo_log_at_samples(self) -> np.ndarray:
        """log curve values at every sample point, each leaving itself out."""
        if self.data.n < 3:
            raise ValueError("leave-one-out evaluation needs n >= 3")
        log_w = self.y_cache().loo_log_weights
        terms = np.multiply.outer(self.index_values, self.data.y)
        terms -= self.log_denominators[:, None]
        terms += log_w
        inner = _colwise_logsumexp(terms)
        if np.any(inner == -np.inf):
            raise IsolatedYError("isolated y among the sample points")
        if not np.all(np.isfinite(inner)):
            raise EstimationError("lfc overflow at a sample point")
        return -inner

    def log_on_grid(self, ys) -> np.ndarray:
        """log curve values on an arbitrary grid, no exclusion."""
        cache = self._y_cache
        if cache is not None and cache.grid is not None and ys is cache.grid:
            log_w = cache.grid_log_weights
            ys = cache.grid
        else:
            ys = np.asarray(ys, dtype=float).ravel()
            kmat = kernel_eval(self.y_kernel, self.data.y[:, None] - ys[None, :])
            weight_sums = kmat.sum(axis=0)
            if np.any(weight_sums < DENOMINATOR_FLOOR):
                raise IsolatedYError("isolated y on the evaluation grid")
            with np.errstate(divide="ignore"):
                log_w = np.log(kmat) - np.log(weight_sums)[None, :]
        terms = np.multiply.outer(self.index_values, ys)
        terms -= self.log_denominators[:, None]
        terms += log_w
        inner = _colwise_logsumexp(terms)
        if not np.all(np.isfinite(inner)):
            raise EstimationError("lfc overflow on the evaluation grid")
        return -inner

    def loo_densities(self) -> np.ndarray:
        """Leave-one-out kernel density of Y at every sample point."""
        return self.y_cache().loo_densities


def lfc_at(evaluator: LfcEvaluator, y: float, exclude: int | None = None) -> float:
    """Curve value at y; with ``exclude=k`` the sums skip observation k."""
    return evaluator.value_at(y, exclude)


def standardize(evaluator: LfcEvaluator):
    """Normalize the curve so its integral estimate equals one.

    The integral of the unnormalized curve is estimated by the sample
    mean of leave-one-out curve values divided by leave-one-out kernel
    density values.  Returns (normalizer, standardized curve callable).
    """
    curve_values = np.exp(evaluator.loo_log_at_samples())
    if not np.all(np.isfinite(curve_values)):
        raise EstimationError("lfc overflow at a sample point")
    densities = evaluator.loo_densities()
    if np.any(densities <= DENOMINATOR_FLOOR):
        raise EstimationError("density floor in standardization")
    normalizer = float(np.mean(curve_values / densities))

    def f_hat(y: float) -> float:
        return evaluator.value_at(y) / normalizer

    return normalizer, f_hat
