"""Derivative-free maximization over a box.

One dimension: coarse grid scan followed by golden-section refinement
of the bracketing interval.  Two or more: Nelder-Mead restarts seeded
from a small Latin hypercube of the box.  Both paths record every
evaluation and report the best point actually evaluated, which makes
the "returned value >= every traced value" invariant hold by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize
from scipy.stats import qmc

from .errors import EstimationError

_INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    """Box bounds and tolerances for the optimizer stack."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    grid_points: int = 21
    golden_tol: float = 1e-4
    simplex_ftol: float = 1e-6
    simplex_max_iter: int = 500
    n_starts: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        for a, b in zip(lo, hi):
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError("search box must be finite with lower < upper")

    @classmethod
    def box(cls, lo: float, hi: float, d: int = 1, **kwargs) -> "SearchConfig":
        return cls(lower=(lo,) * d, upper=(hi,) * d, **kwargs)

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass
class MaximizeResult:
    x: np.ndarray
    value: float
    converged: bool
    trace: list  # [(point tuple, value)] in evaluation order


class _Tracer:
    """Wraps the objective, recording every evaluation."""

    def __init__(self, func):
        self.func = func
        self.trace: list = []

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        value = float(self.func(x))
        self.trace.append((tuple(x), value))
        return value

    def best(self) -> tuple[np.ndarray, float]:
        idx = int(np.argmax([v for _, v in self.trace]))
        point, value = self.trace[idx]
        return np.array(point), value


def golden_section_max(f, lo: float, hi: float, tol: float) -> None:
    """Golden-section search for a maximum on [lo, hi].

    Only shrinks the interval; the caller extracts the best evaluated
    point from its tracer afterwards.
    """
    a, b = float(lo), float(hi)
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = f([c]), f([d])
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = f([c])
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = f([d])


def _maximize_scalar(tracer: _Tracer, search: SearchConfig) -> bool:
    lo, hi = search.lower[0], search.upper[0]
    grid = np.linspace(lo, hi, search.grid_points)
    values = [tracer([g]) for g in grid]
    best = int(np.argmax(values))
    if not np.isfinite(values[best]):
        return False
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    golden_section_max(tracer, a, b, search.golden_tol)
    return True


def _maximize_simplex(tracer: _Tracer, search: SearchConfig) -> bool:
    d = search.dim
    n_starts = search.n_starts if search.n_starts is not None else max(3, 2 * d)
    sampler = qmc.LatinHypercube(d=d, seed=search.seed)
    unit = sampler.random(n=n_starts)
    lo = np.array(search.lower)
    hi = np.array(search.upper)
    starts = qmc.scale(unit, lo, hi)
    bounds = Bounds(lo, hi)
    converged = False
    for start in starts:
        res = minimize(
            lambda v: -tracer(v),
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "fatol": search.simplex_ftol,
                "xatol": search.golden_tol,
                "maxiter": search.simplex_max_iter,
            },
        )
        converged = converged or bool(res.success)
    return converged


def maximize(func, search: SearchConfig) -> MaximizeResult:
    """Maximize func over the search box; func may return -inf for infeasible points."""
    tracer = _Tracer(func)
    if search.dim == 1:
        converged = _maximize_scalar(tracer, search)
    else:
        converged = _maximize_simplex(tracer, search)
    x, value = tracer.best()
    if not np.isfinite(value):
        raise EstimationError("objective infeasible everywhere")
    return MaximizeResult(x=x, value=value, converged=converged, trace=tracer.trace)
