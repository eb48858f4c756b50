"""Deterministic quadrature and log-space helpers.

All integrals in the package run on explicit grids with the composite
trapezoid rule, so every value is reproducible bit for bit given the
same grid.  The log-space variants use the max-shift trick because the
exponents routinely leave the representable range of doubles.
"""

from __future__ import annotations

import numpy as np

# Uniform grid resolution shared by every density-style quadrature.
QUAD_POINTS = 2001


def trapezoid(values: np.ndarray, xs: np.ndarray) -> float:
    """Composite trapezoid rule over sorted (not necessarily uniform) nodes."""
    values = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(xs)))


def cumulative_trapezoid(values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Running trapezoid integral; entry k is the integral from xs[0] to xs[k]."""
    values = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    out[0] = 0.0
    np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(xs), out=out[1:])
    return out


def log_trapezoid(log_values: np.ndarray, dx: float) -> float:
    """log of the trapezoid integral of exp(log_values) on a uniform grid.

    Shifts by the maximum before exponentiating so exponents of several
    hundred stay finite.  Returns -inf when the integrand is identically
    zero (all log values -inf).
    """
    log_values = np.asarray(log_values, dtype=float)
    shift = np.max(log_values)
    if not np.isfinite(shift):
        return float(shift) if shift < 0 else float("nan")
    scaled = np.exp(log_values - shift)
    total = np.sum(0.5 * (scaled[1:] + scaled[:-1])) * dx
    return float(shift + np.log(total))


def log_trapezoid_rows(log_values: np.ndarray, dx: float) -> np.ndarray:
    """Row-wise :func:`log_trapezoid` for a 2-d array of log integrands.

    Consumes ``log_values`` in place when it is a float array.
    """
    log_values = np.asarray(log_values, dtype=float)
    shift = np.max(log_values, axis=1)
    safe = np.where(np.isfinite(shift), shift, 0.0)
    log_values -= safe[:, None]
    np.exp(log_values, out=log_values)
    # Trapezoid = full sum minus half the two endpoints, on a uniform grid.
    totals = (log_values.sum(axis=1)
              - 0.5 * (log_values[:, 0] + log_values[:, -1])) * dx
    with np.errstate(divide="ignore"):
        out = safe + np.log(totals)
    return np.where(np.isfinite(shift), out, shift)


def uniform_grid(lo: float, hi: float, points: int = QUAD_POINTS) -> np.ndarray:
    if not hi > lo:
        raise ValueError(f"degenerate support [{lo}, {hi}]")
    return np.linspace(lo, hi, points)
