"""Pairwise rank surrogate objective: the comparison baseline.

The objective is the negated pair average of log(1 + exp(-(Y_i - Y_j) *
beta'(X_i - X_j))).  It is free of the base measure by construction, is
concave in beta, and is known to drift to very large coefficients when
the error variance is small relative to the signal; the simulation
harness reproduces exactly that failure mode.
"""

from __future__ import annotations

import numpy as np

from .model import Dataset
from .optimize import SearchConfig, maximize
from .profile_likelihood import FitResult

# Exponents are clamped here so the objective stays finite everywhere.
_EXP_CLAMP = 700.0


class RankObjective:
    """Pairwise differences of the observed rows, precomputed once."""

    def __init__(self, data: Dataset):
        observed = data.observed()
        if observed.n < 2:
            raise ValueError("need at least 2 observed rows")
        self.data = observed
        i, j = np.triu_indices(observed.n, k=1)
        self._dy = observed.y[i] - observed.y[j]
        self._dx = observed.x[i] - observed.x[j]

    @property
    def n_pairs(self) -> int:
        return self._dy.shape[0]


def rank_loglik(objective: RankObjective, beta) -> float:
    """Average pairwise log-concordance at beta; always finite and <= 0."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != objective.data.d:
        raise ValueError("beta and dataset dimension mismatch")
    exponents = -objective._dy * (objective._dx @ beta)
    np.clip(exponents, -_EXP_CLAMP, _EXP_CLAMP, out=exponents)
    return -float(np.mean(np.log1p(np.exp(exponents))))


def rank_fit(objective: RankObjective, search: SearchConfig) -> FitResult:
    """Maximize the rank surrogate; no base-measure output exists."""
    if search.dim != objective.data.d:
        raise ValueError("search box and dataset dimension mismatch")
    result = maximize(lambda b: rank_loglik(objective, b), search)
    return FitResult(
        beta_hat=result.x,
        loglik_at_max=result.value,
        optimizer_trace=result.trace,
        convergence_flag=result.converged,
    )


def median_curve(config, beta_grid) -> list[tuple[float, float]]:
    """Across-replication median of the rank objective on a coefficient grid.

    Each replication simulates a fresh dataset from ``config`` and
    evaluates the objective at every grid point; medians are taken per
    grid point.  Only univariate configurations are supported.
    """
    from .simulate import generate  # local import: simulate drives this module too

    beta_grid = [float(b) for b in beta_grid]
    if not beta_grid:
        raise ValueError("beta grid must be nonempty")
    if len(config.beta_true) != 1:
        raise ValueError("median curve supports univariate configurations only")
    values = np.empty((config.replications, len(beta_grid)))
    for rep in range(config.replications):
        dataset = generate(config, rep)
        objective = RankObjective(dataset)
        for j, b in enumerate(beta_grid):
            values[rep, j] = rank_loglik(objective, [b])
    medians = np.median(values, axis=0)
    return list(zip(beta_grid, (float(v) for v in medians)))
