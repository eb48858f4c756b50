"""Exception types shared across the estimators.

``EstimationError`` marks numerical failures inside an estimator run
(overflow, vanishing kernel sums, empty observed subsets).  The
simulation harness catches it per replication and records a failure
instead of aborting the whole study.  Precondition violations (bad
shapes, invalid configuration) raise ``ValueError`` as usual.
"""


class EstimationError(RuntimeError):
    """Numerical failure inside an estimator; recoverable per replication."""


class IsolatedYError(EstimationError):
    """Kernel weight denominator underflowed: no data near the requested y."""
