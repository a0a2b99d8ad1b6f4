"""
Result persistence for Weak Gauge Lab.
"""

from .results_store import ResultsStore, DerivativeRow, WeakValueRow

__all__ = [
    "ResultsStore",
    "DerivativeRow",
    "WeakValueRow",
]
