from .names import DIAGNOSTIC_METRICS, PRIVACY_METRICS, UTILITY_METRICS
from .results import Direction, MetricResult

__all__ = [
    "Direction",
    "MetricResult",
    "DIAGNOSTIC_METRICS",
    "PRIVACY_METRICS",
    "UTILITY_METRICS",
]
