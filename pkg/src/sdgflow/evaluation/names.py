"""Metric name registry shared by the spec validator, engine, and reporting."""

UTILITY_METRICS = (
    "pmse_observed",
    "pmse_standardized",
    "pmse_ratio",
    "specks",
    "univariate_fidelity",
    "bivariate_fidelity",
)

PRIVACY_METRICS = (
    "categorical_cap",
    "new_row_synthesis",
    "inference_attack_score",
    "tcap",
    "min_nn_distance",
    "sample_overlap",
)

DIAGNOSTIC_METRICS = ("diagnostic_overall_score",)

# privacy metrics that need key/sensitive column configuration
KEY_BASED_PRIVACY_METRICS = ("categorical_cap", "inference_attack_score", "tcap")
