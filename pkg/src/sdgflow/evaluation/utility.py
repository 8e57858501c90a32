"""Utility metrics: propensity-score pMSE family plus distributional fidelity.

The propensity model is a ridge-regularized logistic regression (IRLS) that
tries to tell real rows from synthetic ones; the less separable they are, the
closer observed pMSE sits to its null value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, DegenerateNull, SchemaMismatch, SeparationWarning, TooFewRows
from ..rng import RngStream
from ..tabular import ColumnKind, Dataset, concat_datasets, encode
from .results import Direction, MetricResult

RIDGE = 1e-6
MAX_ITER = 100
COEF_TOL = 1e-8
_SEPARATION_COEF = 25.0
DEFAULT_PERMUTATIONS = 50
MIN_PERMUTATIONS = 20


@dataclass(frozen=True)
class PropensityModel:
    coefficients: tuple[float, ...]  # intercept first, then k predictors
    c: float
    k: int
    converged: bool
    iterations: int


@dataclass(frozen=True)
class NullModel:
    kind: str  # permutation | analytic
    B: int
    null_mean: float
    null_sd: float
    samples: tuple[float, ...] = field(default_factory=tuple)


def _check_pair(real: Dataset, synth: Dataset) -> None:
    if not real.schema.same_structure(synth.schema):
        raise SchemaMismatch("real and synthetic schemas differ")


def _design_matrix(real: Dataset, synth: Dataset) -> tuple[np.ndarray, np.ndarray, int]:
    combined = concat_datasets(real, synth)
    enc = encode(combined)
    n = enc.rows
    x = np.empty((n, enc.cols + 1), dtype=np.float64)
    x[:, 0] = 1.0
    x[:, 1:] = enc.data
    z = np.zeros(n, dtype=np.float64)
    z[real.n:] = 1.0
    return x, z, enc.cols


def _irls(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Ridge logistic fit; returns (beta, scores, converged, iterations).

    The ridge excludes the intercept, which keeps mean(p) equal to mean(z) at
    the optimum up to the tolerance.
    """
    n, p = x.shape
    ridge = np.full(p, RIDGE)
    ridge[0] = 0.0
    beta = np.zeros(p)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        eta = x @ beta
        prob = expit(eta)
        w = np.clip(prob * (1.0 - prob), 1e-12, None)
        grad = x.T @ (z - prob) - ridge * beta
        xw = x * w[:, None]
        hess = x.T @ xw
        hess[np.diag_indices_from(hess)] += ridge
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < COEF_TOL:
            converged = True
            break
    scores = expit(x @ beta)
    if np.max(np.abs(beta)) > _SEPARATION_COEF:
        warnings.warn(
            "propensity fit drifted toward perfect separation",
            SeparationWarning,
            stacklevel=3,
        )
        converged = False
    return beta, scores, converged, iterations


def fit_propensity(
    real: Dataset, synth: Dataset, rng: RngStream | None = None
) -> tuple[PropensityModel, np.ndarray]:
    """Fit the real-vs-synthetic classifier; `rng` is accepted for interface
    symmetry, the fit itself is deterministic."""
    _check_pair(real, synth)
    if real.n < 2 or synth.n < 2:
        raise TooFewRows("propensity fit needs at least 2 rows on each side")
    x, z, k = _design_matrix(real, synth)
    beta, scores, converged, iterations = _irls(x, z)
    model = PropensityModel(
        coefficients=tuple(float(b) for b in beta),
        c=synth.n / (real.n + synth.n),
        k=k,
        converged=converged,
        iterations=iterations,
    )
    return model, scores


def pmse_observed(scores: np.ndarray, c: float) -> MetricResult:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ConfigError("pmse_observed needs at least one score")
    value = float(np.mean((scores - c) ** 2))
    return MetricResult(
        name="pmse_observed",
        score=value,
        direction=Direction.LOWER_BETTER,
        provenance="utility",
        details={"n": int(scores.size), "c": c},
    )


def pmse_null(
    real: Dataset,
    synth: Dataset,
    kind: str = "permutation",
    B: int = DEFAULT_PERMUTATIONS,
    rng: RngStream | None = None,
) -> NullModel:
    """Null distribution of observed pMSE under "synthetic label carries no
    signal". Permutation kind refits the model on shuffled labels; analytic
    kind evaluates the closed forms for this model family."""
    _check_pair(real, synth)
    n = real.n + synth.n
    c = synth.n / n
    if kind == "analytic":
        x, z, k = _design_matrix(real, synth)
        mean = (k - 1) * (1.0 - c) ** 2 * c / n
        sd = math.sqrt(2.0 * (k - 1)) * (1.0 - c) ** 2 * c / n
        return NullModel(kind="analytic", B=0, null_mean=mean, null_sd=sd)
    if kind != "permutation":
        raise ConfigError(f"null model kind must be permutation|analytic, got {kind!r}")
    if B < MIN_PERMUTATIONS:
        raise ConfigError(f"permutation null needs B >= {MIN_PERMUTATIONS}, got {B}")
    if rng is None:
        raise ConfigError("permutation null needs an rng stream")
    x, z, k = _design_matrix(real, synth)
    gen = rng.generator
    samples = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        for _ in range(B):
            zb = gen.permutation(z)
            _, scores, _, _ = _irls(x, zb)
            samples.append(float(np.mean((scores - c) ** 2)))
    arr = np.asarray(samples)
    return NullModel(
        kind="permutation",
        B=B,
        null_mean=float(arr.mean()),
        null_sd=float(arr.std(ddof=1)),
        samples=tuple(samples),
    )


def pmse_standardized(observed: float, null: NullModel) -> MetricResult:
    if null.null_sd <= 0.0:
        raise DegenerateNull("null standard deviation is zero")
    return MetricResult(
        name="pmse_standardized",
        score=(observed - null.null_mean) / null.null_sd,
        direction=Direction.CENTERED_ZERO,
        provenance="utility",
        details={"null_mean": null.null_mean, "null_sd": null.null_sd, "null_kind": null.kind},
    )


def pmse_ratio(observed: float, null: NullModel) -> MetricResult:
    if null.null_mean <= 0.0:
        raise DegenerateNull("null mean is zero")
    return MetricResult(
        name="pmse_ratio",
        score=observed / null.null_mean,
        direction=Direction.CENTERED_ONE,
        provenance="utility",
        details={"null_mean": null.null_mean, "null_kind": null.kind},
    )


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ConfigError("ks_statistic needs non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def specks(scores_real: np.ndarray, scores_synth: np.ndarray) -> MetricResult:
    """KS distance between the propensity-score distributions of the two sides."""
    value = ks_statistic(scores_real, scores_synth)
    return MetricResult(
        name="specks",
        score=value,
        direction=Direction.LOWER_BETTER,
        provenance="utility",
        details={"n_real": int(np.size(scores_real)), "n_synth": int(np.size(scores_synth))},
    )


def _tvd(real_codes: np.ndarray, synth_codes: np.ndarray, n_categories: int) -> float:
    p = np.bincount(real_codes, minlength=n_categories) / real_codes.size
    q = np.bincount(synth_codes, minlength=n_categories) / synth_codes.size
    return 0.5 * float(np.abs(p - q).sum())


def univariate_fidelity(real: Dataset, synth: Dataset) -> MetricResult:
    """Mean per-column marginal agreement: 1-KS for continuous columns,
    1-TVD for categorical columns."""
    _check_pair(real, synth)
    per_column = {}
    for spec in real.schema.columns:
        r, s = real.column(spec.name), synth.column(spec.name)
        if spec.kind is ColumnKind.CONTINUOUS:
            per_column[spec.name] = 1.0 - ks_statistic(r, s)
        else:
            per_column[spec.name] = 1.0 - _tvd(r, s, len(spec.categories))
    return MetricResult(
        name="univariate_fidelity",
        score=float(np.mean(list(per_column.values()))),
        direction=Direction.HIGHER_BETTER,
        provenance="utility",
        details={"per_column": per_column},
    )


def _pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    sx, sy = x.std(), y.std()
    if sx < 1e-12 or sy < 1e-12:
        return 0.0, True
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return max(-1.0, min(1.0, r)), False


def _cramers_v(a: np.ndarray, b: np.ndarray, ka: int, kb: int) -> tuple[float, bool]:
    low = min(ka - 1, kb - 1)
    if low == 0:
        return 0.0, True
    n = a.size
    table = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb).astype(np.float64)
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row @ col / n
    mask = expected > 0
    chi2 = float((((table - expected) ** 2)[mask] / expected[mask]).sum())
    return math.sqrt(chi2 / (n * low)), False


def _correlation_ratio(codes: np.ndarray, values: np.ndarray, k: int) -> tuple[float, bool]:
    grand = values.mean()
    sst = float(((values - grand) ** 2).sum())
    if sst <= 0.0:
        return 0.0, True
    counts = np.bincount(codes, minlength=k).astype(np.float64)
    sums = np.bincount(codes, weights=values, minlength=k)
    nonzero = counts > 0
    ssb = float((counts[nonzero] * (sums[nonzero] / counts[nonzero] - grand) ** 2).sum())
    return math.sqrt(min(ssb / sst, 1.0)), False


def bivariate_fidelity(real: Dataset, synth: Dataset) -> MetricResult:
    """Mean pairwise-association agreement over all column pairs.

    Pearson for continuous pairs, Cramer's V for categorical pairs, the
    correlation ratio for mixed pairs. Degenerate inputs (constant column,
    single category, zero variance) contribute an association of 0 and are
    flagged in the details.
    """
    _check_pair(real, synth)
    schema = real.schema
    if len(schema.columns) < 2:
        raise ConfigError("bivariate_fidelity needs at least 2 columns")
    per_pair = {}
    flags = []
    for i in range(len(schema.columns)):
        for j in range(i + 1, len(schema.columns)):
            a, b = schema.columns[i], schema.columns[j]
            pair = f"{a.name}|{b.name}"
            stats = []
            for ds in (real, synth):
                xa, xb = ds.column(a.name), ds.column(b.name)
                if a.kind is ColumnKind.CONTINUOUS and b.kind is ColumnKind.CONTINUOUS:
                    v, degen = _pearson(xa, xb)
                    scale = 2.0
                elif a.kind is ColumnKind.CATEGORICAL and b.kind is ColumnKind.CATEGORICAL:
                    v, degen = _cramers_v(xa, xb, len(a.categories), len(b.categories))
                    scale = 1.0
                elif a.kind is ColumnKind.CATEGORICAL:
                    v, degen = _correlation_ratio(xa, xb, len(a.categories))
                    scale = 1.0
                else:
                    v, degen = _correlation_ratio(xb, xa, len(b.categories))
                    scale = 1.0
                stats.append(v)
                if degen:
                    flags.append(pair)
            per_pair[pair] = 1.0 - abs(stats[0] - stats[1]) / scale
    return MetricResult(
        name="bivariate_fidelity",
        score=float(np.mean(list(per_pair.values()))),
        direction=Direction.HIGHER_BETTER,
        provenance="utility",
        details={"per_pair": per_pair, "degenerate_pairs": sorted(set(flags))},
    )
