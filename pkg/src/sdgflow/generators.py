"""Synthetic dataset generators.

Four modes share one config surface:

  rsd  fit a Gaussian copula to a real dataset and resample it
  asd  sample declared per-column distributions under rules, no real data
  csd  linear structural-equation model over a user-supplied causal DAG
  hsd  column partition, one non-hybrid sub-generator per part, joined

Every generator is a pure function of (inputs, params, stream) so reruns and
concurrent execution cannot change outputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .errors import ConfigError, DegenerateMarginalWarning, RuleUnsatisfiable, TooFewRows
from .rng import RngStream
from .specs import toposort_ids
from .tabular import ColumnKind, Dataset, Schema

MIN_FIT_ROWS = 10
DEFAULT_MAX_ATTEMPTS = 1000
HSD_RETRY_CAP = 1000
_EIG_FLOOR = 1e-8


# ----------------------------------------------------------------- configs ---

@dataclass(frozen=True)
class UniformModel:
    low: float
    high: float


@dataclass(frozen=True)
class NormalModel:
    mean: float
    std: float


@dataclass(frozen=True)
class QuantileTableModel:
    quantiles: tuple[float, ...]
    values: tuple[float, ...]


@dataclass(frozen=True)
class CategoricalModel:
    labels: tuple[str, ...]
    weights: tuple[float, ...]  # normalized at parse time


ColumnModel = UniformModel | NormalModel | QuantileTableModel | CategoricalModel


@dataclass(frozen=True)
class ImplicationRule:
    if_column: str
    if_category: str
    then_column: str
    then_categories: tuple[str, ...]

    def describe(self) -> str:
        return (
            f"implication: {self.if_column}={self.if_category} => "
            f"{self.then_column} in {list(self.then_categories)}"
        )


@dataclass(frozen=True)
class RangeRule:
    column: str
    low: float
    high: float

    def describe(self) -> str:
        return f"range_constraint: {self.column} in [{self.low}, {self.high}]"


@dataclass(frozen=True)
class DerivationRule:
    target: str
    sources: Mapping[str, float]
    constant: float

    def describe(self) -> str:
        terms = " + ".join(f"{c}*{self.sources[c]}" for c in self.sources)
        return f"derivation: {self.target} = {terms} + {self.constant}"


Rule = ImplicationRule | RangeRule | DerivationRule


@dataclass(frozen=True)
class RsdParams:
    correlation_shrinkage: float = 0.0


@dataclass(frozen=True)
class AsdParams:
    column_models: Mapping[str, ColumnModel]
    rules: tuple[Rule, ...] = ()
    max_attempts_per_row: int = DEFAULT_MAX_ATTEMPTS


@dataclass(frozen=True)
class NormalNoise:
    std: float


@dataclass(frozen=True)
class UniformNoise:
    half_width: float


NoiseSpec = NormalNoise | UniformNoise


@dataclass(frozen=True)
class CsdParams:
    causal_dag: tuple[tuple[str, str], ...]
    weights: tuple[float, ...]
    noise: Mapping[str, NoiseSpec]
    intercepts: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class HsdParams:
    partition: tuple[tuple[str, ...], ...]
    sub_configs: tuple["GeneratorConfig", ...]
    post_rules: tuple[Rule, ...] = ()

    def needs_real(self) -> bool:
        return any(c.mode == "rsd" for c in self.sub_configs)


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str
    n_out: int
    mode_params: RsdParams | AsdParams | CsdParams | HsdParams


# ------------------------------------------------------------ config parse ---

def _reject_extra(obj: Mapping, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown fields {sorted(extra)}")


def _num(obj: Mapping, key: str, where: str, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}: missing {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: {key!r} must be a number")
    return float(v)


def parse_generator_config(obj: Any, nested: bool = False) -> GeneratorConfig:
    """Validate a generator config document; raises ConfigError."""
    if not isinstance(obj, Mapping):
        raise ConfigError("generator config must be an object")
    _reject_extra(obj, {"mode", "n_out", "mode_params"}, "generator config")
    mode = obj.get("mode")
    if mode not in ("rsd", "asd", "csd", "hsd"):
        raise ConfigError(f"mode must be rsd|asd|csd|hsd, got {mode!r}")
    n_out = obj.get("n_out")
    if isinstance(n_out, bool) or not isinstance(n_out, int) or n_out < 1:
        raise ConfigError("n_out must be an integer >= 1")
    mp = obj.get("mode_params", {})
    if not isinstance(mp, Mapping):
        raise ConfigError("mode_params must be an object")

    if mode == "rsd":
        params: Any = _parse_rsd(mp)
    elif mode == "asd":
        params = _parse_asd(mp)
    elif mode == "csd":
        params = _parse_csd(mp)
    else:
        if nested:
            raise ConfigError("hsd configs cannot nest")
        params = _parse_hsd(mp, n_out)
    return GeneratorConfig(mode=mode, n_out=n_out, mode_params=params)


def _parse_rsd(mp: Mapping) -> RsdParams:
    _reject_extra(mp, {"correlation_shrinkage"}, "rsd params")
    lam = _num(mp, "correlation_shrinkage", "rsd params", default=0.0)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"correlation_shrinkage must be in [0, 1], got {lam}")
    return RsdParams(correlation_shrinkage=lam)


def _parse_column_model(name: str, doc: Any) -> ColumnModel:
    where = f"column_models[{name!r}]"
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: must be an object")
    if "labels" in doc or "weights" in doc:
        _reject_extra(doc, {"labels", "weights"}, where)
        labels = doc.get("labels")
        weights = doc.get("weights")
        if not isinstance(labels, Sequence) or not labels or isinstance(labels, str):
            raise ConfigError(f"{where}: labels must be a non-empty list")
        if any(not isinstance(l, str) for l in labels):
            raise ConfigError(f"{where}: labels must be strings")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"{where}: duplicate labels")
        if not isinstance(weights, Sequence) or len(weights) != len(labels):
            raise ConfigError(f"{where}: weights must align with labels")
        ws = []
        for w in weights:
            if isinstance(w, bool) or not isinstance(w, (int, float)) or w <= 0:
                raise ConfigError(f"{where}: weights must be positive numbers")
            ws.append(float(w))
        total = sum(ws)
        return CategoricalModel(labels=tuple(labels), weights=tuple(w / total for w in ws))
    dist = doc.get("distribution")
    if dist == "uniform":
        _reject_extra(doc, {"distribution", "low", "high"}, where)
        low = _num(doc, "low", where)
        high = _num(doc, "high", where)
        if low > high:
            raise ConfigError(f"{where}: low must be <= high")
        return UniformModel(low=low, high=high)
    if dist == "normal":
        _reject_extra(doc, {"distribution", "mean", "std"}, where)
        std = _num(doc, "std", where)
        if std < 0:
            raise ConfigError(f"{where}: std must be >= 0")
        return NormalModel(mean=_num(doc, "mean", where), std=std)
    if dist == "quantile_table":
        _reject_extra(doc, {"distribution", "quantiles", "values"}, where)
        qs = doc.get("quantiles")
        vs = doc.get("values")
        if (
            not isinstance(qs, Sequence)
            or not isinstance(vs, Sequence)
            or len(qs) != len(vs)
            or len(qs) < 2
        ):
            raise ConfigError(f"{where}: quantiles and values must align, length >= 2")
        qs = [float(q) for q in qs]
        vs = [float(v) for v in vs]
        if qs[0] != 0.0 or qs[-1] != 1.0 or any(a >= b for a, b in zip(qs, qs[1:])):
            raise ConfigError(f"{where}: quantiles must increase strictly from 0 to 1")
        if any(a > b for a, b in zip(vs, vs[1:])):
            raise ConfigError(f"{where}: values must be non-decreasing")
        return QuantileTableModel(quantiles=tuple(qs), values=tuple(vs))
    raise ConfigError(f"{where}: distribution must be uniform|normal|quantile_table")


def _parse_rule(doc: Any, where: str) -> Rule:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: rule must be an object")
    kind = doc.get("kind")
    if kind == "implication":
        _reject_extra(doc, {"kind", "if_column", "if_category", "then_column", "then_categories"}, where)
        for k in ("if_column", "if_category", "then_column"):
            if not isinstance(doc.get(k), str):
                raise ConfigError(f"{where}: {k} must be a string")
        tc = doc.get("then_categories")
        if not isinstance(tc, Sequence) or isinstance(tc, str) or not tc:
            raise ConfigError(f"{where}: then_categories must be a non-empty list")
        if any(not isinstance(c, str) for c in tc):
            raise ConfigError(f"{where}: then_categories must be strings")
        return ImplicationRule(
            if_column=doc["if_column"],
            if_category=doc["if_category"],
            then_column=doc["then_column"],
            then_categories=tuple(tc),
        )
    if kind == "range_constraint":
        _reject_extra(doc, {"kind", "column", "min", "max"}, where)
        if not isinstance(doc.get("column"), str):
            raise ConfigError(f"{where}: column must be a string")
        low = _num(doc, "min", where)
        high = _num(doc, "max", where)
        if low > high:
            raise ConfigError(f"{where}: min must be <= max")
        return RangeRule(column=doc["column"], low=low, high=high)
    if kind == "derivation":
        _reject_extra(doc, {"kind", "target", "sources", "constant"}, where)
        if not isinstance(doc.get("target"), str):
            raise ConfigError(f"{where}: target must be a string")
        sources = doc.get("sources")
        if not isinstance(sources, Mapping) or not sources:
            raise ConfigError(f"{where}: sources must map columns to coefficients")
        coefs = {}
        for col, coef in sources.items():
            if isinstance(coef, bool) or not isinstance(coef, (int, float)):
                raise ConfigError(f"{where}: coefficient for {col!r} must be a number")
            coefs[col] = float(coef)
        if doc["target"] in coefs:
            raise ConfigError(f"{where}: derivation target cannot be its own source")
        return DerivationRule(
            target=doc["target"], sources=coefs, constant=_num(doc, "constant", where, default=0.0)
        )
    raise ConfigError(f"{where}: kind must be implication|range_constraint|derivation")


def _parse_rules(docs: Any, where: str) -> tuple[Rule, ...]:
    if docs is None:
        return ()
    if not isinstance(docs, Sequence) or isinstance(docs, (str, bytes)):
        raise ConfigError(f"{where}: rules must be a list")
    rules = tuple(_parse_rule(d, f"{where}[{i}]") for i, d in enumerate(docs))
    _check_derivation_cycles(rules, where)
    return rules


def _check_derivation_cycles(rules: Sequence[Rule], where: str) -> None:
    derivs = [r for r in rules if isinstance(r, DerivationRule)]
    targets = [r.target for r in derivs]
    if len(set(targets)) != len(targets):
        raise ConfigError(f"{where}: multiple derivations for one target")
    deps = {r.target: [s for s in r.sources if s in set(targets)] for r in derivs}
    try:
        toposort_ids(list(deps), deps)
    except Exception:
        raise ConfigError(f"{where}: derivation rules form a cycle") from None


def _parse_asd(mp: Mapping) -> AsdParams:
    _reject_extra(mp, {"column_models", "rules", "max_attempts_per_row"}, "asd params")
    models_doc = mp.get("column_models")
    if not isinstance(models_doc, Mapping) or not models_doc:
        raise ConfigError("asd params: column_models must be a non-empty object")
    models = {name: _parse_column_model(name, doc) for name, doc in models_doc.items()}
    rules = _parse_rules(mp.get("rules"), "asd rules")
    cap = mp.get("max_attempts_per_row", DEFAULT_MAX_ATTEMPTS)
    if isinstance(cap, bool) or not isinstance(cap, int) or cap < 1:
        raise ConfigError("asd params: max_attempts_per_row must be an integer >= 1")
    for r in rules:
        if isinstance(r, DerivationRule) and r.target in models:
            raise ConfigError(
                f"asd params: column {r.target!r} is both modeled and derived"
            )
    return AsdParams(column_models=models, rules=rules, max_attempts_per_row=cap)


def _parse_csd(mp: Mapping) -> CsdParams:
    _reject_extra(mp, {"causal_dag", "weights", "noise", "intercepts"}, "csd params")
    edges_doc = mp.get("causal_dag", [])
    if not isinstance(edges_doc, Sequence) or isinstance(edges_doc, (str, bytes)):
        raise ConfigError("csd params: causal_dag must be a list of edges")
    edges: list[tuple[str, str]] = []
    for i, e in enumerate(edges_doc):
        if not isinstance(e, Mapping):
            raise ConfigError(f"csd causal_dag[{i}]: edge must be an object")
        _reject_extra(e, {"from", "to"}, f"csd causal_dag[{i}]")
        u, v = e.get("from"), e.get("to")
        if not isinstance(u, str) or not isinstance(v, str):
            raise ConfigError(f"csd causal_dag[{i}]: from and to must be column names")
        if u == v:
            raise ConfigError(f"csd causal_dag[{i}]: self-edge on {u!r}")
        if (u, v) in edges:
            raise ConfigError(f"csd causal_dag[{i}]: duplicate edge {u}->{v}")
        edges.append((u, v))

    weights_doc = mp.get("weights", [])
    if not isinstance(weights_doc, Sequence) or len(weights_doc) != len(edges):
        raise ConfigError("csd params: weights must align with causal_dag edges")
    weights = []
    for i, w in enumerate(weights_doc):
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ConfigError(f"csd weights[{i}]: must be a number")
        weights.append(float(w))

    noise_doc = mp.get("noise")
    if not isinstance(noise_doc, Mapping) or not noise_doc:
        raise ConfigError("csd params: noise must map every column to a noise spec")
    noise: dict[str, NoiseSpec] = {}
    for col, nd in noise_doc.items():
        where = f"csd noise[{col!r}]"
        if not isinstance(nd, Mapping):
            raise ConfigError(f"{where}: must be an object")
        dist = nd.get("distribution")
        if dist == "normal":
            _reject_extra(nd, {"distribution", "std"}, where)
            std = _num(nd, "std", where)
            if std < 0:
                raise ConfigError(f"{where}: std must be >= 0")
            noise[col] = NormalNoise(std=std)
        elif dist == "uniform":
            _reject_extra(nd, {"distribution", "half_width"}, where)
            hw = _num(nd, "half_width", where)
            if hw < 0:
                raise ConfigError(f"{where}: half_width must be >= 0")
            noise[col] = UniformNoise(half_width=hw)
        else:
            raise ConfigError(f"{where}: distribution must be normal|uniform")

    inter_doc = mp.get("intercepts", {})
    if not isinstance(inter_doc, Mapping):
        raise ConfigError("csd params: intercepts must be an object")
    intercepts = {}
    for col, v in inter_doc.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"csd intercepts[{col!r}]: must be a number")
        intercepts[col] = float(v)

    nodes = sorted({u for u, _ in edges} | {v for _, v in edges})
    deps = {n: [u for u, v in edges if v == n] for n in nodes}
    try:
        toposort_ids(nodes, deps)
    except Exception:
        raise ConfigError("csd params: causal_dag has a cycle") from None
    return CsdParams(
        causal_dag=tuple(edges), weights=tuple(weights), noise=noise, intercepts=intercepts
    )


def _parse_hsd(mp: Mapping, n_out: int) -> HsdParams:
    _reject_extra(mp, {"partition", "sub_configs", "post_rules"}, "hsd params")
    part_doc = mp.get("partition")
    if not isinstance(part_doc, Sequence) or isinstance(part_doc, (str, bytes)) or not part_doc:
        raise ConfigError("hsd params: partition must be a non-empty list of column groups")
    partition: list[tuple[str, ...]] = []
    seen: set[str] = set()
    for i, group in enumerate(part_doc):
        if not isinstance(group, Sequence) or isinstance(group, str) or not group:
            raise ConfigError(f"hsd partition[{i}]: must be a non-empty list of columns")
        if any(not isinstance(c, str) for c in group):
            raise ConfigError(f"hsd partition[{i}]: columns must be strings")
        overlap = seen & set(group)
        if overlap or len(set(group)) != len(group):
            raise ConfigError(f"hsd partition[{i}]: column assigned twice: {sorted(overlap) or group}")
        seen.update(group)
        partition.append(tuple(group))

    subs_doc = mp.get("sub_configs")
    if not isinstance(subs_doc, Sequence) or len(subs_doc) != len(partition):
        raise ConfigError("hsd params: sub_configs must align with partition")
    subs = []
    for i, sd in enumerate(subs_doc):
        try:
            sub = parse_generator_config(sd, nested=True)
        except ConfigError as e:
            raise ConfigError(f"hsd sub_configs[{i}]: {e}") from None
        if sub.n_out != n_out:
            raise ConfigError(
                f"hsd sub_configs[{i}]: n_out {sub.n_out} must equal the hybrid n_out {n_out}"
            )
        subs.append(sub)
    post = _parse_rules(mp.get("post_rules"), "hsd post_rules")
    return HsdParams(partition=tuple(partition), sub_configs=tuple(subs), post_rules=post)


# --------------------------------------------------- schema-level validation ---

def _check_rules_against_schema(rules: Sequence[Rule], schema: Schema, where: str) -> None:
    for r in rules:
        if isinstance(r, ImplicationRule):
            for col, lab in ((r.if_column, r.if_category),):
                spec = _col(schema, col, where)
                if spec.kind is not ColumnKind.CATEGORICAL:
                    raise ConfigError(f"{where}: implication column {col!r} must be categorical")
                if lab not in spec.categories:
                    raise ConfigError(f"{where}: {lab!r} is not a category of {col!r}")
            spec = _col(schema, r.then_column, where)
            if spec.kind is not ColumnKind.CATEGORICAL:
                raise ConfigError(f"{where}: implication column {r.then_column!r} must be categorical")
            bad = set(r.then_categories) - set(spec.categories)
            if bad:
                raise ConfigError(f"{where}: {sorted(bad)} are not categories of {r.then_column!r}")
        elif isinstance(r, RangeRule):
            if _col(schema, r.column, where).kind is not ColumnKind.CONTINUOUS:
                raise ConfigError(f"{where}: range_constraint column {r.column!r} must be continuous")
        else:
            if _col(schema, r.target, where).kind is not ColumnKind.CONTINUOUS:
                raise ConfigError(f"{where}: derivation target {r.target!r} must be continuous")
            for s in r.sources:
                if _col(schema, s, where).kind is not ColumnKind.CONTINUOUS:
                    raise ConfigError(f"{where}: derivation source {s!r} must be continuous")


def _col(schema: Schema, name: str, where: str):
    try:
        return schema.column(name)
    except KeyError:
        raise ConfigError(f"{where}: unknown column {name!r}") from None


def _check_asd_schema(params: AsdParams, schema: Schema) -> None:
    targets = {r.target for r in params.rules if isinstance(r, DerivationRule)}
    for name, model in params.column_models.items():
        spec = _col(schema, name, "asd")
        if isinstance(model, CategoricalModel):
            if spec.kind is not ColumnKind.CATEGORICAL:
                raise ConfigError(f"asd: column {name!r} is continuous but has a label model")
            bad = set(model.labels) - set(spec.categories)
            if bad:
                raise ConfigError(f"asd: labels {sorted(bad)} are not categories of {name!r}")
        elif spec.kind is not ColumnKind.CONTINUOUS:
            raise ConfigError(f"asd: column {name!r} is categorical but has a numeric model")
    covered = set(params.column_models) | targets
    missing = set(schema.names) - covered
    if missing:
        raise ConfigError(f"asd: columns {sorted(missing)} are neither modeled nor derived")
    _check_rules_against_schema(params.rules, schema, "asd")


def _check_csd_schema(params: CsdParams, schema: Schema) -> None:
    for spec in schema.columns:
        if spec.kind is not ColumnKind.CONTINUOUS:
            raise ConfigError(f"csd: column {spec.name!r} is categorical; csd handles continuous only")
    for u, v in params.causal_dag:
        _col(schema, u, "csd")
        _col(schema, v, "csd")
    missing = set(schema.names) - set(params.noise)
    if missing:
        raise ConfigError(f"csd: columns {sorted(missing)} have no noise spec")
    for col in params.noise:
        _col(schema, col, "csd noise")
    for col in params.intercepts:
        _col(schema, col, "csd intercepts")


# --------------------------------------------------------------- rsd (copula) ---

def _normal_scores(ds: Dataset) -> tuple[np.ndarray, list[int]]:
    """Map each column to standard-normal scores; returns an (n, d) matrix
    plus the indices of degenerate (constant) columns."""
    n = ds.n
    cols = []
    degenerate = []
    for j, (spec, arr) in enumerate(zip(ds.schema.columns, ds.columns)):
        if spec.kind is ColumnKind.CONTINUOUS:
            ranks = rankdata(arr, method="average")
            u = (ranks - 0.5) / n
        else:
            k = len(spec.categories)
            counts = np.bincount(arr, minlength=k).astype(np.float64)
            p = counts / n
            cum = np.concatenate([[0.0], np.cumsum(p)])
            u = cum[arr] + p[arr] / 2.0
        z = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
        if np.std(z) < 1e-12:
            degenerate.append(j)
        cols.append(z)
    return np.column_stack(cols), degenerate


def _correlation(z: np.ndarray, degenerate: Sequence[int]) -> np.ndarray:
    d = z.shape[1]
    sd = z.std(axis=0)
    safe = sd.copy()
    safe[safe < 1e-12] = 1.0
    zc = (z - z.mean(axis=0)) / safe
    corr = (zc.T @ zc) / z.shape[0]
    corr = np.clip(corr, -1.0, 1.0)
    for j in degenerate:
        corr[j, :] = 0.0
        corr[:, j] = 0.0
        corr[j, j] = 1.0
    np.fill_diagonal(corr, 1.0)
    return corr


def _nearest_psd(corr: np.ndarray) -> np.ndarray:
    """Eigenvalue floor then diagonal renormalization back to a correlation."""
    vals, vecs = np.linalg.eigh(corr)
    vals = np.clip(vals, _EIG_FLOOR, None)
    fixed = (vecs * vals) @ vecs.T
    scale = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(scale, scale)
    np.fill_diagonal(fixed, 1.0)
    return fixed


def _cholesky_with_jitter(corr: np.ndarray) -> np.ndarray:
    jitter = 0.0
    for _ in range(6):
        try:
            return np.linalg.cholesky(corr + jitter * np.eye(corr.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-10)
    raise np.linalg.LinAlgError("correlation matrix not decomposable after jitter")


def generate_rsd(real: Dataset, params: RsdParams, n_out: int, rng: RngStream) -> Dataset:
    """Gaussian-copula resampling of a real dataset.

    Fits per-column marginals plus a normal-score correlation matrix, samples
    a multivariate normal, and back-transforms through the inverse marginals.
    Continuous outputs stay within each real column's observed [min, max].
    """
    if real.n < MIN_FIT_ROWS:
        raise TooFewRows(f"rsd needs at least {MIN_FIT_ROWS} rows, got {real.n}")
    if n_out < 1:
        raise ConfigError("n_out must be >= 1")

    z, degenerate = _normal_scores(real)
    for j in degenerate:
        warnings.warn(
            f"column {real.schema.columns[j].name!r} is constant; "
            "synthetic output will repeat that value",
            DegenerateMarginalWarning,
            stacklevel=2,
        )
    corr = _correlation(z, degenerate)
    lam = params.correlation_shrinkage
    if lam > 0.0:
        corr = (1.0 - lam) * corr + lam * np.eye(corr.shape[0])
    corr = _nearest_psd(corr)
    chol = _cholesky_with_jitter(corr)

    z_syn = rng.generator.standard_normal((n_out, corr.shape[0])) @ chol.T
    u_syn = ndtr(z_syn)

    out_cols = []
    n = real.n
    grid = (np.arange(n) + 0.5) / n
    for j, (spec, arr) in enumerate(zip(real.schema.columns, real.columns)):
        u = u_syn[:, j]
        if spec.kind is ColumnKind.CONTINUOUS:
            ordered = np.sort(arr)
            vals = np.interp(u, grid, ordered)
            out_cols.append(np.clip(vals, ordered[0], ordered[-1]))
        else:
            k = len(spec.categories)
            counts = np.bincount(arr, minlength=k).astype(np.float64)
            cum = np.cumsum(counts / n)
            idx = np.searchsorted(cum, u, side="right")
            out_cols.append(np.clip(idx, 0, k - 1).astype(np.int64))
    return Dataset(real.schema, tuple(out_cols))


# ------------------------------------------------------------------ asd ---

def _sample_asd_batch(
    params: AsdParams, schema: Schema, size: int, gen: np.random.Generator
) -> dict[str, np.ndarray]:
    cols: dict[str, np.ndarray] = {}
    for spec in schema.columns:
        model = params.column_models.get(spec.name)
        if model is None:
            continue  # derivation target, filled below
        if isinstance(model, UniformModel):
            cols[spec.name] = gen.uniform(model.low, model.high, size)
        elif isinstance(model, NormalModel):
            cols[spec.name] = gen.normal(model.mean, model.std, size)
        elif isinstance(model, QuantileTableModel):
            u = gen.random(size)
            cols[spec.name] = np.interp(u, model.quantiles, model.values)
        else:
            label_idx = np.array([spec.categories.index(l) for l in model.labels], dtype=np.int64)
            picks = gen.choice(len(model.labels), size=size, p=np.asarray(model.weights))
            cols[spec.name] = label_idx[picks]
    return cols


def _derivation_order(rules: Sequence[Rule]) -> list[DerivationRule]:
    derivs = {r.target: r for r in rules if isinstance(r, DerivationRule)}
    deps = {t: [s for s in r.sources if s in derivs] for t, r in derivs.items()}
    return [derivs[t] for t in toposort_ids(list(derivs), deps)]


def _apply_derivations(cols: dict[str, np.ndarray], order: Sequence[DerivationRule]) -> None:
    for rule in order:
        total = np.full_like(next(iter(cols.values())), rule.constant, dtype=np.float64)
        for src, coef in rule.sources.items():
            total = total + coef * cols[src]
        cols[rule.target] = total


def _rule_violations(
    cols: Mapping[str, np.ndarray], rules: Sequence[Rule], schema: Schema
) -> tuple[np.ndarray, list[int]]:
    """Per-row bad mask plus per-rule violation counts (derivations never violate)."""
    size = next(iter(cols.values())).shape[0]
    bad = np.zeros(size, dtype=bool)
    counts = []
    for rule in rules:
        if isinstance(rule, RangeRule):
            v = cols[rule.column]
            viol = (v < rule.low) | (v > rule.high)
        elif isinstance(rule, ImplicationRule):
            if_spec = schema.column(rule.if_column)
            then_spec = schema.column(rule.then_column)
            if_code = if_spec.categories.index(rule.if_category)
            ok_codes = np.array(
                [then_spec.categories.index(c) for c in rule.then_categories], dtype=np.int64
            )
            viol = (cols[rule.if_column] == if_code) & ~np.isin(cols[rule.then_column], ok_codes)
        else:
            counts.append(0)
            continue
        counts.append(int(viol.sum()))
        bad |= viol
    return bad, counts


def _most_violated(rules: Sequence[Rule], counts: Sequence[int]) -> str:
    worst = max(range(len(rules)), key=lambda i: counts[i])
    return rules[worst].describe()


def generate_asd(schema: Schema, params: AsdParams, n_out: int, rng: RngStream) -> Dataset:
    """Rule-constrained sampling from declared column distributions.

    Derivations are applied after each batch is drawn; implication and range
    rules are enforced by rejection. A row slot that stays unsatisfied past
    max_attempts_per_row raises RuleUnsatisfiable naming the worst rule.
    """
    _check_asd_schema(params, schema)
    if n_out < 1:
        raise ConfigError("n_out must be >= 1")
    order = _derivation_order(params.rules)
    gen = rng.generator

    accepted: dict[str, list[np.ndarray]] = {name: [] for name in schema.names}
    remaining = n_out
    attempts = 0
    total_counts = [0] * len(params.rules)
    while remaining > 0:
        attempts += 1
        if attempts > params.max_attempts_per_row:
            raise RuleUnsatisfiable(
                rule_description=_most_violated(params.rules, total_counts),
                attempts=attempts - 1,
            )
        cols = _sample_asd_batch(params, schema, remaining, gen)
        _apply_derivations(cols, order)
        bad, counts = _rule_violations(cols, params.rules, schema)
        total_counts = [a + b for a, b in zip(total_counts, counts)]
        keep = ~bad
        kept = int(keep.sum())
        if kept:
            for name in schema.names:
                accepted[name].append(cols[name][keep])
            remaining -= kept

    out = []
    for spec in schema.columns:
        arr = np.concatenate(accepted[spec.name])[:n_out]
        out.append(arr)
    return Dataset(schema, tuple(out))


# ------------------------------------------------------------------ csd ---

def generate_csd(params: CsdParams, schema: Schema, n_out: int, rng: RngStream) -> Dataset:
    """Linear structural-equation sampling over the configured causal DAG.

    Noise is drawn per column in schema order (so the draw sequence does not
    depend on the DAG), then columns are assembled parents-first.
    """
    _check_csd_schema(params, schema)
    if n_out < 1:
        raise ConfigError("n_out must be >= 1")
    gen = rng.generator

    eps: dict[str, np.ndarray] = {}
    for spec in schema.columns:
        nd = params.noise[spec.name]
        if isinstance(nd, NormalNoise):
            eps[spec.name] = gen.normal(0.0, nd.std, n_out)
        else:
            eps[spec.name] = gen.uniform(-nd.half_width, nd.half_width, n_out)

    parents: dict[str, list[tuple[str, float]]] = {name: [] for name in schema.names}
    for (u, v), w in zip(params.causal_dag, params.weights):
        parents[v].append((u, w))

    deps = {name: [u for u, _ in parents[name]] for name in schema.names}
    values: dict[str, np.ndarray] = {}
    for name in toposort_ids(list(schema.names), deps):
        x = np.full(n_out, params.intercepts.get(name, 0.0), dtype=np.float64)
        for parent, w in parents[name]:
            x = x + w * values[parent]
        values[name] = x + eps[name]
    return Dataset(schema, tuple(values[name] for name in schema.names))


# ------------------------------------------------------------------ hsd ---

def _check_hsd_schema(params: HsdParams, schema: Schema) -> None:
    assigned = [c for group in params.partition for c in group]
    missing = set(schema.names) - set(assigned)
    extra = set(assigned) - set(schema.names)
    if missing:
        raise ConfigError(f"hsd: columns {sorted(missing)} are not assigned to any part")
    if extra:
        raise ConfigError(f"hsd: partition names unknown columns {sorted(extra)}")
    _check_rules_against_schema(params.post_rules, schema, "hsd post_rules")


def _generate_part(
    sub: GeneratorConfig,
    part_schema: Schema,
    real: Dataset | None,
    n_rows: int,
    stream: RngStream,
) -> Dataset:
    if sub.mode == "rsd":
        if real is None:
            raise ConfigError("hsd: an rsd sub-generator needs real data")
        return generate_rsd(real.restrict(part_schema.names), sub.mode_params, n_rows, stream)
    if sub.mode == "asd":
        return generate_asd(part_schema, sub.mode_params, n_rows, stream)
    if sub.mode == "csd":
        return generate_csd(sub.mode_params, part_schema, n_rows, stream)
    raise ConfigError(f"hsd: unsupported sub mode {sub.mode!r}")


def generate_hsd(
    real: Dataset | None,
    params: HsdParams,
    schema: Schema,
    n_out: int,
    rng: RngStream,
) -> Dataset:
    """Column-partitioned generation: each part runs its own sub-generator on
    an independent derived stream, outputs are joined column-wise, and any
    post_rules are enforced by whole-row rejection."""
    _check_hsd_schema(params, schema)
    if n_out < 1:
        raise ConfigError("n_out must be >= 1")
    order = _derivation_order(params.post_rules)

    def draw(n_rows: int, suffix: str) -> dict[str, np.ndarray]:
        cols: dict[str, np.ndarray] = {}
        for i, (group, sub) in enumerate(zip(params.partition, params.sub_configs)):
            stream = rng.child(f"part{i}{suffix}")
            part = _generate_part(sub, schema.restrict(group), real, n_rows, stream)
            for name in group:
                cols[name] = part.column(name)
        return cols

    cols = draw(n_out, "")
    if not params.post_rules:
        return Dataset(schema, tuple(cols[name] for name in schema.names))

    accepted: dict[str, list[np.ndarray]] = {name: [] for name in schema.names}
    remaining = n_out
    total_counts = [0] * len(params.post_rules)
    rounds = 0
    while remaining > 0:
        rounds += 1
        if rounds > HSD_RETRY_CAP:
            raise RuleUnsatisfiable(
                rule_description=_most_violated(params.post_rules, total_counts),
                attempts=rounds - 1,
            )
        if rounds > 1:
            cols = draw(remaining, f"/retry{rounds - 1}")
        _apply_derivations(cols, order)
        bad, counts = _rule_violations(cols, params.post_rules, schema)
        total_counts = [a + b for a, b in zip(total_counts, counts)]
        keep = ~bad
        if keep.any():
            for name in schema.names:
                accepted[name].append(cols[name][keep])
            remaining -= int(keep.sum())

    out = tuple(np.concatenate(accepted[name])[:n_out] for name in schema.names)
    return Dataset(schema, out)


# -------------------------------------------------------------- dispatcher ---

def generate(
    config: GeneratorConfig,
    rng: RngStream,
    real: Dataset | None = None,
    schema: Schema | None = None,
) -> Dataset:
    """Run the generator a config describes. rsd (and hsd with an rsd part)
    needs `real`; asd/csd need a schema, taken from `schema` or `real`."""
    effective = schema if schema is not None else (real.schema if real is not None else None)
    if config.mode == "rsd":
        if real is None:
            raise ConfigError("rsd requires a real dataset")
        return generate_rsd(real, config.mode_params, config.n_out, rng)
    if effective is None:
        raise ConfigError(f"{config.mode} requires a schema or a real dataset")
    if config.mode == "asd":
        return generate_asd(effective, config.mode_params, config.n_out, rng)
    if config.mode == "csd":
        return generate_csd(config.mode_params, effective, config.n_out, rng)
    if config.mode == "hsd":
        if config.mode_params.needs_real() and real is None:
            raise ConfigError("hsd with an rsd part requires a real dataset")
        return generate_hsd(real, config.mode_params, effective, config.n_out, rng)
    raise ConfigError(f"unknown mode {config.mode!r}")
