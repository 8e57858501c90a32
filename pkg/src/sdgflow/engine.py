"""In-process DAG engine: runs a validated pipeline spec with bounded
parallelism, writes every artifact plus a canonical run manifest, and can
re-verify a finished run directory.

Node bodies are pure functions of (upstream artifacts, params, per-node rng
stream), so artifact bytes do not depend on max_parallel or wall-clock
conditions.
"""

from __future__ import annotations

import hashlib
import os
import time
import traceback
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from . import __version__
from .canonical import canonical_json_bytes, sha256_hex
from .errors import (
    ConfigError,
    ManifestMissing,
    MissingUpstream,
    NodeFailure,
)
from .evaluation.diagnostic import diagnose, diagnostic_metric, diagnostic_result_from_json_obj
from .evaluation.names import PRIVACY_METRICS, UTILITY_METRICS
from .evaluation.privacy import PrivacyConfig, evaluate_privacy
from .evaluation.results import metric_from_json_obj
from .evaluation.utility import (
    bivariate_fidelity,
    fit_propensity,
    pmse_null,
    pmse_observed,
    pmse_ratio,
    pmse_standardized,
    specks,
    univariate_fidelity,
)
from .generators import generate, parse_generator_config
from .reporting import compile_report, render_text
from .rng import RngStream, derive_stream
from .specs import (
    NODE_ARTIFACTS,
    InputSource,
    NodeKind,
    PipelineNode,
    PipelineSpec,
    spec_digest,
    topological_order,
)
from .tabular import (
    ColumnKind,
    Dataset,
    dataset_to_csv_bytes,
    load_csv,
    read_schema,
    schema_from_json_obj,
)

ENGINE_VERSION = __version__

__all__ = [
    "Artifact",
    "RunManifest",
    "run",
    "derive_stream",
    "verify_manifest",
    "VerificationCheck",
    "VerificationReport",
]


@dataclass(frozen=True)
class Artifact:
    name: str
    kind: str  # dataset | metric_results | report
    payload: Any
    content_hash: str


@dataclass(frozen=True)
class NodeRecord:
    id: str
    kind: str
    status: str  # succeeded | failed | skipped
    depends_on: tuple[str, ...]
    start: str | None
    end: str | None
    duration_seconds: float | None
    artifacts: Mapping[str, Mapping[str, str]]
    error: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "depends_on": list(self.depends_on),
            "start": self.start,
            "end": self.end,
            "duration_seconds": self.duration_seconds,
            "artifacts": {k: dict(v) for k, v in self.artifacts.items()},
            "error": self.error,
        }


@dataclass(frozen=True)
class RunManifest:
    spec_hash: str
    spec_canonical_bytes_len: int
    seed: int
    engine_version: str
    max_parallel: int
    started_at: str
    finished_at: str
    node_records: tuple[NodeRecord, ...]

    def record(self, node_id: str) -> NodeRecord:
        for r in self.node_records:
            if r.id == node_id:
                return r
        raise KeyError(node_id)

    @property
    def ok(self) -> bool:
        return all(r.status == "succeeded" for r in self.node_records)

    def to_json_obj(self) -> dict:
        return {
            "spec_digest": {
                "hash": self.spec_hash,
                "canonical_bytes_len": self.spec_canonical_bytes_len,
            },
            "seed": self.seed,
            "engine_version": self.engine_version,
            "max_parallel": self.max_parallel,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "node_records": [r.to_json_obj() for r in self.node_records],
        }


def manifest_from_json_obj(doc: Any) -> RunManifest:
    records = tuple(
        NodeRecord(
            id=r["id"],
            kind=r["kind"],
            status=r["status"],
            depends_on=tuple(r["depends_on"]),
            start=r["start"],
            end=r["end"],
            duration_seconds=r["duration_seconds"],
            artifacts={k: dict(v) for k, v in r["artifacts"].items()},
            error=r.get("error"),
        )
        for r in doc["node_records"]
    )
    return RunManifest(
        spec_hash=doc["spec_digest"]["hash"],
        spec_canonical_bytes_len=doc["spec_digest"]["canonical_bytes_len"],
        seed=doc["seed"],
        engine_version=doc["engine_version"],
        max_parallel=doc["max_parallel"],
        started_at=doc["started_at"],
        finished_at=doc["finished_at"],
        node_records=records,
    )


# ------------------------------------------------------------- node context ---

@dataclass
class NodeContext:
    node: PipelineNode
    spec: PipelineSpec
    stream: RngStream
    inputs: Mapping[str, InputSource]
    base_dir: Path
    upstream: Mapping[str, Mapping[str, Any]]  # node id -> artifact name -> payload
    log: Callable[[str], None]

    def upstream_dataset(self, node_id: str) -> Dataset:
        try:
            return self.upstream[node_id]["dataset"]
        except KeyError:
            raise MissingUpstream(node_id) from None


Runner = Callable[[NodeContext], Mapping[str, Any]]


def _resolve(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _run_load(ctx: NodeContext) -> Mapping[str, Any]:
    src = ctx.inputs[ctx.node.params["input"]]
    schema = read_schema(_resolve(ctx.base_dir, src.schema))
    policy = ctx.node.params.get("missing_policy", "error")
    ds = load_csv(_resolve(ctx.base_dir, src.path), schema, missing_policy=policy)
    ctx.log(f"loaded {ds.n} rows from {src.path}")
    return {"dataset": ds}


def _dedupe(ds: Dataset) -> Dataset:
    packed = np.empty((ds.n, len(ds.columns)), dtype=np.int64)
    for j, arr in enumerate(ds.columns):
        packed[:, j] = (arr + 0.0).view(np.int64) if arr.dtype == np.float64 else arr
    _, first = np.unique(packed, axis=0, return_index=True)
    return ds.take(np.sort(first))


def _run_preprocess(ctx: NodeContext) -> Mapping[str, Any]:
    ds = ctx.upstream_dataset(ctx.node.params["source"])
    before = ds.n
    if ctx.node.params.get("drop_out_of_bounds", False):
        keep = np.ones(ds.n, dtype=bool)
        for spec, arr in zip(ds.schema.columns, ds.columns):
            if spec.kind is ColumnKind.CONTINUOUS and spec.bounds is not None:
                keep &= (arr >= spec.bounds[0]) & (arr <= spec.bounds[1])
        ds = ds.take(np.flatnonzero(keep))
    if ctx.node.params.get("drop_duplicates", False):
        ds = _dedupe(ds)
    ctx.log(f"preprocess kept {ds.n} of {before} rows")
    return {"dataset": ds}


def _run_generate(ctx: NodeContext) -> Mapping[str, Any]:
    p = ctx.node.params
    config = parse_generator_config(
        {"mode": p["mode"], "n_out": p["n_out"], "mode_params": p.get("mode_params", {})}
    )
    real = ctx.upstream_dataset(p["real"]) if "real" in p else None
    schema = schema_from_json_obj(p["schema"]) if "schema" in p else None
    ds = generate(config, ctx.stream, real=real, schema=schema)
    ctx.log(f"generated {ds.n} rows in mode {config.mode}")
    return {"dataset": ds}


def _metrics_doc(node_id: str, provenance: str, metrics, extra: Mapping[str, Any] | None = None) -> dict:
    doc = {
        "node": node_id,
        "provenance": provenance,
        "metrics": [m.to_json_obj() for m in metrics],
    }
    if extra:
        doc.update(extra)
    return doc


def _run_diagnostic(ctx: NodeContext) -> Mapping[str, Any]:
    real = ctx.upstream_dataset(ctx.node.params["real"])
    synth = ctx.upstream_dataset(ctx.node.params["synthetic"])
    result = diagnose(real, synth)
    doc = _metrics_doc(
        ctx.node.id,
        "diagnostic",
        [diagnostic_metric(result)],
        {"diagnostic": result.to_json_obj()},
    )
    ctx.log(f"diagnostic overall score {result.overall_score}")
    return {"metrics": doc}


def _run_utility(ctx: NodeContext) -> Mapping[str, Any]:
    p = ctx.node.params
    real = ctx.upstream_dataset(p["real"])
    synth = ctx.upstream_dataset(p["synthetic"])
    selected = tuple(p.get("metrics") or UTILITY_METRICS)
    results = []

    needs_fit = {"pmse_observed", "pmse_standardized", "pmse_ratio", "specks"} & set(selected)
    if needs_fit:
        model, scores = fit_propensity(real, synth)
        obs = pmse_observed(scores, model.c)
        null = None
        if {"pmse_standardized", "pmse_ratio"} & set(selected):
            null = pmse_null(
                real,
                synth,
                kind=p.get("null_model", "permutation"),
                B=p.get("permutations", 50),
                rng=ctx.stream.child("null"),
            )
        for name in selected:
            if name == "pmse_observed":
                results.append(obs)
            elif name == "pmse_standardized":
                results.append(pmse_standardized(obs.score, null))
            elif name == "pmse_ratio":
                results.append(pmse_ratio(obs.score, null))
            elif name == "specks":
                results.append(specks(scores[: real.n], scores[real.n :]))
            elif name == "univariate_fidelity":
                results.append(univariate_fidelity(real, synth))
            elif name == "bivariate_fidelity":
                results.append(bivariate_fidelity(real, synth))
    else:
        for name in selected:
            if name == "univariate_fidelity":
                results.append(univariate_fidelity(real, synth))
            elif name == "bivariate_fidelity":
                results.append(bivariate_fidelity(real, synth))
    ctx.log(f"utility metrics: {[m.name for m in results]}")
    return {"metrics": _metrics_doc(ctx.node.id, "utility", results)}


def _run_privacy(ctx: NodeContext) -> Mapping[str, Any]:
    p = ctx.node.params
    real = ctx.upstream_dataset(p["real"])
    synth = ctx.upstream_dataset(p["synthetic"])
    cfg = PrivacyConfig(
        key_columns=tuple(p.get("key_columns", ())),
        sensitive_column=p.get("sensitive_column"),
        numeric_match_tolerance=p.get("numeric_match_tolerance", 0.01),
        tcap_homogeneity=p.get("tcap_homogeneity", 1.0),
        overlap_sample_fraction=p.get("overlap_sample_fraction", 1.0),
    )
    results = evaluate_privacy(
        real,
        synth,
        cfg,
        metrics=tuple(p.get("metrics") or PRIVACY_METRICS),
        rng=ctx.stream,
        proximity_row_cap=p.get("proximity_row_cap"),
    )
    ctx.log(f"privacy metrics: {[m.name for m in results]}")
    return {"metrics": _metrics_doc(ctx.node.id, "privacy", results)}


def _run_report(ctx: NodeContext) -> Mapping[str, Any]:
    diag = None
    utility = []
    privacy = []
    for nid in topological_order(ctx.spec):
        node = ctx.spec.node(nid)
        if node.kind not in (
            NodeKind.EVALUATE_DIAGNOSTIC,
            NodeKind.EVALUATE_UTILITY,
            NodeKind.EVALUATE_PRIVACY,
        ):
            continue
        try:
            doc = ctx.upstream[nid]["metrics"]
        except KeyError:
            raise MissingUpstream(nid) from None
        if node.kind is NodeKind.EVALUATE_DIAGNOSTIC:
            diag = diagnostic_result_from_json_obj(doc["diagnostic"])
        elif node.kind is NodeKind.EVALUATE_UTILITY:
            utility.extend(metric_from_json_obj(m) for m in doc["metrics"])
        else:
            privacy.extend(metric_from_json_obj(m) for m in doc["metrics"])
    report = compile_report(
        digest=spec_digest(ctx.spec),
        seed=ctx.spec.seed,
        diagnostic=diag,
        utility=tuple(utility),
        privacy=tuple(privacy),
        thresholds=ctx.node.params.get("thresholds", {}),
    )
    ctx.log(f"report verdicts: {dict(report.verdicts)}")
    return {"report": report.to_json_obj(), "report_text": render_text(report)}


DEFAULT_RUNNERS: dict[str, Runner] = {
    NodeKind.LOAD.value: _run_load,
    NodeKind.PREPROCESS.value: _run_preprocess,
    NodeKind.GENERATE.value: _run_generate,
    NodeKind.EVALUATE_DIAGNOSTIC.value: _run_diagnostic,
    NodeKind.EVALUATE_UTILITY.value: _run_utility,
    NodeKind.EVALUATE_PRIVACY.value: _run_privacy,
    NodeKind.REPORT.value: _run_report,
}


# ------------------------------------------------------------ serialization ---

_ARTIFACT_FILES = {
    "dataset": ("dataset.csv", "dataset"),
    "metrics": ("metrics.json", "metric_results"),
    "report": ("report.json", "report"),
    "report_text": ("report_text.txt", "report"),
}


def _artifact_bytes(name: str, payload: Any) -> bytes:
    if name == "dataset":
        return dataset_to_csv_bytes(payload)
    if name in ("metrics", "report"):
        return canonical_json_bytes(payload)
    if name == "report_text":
        return payload.encode("utf-8")
    raise ConfigError(f"unknown artifact name {name!r}")


# -------------------------------------------------------------------- run ---

@dataclass
class _Clock:
    """Wall-clock anchor advanced by the monotonic clock, so recorded
    timestamps order exactly as the scheduler did."""

    base_wall: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    base_mono: float = field(default_factory=time.monotonic)

    def now(self) -> tuple[str, float]:
        mono = time.monotonic()
        stamp = self.base_wall + timedelta(seconds=mono - self.base_mono)
        return stamp.isoformat(timespec="microseconds"), mono


def run(
    spec: PipelineSpec,
    out_dir,
    inputs: Mapping[str, InputSource] | None = None,
    max_parallel: int = 1,
    base_dir=None,
    runners: Mapping[str, Runner] | None = None,
    raise_on_failure: bool = True,
) -> RunManifest:
    """Execute the spec's DAG and write artifacts, logs, and the manifest.

    `inputs` overrides entries of spec.inputs by name; relative paths resolve
    against `base_dir` (default: current directory). `runners` swaps node
    implementations by kind, which tests use for timing stubs. On a node
    failure every descendant is skipped, the manifest is still written, and
    NodeFailure (carrying the manifest) is raised unless raise_on_failure is
    false.
    """
    if max_parallel < 1:
        raise ConfigError("max_parallel must be >= 1")
    out = Path(out_dir)
    (out / "artifacts").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(exist_ok=True)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    resolved_inputs = dict(spec.inputs)
    if inputs:
        resolved_inputs.update(inputs)
    active_runners = dict(DEFAULT_RUNNERS)
    if runners:
        active_runners.update(runners)

    clock = _Clock()
    started_at = clock.base_wall.isoformat(timespec="microseconds")
    digest = spec_digest(spec)

    by_id = {n.id: n for n in spec.nodes}
    children: dict[str, list[str]] = {nid: [] for nid in by_id}
    indeg: dict[str, int] = {}
    for n in spec.nodes:
        indeg[n.id] = len(n.depends_on)
        for d in n.depends_on:
            children[d].append(n.id)

    payloads: dict[str, Mapping[str, Any]] = {}
    status: dict[str, str] = {}
    records: dict[str, NodeRecord] = {}

    def worker(node: PipelineNode):
        log_lines: list[str] = []
        start_iso, start_mono = clock.now()
        log_lines.append(f"{start_iso} start {node.id} ({node.kind.value})")
        try:
            ctx = NodeContext(
                node=node,
                spec=spec,
                stream=derive_stream(spec.seed, node.id),
                inputs=resolved_inputs,
                base_dir=base,
                upstream=payloads,
                log=lambda msg: log_lines.append(msg),
            )
            produced = active_runners[node.kind.value](ctx)
            art_records = {}
            node_dir = out / "artifacts" / node.id
            node_dir.mkdir(parents=True, exist_ok=True)
            for name, payload in produced.items():
                filename, _kind = _ARTIFACT_FILES[name]
                data = _artifact_bytes(name, payload)
                (node_dir / filename).write_bytes(data)
                art_records[name] = {
                    "file": f"artifacts/{node.id}/{filename}",
                    "sha256": sha256_hex(data),
                }
            end_iso, end_mono = clock.now()
            log_lines.append(f"{end_iso} done {node.id}")
            (out / "logs" / f"{node.id}.log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
            return (produced, art_records, start_iso, end_iso, round(end_mono - start_mono, 3), None)
        except Exception:
            end_iso, end_mono = clock.now()
            err = traceback.format_exc()
            log_lines.append(f"{end_iso} failed {node.id}\n{err}")
            (out / "logs" / f"{node.id}.log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
            return (None, {}, start_iso, end_iso, round(end_mono - start_mono, 3), err)

    def resolve_child(child_id: str) -> list[str]:
        """Called when one dependency of child resolves; returns nodes to submit."""
        indeg[child_id] -= 1
        if indeg[child_id] > 0:
            return []
        node = by_id[child_id]
        if all(status.get(d) == "succeeded" for d in node.depends_on):
            return [child_id]
        status[child_id] = "skipped"
        failed_dep = next(
            (d for d in node.depends_on if status.get(d) in ("failed", "skipped")), "?"
        )
        records[child_id] = NodeRecord(
            id=child_id,
            kind=node.kind.value,
            status="skipped",
            depends_on=node.depends_on,
            start=None,
            end=None,
            duration_seconds=None,
            artifacts={},
            error=f"skipped: upstream {failed_dep!r} did not succeed",
        )
        (out / "logs" / f"{child_id}.log").write_text(
            f"skipped: upstream {failed_dep!r} did not succeed\n", encoding="utf-8"
        )
        cascade: list[str] = []
        for grandchild in children[child_id]:
            cascade.extend(resolve_child(grandchild))
        return cascade

    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures = {}
        for nid in sorted(n.id for n in spec.nodes if indeg[n.id] == 0):
            futures[pool.submit(worker, by_id[nid])] = nid
        while futures:
            done, _ = wait(list(futures), return_when=FIRST_COMPLETED)
            for fut in done:
                nid = futures.pop(fut)
                produced, art_records, start_iso, end_iso, duration, err = fut.result()
                node = by_id[nid]
                if err is None:
                    payloads[nid] = produced
                    status[nid] = "succeeded"
                else:
                    status[nid] = "failed"
                records[nid] = NodeRecord(
                    id=nid,
                    kind=node.kind.value,
                    status=status[nid],
                    depends_on=node.depends_on,
                    start=start_iso,
                    end=end_iso,
                    duration_seconds=duration,
                    artifacts=art_records,
                    error=err,
                )
                to_submit: list[str] = []
                for child in children[nid]:
                    to_submit.extend(resolve_child(child))
                for child_id in sorted(to_submit):
                    futures[pool.submit(worker, by_id[child_id])] = child_id

    finished_at, _ = clock.now()
    manifest = RunManifest(
        spec_hash=digest.hash,
        spec_canonical_bytes_len=digest.canonical_bytes_len,
        seed=spec.seed,
        engine_version=ENGINE_VERSION,
        max_parallel=max_parallel,
        started_at=started_at,
        finished_at=finished_at,
        node_records=tuple(records[nid] for nid in sorted(records)),
    )
    (out / "manifest.json").write_bytes(canonical_json_bytes(manifest.to_json_obj()))

    report_nodes = [n.id for n in spec.nodes if n.kind is NodeKind.REPORT]
    if report_nodes and status.get(report_nodes[0]) == "succeeded":
        rid = report_nodes[0]
        (out / "report.json").write_bytes(
            (out / "artifacts" / rid / "report.json").read_bytes()
        )
        (out / "report.txt").write_bytes(
            (out / "artifacts" / rid / "report_text.txt").read_bytes()
        )

    if raise_on_failure:
        failed = [nid for nid in topological_order(spec) if status.get(nid) == "failed"]
        if failed:
            raise NodeFailure(
                node_id=failed[0],
                cause=records[failed[0]].error or "unknown",
                manifest=manifest,
            )
    return manifest


# ------------------------------------------------------------ verification ---

@dataclass(frozen=True)
class VerificationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[VerificationCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_obj(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks
            ],
        }


def verify_manifest(out_dir) -> VerificationReport:
    """Re-audit a finished run directory: artifact hashes, dependency-order
    timestamps, failure propagation, and artifact completeness."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ManifestMissing(f"no manifest.json under {out}")
    import json

    manifest = manifest_from_json_obj(json.loads(manifest_path.read_text(encoding="utf-8")))
    checks: list[VerificationCheck] = []

    mismatches = []
    for rec in manifest.node_records:
        for name, info in rec.artifacts.items():
            path = out / info["file"]
            if not path.exists():
                mismatches.append(f"{rec.id}/{name}: file missing")
                continue
            actual = hashlib.sha256(path.read_bytes()).hexdigest()
            if actual != info["sha256"]:
                mismatches.append(f"{rec.id}/{name}: hash mismatch")
    checks.append(
        VerificationCheck(
            name="artifact_hashes",
            passed=not mismatches,
            detail="; ".join(mismatches) if mismatches else "all artifact hashes match",
        )
    )

    by_id = {r.id: r for r in manifest.node_records}
    order_violations = []
    for rec in manifest.node_records:
        if rec.status != "succeeded":
            continue
        for dep in rec.depends_on:
            up = by_id.get(dep)
            if up is None or up.end is None or rec.start is None:
                order_violations.append(f"{dep}->{rec.id}: missing timestamps")
                continue
            try:
                out_of_order = datetime.fromisoformat(up.end) > datetime.fromisoformat(rec.start)
            except (ValueError, TypeError):
                # a hand-edited manifest can hold naive or malformed stamps;
                # that is a verification failure, not a crash
                order_violations.append(f"{dep}->{rec.id}: unparseable or inconsistent timestamps")
                continue
            if out_of_order:
                order_violations.append(f"{dep}->{rec.id}: upstream ended after downstream started")
    checks.append(
        VerificationCheck(
            name="edge_ordering",
            passed=not order_violations,
            detail="; ".join(order_violations) if order_violations else "all edges ordered",
        )
    )

    propagation = []
    for rec in manifest.node_records:
        bad_dep = any(by_id[d].status != "succeeded" for d in rec.depends_on if d in by_id)
        if bad_dep and rec.status == "succeeded":
            propagation.append(f"{rec.id} succeeded despite a non-succeeded dependency")
    checks.append(
        VerificationCheck(
            name="failure_propagation",
            passed=not propagation,
            detail="; ".join(propagation) if propagation else "failures propagated to descendants",
        )
    )

    incomplete = []
    for rec in manifest.node_records:
        if rec.status != "succeeded":
            continue
        try:
            expected = set(NODE_ARTIFACTS[NodeKind(rec.kind)])
        except ValueError:
            continue
        if set(rec.artifacts) != expected:
            incomplete.append(f"{rec.id}: has {sorted(rec.artifacts)}, expected {sorted(expected)}")
    checks.append(
        VerificationCheck(
            name="artifacts_recorded",
            passed=not incomplete,
            detail="; ".join(incomplete) if incomplete else "all succeeded nodes recorded artifacts",
        )
    )
    return VerificationReport(checks=tuple(checks))
