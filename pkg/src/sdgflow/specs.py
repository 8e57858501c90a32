"""Pipeline specification: strict JSON parsing, graph validation, canonical
hashing, topological ordering, and the data-flow audit.

A spec is the portable, hashable artifact a data owner reviews before running
anything. Parsing is strict: unknown fields anywhere are rejected so the hash
covers exactly what was reviewed.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .canonical import canonical_json_bytes, sha256_hex
from .errors import (
    CycleDetected,
    DanglingDependency,
    DuplicateNodeId,
    InvalidSpec,
    MissingReportNode,
    SchemaError,
    SpecSyntaxError,
    UnknownField,
)
from .evaluation.names import (
    DIAGNOSTIC_METRICS,
    KEY_BASED_PRIVACY_METRICS,
    PRIVACY_METRICS,
    UTILITY_METRICS,
)
from .tabular import schema_from_json_obj

SPEC_VERSION = "1"
_U64_MAX = 2**64 - 1


class NodeKind(str, Enum):
    LOAD = "load"
    PREPROCESS = "preprocess"
    GENERATE = "generate"
    EVALUATE_DIAGNOSTIC = "evaluate_diagnostic"
    EVALUATE_UTILITY = "evaluate_utility"
    EVALUATE_PRIVACY = "evaluate_privacy"
    REPORT = "report"


EVALUATE_KINDS = (
    NodeKind.EVALUATE_DIAGNOSTIC,
    NodeKind.EVALUATE_UTILITY,
    NodeKind.EVALUATE_PRIVACY,
)
DATASET_KINDS = (NodeKind.LOAD, NodeKind.PREPROCESS, NodeKind.GENERATE)

# artifact names each node kind produces
NODE_ARTIFACTS: dict[NodeKind, tuple[str, ...]] = {
    NodeKind.LOAD: ("dataset",),
    NodeKind.PREPROCESS: ("dataset",),
    NodeKind.GENERATE: ("dataset",),
    NodeKind.EVALUATE_DIAGNOSTIC: ("metrics",),
    NodeKind.EVALUATE_UTILITY: ("metrics",),
    NodeKind.EVALUATE_PRIVACY: ("metrics",),
    NodeKind.REPORT: ("report", "report_text"),
}


@dataclass(frozen=True)
class InputSource:
    path: str
    schema: str


@dataclass(frozen=True)
class PipelineNode:
    id: str
    kind: NodeKind
    params: Mapping[str, Any] = field(default_factory=dict)
    depends_on: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineSpec:
    version: str
    metadata: Mapping[str, str]
    inputs: Mapping[str, InputSource]
    seed: int
    nodes: tuple[PipelineNode, ...]
    outputs: tuple[tuple[str, str], ...]  # (node id, artifact name)

    def node(self, node_id: str) -> PipelineNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def dependencies(self) -> dict[str, tuple[str, ...]]:
        return {n.id: n.depends_on for n in self.nodes}


@dataclass(frozen=True)
class SpecDigest:
    hash: str
    canonical_bytes_len: int


# ------------------------------------------------------------------ parsing ---

def _require_keys(obj: Mapping, allowed: set[str], required: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise UnknownField(f"{where}: unknown fields {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise InvalidSpec(f"{where}: missing required fields {sorted(missing)}")


def parse_spec(data: bytes | str) -> PipelineSpec:
    """Parse and fully validate a spec document (strict mode)."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SpecSyntaxError(f"not UTF-8: {e}") from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecSyntaxError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    return spec_from_json_obj(doc)


def load_spec(path) -> PipelineSpec:
    with open(path, "rb") as fh:
        return parse_spec(fh.read())


def spec_from_json_obj(doc: Any) -> PipelineSpec:
    if not isinstance(doc, dict):
        raise InvalidSpec("top level must be a JSON object")
    _require_keys(
        doc,
        allowed={"version", "metadata", "inputs", "seed", "nodes", "outputs"},
        required={"version", "seed", "nodes"},
        where="spec",
    )
    if doc["version"] != SPEC_VERSION:
        raise InvalidSpec(f"unsupported version {doc['version']!r}, expected {SPEC_VERSION!r}")

    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in metadata.items()
    ):
        raise InvalidSpec("metadata must map strings to strings")

    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= _U64_MAX:
        raise InvalidSpec("seed must be an unsigned 64-bit integer")

    inputs_doc = doc.get("inputs", {})
    if not isinstance(inputs_doc, dict):
        raise InvalidSpec("inputs must be an object")
    inputs: dict[str, InputSource] = {}
    for name, src in inputs_doc.items():
        if not isinstance(src, dict):
            raise InvalidSpec(f"inputs[{name!r}] must be an object")
        _require_keys(src, {"path", "schema"}, {"path", "schema"}, f"inputs[{name!r}]")
        if not isinstance(src["path"], str) or not isinstance(src["schema"], str):
            raise InvalidSpec(f"inputs[{name!r}]: path and schema must be strings")
        inputs[name] = InputSource(path=src["path"], schema=src["schema"])

    nodes_doc = doc["nodes"]
    if not isinstance(nodes_doc, list) or not nodes_doc:
        raise InvalidSpec("nodes must be a non-empty list")
    nodes: list[PipelineNode] = []
    seen_ids: set[str] = set()
    for i, nd in enumerate(nodes_doc):
        where = f"nodes[{i}]"
        if not isinstance(nd, dict):
            raise InvalidSpec(f"{where} must be an object")
        _require_keys(nd, {"id", "kind", "params", "depends_on"}, {"id", "kind"}, where)
        nid = nd["id"]
        if not isinstance(nid, str) or not nid:
            raise InvalidSpec(f"{where}: id must be a non-empty string")
        if nid in seen_ids:
            raise DuplicateNodeId(f"duplicate node id {nid!r}")
        seen_ids.add(nid)
        try:
            kind = NodeKind(nd["kind"])
        except ValueError:
            raise InvalidSpec(f"{where}: unknown kind {nd['kind']!r}") from None
        params = nd.get("params", {})
        if not isinstance(params, dict):
            raise InvalidSpec(f"{where}: params must be an object")
        deps_doc = nd.get("depends_on", [])
        if not isinstance(deps_doc, list) or any(not isinstance(d, str) for d in deps_doc):
            raise InvalidSpec(f"{where}: depends_on must be a list of node ids")
        if len(set(deps_doc)) != len(deps_doc):
            raise InvalidSpec(f"{where}: depends_on has duplicates")
        nodes.append(PipelineNode(id=nid, kind=kind, params=params, depends_on=tuple(deps_doc)))

    outputs_doc = doc.get("outputs", [])
    if not isinstance(outputs_doc, list):
        raise InvalidSpec("outputs must be a list")
    outputs: list[tuple[str, str]] = []
    for i, ref in enumerate(outputs_doc):
        where = f"outputs[{i}]"
        if not isinstance(ref, dict):
            raise InvalidSpec(f"{where} must be an object")
        _require_keys(ref, {"node", "artifact"}, {"node", "artifact"}, where)
        if not isinstance(ref["node"], str) or not isinstance(ref["artifact"], str):
            raise InvalidSpec(f"{where}: node and artifact must be strings")
        outputs.append((ref["node"], ref["artifact"]))

    spec = PipelineSpec(
        version=doc["version"],
        metadata=dict(metadata),
        inputs=inputs,
        seed=seed,
        nodes=tuple(nodes),
        outputs=tuple(outputs),
    )
    validate_spec(spec)
    return spec


def spec_to_json_obj(spec: PipelineSpec) -> dict:
    return {
        "version": spec.version,
        "metadata": dict(spec.metadata),
        "inputs": {
            name: {"path": src.path, "schema": src.schema} for name, src in spec.inputs.items()
        },
        "seed": spec.seed,
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "params": _plain(n.params),
                "depends_on": list(n.depends_on),
            }
            for n in spec.nodes
        ],
        "outputs": [{"node": nid, "artifact": art} for nid, art in spec.outputs],
    }


def _plain(value):
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def serialize_spec(spec: PipelineSpec) -> bytes:
    """Canonical bytes; parse(serialize(spec)) == spec."""
    return canonical_json_bytes(spec_to_json_obj(spec))


def spec_digest(spec: PipelineSpec) -> SpecDigest:
    data = serialize_spec(spec)
    return SpecDigest(hash=sha256_hex(data), canonical_bytes_len=len(data))


# --------------------------------------------------------- graph validation ---

def _children(deps: Mapping[str, Sequence[str]]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {nid: [] for nid in deps}
    for nid, ds in deps.items():
        for d in ds:
            out[d].append(nid)
    return out


def find_cycle(ids: Iterable[str], deps: Mapping[str, Sequence[str]]) -> list[str] | None:
    """Return one cycle as a node-id path [a, b, ..., a] in data-flow order,
    or None if the graph is acyclic. Edges flow dependency -> dependent."""
    children = _children({nid: tuple(deps.get(nid, ())) for nid in ids})
    state: dict[str, int] = {}  # 0 unseen implicit, 1 on stack, 2 done
    for start in ids:
        if state.get(start, 0) != 0:
            continue
        stack: list[tuple[str, Iterable[str]]] = [(start, iter(children[start]))]
        state[start] = 1
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for child in it:
                st = state.get(child, 0)
                if st == 1:
                    return path[path.index(child):] + [child]
                if st == 0:
                    state[child] = 1
                    path.append(child)
                    stack.append((child, iter(children[child])))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                path.pop()
                stack.pop()
    return None


def toposort_ids(ids: Sequence[str], deps: Mapping[str, Sequence[str]]) -> list[str]:
    """Kahn's algorithm with a lexicographic tie-break over ready node ids."""
    indeg = {nid: 0 for nid in ids}
    children = _children({nid: tuple(deps.get(nid, ())) for nid in ids})
    for nid in ids:
        indeg[nid] = len(deps.get(nid, ()))
    ready = [nid for nid in ids if indeg[nid] == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for child in children[nid]:
            indeg[child] -= 1
            if indeg[child] == 0:
                heapq.heappush(ready, child)
    if len(order) != len(ids):
        cycle = find_cycle(ids, deps)
        raise CycleDetected(cycle or [])
    return order


def topological_order(spec: PipelineSpec) -> list[str]:
    return toposort_ids([n.id for n in spec.nodes], spec.dependencies)


def _reachable_from(starts: Iterable[str], children: Mapping[str, Sequence[str]]) -> set[str]:
    seen: set[str] = set()
    frontier = list(starts)
    while frontier:
        nid = frontier.pop()
        if nid in seen:
            continue
        seen.add(nid)
        frontier.extend(children[nid])
    return seen


def validate_spec(spec: PipelineSpec) -> None:
    """Graph and per-node parameter checks; raises a SpecError subclass."""
    ids = [n.id for n in spec.nodes]
    id_set = set(ids)
    for n in spec.nodes:
        for d in n.depends_on:
            if d == n.id:
                raise CycleDetected([n.id, n.id])
            if d not in id_set:
                raise DanglingDependency(f"node {n.id!r} depends on unknown node {d!r}")

    cycle = find_cycle(ids, spec.dependencies)
    if cycle:
        raise CycleDetected(cycle)

    reports = [n for n in spec.nodes if n.kind is NodeKind.REPORT]
    if len(reports) != 1:
        raise MissingReportNode(f"expected exactly one report node, found {len(reports)}")
    report = reports[0]

    children = _children(spec.dependencies)
    for n in spec.nodes:
        if n.kind in EVALUATE_KINDS or n.kind is NodeKind.GENERATE:
            if report.id not in _reachable_from([n.id], children) or n.id == report.id:
                raise InvalidSpec(
                    f"node {n.id!r} ({n.kind.value}) has no path to the report node"
                )

    for nid, art in spec.outputs:
        if nid not in id_set:
            raise DanglingDependency(f"outputs reference unknown node {nid!r}")
        node = spec.node(nid)
        if art not in NODE_ARTIFACTS[node.kind]:
            raise InvalidSpec(
                f"outputs: node {nid!r} ({node.kind.value}) produces no artifact {art!r}"
            )

    by_id = {n.id: n for n in spec.nodes}
    for n in spec.nodes:
        _validate_node_params(n, spec, by_id)


def _check_dataset_ref(node: PipelineNode, key: str, by_id: Mapping[str, PipelineNode]) -> None:
    ref = node.params.get(key)
    if not isinstance(ref, str):
        raise InvalidSpec(f"node {node.id!r}: params.{key} must name an upstream node")
    if ref not in node.depends_on:
        raise InvalidSpec(f"node {node.id!r}: params.{key}={ref!r} must be in depends_on")
    if by_id[ref].kind not in DATASET_KINDS:
        raise InvalidSpec(f"node {node.id!r}: params.{key}={ref!r} does not produce a dataset")


def _validate_node_params(
    node: PipelineNode, spec: PipelineSpec, by_id: Mapping[str, PipelineNode]
) -> None:
    p = node.params
    where = f"node {node.id!r}"
    if node.kind is NodeKind.LOAD:
        _require_keys(p, {"input", "missing_policy"}, {"input"}, where)
        if p["input"] not in spec.inputs:
            raise InvalidSpec(f"{where}: unknown input {p['input']!r}")
        if p.get("missing_policy", "error") not in ("drop_row", "error"):
            raise InvalidSpec(f"{where}: missing_policy must be drop_row|error")
    elif node.kind is NodeKind.PREPROCESS:
        _require_keys(p, {"source", "drop_out_of_bounds", "drop_duplicates"}, {"source"}, where)
        _check_dataset_ref(node, "source", by_id)
        for flag in ("drop_out_of_bounds", "drop_duplicates"):
            if flag in p and not isinstance(p[flag], bool):
                raise InvalidSpec(f"{where}: {flag} must be boolean")
    elif node.kind is NodeKind.GENERATE:
        _require_keys(p, {"mode", "n_out", "mode_params", "real", "schema"}, {"mode", "n_out"}, where)
        from .errors import ConfigError
        from .generators import parse_generator_config  # deferred: avoids import cycle

        try:
            cfg = parse_generator_config(
                {"mode": p.get("mode"), "n_out": p.get("n_out"), "mode_params": p.get("mode_params", {})}
            )
        except ConfigError as e:
            raise InvalidSpec(f"{where}: {e}") from None
        needs_real = cfg.mode == "rsd" or (cfg.mode == "hsd" and cfg.mode_params.needs_real())
        has_real = "real" in p
        has_schema = "schema" in p
        if needs_real and not has_real:
            raise InvalidSpec(f"{where}: mode {cfg.mode} requires params.real")
        if has_real:
            _check_dataset_ref(node, "real", by_id)
        if has_schema:
            try:
                schema_from_json_obj(p["schema"])
            except SchemaError as e:
                raise InvalidSpec(f"{where}: invalid inline schema: {e}") from None
        if not has_real and not has_schema:
            raise InvalidSpec(f"{where}: needs params.real or an inline params.schema")
    elif node.kind in EVALUATE_KINDS:
        allowed = {"real", "synthetic"}
        if node.kind is NodeKind.EVALUATE_UTILITY:
            allowed |= {"metrics", "null_model", "permutations"}
        elif node.kind is NodeKind.EVALUATE_PRIVACY:
            allowed |= {
                "metrics",
                "key_columns",
                "sensitive_column",
                "numeric_match_tolerance",
                "tcap_homogeneity",
                "overlap_sample_fraction",
                "proximity_row_cap",
            }
        _require_keys(p, allowed, {"real", "synthetic"}, where)
        _check_dataset_ref(node, "real", by_id)
        _check_dataset_ref(node, "synthetic", by_id)
        if node.kind is NodeKind.EVALUATE_UTILITY:
            _validate_metric_list(p.get("metrics"), UTILITY_METRICS, where)
            if p.get("null_model", "permutation") not in ("permutation", "analytic"):
                raise InvalidSpec(f"{where}: null_model must be permutation|analytic")
            b = p.get("permutations", 50)
            if isinstance(b, bool) or not isinstance(b, int) or b < 20:
                raise InvalidSpec(f"{where}: permutations must be an integer >= 20")
        elif node.kind is NodeKind.EVALUATE_PRIVACY:
            metrics = _validate_metric_list(p.get("metrics"), PRIVACY_METRICS, where)
            if set(metrics) & set(KEY_BASED_PRIVACY_METRICS):
                keys = p.get("key_columns")
                if not isinstance(keys, list) or not keys or any(not isinstance(k, str) for k in keys):
                    raise InvalidSpec(f"{where}: key_columns must be a non-empty string list")
                if not isinstance(p.get("sensitive_column"), str):
                    raise InvalidSpec(f"{where}: sensitive_column required")
            tol = p.get("numeric_match_tolerance", 0.01)
            if not isinstance(tol, (int, float)) or isinstance(tol, bool) or tol < 0:
                raise InvalidSpec(f"{where}: numeric_match_tolerance must be >= 0")
            th = p.get("tcap_homogeneity", 1.0)
            if not isinstance(th, (int, float)) or isinstance(th, bool) or not 0 < th <= 1:
                raise InvalidSpec(f"{where}: tcap_homogeneity must be in (0, 1]")
            fr = p.get("overlap_sample_fraction", 1.0)
            if not isinstance(fr, (int, float)) or isinstance(fr, bool) or not 0 < fr <= 1:
                raise InvalidSpec(f"{where}: overlap_sample_fraction must be in (0, 1]")
            cap = p.get("proximity_row_cap")
            if cap is not None and (isinstance(cap, bool) or not isinstance(cap, int) or cap < 1):
                raise InvalidSpec(f"{where}: proximity_row_cap must be a positive integer")
    elif node.kind is NodeKind.REPORT:
        _require_keys(p, {"thresholds"}, set(), where)
        thresholds = p.get("thresholds", {})
        if not isinstance(thresholds, dict):
            raise InvalidSpec(f"{where}: thresholds must be an object")
        available = _available_metrics(spec)
        for name, bound in thresholds.items():
            if name not in available:
                raise InvalidSpec(
                    f"{where}: threshold on {name!r}, which no evaluate node produces"
                )
            if isinstance(bound, bool) or not isinstance(bound, (int, float)):
                raise InvalidSpec(f"{where}: threshold {name!r} must be a number")


def _validate_metric_list(
    metrics, known: tuple[str, ...], where: str
) -> tuple[str, ...]:
    if metrics is None:
        return known
    if not isinstance(metrics, list) or not metrics:
        raise InvalidSpec(f"{where}: metrics must be a non-empty list")
    unknown = set(metrics) - set(known)
    if unknown:
        raise InvalidSpec(f"{where}: unknown metrics {sorted(unknown)}")
    if len(set(metrics)) != len(metrics):
        raise InvalidSpec(f"{where}: duplicate metrics")
    return tuple(metrics)


def _available_metrics(spec: PipelineSpec) -> set[str]:
    out: set[str] = set()
    for n in spec.nodes:
        if n.kind is NodeKind.EVALUATE_DIAGNOSTIC:
            out.update(DIAGNOSTIC_METRICS)
        elif n.kind is NodeKind.EVALUATE_UTILITY:
            out.update(n.params.get("metrics") or UTILITY_METRICS)
        elif n.kind is NodeKind.EVALUATE_PRIVACY:
            out.update(n.params.get("metrics") or PRIVACY_METRICS)
    return out


# ----------------------------------------------------------- data-flow audit ---

_PATH_CAP = 10_000


@dataclass(frozen=True)
class AuditViolation:
    output: tuple[str, str]
    path: tuple[str, ...]


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    violations: tuple[AuditViolation, ...]
    paths: tuple[tuple[str, ...], ...]  # every input -> exported-node path
    truncated: bool

    def to_json_obj(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [
                {"node": v.output[0], "artifact": v.output[1], "path": list(v.path)}
                for v in self.violations
            ],
            "paths": [list(p) for p in self.paths],
            "truncated": self.truncated,
        }


def data_flow_audit(spec: PipelineSpec) -> AuditReport:
    """Check that only generate/evaluate/report products leave the owner domain.

    Raw inputs surface through load nodes; a preprocess product counts as raw
    whenever the preprocess node is reachable from a load node.
    """
    by_id = {n.id: n for n in spec.nodes}
    children = _children(spec.dependencies)
    load_nodes = [n for n in spec.nodes if n.kind is NodeKind.LOAD]
    raw_reach = _reachable_from([n.id for n in load_nodes], children)

    # enumerate simple paths input -> exported node, for the audit record
    exported = {nid for nid, _ in spec.outputs}
    paths: list[tuple[str, ...]] = []
    truncated = False
    for ln in load_nodes:
        input_name = f"input:{ln.params.get('input', '?')}"
        stack: list[tuple[str, list[str]]] = [(ln.id, [input_name, ln.id])]
        while stack:
            nid, path = stack.pop()
            if nid in exported:
                if len(paths) >= _PATH_CAP:
                    truncated = True
                    break
                paths.append(tuple(path))
            for child in sorted(children[nid]):
                if child not in path:  # simple paths only
                    stack.append((child, path + [child]))
        if truncated:
            break

    violations: list[AuditViolation] = []
    for nid, art in spec.outputs:
        node = by_id[nid]
        is_raw = node.kind is NodeKind.LOAD or (
            node.kind is NodeKind.PREPROCESS and nid in raw_reach
        )
        if is_raw:
            violations.append(AuditViolation(output=(nid, art), path=_path_to(nid, spec)))
    return AuditReport(
        passed=not violations,
        violations=tuple(violations),
        paths=tuple(paths),
        truncated=truncated,
    )


def _path_to(target: str, spec: PipelineSpec) -> tuple[str, ...]:
    """Shortest input -> target path (BFS over data-flow edges)."""
    children = _children(spec.dependencies)
    by_id = {n.id: n for n in spec.nodes}
    starts = [n.id for n in spec.nodes if n.kind is NodeKind.LOAD]
    prev: dict[str, str | None] = {s: None for s in starts}
    frontier = list(starts)
    while frontier:
        nxt: list[str] = []
        for nid in frontier:
            if nid == target:
                path = [nid]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])  # type: ignore[arg-type]
                path.reverse()
                load = by_id[path[0]]
                return (f"input:{load.params.get('input', '?')}", *path, "outputs")
            for child in children[nid]:
                if child not in prev:
                    prev[child] = nid
                    nxt.append(child)
        frontier = nxt
    return (target, "outputs")
