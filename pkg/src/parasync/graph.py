"""Dataflow-graph model definitions and their evaluation into meshes.

A definition names its editable parameters (seeds), a set of nodes wiring
numbers and meshes through operations, and the mesh-valued outputs that get
streamed, each under a small model id. Definitions are static: structure is
fully validated at construction, evaluation only binds parameter values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from parasync import geometry
from parasync.geometry import Mesh, MeshError
from parasync.params import ParamDescriptor, ParamError

NUMBER = "number"
MESH = "mesh"
MESH_LIST = "mesh_list"

#: op name -> (input slot kinds, output kind)
OPS: dict[str, tuple[dict[str, str], str]] = {
    "const": ({"value": NUMBER}, NUMBER),
    "add": ({"a": NUMBER, "b": NUMBER}, NUMBER),
    "sub": ({"a": NUMBER, "b": NUMBER}, NUMBER),
    "mul": ({"a": NUMBER, "b": NUMBER}, NUMBER),
    "div": ({"a": NUMBER, "b": NUMBER}, NUMBER),
    "box": ({"width": NUMBER, "height": NUMBER, "depth": NUMBER}, MESH),
    "cylinder": ({"radius": NUMBER, "height": NUMBER, "segments": NUMBER}, MESH),
    "translate": ({"mesh": MESH, "dx": NUMBER, "dy": NUMBER, "dz": NUMBER}, MESH),
    "rotate_z": ({"mesh": MESH, "degrees": NUMBER}, MESH),
    "scale": ({"mesh": MESH, "sx": NUMBER, "sy": NUMBER, "sz": NUMBER}, MESH),
    "twist": ({"mesh": MESH, "degrees": NUMBER}, MESH),
    "linear_array": ({"mesh": MESH, "count": NUMBER,
                      "dx": NUMBER, "dy": NUMBER, "dz": NUMBER}, MESH),
    "merge": ({"meshes": MESH_LIST}, MESH),
}


class GraphError(ValueError):
    """Structurally invalid graph definition."""


class EvaluationError(ValueError):
    """Runtime evaluation failure, carrying the offending node id."""

    def __init__(self, node_id: str | None, message: str):
        self.node_id = node_id
        prefix = f"node {node_id!r}: " if node_id else ""
        super().__init__(prefix + message)


@dataclass
class Node:
    """One operation application; inputs reference params, nodes, or literals."""

    id: str
    op: str
    inputs: dict

    @classmethod
    def from_dict(cls, obj: dict) -> "Node":
        if not isinstance(obj, dict):
            raise GraphError(f"node entry must be an object, got {type(obj).__name__}")
        unknown = set(obj) - {"id", "op", "inputs"}
        if unknown:
            raise GraphError(f"node {obj.get('id', '?')!r}: unknown field(s) "
                             f"{sorted(unknown)}")
        for key in ("id", "op", "inputs"):
            if key not in obj:
                raise GraphError(f"node entry missing required field {key!r}")
        if not isinstance(obj["inputs"], dict):
            raise GraphError(f"node {obj['id']!r}: inputs must be an object")
        return cls(id=obj["id"], op=obj["op"], inputs=dict(obj["inputs"]))


@dataclass
class GraphDefinition:
    """Validated parametric model: params, nodes, streamed outputs."""

    name: str
    params: list[ParamDescriptor]
    nodes: list[Node]
    outputs: list[tuple[str, int]]
    _topo_order: list[Node] = field(init=False, repr=False)

    def __post_init__(self):
        self.outputs = [tuple(o) for o in self.outputs]
        self._validate_ids()
        kinds = self._validate_nodes()
        self._validate_outputs(kinds)
        self._topo_order = self._toposort()

    # --- structural validation (construction time) ---

    def _validate_ids(self):
        param_ids = [p.id for p in self.params]
        node_ids = [n.id for n in self.nodes]
        for ids, label in ((param_ids, "param"), (node_ids, "node")):
            seen = set()
            for i in ids:
                if i in seen:
                    raise GraphError(f"duplicate {label} id {i!r}")
                seen.add(i)
        collision = set(param_ids) & set(node_ids)
        if collision:
            raise GraphError(f"node id collides with param id: {sorted(collision)}")

    def _validate_nodes(self) -> dict[str, str]:
        param_ids = {p.id for p in self.params}
        kinds: dict[str, str] = {pid: NUMBER for pid in param_ids}
        for node in self.nodes:
            if node.op not in OPS:
                raise GraphError(f"node {node.id!r}: unknown op {node.op!r}")
            kinds[node.id] = OPS[node.op][1]
        node_out = {n.id: OPS[n.op][1] for n in self.nodes}

        def ref_kind(node, slot, ref):
            if isinstance(ref, bool):
                raise GraphError(f"node {node.id!r}: input {slot!r} must be a "
                                 "number or reference")
            if isinstance(ref, (int, float)):
                if not math.isfinite(ref):
                    raise GraphError(f"node {node.id!r}: literal for {slot!r} "
                                     "must be finite")
                return NUMBER
            if isinstance(ref, str):
                if ref in param_ids:
                    return NUMBER
                if ref in node_out:
                    return node_out[ref]
                raise GraphError(f"node {node.id!r}: input {slot!r} references "
                                 f"unknown id {ref!r}")
            raise GraphError(f"node {node.id!r}: bad input {slot!r}: {ref!r}")

        for node in self.nodes:
            slots = OPS[node.op][0]
            for slot in slots:
                if slot not in node.inputs:
                    raise GraphError(f"node {node.id!r}: missing input {slot!r}")
            for slot in node.inputs:
                if slot not in slots:
                    raise GraphError(f"node {node.id!r}: unknown input {slot!r} "
                                     f"for op {node.op!r}")
            for slot, want in slots.items():
                ref = node.inputs[slot]
                if want == MESH_LIST:
                    if not isinstance(ref, list) or not all(
                            isinstance(r, str) for r in ref):
                        raise GraphError(f"node {node.id!r}: input {slot!r} must "
                                         "be a list of mesh references")
                    for r in ref:
                        if ref_kind(node, slot, r) != MESH:
                            raise GraphError(f"node {node.id!r}: input {slot!r} "
                                             f"expects a mesh, but {r!r} is a number")
                    continue
                got = ref_kind(node, slot, ref)
                if got != want:
                    article = "a number" if want == NUMBER else "a mesh"
                    raise GraphError(f"node {node.id!r}: input {slot!r} expects "
                                     f"{article}, got a {got}")
        return kinds

    def _validate_outputs(self, kinds: dict[str, str]):
        if not self.outputs:
            raise GraphError("definition needs at least one output")
        seen_models = set()
        for entry in self.outputs:
            if len(entry) != 2:
                raise GraphError(f"output entry must be (node, model_id), got {entry!r}")
            node_id, model_id = entry
            if node_id not in {n.id for n in self.nodes}:
                raise GraphError(f"output references unknown node {node_id!r}")
            if kinds[node_id] != MESH:
                raise GraphError(f"output node {node_id!r} must be mesh-valued")
            if (isinstance(model_id, bool) or not isinstance(model_id, int)
                    or not 0 <= model_id < 2 ** 32):
                raise GraphError(f"model_id must be an unsigned 32-bit integer, "
                                 f"got {model_id!r}")
            if model_id in seen_models:
                raise GraphError(f"duplicate model_id {model_id}")
            seen_models.add(model_id)

    def _toposort(self) -> list[Node]:
        node_ids = {n.id for n in self.nodes}
        deps: dict[str, set[str]] = {}
        for node in self.nodes:
            refs = set()
            for ref in node.inputs.values():
                for r in (ref if isinstance(ref, list) else [ref]):
                    if isinstance(r, str) and r in node_ids:
                        refs.add(r)
            deps[node.id] = refs
        order: list[Node] = []
        placed: set[str] = set()
        remaining = list(self.nodes)
        while remaining:
            # stable pass: keep definition order among ready nodes
            ready = [n for n in remaining if deps[n.id] <= placed]
            if not ready:
                stuck = sorted(n.id for n in remaining)
                raise GraphError(f"graph contains a cycle through {stuck}")
            for n in ready:
                order.append(n)
                placed.add(n.id)
            remaining = [n for n in remaining if n.id not in placed]
        return order

    # --- construction from JSON ---

    @classmethod
    def from_dict(cls, obj: dict) -> "GraphDefinition":
        if not isinstance(obj, dict):
            raise GraphError("definition must be a JSON object")
        unknown = set(obj) - {"name", "params", "nodes", "outputs"}
        if unknown:
            raise GraphError(f"unknown top-level field(s): {sorted(unknown)}")
        for key in ("name", "params", "nodes", "outputs"):
            if key not in obj:
                raise GraphError(f"definition missing required field {key!r}")
        if not isinstance(obj["name"], str) or not obj["name"]:
            raise GraphError("name must be a non-empty string")
        for key in ("params", "nodes", "outputs"):
            if not isinstance(obj[key], list):
                raise GraphError(f"{key} must be a list")
        try:
            params = [ParamDescriptor.from_seed(p) for p in obj["params"]]
        except ParamError as exc:
            raise GraphError(str(exc)) from exc
        nodes = [Node.from_dict(n) for n in obj["nodes"]]
        outputs = []
        for entry in obj["outputs"]:
            if not isinstance(entry, dict) or set(entry) != {"node", "model_id"}:
                raise GraphError(f"output entry must have exactly the fields "
                                 f"'node' and 'model_id', got {entry!r}")
            outputs.append((entry["node"], entry["model_id"]))
        return cls(name=obj["name"], params=params, nodes=nodes, outputs=outputs)


def load_definition(path) -> GraphDefinition:
    """Load and validate a definition JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return GraphDefinition.from_dict(obj)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from exc


def announce(graph: GraphDefinition, limit: int | None = None) -> list[ParamDescriptor]:
    """Finalized descriptors for every param seed, in definition order.

    Fills quantized_step, snaps the seed value onto the quantized grid, and
    resets revision to 0.
    """
    from parasync.params import snap  # local import keeps module deps one-way

    out = []
    for seed in graph.params:
        d = seed.announced() if limit is None else seed.announced(limit)
        d.value = snap(d, d.value)
        out.append(d)
    return out


def default_bindings(graph: GraphDefinition) -> dict:
    """Announced (grid-snapped) initial value per param id."""
    return {d.id: d.value for d in announce(graph)}


def evaluate(graph: GraphDefinition, bindings: dict) -> dict[int, Mesh]:
    """Evaluate all nodes in topological order; map model_id -> output Mesh.

    Deterministic: equal bindings produce bit-identical meshes. Bindings
    must cover exactly the graph's params with snapped values.
    """
    seeds = {p.id: p for p in graph.params}
    missing = set(seeds) - set(bindings)
    if missing:
        raise EvaluationError(None, f"missing bindings for {sorted(missing)}")
    extra = set(bindings) - set(seeds)
    if extra:
        raise EvaluationError(None, f"bindings for unknown params {sorted(extra)}")
    values: dict[str, object] = {}
    for pid, seed in seeds.items():
        values[pid] = _param_number(seed, bindings[pid])
    for node in graph._topo_order:
        values[node.id] = _eval_node(node, values)
    return {model_id: values[node_id] for node_id, model_id in graph.outputs}


def _param_number(seed: ParamDescriptor, value) -> float:
    """Parameter value as a graph number: bool -> 0/1, choice -> its index."""
    pid = seed.id
    if seed.kind == "boolean":
        if not isinstance(value, bool):
            raise EvaluationError(None, f"param {pid!r}: expected boolean")
        return 1.0 if value else 0.0
    if seed.kind == "choice":
        if value not in seed.choices:
            raise EvaluationError(None, f"param {pid!r}: {value!r} not a choice")
        return float(seed.choices.index(value))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EvaluationError(None, f"param {pid!r}: expected number, got {value!r}")
    if not math.isfinite(value):
        raise EvaluationError(None, f"param {pid!r}: non-finite value")
    return float(value)


def _eval_node(node: Node, values: dict):
    def num(slot) -> float:
        ref = node.inputs[slot]
        return float(ref) if isinstance(ref, (int, float)) else values[ref]

    def mesh(slot) -> Mesh:
        return values[node.inputs[slot]]

    def whole(slot) -> int:
        v = num(slot)
        if v != int(v):
            raise EvaluationError(node.id, f"{slot} must be a whole number, got {v}")
        return int(v)

    op = node.op
    try:
        if op == "const":
            result = num("value")
        elif op in ("add", "sub", "mul", "div"):
            a, b = num("a"), num("b")
            if op == "div":
                if b == 0:
                    raise EvaluationError(node.id, "division by zero")
                result = a / b
            else:
                result = a + b if op == "add" else a - b if op == "sub" else a * b
        elif op == "box":
            result = geometry.make_box(num("width"), num("height"), num("depth"))
        elif op == "cylinder":
            result = geometry.make_cylinder(num("radius"), num("height"),
                                            whole("segments"))
        elif op == "translate":
            result = geometry.translate(mesh("mesh"), num("dx"), num("dy"), num("dz"))
        elif op == "rotate_z":
            result = geometry.rotate_z(mesh("mesh"), num("degrees"))
        elif op == "scale":
            result = geometry.scale(mesh("mesh"), num("sx"), num("sy"), num("sz"))
        elif op == "twist":
            result = geometry.twist(mesh("mesh"), num("degrees"))
        elif op == "linear_array":
            result = geometry.linear_array(mesh("mesh"), whole("count"),
                                           num("dx"), num("dy"), num("dz"))
        elif op == "merge":
            result = geometry.merge([values[r] for r in node.inputs["meshes"]])
        else:  # unreachable: ops validated at construction
            raise EvaluationError(node.id, f"unknown op {op!r}")
    except MeshError as exc:
        raise EvaluationError(node.id, str(exc)) from exc
    if isinstance(result, float) and not math.isfinite(result):
        raise EvaluationError(node.id, f"non-finite result {result}")
    return result
