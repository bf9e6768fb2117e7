from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parasync.geometry import make_box, twist
from parasync.graph import (
    EvaluationError,
    GraphDefinition,
    GraphError,
    Node,
    announce,
    default_bindings,
    evaluate,
    load_definition,
)
from parasync.params import ParamDescriptor


def box_graph(**param_overrides):
    params = [
        ParamDescriptor.from_seed({"id": "width", "kind": "real",
                                   "min": 0.5, "max": 10.5, "value": 2}),
        ParamDescriptor.from_seed({"id": "height", "kind": "real",
                                   "min": 0.5, "max": 10.5, "value": 3}),
        ParamDescriptor.from_seed({"id": "depth", "kind": "real",
                                   "min": 0.5, "max": 10.5, "value": 4}),
    ]
    nodes = [Node(id="box", op="box",
                  inputs={"width": "width", "height": "height", "depth": "depth"})]
    return GraphDefinition(name="box", params=params, nodes=nodes,
                           outputs=[("box", 0)])


def graph_from(obj):
    return GraphDefinition.from_dict(obj)


# --- evaluation ----------------------------------------------------------------

def test_evaluate_single_box():
    g = box_graph()
    out = evaluate(g, {"width": 2, "height": 3, "depth": 4})
    assert set(out) == {0}
    mesh = out[0]
    assert mesh.vertex_count == 8
    assert mesh.triangle_count == 12
    lo, hi = mesh.bounding_box()
    assert np.array_equal(lo, [0, 0, 0])
    assert np.array_equal(hi, [2, 3, 4])


def test_evaluate_zero_twist_matches_untwisted():
    obj = {
        "name": "t",
        "params": [{"id": "angle", "kind": "real", "min": 0, "max": 360,
                    "value": 0}],
        "nodes": [
            {"id": "b", "op": "box", "inputs": {"width": 1, "height": 1, "depth": 2}},
            {"id": "tw", "op": "twist", "inputs": {"mesh": "b", "degrees": "angle"}},
        ],
        "outputs": [{"node": "tw", "model_id": 0}],
    }
    g = graph_from(obj)
    out = evaluate(g, {"angle": 0.0})
    assert np.array_equal(out[0].positions, make_box(1, 1, 2).positions)


def test_evaluate_division_by_zero_names_node():
    obj = {
        "name": "d",
        "params": [],
        "nodes": [
            {"id": "six", "op": "const", "inputs": {"value": 6}},
            {"id": "zero", "op": "const", "inputs": {"value": 0}},
            {"id": "bad_div", "op": "div", "inputs": {"a": "six", "b": "zero"}},
            {"id": "b", "op": "box",
             "inputs": {"width": "bad_div", "height": 1, "depth": 1}},
        ],
        "outputs": [{"node": "b", "model_id": 0}],
    }
    g = graph_from(obj)
    with pytest.raises(EvaluationError) as err:
        evaluate(g, {})
    assert err.value.node_id == "bad_div"
    assert "bad_div" in str(err.value)


def test_evaluate_non_finite_intermediate_names_node():
    obj = {
        "name": "o",
        "params": [],
        "nodes": [
            {"id": "big", "op": "const", "inputs": {"value": 1e308}},
            {"id": "boom", "op": "mul", "inputs": {"a": "big", "b": "big"}},
            {"id": "b", "op": "box", "inputs": {"width": "boom", "height": 1, "depth": 1}},
        ],
        "outputs": [{"node": "b", "model_id": 0}],
    }
    with pytest.raises(EvaluationError) as err:
        evaluate(graph_from(obj), {})
    assert err.value.node_id == "boom"


def test_evaluate_geometry_error_names_node():
    g = box_graph()
    # snapped bindings are a precondition, but runtime geometry failures
    # must still carry the node id
    with pytest.raises(EvaluationError) as err:
        evaluate(g, {"width": -1, "height": 1, "depth": 1})
    assert err.value.node_id == "box"


def test_evaluate_requires_complete_bindings():
    g = box_graph()
    with pytest.raises(EvaluationError):
        evaluate(g, {"width": 2})
    with pytest.raises(EvaluationError):
        evaluate(g, {"width": 2, "height": 3, "depth": 4, "ghost": 1})


def test_evaluate_is_deterministic():
    g = load_definition("definitions/twist_tower.json")
    bindings = default_bindings(g)
    a = evaluate(g, bindings)
    b = evaluate(g, bindings)
    for mid in a:
        assert a[mid].positions.tobytes() == b[mid].positions.tobytes()
        assert a[mid].triangles.tobytes() == b[mid].triangles.tobytes()


def test_boolean_and_choice_params_read_as_numbers():
    obj = {
        "name": "bc",
        "params": [
            {"id": "flag", "kind": "boolean", "value": True},
            {"id": "mode", "kind": "choice", "choices": ["a", "b", "c"], "value": "c"},
        ],
        "nodes": [
            {"id": "s", "op": "add", "inputs": {"a": "flag", "b": "mode"}},
            {"id": "b", "op": "box", "inputs": {"width": "s", "height": 1, "depth": 1}},
        ],
        "outputs": [{"node": "b", "model_id": 0}],
    }
    g = graph_from(obj)
    out = evaluate(g, {"flag": True, "mode": "c"})  # 1 + index(c)=2 -> width 3
    assert out[0].bounding_box()[1][0] == 3.0


# --- static validation -----------------------------------------------------------

def minimal_nodes():
    return [{"id": "b", "op": "box", "inputs": {"width": 1, "height": 1, "depth": 1}}]


def test_duplicate_node_ids_rejected():
    obj = {"name": "x", "params": [],
           "nodes": minimal_nodes() + minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="duplicate"):
        graph_from(obj)


def test_param_node_id_collision_rejected():
    obj = {"name": "x",
           "params": [{"id": "b", "kind": "real", "min": 0, "max": 1, "value": 0}],
           "nodes": minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="collides"):
        graph_from(obj)


def test_unknown_reference_rejected():
    obj = {"name": "x", "params": [],
           "nodes": [{"id": "b", "op": "box",
                      "inputs": {"width": "nope", "height": 1, "depth": 1}}],
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="nope"):
        graph_from(obj)


def test_cycle_rejected():
    obj = {"name": "x", "params": [],
           "nodes": [
               {"id": "p", "op": "add", "inputs": {"a": "q", "b": 1}},
               {"id": "q", "op": "add", "inputs": {"a": "p", "b": 1}},
               {"id": "b", "op": "box", "inputs": {"width": "p", "height": 1, "depth": 1}},
           ],
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="cycle"):
        graph_from(obj)


def test_self_loop_rejected():
    obj = {"name": "x", "params": [],
           "nodes": [
               {"id": "p", "op": "add", "inputs": {"a": "p", "b": 1}},
               {"id": "b", "op": "box", "inputs": {"width": "p", "height": 1, "depth": 1}},
           ],
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="cycle"):
        graph_from(obj)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 12), data=st.data())
def test_random_cyclic_graphs_rejected(n, data):
    # a forward add-chain with one deliberate back edge always has a cycle
    back_src = data.draw(st.integers(0, n - 1))
    back_dst = data.draw(st.integers(back_src, n - 1))
    nodes = []
    for i in range(n):
        a = f"n{i - 1}" if i else 1
        nodes.append({"id": f"n{i}", "op": "add", "inputs": {"a": a, "b": 1}})
    nodes[back_src]["inputs"]["b"] = f"n{back_dst}"
    nodes.append({"id": "b", "op": "box",
                  "inputs": {"width": f"n{n - 1}", "height": 1, "depth": 1}})
    obj = {"name": "x", "params": [], "nodes": nodes,
           "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="cycle"):
        graph_from(obj)


def test_arity_and_kind_mismatches_rejected():
    base = {"name": "x", "params": [], "outputs": [{"node": "b", "model_id": 0}]}
    with pytest.raises(GraphError, match="missing input"):
        graph_from({**base, "nodes": [{"id": "b", "op": "box",
                                       "inputs": {"width": 1, "height": 1}}]})
    with pytest.raises(GraphError, match="unknown input"):
        graph_from({**base, "nodes": [{"id": "b", "op": "box",
                                       "inputs": {"width": 1, "height": 1,
                                                  "depth": 1, "extra": 2}}]})
    with pytest.raises(GraphError, match="expects a number"):
        graph_from({**base, "nodes": [
            {"id": "m", "op": "box", "inputs": {"width": 1, "height": 1, "depth": 1}},
            {"id": "b", "op": "box", "inputs": {"width": "m", "height": 1, "depth": 1}},
        ]})
    with pytest.raises(GraphError, match="expects a mesh"):
        graph_from({**base, "nodes": [
            {"id": "n", "op": "const", "inputs": {"value": 1}},
            {"id": "b", "op": "twist", "inputs": {"mesh": "n", "degrees": 0}},
        ]})
    with pytest.raises(GraphError, match="unknown op"):
        graph_from({**base, "nodes": [{"id": "b", "op": "sphere", "inputs": {}}]})


def test_outputs_validation():
    nodes = minimal_nodes() + [{"id": "n", "op": "const", "inputs": {"value": 1}}]
    with pytest.raises(GraphError, match="unknown node"):
        graph_from({"name": "x", "params": [], "nodes": nodes,
                    "outputs": [{"node": "ghost", "model_id": 0}]})
    with pytest.raises(GraphError, match="mesh-valued"):
        graph_from({"name": "x", "params": [], "nodes": nodes,
                    "outputs": [{"node": "n", "model_id": 0}]})
    with pytest.raises(GraphError, match="model_id"):
        graph_from({"name": "x", "params": [], "nodes": nodes,
                    "outputs": [{"node": "b", "model_id": -1}]})
    with pytest.raises(GraphError, match="duplicate model_id"):
        graph_from({"name": "x", "params": [], "nodes": nodes,
                    "outputs": [{"node": "b", "model_id": 0},
                                {"node": "b", "model_id": 0}]})
    with pytest.raises(GraphError, match="at least one output"):
        graph_from({"name": "x", "params": [], "nodes": nodes, "outputs": []})


def test_merge_node_takes_mesh_list():
    obj = {"name": "m", "params": [],
           "nodes": [
               {"id": "a", "op": "box", "inputs": {"width": 1, "height": 1, "depth": 1}},
               {"id": "c", "op": "translate",
                "inputs": {"mesh": "a", "dx": 2, "dy": 0, "dz": 0}},
               {"id": "m", "op": "merge", "inputs": {"meshes": ["a", "c"]}},
           ],
           "outputs": [{"node": "m", "model_id": 3}]}
    out = evaluate(graph_from(obj), {})
    assert out[3].vertex_count == 16


# --- announce ---------------------------------------------------------------------

def test_announce_quantizes_and_orders():
    g = load_definition("definitions/twist_tower.json")
    descs = announce(g)
    assert [d.id for d in descs] == ["height", "floors", "twist_deg", "width"]
    by_id = {d.id: d for d in descs}
    assert by_id["height"].quantized_step == 5
    assert by_id["floors"].quantized_step == 1
    assert by_id["twist_deg"].quantized_step == 18
    assert by_id["width"].quantized_step == 1.0
    assert all(d.revision == 0 for d in descs)


def test_announce_empty_params():
    obj = {"name": "x", "params": [], "nodes": minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}]}
    assert announce(graph_from(obj)) == []


def test_announce_boolean_param():
    obj = {"name": "x",
           "params": [{"id": "on", "kind": "boolean", "value": True}],
           "nodes": minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}]}
    d = announce(graph_from(obj))[0]
    assert d.kind == "boolean"
    assert d.min is None and d.max is None
    assert d.native_step is None and d.quantized_step is None


def test_announce_snaps_seed_value_onto_grid():
    obj = {"name": "x",
           "params": [{"id": "w", "kind": "real", "min": 0, "max": 100,
                       "native_step": 1, "value": 42}],
           "nodes": minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}]}
    d = announce(graph_from(obj))[0]
    assert d.quantized_step == 5
    assert d.value == 40  # 42 is not selectable under step 5


# --- definition files ---------------------------------------------------------------

def test_load_definition_rejects_unknown_keys(tmp_path):
    obj = {"name": "x", "params": [], "nodes": minimal_nodes(),
           "outputs": [{"node": "b", "model_id": 0}], "extra": True}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphError, match="extra"):
        load_definition(p)


def test_load_definition_rejects_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(GraphError):
        load_definition(p)


def test_shipped_definitions_load_and_evaluate():
    for path in ("definitions/minimal_box.json", "definitions/twist_tower.json"):
        g = load_definition(path)
        out = evaluate(g, default_bindings(g))
        assert all(m.vertex_count > 0 for m in out.values())


def test_shipped_definitions_match_schema():
    jsonschema = pytest.importorskip("jsonschema")
    with open("definitions/schema.json", encoding="utf-8") as fh:
        schema = json.load(fh)
    jsonschema.Draft202012Validator.check_schema(schema)
    for path in ("definitions/minimal_box.json", "definitions/twist_tower.json"):
        with open(path, encoding="utf-8") as fh:
            jsonschema.validate(json.load(fh), schema)


def test_twist_tower_tracks_height_param():
    g = load_definition("definitions/twist_tower.json")
    bindings = default_bindings(g)
    short = evaluate(g, {**bindings, "height": 0.0})[0]
    tall = evaluate(g, {**bindings, "height": 100.0})[0]
    assert tall.bounding_box()[1][2] > short.bounding_box()[1][2]
