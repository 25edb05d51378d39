"""JSON documents for distributions, channels, states, auxiliaries and nets.

Every document is an object with ``"schema_version": 1`` and a ``"type"`` tag.
An axis is ``{"name": str, "labels": [...]}`` or ``{"name": str, "size": int}``.

==================  =========================================================
type                fields
==================  =========================================================
``dist``            axes, weights (nested list in axis order)
``channel``         input_axes, output_axes, kernel (inputs first)
``density_matrix``  factors, re, im (square matrices, im optional)
``auxiliary``       p_u, p_v_given_u, p_x_given_v
``net``             nodes [{name, labels|size, parents, kind, table | re/im}],
                    reservoirs, marginalizers, max_dim
==================  =========================================================
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .netkit import AMPLITUDE, CLASSICAL, DEFAULT_MAX_DIM, NetSpec, Node
from .probkit import Alphabet, Channel, Dist
from .quantkit import DensityMatrix
from .region import AuxiliaryModel

SCHEMA_VERSION = 1


def _label(v):
    return tuple(_label(x) for x in v) if isinstance(v, list) else v


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _axis_in(obj) -> tuple[str, Alphabet]:
    try:
        name = obj["name"]
        if "labels" in obj:
            return name, Alphabet(tuple(_label(x) for x in obj["labels"]))
        return name, Alphabet.of(int(obj["size"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad axis entry {obj!r}: needs name and labels or size") from exc


def _axis_out(name: str, alphabet: Alphabet) -> dict:
    if alphabet.labels == tuple(range(alphabet.size)):
        return {"name": name, "size": alphabet.size}
    return {"name": name, "labels": [_jsonable(x) for x in alphabet.labels]}


def _field(doc: dict, key: str):
    if key not in doc:
        raise SchemaError(f"{doc.get('type', 'document')} is missing field {key!r}")
    return doc[key]


def check_header(doc, expected: str | None = None) -> str:
    if not isinstance(doc, dict):
        raise SchemaError("top-level JSON value must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    kind = doc.get("type")
    if expected is not None and kind != expected:
        raise SchemaError(f"expected a {expected!r} document, got {kind!r}")
    return kind


def _array(v, name, dtype=float):
    try:
        return np.asarray(v, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {name!r} is not a numeric array") from exc


def _complex(doc, re_key="re", im_key="im"):
    re = _array(_field(doc, re_key), re_key)
    im = _array(doc[im_key], im_key) if im_key in doc else np.zeros_like(re)
    if re.shape != im.shape:
        raise SchemaError("real and imaginary parts differ in shape")
    return re + 1j * im


def dist_to_json(d: Dist) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": "dist",
            "axes": [_axis_out(n, a) for n, a in d.axes], "weights": d.weights.tolist()}


def channel_to_json(c: Channel) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": "channel",
            "input_axes": [_axis_out(n, a) for n, a in c.input_axes],
            "output_axes": [_axis_out(n, a) for n, a in c.output_axes],
            "kernel": c.kernel.tolist()}


def density_matrix_to_json(rho: DensityMatrix) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": "density_matrix",
            "factors": [_axis_out(n, a) for n, a in rho.factors],
            "re": rho.matrix.real.tolist(), "im": rho.matrix.imag.tolist()}


def auxiliary_to_json(aux: AuxiliaryModel) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": "auxiliary", **aux.to_dict()}


def net_to_json(net: NetSpec) -> dict:
    nodes = []
    for n in net.nodes:
        entry = {**_axis_out(n.name, n.alphabet), "parents": list(n.parents), "kind": n.kind}
        if n.kind == CLASSICAL:
            entry["table"] = n.table.tolist()
        else:
            entry["re"], entry["im"] = n.table.real.tolist(), n.table.imag.tolist()
        nodes.append(entry)
    return {"schema_version": SCHEMA_VERSION, "type": "net", "nodes": nodes,
            "reservoirs": list(net.reservoirs), "marginalizers": list(net.outputs),
            "max_dim": net.max_dim}


def to_json(obj) -> dict:
    for cls, fn in ((Dist, dist_to_json), (Channel, channel_to_json),
                    (DensityMatrix, density_matrix_to_json), (AuxiliaryModel, auxiliary_to_json),
                    (NetSpec, net_to_json)):
        if isinstance(obj, cls):
            return fn(obj)
    raise SchemaError(f"no JSON schema for {type(obj).__name__}")


def from_json(doc: dict):
    """Rebuild the object described by a versioned document."""
    kind = check_header(doc)
    if kind == "dist":
        return Dist([_axis_in(a) for a in _field(doc, "axes")], _array(_field(doc, "weights"), "weights"))
    if kind == "channel":
        return Channel([_axis_in(a) for a in _field(doc, "input_axes")],
                       [_axis_in(a) for a in _field(doc, "output_axes")],
                       _array(_field(doc, "kernel"), "kernel"))
    if kind == "density_matrix":
        return DensityMatrix([_axis_in(a) for a in _field(doc, "factors")], _complex(doc))
    if kind == "auxiliary":
        return AuxiliaryModel(_array(_field(doc, "p_u"), "p_u"),
                              _array(_field(doc, "p_v_given_u"), "p_v_given_u"),
                              _array(_field(doc, "p_x_given_v"), "p_x_given_v"))
    if kind == "net":
        nodes = []
        for entry in _field(doc, "nodes"):
            name, alphabet = _axis_in(entry)
            node_kind = entry.get("kind")
            if node_kind == CLASSICAL:
                table = _array(_field(entry, "table"), "table")
            elif node_kind == AMPLITUDE:
                table = _complex(entry)
            else:
                raise SchemaError(f"node {name!r}: kind must be {CLASSICAL!r} or {AMPLITUDE!r}")
            nodes.append(Node(name, alphabet, tuple(entry.get("parents", ())), node_kind, table))
        return NetSpec(nodes, tuple(doc.get("reservoirs", ())), tuple(doc.get("marginalizers", ())),
                       int(doc.get("max_dim", DEFAULT_MAX_DIM)))
    raise SchemaError(f"unknown document type {kind!r}")


def load(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_json(doc)


def dump(obj, path) -> None:
    Path(path).write_text(json.dumps(to_json(obj), indent=2, sort_keys=True) + "\n")
