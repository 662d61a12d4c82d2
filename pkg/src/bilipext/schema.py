"""Versioned JSON documents with strict schemas.

Every file is ``{"version": 1, "type": <name>, "data": {...}}``; unknown
fields anywhere are rejected.
"""
import functools
import json

import fastjsonschema
import jsonschema

from .errors import SchemaError

VERSION = 1

_num = {"type": "number"}
_int = {"type": "integer"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_ivec = {"type": "array", "items": _int, "minItems": 1}
_mat = {"type": "array", "items": _vec}


def _obj(props, required=None):
    return {"type": "object", "properties": props, "required": list(required or props),
            "additionalProperties": False}


_header = {"kind": {"type": "string"}, "dim": _int, "lip": _num, "colip": _num, "log2_bound": _num}

_regions = {
    "box": _obj({"kind": {"const": "box"}, "lo": _vec, "hi": _vec}),
    "axis-slab": _obj({"kind": {"const": "axis-slab"}, "dim": _int, "axis": _int, "lo": _num, "hi": _num}),
    "tile-column": _obj({"kind": {"const": "tile-column"}, "lo": _vec, "hi": _vec}),
    "half-space": _obj({"kind": {"const": "half-space"}, "normal": _vec, "offset": _num}),
    "tube": _obj({"kind": {"const": "tube"}, "a": _vec, "b": _vec, "r": _num}),
}


def _node(kind, extra, optional=()):
    props = dict(_header, kind={"const": kind}, **extra)
    return _obj(props, [k for k in props if k not in optional])


_map_nodes = [
    _node("identity", {}),
    _node("affine", {"affine": {"enum": ["translation", "uniform-scale", "diagonal-scale", "orthogonal-frame"]},
                     "offset": _vec, "param": {"type": ["number", "array"]}}, optional=("param",)),
    _node("spin", {"center": _vec, "u": _vec, "v": _vec, "ts": _vec, "vals": _vec, "t0": _num}),
    _node("swap", {"x": _vec, "y": _vec, "r": _num, "inverted": {"type": "boolean"}}),
    _node("compose", {"children": {"type": "array", "items": {"$ref": "#/definitions/map"}}}),
    _node("glued", {"entries": {"type": "array", "items": _obj(
        {"region": {"$ref": "#/definitions/region"}, "map": {"$ref": "#/definitions/map"}})}}),
]

def _dispatch(nodes):
    """Pick the branch by ``kind`` so only one branch is evaluated per node."""
    kinds = [n["properties"]["kind"]["const"] for n in nodes]
    rules = [{"if": {"properties": {"kind": {"const": k}}, "required": ["kind"]}, "then": n}
             for k, n in zip(kinds, nodes)]
    return {"type": "object", "required": ["kind"], "properties": {"kind": {"enum": kinds}}, "allOf": rules}


_defs = {
    "map": _dispatch(_map_nodes),
    "region": _dispatch(list(_regions.values())),
    "pair": {"type": "array", "items": [_vec, _vec], "minItems": 2, "maxItems": 2},
    "ipair": {"type": "array", "items": [_ivec, _ivec], "minItems": 2, "maxItems": 2},
    "swapspec": _obj({"x": _vec, "y": _vec, "r": _num}),
}

PAYLOADS = {
    "separated-net": _obj({"dim": _int, "points": _mat, "sep": _num, "cover": _num,
                           "window": {"type": "array", "items": _vec, "minItems": 2, "maxItems": 2},
                           "cover_sampled": {"type": "boolean"}}),
    "point-map": _obj({"dim": _int, "declared_L": _num, "pairs": {"type": "array", "items": {"$ref": "#/definitions/pair"}}}),
    "lattice-perm": _obj({"dim": _int, "scale_N": _int, "pairs": {"type": "array", "items": {"$ref": "#/definitions/ipair"}}}),
    "routing-schedule": _obj({"rounds": {"type": "array", "items": {"type": "array", "items": {"$ref": "#/definitions/ipair"}}}}),
    "tile-decomposition": _obj({"dim": _int, "T": _int, "pieces": {"type": "array", "items": _obj(
        {"offset": _ivec, "dim": _int, "scale_N": _int,
         "pairs": {"type": "array", "items": {"$ref": "#/definitions/ipair"}}})}}),
    "swap-family": _obj({"dim": _int, "swaps": {"type": "array", "items": {"$ref": "#/definitions/swapspec"}}}),
    "layered-point-map": _obj({"dim": _int, "H": _int, "L": _num,
                               "layers": {"type": "object", "patternProperties": {
                                   "^[0-9]+$": {"type": "array", "items": {"type": "array", "items": [_ivec, _vec],
                                                                          "minItems": 2, "maxItems": 2}}},
                                   "additionalProperties": False},
                               "window": {"type": "array", "items": _ivec, "minItems": 2, "maxItems": 2}}),
    "slab-system": _obj({"dim": _int, "T": _int, "M1": _num, "M2": _num, "G": {"$ref": "#/definitions/map"},
                         "window": {"type": "array", "items": _ivec, "minItems": 2, "maxItems": 2},
                         "slabs": {"type": "object", "patternProperties": {
                             "^-?[0-9]+$": {"type": "array", "items": {"type": "array", "items": [_ivec, _vec],
                                                                       "minItems": 2, "maxItems": 2}}},
                             "additionalProperties": False}}),
    "map": {"$ref": "#/definitions/map"},
    "audit-report": _obj({"map_id": {"type": "string"}, "certified_log2_bound": _num,
                          "sampled_log2_expansion": _num, "sampled_log2_contraction": _num,
                          "pairs": _int, "seed": _int, "designated_max_residual": _num,
                          "support_violations": _int, "checks": {"type": "object",
                                                                 "additionalProperties": {"type": "boolean"}},
                          "note": {"type": "string"}, "passed": {"type": "boolean"}}),
}


def document_schema(kind):
    if kind not in PAYLOADS:
        raise SchemaError("/type", f"unknown document type {kind!r}")
    return {"$schema": "http://json-schema.org/draft-07/schema#", "definitions": _defs,
            **_obj({"version": {"const": VERSION}, "type": {"const": kind}, "data": PAYLOADS[kind]})}


@functools.lru_cache(maxsize=None)
def _fast(kind):
    return fastjsonschema.compile(document_schema(kind))


@functools.lru_cache(maxsize=None)
def _validator(kind):
    return jsonschema.Draft7Validator(document_schema(kind))


def _kind_mismatch(err):
    return err.validator == "const" and list(err.relative_path)[-1:] == ["kind"]


def _innermost(err):
    """Follow oneOf failures into the branch whose ``kind`` matched."""
    while err.context:
        branches = {}
        for e in err.context:
            branches.setdefault(e.relative_schema_path[0], []).append(e)
        good = [b for b in branches.values() if not any(_kind_mismatch(e) for e in b)]
        pool = [e for b in (good or branches.values()) for e in b]
        err = max(pool, key=lambda e: len(e.absolute_path))
    return err


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def validate(doc, kind=None):
    """Check a document against its schema; returns the payload."""
    if not isinstance(doc, dict):
        raise SchemaError("", "document must be an object")
    kind = kind or doc.get("type")
    if doc.get("type") != kind:
        raise SchemaError("/type", f"expected document type {kind!r}, got {doc.get('type')!r}")
    # The compiled validator is the fast path; jsonschema only runs to locate a failure.
    try:
        _fast(kind)(doc)
    except fastjsonschema.JsonSchemaException as exc:
        errors = list(_validator(kind).iter_errors(doc))
        if not errors:
            raise SchemaError("", exc.message) from None
        err = _innermost(max(errors, key=lambda e: len(e.absolute_path)))
        raise SchemaError(_pointer(err.absolute_path), err.message)
    return doc["data"]


def wrap(kind, data):
    doc = {"version": VERSION, "type": kind, "data": data}
    validate(doc, kind)
    return doc


def dumps(kind, data) -> str:
    return json.dumps(wrap(kind, data), sort_keys=True, separators=(",", ":"))


def loads(text, kind=None):
    return validate(json.loads(text), kind)


def read(path, kind=None):
    with open(path) as fh:
        return loads(fh.read(), kind)


def write(path, kind, data):
    text = dumps(kind, data)
    with open(path, "w") as fh:
        fh.write(text + "\n")
