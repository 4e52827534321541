"""JSON spec files.

Schema (unknown keys are rejected at every level)::

    {
      "dimension": 1,
      "ambient": {"box": {"lo": [0.0], "hi": [1.0]}}      # or {"ball": {"center": [...], "radius": r}}
      "prefix": [ [map, map, ...], ... ],                   # optional, default []
      "tail": {"periodic": [ [map, ...], ... ]}             # or {"generator": {"name": ..., "params": {...}}}
      "shift": 0                                            # optional
      "generator_info": {...}                               # optional, ignored provenance block
    }

A map is ``{"ratio": r, "translation": t, "reflect": false}`` in dimension 1
(``translation`` may be a number or a 1-list) and
``{"ratio": r, "rotation_degrees": a, "translation": [x, y]}`` in dimension 2.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import SpecError
from .ifs_core import AmbientSet, IFSSpec, LevelSystem, Periodic, Similarity

_TOP_KEYS = {"dimension", "ambient", "prefix", "tail", "shift", "generator_info"}


def _check_keys(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise SpecError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise SpecError(f"{where}: unknown field(s) {sorted(extra)}")


def _parse_map(obj: dict, d: int, where: str) -> Similarity:
    if d == 1:
        _check_keys(obj, {"ratio", "translation", "reflect"}, where)
        t = obj.get("translation", 0.0)
        t = t[0] if isinstance(t, list) else t
        return Similarity.line(float(obj["ratio"]), float(t), bool(obj.get("reflect", False)))
    if d == 2:
        _check_keys(obj, {"ratio", "rotation_degrees", "translation"}, where)
        return Similarity.plane(float(obj["ratio"]), float(obj.get("rotation_degrees", 0.0)),
                                [float(v) for v in obj["translation"]])
    raise SpecError("spec files support dimension 1 or 2")


def _parse_levels(objs, d: int, where: str) -> tuple[LevelSystem, ...]:
    if not isinstance(objs, list):
        raise SpecError(f"{where}: expected a list of levels")
    out = []
    for i, lv in enumerate(objs):
        if not isinstance(lv, list) or not lv:
            raise SpecError(f"{where}[{i}]: a level is a nonempty list of maps")
        out.append(LevelSystem.from_maps([_parse_map(m, d, f"{where}[{i}][{k}]")
                                          for k, m in enumerate(lv)]))
    return tuple(out)


def _parse_ambient(obj, d: int) -> AmbientSet:
    _check_keys(obj, {"box", "ball"}, "ambient")
    if len(obj) != 1:
        raise SpecError("ambient: give exactly one of box or ball")
    if "box" in obj:
        _check_keys(obj["box"], {"lo", "hi"}, "ambient.box")
        amb = AmbientSet.box(obj["box"]["lo"], obj["box"]["hi"])
    else:
        _check_keys(obj["ball"], {"center", "radius"}, "ambient.ball")
        amb = AmbientSet.ball(obj["ball"]["center"], float(obj["ball"]["radius"]))
    if amb.dimension != d:
        raise SpecError("ambient dimension does not match 'dimension'")
    return amb


def spec_from_dict(obj: dict) -> IFSSpec:
    _check_keys(obj, _TOP_KEYS, "spec")
    try:
        d = int(obj["dimension"])
        tail_obj = obj["tail"]
    except KeyError as e:
        raise SpecError(f"spec: missing field {e.args[0]!r}") from None
    _check_keys(tail_obj, {"periodic", "generator"}, "tail")
    if len(tail_obj) != 1:
        raise SpecError("tail: give exactly one of periodic or generator")
    prefix = _parse_levels(obj.get("prefix", []), d, "prefix")
    if "periodic" in tail_obj:
        ambient = _parse_ambient(obj["ambient"], d) if "ambient" in obj else None
        if ambient is None:
            raise SpecError("spec: missing field 'ambient'")
        spec = IFSSpec(d, ambient, prefix, Periodic(_parse_levels(tail_obj["periodic"], d, "tail.periodic")))
    else:
        g = tail_obj["generator"]
        _check_keys(g, {"name", "params"}, "tail.generator")
        spec = IFSSpec.from_generator(g["name"], g.get("params", {}), prefix=prefix)
        if "ambient" in obj:
            amb = _parse_ambient(obj["ambient"], d)
            if not (np.array_equal(amb.center, spec.ambient.center) and amb.radius == spec.ambient.radius):
                raise SpecError("ambient set differs from the generator's ambient set")
        if spec.dimension != d:
            raise SpecError("generator dimension does not match 'dimension'")
    shift = int(obj.get("shift", 0))
    return spec.shifted(shift) if shift else spec


def _map_to_dict(lv: LevelSystem, j: int) -> dict:
    d = lv.dimension
    r = float(lv.ratios[j])
    if d == 1:
        return {"ratio": r, "translation": float(lv.translations[j][0]),
                "reflect": bool(lv.orth[j][0, 0] < 0)}
    o = lv.orth[j]
    if np.linalg.det(o) < 0:
        raise SpecError("reflections are not representable in 2-d spec files")
    ang = float(np.degrees(np.arctan2(o[1, 0], o[0, 0])))
    return {"ratio": r, "rotation_degrees": ang, "translation": lv.translations[j].tolist()}


def _levels_to_list(levels) -> list:
    return [[_map_to_dict(lv, j) for j in range(len(lv))] for lv in levels]


def spec_to_dict(spec: IFSSpec) -> dict:
    out = {"dimension": spec.dimension, "ambient": spec.ambient.to_dict(),
           "prefix": _levels_to_list(spec.prefix)}
    if isinstance(spec.tail, Periodic):
        out["tail"] = {"periodic": _levels_to_list(spec.tail.levels)}
    else:
        out["tail"] = {"generator": {"name": spec.tail.name, "params": spec.tail.params}}
        info = spec.generator.metadata()
        if info:
            out["generator_info"] = info
    if spec.shift:
        out["shift"] = spec.shift
    return out


def dumps(spec: IFSSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> IFSSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON: {e}") from None
    return spec_from_dict(obj)


def load(path) -> IFSSpec:
    return loads(Path(path).read_text())


def content_hash(data: bytes | str) -> str:
    """sha256 digest of the spec file contents."""
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()
