"""JSON specs for maps and observables."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from .observables import TrigObservable
from .torus import HyperbolicToralMap, ShearedMap

DEFAULT_CONE = {"cone_slope": 0.5, "expansion": 1.5, "resolution": 64}


def map_to_spec(tmap) -> dict:
    if isinstance(tmap, ShearedMap):
        return {"matrix": tmap.base.as_lists(),
                "shear": {"amplitude": tmap.amplitude, "profile": tmap.shear_profile.to_spec()}}
    return {"matrix": tmap.as_lists(), "shear": {"amplitude": 0.0, "profile": {"terms": []}}}


def map_from_spec(spec: Mapping, cone: Mapping | None = None):
    """Build a map; sheared maps come back carrying a verified cone certificate."""
    if not isinstance(spec, Mapping) or "matrix" not in spec:
        raise ValueError("map spec must be an object with a 'matrix' entry")
    m = spec["matrix"]
    if len(m) != 2 or any(len(row) != 2 for row in m):
        raise ValueError("matrix must be 2x2")
    for row in m:
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ValueError(f"matrix entries must be integers, got {v!r}")
    base = HyperbolicToralMap.from_matrix(m)
    shear = spec.get("shear") or {}
    amp = float(shear.get("amplitude", 0.0))
    profile = TrigObservable.from_spec(shear.get("profile", {"terms": []}))
    if amp == 0.0 or profile.is_zero:
        return base
    params = dict(DEFAULT_CONE, **(cone or {}))
    return ShearedMap(base, amp, profile).certified(params["cone_slope"], params["expansion"], params["resolution"])


def load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    with p.open(encoding="utf-8") as fh:
        return json.load(fh)


def load_map(path, cone: Mapping | None = None):
    return map_from_spec(load_json(path), cone)


def load_observable(path) -> TrigObservable:
    return TrigObservable.from_spec(load_json(path))
