"""Deterministic serialization of curves and reports.

Curves go to CSV with columns ``s,x,y,sigma`` (shortest round-trip float
repr, ``\\n`` line endings). Everything else about a curve (parameters,
start, controls, termination and events keyed by sample index) goes into a
sidecar JSON document, which together with the CSV is enough to rebuild
the curve.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, fields, is_dataclass

import numpy as np

from .integrate import (
    Event,
    EventKind,
    IntegrationControls,
    ProfileCurve,
    Termination,
)
from .model import (
    CurveState,
    GeometryParams,
    XAxisNorth,
    XAxisSouth,
    YAxis,
    axis_rate,
)

COLUMNS = ("s", "x", "y", "sigma")


def to_jsonable(obj):
    """Convert to JSON-safe builtins; non-finite floats become None."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def curve_csv(curve: ProfileCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in zip(curve.s, curve.x, curve.y, curve.sigma):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def start_record(start) -> dict:
    if isinstance(start, YAxis):
        return {"kind": "y-axis", "A": start.A}
    if isinstance(start, XAxisSouth):
        return {"kind": "x-axis", "r": start.r}
    if isinstance(start, XAxisNorth):
        return {"kind": "x-axis-north", "r": start.r}
    return {"kind": "interior", "x": start.x, "y": start.y, "sigma": start.sigma}


def start_from_record(record: dict):
    kind = record["kind"]
    if kind == "y-axis":
        return YAxis(float(record["A"]))
    if kind == "x-axis":
        return XAxisSouth(float(record["r"]))
    if kind == "x-axis-north":
        return XAxisNorth(float(record["r"]))
    if kind == "interior":
        return CurveState(0.0, float(record["x"]), float(record["y"]), float(record["sigma"]))
    raise ValueError(f"unknown start kind {kind!r}")


def curve_metadata(curve: ProfileCurve) -> dict:
    events: dict[str, list] = {}
    for e in curve.events:
        events.setdefault(str(e.index), []).append({
            "kind": e.kind.value, "s": e.s,
            "orthogonal": e.orthogonal, "contact_angle": e.contact_angle,
        })
    return {
        "params": asdict(curve.params),
        "start": start_record(curve.start),
        "controls": asdict(curve.controls),
        "termination": curve.termination.value,
        "orientation": curve.orientation,
        "message": curve.message,
        "samples": len(curve),
        "events": events,
    }


def read_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"expected header {','.join(COLUMNS)}")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError("malformed curve CSV")
    return {c: data[:, i].copy() for i, c in enumerate(COLUMNS)}


def load_curve(csv_text: str, meta: dict) -> ProfileCurve:
    """Rebuild a curve from its CSV and sidecar metadata.

    sigma' is recomputed from the vector field (the axis limit at an axis
    start), so the rebuilt curve supports resampling and classification.
    """
    cols = read_csv(csv_text)
    params = GeometryParams(**meta["params"])
    start = start_from_record(meta["start"])
    orientation = int(meta.get("orientation", 1))
    h = orientation * params.h
    x, y, sg = cols["x"], cols["y"], cols["sigma"]
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = (params.m - 1) * np.cos(sg) * np.cos(y) / np.sin(y) - (params.n - 1) * np.sin(sg) / x - h
    if not isinstance(start, CurveState):
        ds[0] = axis_rate(start, params, h)
    events = []
    for idx, items in meta.get("events", {}).items():
        i = int(idx)
        for ev in items:
            state = CurveState(float(cols["s"][i]), float(x[i]), float(y[i]), float(sg[i]))
            events.append(Event(float(ev["s"]), EventKind(ev["kind"]), state, i,
                                ev.get("orthogonal"), ev.get("contact_angle")))
    events.sort(key=lambda e: (e.index, e.s))
    return ProfileCurve(
        params=params, s=cols["s"], x=x, y=y, sigma=sg, dsigma=ds,
        events=tuple(events), termination=Termination(meta["termination"]), start=start,
        controls=IntegrationControls(**meta["controls"]), message=meta.get("message", ""),
        orientation=orientation,
    )
