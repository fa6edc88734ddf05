"""Scenario files: JSON with rates in Mb/s and protocol times in ms.

Defaults live inline in :data:`SCHEMA` and are filled in before validation
succeeds, so a scenario only needs ``classes`` and ``rtpd_ms``.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import InvalidParameterError
from .params import PhyMacParams, RateClassConfig


class ScenarioError(InvalidParameterError):
    pass


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["classes", "rtpd_ms"],
    "properties": {
        "name": {"type": "string", "default": "scenario"},
        "classes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["rate_mbps", "count"],
                "properties": {
                    "rate_mbps": _pos,
                    "count": {"type": "integer", "minimum": 0},
                    "hol_probability": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "phy": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "slot_time_ms": dict(_pos, default=0.020),
                "sifs_ms": dict(_pos, default=0.010),
                "difs_ms": dict(_pos, default=0.050),
                "plcp_overhead_ms": dict(_pos, default=0.192),
                "cw_min": dict(_posint, default=31),
                "cw_max": dict(_posint, default=1023),
                "backoff_stages": {"type": "integer", "minimum": 0, "default": 5},
                "control_rate_mbps": dict(_pos, default=2.0),
                "mac_header_bytes": dict(_posint, default=34),
                "rts_bytes": dict(_posint, default=20),
                "cts_bytes": dict(_posint, default=14),
                "mac_ack_bytes": dict(_posint, default=14),
                "tcp_ip_header_bytes": dict(_posint, default=40),
                "tcp_payload_bytes": {"type": "integer", "minimum": 0, "default": 1460},
                "tcp_ack_segment_bytes": dict(_posint, default=40),
            },
        },
        "w_conn": dict(_posint, default=60),
        "rtpd_ms": {
            "oneOf": [
                {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "step"],
                    "properties": {
                        "start": {"type": "number", "minimum": 0},
                        "stop": {"type": "number", "minimum": 0},
                        "step": _pos,
                    },
                },
            ]
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "enabled": {"type": "boolean", "default": True},
                "duration_s": dict(_pos, default=200.0),
                "warmup_s": {"type": "number", "minimum": 0, "default": 20.0},
                "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer"},
                          "default": list(range(1, 31))},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "default": {},
            "properties": {
                "n_max": dict(_posint, default=30),
                "mva": {"enum": ["exact", "approx"], "default": "exact"},
                "tail_tolerance": dict(_pos, default=1e-9),
            },
        },
    },
}

_PHY_MS = {"slot_time_ms": "slot_time", "sifs_ms": "sifs", "difs_ms": "difs",
           "plcp_overhead_ms": "plcp_overhead"}


@dataclass(frozen=True)
class Scenario:
    name: str
    classes: RateClassConfig
    params: PhyMacParams
    w_conn: int
    rtpd_ms: tuple[float, ...]
    sim_enabled: bool
    duration: float
    warmup: float
    seeds: tuple[int, ...]
    n_max: int
    mva: str
    tail_tolerance: float

    @property
    def rtpd(self) -> tuple[float, ...]:
        return tuple(r / 1000.0 for r in self.rtpd_ms)


def _fill_defaults(doc, schema):
    if schema.get("type") != "object" or not isinstance(doc, dict):
        return
    for key, sub in schema.get("properties", {}).items():
        if key not in doc and "default" in sub:
            doc[key] = copy.deepcopy(sub["default"])
        if key in doc:
            _fill_defaults(doc[key], sub)


def _where(err) -> str:
    return err.json_path if hasattr(err, "json_path") else "/".join(map(str, err.absolute_path))


def expand_rtpd(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(x) for x in spec]
    start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    if stop < start:
        raise ScenarioError("$.rtpd_ms: stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 9) for i in range(n)]


def parse_scenario(doc: dict) -> Scenario:
    doc = copy.deepcopy(doc)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ScenarioError("; ".join(f"{_where(e)}: {e.message}" for e in errors))
    _fill_defaults(doc, SCHEMA)

    cls = doc["classes"]
    hol = [c.get("hol_probability") for c in cls]
    if any(h is not None for h in hol) and any(h is None for h in hol):
        raise ScenarioError("$.classes: give hol_probability for every class or for none")
    try:
        rcfg = RateClassConfig.from_counts([c["rate_mbps"] * 1e6 for c in cls], [c["count"] for c in cls],
                                           None if hol[0] is None else hol)
    except InvalidParameterError as exc:
        raise ScenarioError(f"$.classes: {exc}") from exc

    phy = {}
    for key, val in doc["phy"].items():
        if key in _PHY_MS:
            phy[_PHY_MS[key]] = val / 1000.0
        elif key == "control_rate_mbps":
            phy["control_rate"] = val * 1e6
        else:
            phy[key] = val
    try:
        params = PhyMacParams(**phy)
    except InvalidParameterError as exc:
        raise ScenarioError(f"$.phy: {exc}") from exc

    sim = doc["sim"]
    if not sim["duration_s"] > sim["warmup_s"]:
        raise ScenarioError("$.sim: duration_s must exceed warmup_s")
    solver = doc["solver"]
    return Scenario(
        name=doc["name"],
        classes=rcfg,
        params=params,
        w_conn=doc["w_conn"],
        rtpd_ms=tuple(expand_rtpd(doc["rtpd_ms"])),
        sim_enabled=sim["enabled"],
        duration=float(sim["duration_s"]),
        warmup=float(sim["warmup_s"]),
        seeds=tuple(sim["seeds"]),
        n_max=solver["n_max"],
        mva=solver["mva"],
        tail_tolerance=float(solver["tail_tolerance"]),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc)
