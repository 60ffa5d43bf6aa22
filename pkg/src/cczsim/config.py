"""Run configuration: JSON schema, validation and conversion to simulator objects.

Units at this boundary are GHz and ns (MHz where the key says so).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import jsonschema

from .calibration import PulseConfig
from .dynamics import NoiseSpec
from .hamiltonian import (
    SYNTH_COUPLER_ANHARMONICITY,
    SYNTH_COUPLER_OFF,
    SYNTH_COUPLER_ON,
    DeviceSpec,
    synthetic_full_device,
)
from .hilbert import ModeSpec
from .io import config_hash

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: Mapping, required=(), **extra) -> dict:
    return {"type": "object", "properties": dict(props), "required": list(required),
            "additionalProperties": False, **extra}


_QUBIT = _obj({"label": {"type": "string"}, "frequency": _pos, "anharmonicity": _num,
               "levels": {"type": "integer", "minimum": 2}}, ["label", "frequency", "anharmonicity"])

SCHEMA = _obj(
    {
        "device": _obj(
            {
                "qubits": {"type": "array", "items": _QUBIT, "minItems": 3, "maxItems": 3},
                "couplings": {"type": "object", "additionalProperties": _num,
                              "propertyNames": {"pattern": "^[^-]+-[^-]+$"}},
                "switchable": {"type": "boolean"},
                "coupler": _obj({
                    "levels": {"type": "integer", "minimum": 2, "maximum": 3},
                    "on": {"type": "object", "additionalProperties": _pos},
                    "off": _pos,
                    "anharmonicity": _num,
                }),
            },
            ["qubits", "couplings"],
        ),
        "pulses": _obj({
            "ramp_stage1": {"type": "number", "minimum": 0},
            "ramp_cphase": {"type": "number", "minimum": 0},
            "dt_effective": _pos,
            "dt_full": _pos,
            "cphase_activation": {"enum": ["single", "both"]},
        }),
        "calibration": _obj({
            "shift_span_mhz": _pos,
            "shift_points": {"type": "integer", "minimum": 3},
            "time_max": _pos,
            "time_points": {"type": "integer", "minimum": 3},
            "phase_tol": _pos,
            "min_return": {"type": "number", "minimum": 0, "maximum": 1},
            "cphase_cap": _pos,
            "cphase_phase_tol": _pos,
            "ccphase_span_mhz": _pos,
            "ccphase_points": {"type": "integer", "minimum": 3},
        }),
        "robustness": _obj({
            "delta_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            "zeta_range_mhz": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            "grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        }),
        "noise": _obj({
            "t1": {"type": "object", "additionalProperties": _pos},
            "tphi": {"type": "object", "additionalProperties": _pos},
        }),
        "outputs": _obj({"directory": {"type": "string"}}),
    },
    ["device"],
)

DEFAULTS = {
    "pulses": {"ramp_stage1": 30.0, "ramp_cphase": 5.0, "dt_effective": 0.01, "dt_full": 0.005,
               "cphase_activation": "single"},
    "calibration": {"shift_span_mhz": 15.0, "shift_points": 61, "time_max": 250.0, "time_points": 120,
                    "phase_tol": 0.05, "min_return": 0.95, "cphase_cap": 60.0, "cphase_phase_tol": 0.02,
                    "ccphase_span_mhz": 12.0, "ccphase_points": 49},
    "robustness": {"delta_range": [-0.05, 0.05], "zeta_range_mhz": [-1.0, 1.0], "grid": [11, 11]},
    "noise": {"t1": {}, "tphi": {}},
    "outputs": {"directory": "out"},
}


class ConfigError(ValueError):
    """Schema or physics validation failure; ``errors`` lists path-qualified messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def schema_errors(raw: Mapping) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{path}: {err.message}")
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def section(self, name: str) -> dict:
        return {**DEFAULTS.get(name, {}), **self.raw.get(name, {})}

    def effective_spec(self) -> DeviceSpec:
        dev = self.raw["device"]
        modes = tuple(ModeSpec(q["label"], q["frequency"], q["anharmonicity"], q.get("levels", 3))
                      for q in dev["qubits"])
        couplings = {}
        for key, g in dev["couplings"].items():
            a, b = key.split("-")
            couplings[(a, b)] = g
        return DeviceSpec(modes, couplings, "effective", dev.get("switchable", True))

    def full_spec(self) -> DeviceSpec:
        c = self.raw["device"].get("coupler", {})
        return synthetic_full_device(
            self.effective_spec(),
            coupler_levels=c.get("levels", 2),
            coupler_on=c.get("on", SYNTH_COUPLER_ON),
            coupler_off=c.get("off", SYNTH_COUPLER_OFF),
            coupler_anharmonicity=c.get("anharmonicity", SYNTH_COUPLER_ANHARMONICITY),
        )

    def device_spec(self, model: str = "effective") -> DeviceSpec:
        if model == "effective":
            return self.effective_spec()
        if model == "full":
            return self.full_spec()
        raise ValueError(f"unknown model {model!r}")

    def pulse_config(self, model: str = "effective") -> PulseConfig:
        p, c = self.section("pulses"), self.section("calibration")
        return PulseConfig(
            ramp_stage1=p["ramp_stage1"], ramp_cphase=p["ramp_cphase"],
            dt=p["dt_full"] if model == "full" else p["dt_effective"],
            phase_tol=c["phase_tol"], min_return=c["min_return"],
            cphase_cap=c["cphase_cap"], cphase_phase_tol=c["cphase_phase_tol"],
            cphase_activation=p["cphase_activation"],
        )

    def noise(self) -> NoiseSpec:
        n = self.section("noise")
        return NoiseSpec(dict(n["t1"]), dict(n["tphi"]))


def parse_config(raw: Mapping) -> RunConfig:
    """Validate ``raw`` against the schema and the device invariants."""
    errors = schema_errors(raw)
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(json.loads(json.dumps(raw)))
    labels = [q["label"] for q in raw["device"]["qubits"]]
    if len(set(labels)) != 3:
        raise ConfigError(["device/qubits: labels must be distinct"])
    for key in raw["device"]["couplings"]:
        a, b = key.split("-")
        if a not in labels or b not in labels:
            raise ConfigError([f"device/couplings/{key}: unknown qubit label"])
    try:
        cfg.effective_spec().validate()
    except ValueError as exc:
        raise ConfigError([f"device: {exc}"]) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: invalid JSON ({exc})"]) from None
    return parse_config(raw)


def paper_config_path() -> Path:
    return Path(str(resources.files("cczsim") / "configs" / "paper.json"))
