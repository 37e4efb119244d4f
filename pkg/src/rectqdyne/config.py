"""JSON configuration documents.

A config is one JSON object whose sections mirror the dataclasses::

    {
      "protocol": "in_situ",
      "interaction": {"alpha": 1.7907},
      "readout": {"mean_photons": 0.057, "contrast": 0.3},
      "signal": {"frequency": 166663.636, "amplitude": 6.64e-7},
      "geometry": {"points_per_trace": 4000, "sample_interval": 2.75e-5},
      "n_traces": 25000,
      "charge_infidelity": 0.3,
      "init_success_prob": 0.6,
      "master_seed": 7
    }

Unknown keys anywhere are rejected.  ``{"preset": "in_situ", ...}`` starts
from :func:`~rectqdyne.protocols.reference_config` and overrides top-level
scalars.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .physics import InteractionParams
from .protocols import PhotonModel, Protocol, ProtocolConfig, reference_config
from .signal_model import NoiseMode, PhotonReadoutModel, TargetSignal, TraceGeometry

_SECTIONS = {
    "interaction": InteractionParams,
    "readout": PhotonReadoutModel,
    "signal": TargetSignal,
    "geometry": TraceGeometry,
}
_ENUMS = {"protocol": Protocol, "photon_model": PhotonModel, "noise_mode": NoiseMode}


def _check_keys(data, cls, path):
    if not isinstance(data, dict):
        raise ConfigError("must be a JSON object", path or None)
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key(s): {', '.join(where + k for k in unknown)}", path or None)


def _convert(name, value, path):
    if name in _ENUMS:
        try:
            return _ENUMS[name](value)
        except ValueError:
            choices = ", ".join(e.value for e in _ENUMS[name])
            raise ConfigError(f"must be one of {choices}", path) from None
    if name == "ssr_repetitions":
        return tuple(value)
    return value


def _build(cls, data, path=""):
    _check_keys(data, cls, path)
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key in _SECTIONS and cls is ProtocolConfig:
            kwargs[key] = _build(_SECTIONS[key], value, sub)
        else:
            kwargs[key] = _convert(key, value, sub)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), path or None) from None


def config_from_dict(data) -> ProtocolConfig:
    data = dict(data)
    if "preset" in data:
        base = reference_config(_convert("protocol", data.pop("preset"), "preset"))
        base_dict = config_to_dict(base)
        for key, value in data.items():
            if key in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError("must be a JSON object", key)
                base_dict[key].update(value)
            else:
                base_dict[key] = value
        data = base_dict
    return _build(ProtocolConfig, data)


def load_config(path) -> ProtocolConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})") from None
    return config_from_dict(data)


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_to_dict(config: ProtocolConfig) -> dict:
    return _plain(dataclasses.asdict(config))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: ProtocolConfig) -> str:
    """SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(config_to_dict(config)).encode()).hexdigest()
