"""Run configuration: strict JSON parsing, presets and builders.

A config has six sections. Every key is optional except where a preset
is not used; unknown keys are rejected with their dotted path.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .link import ChannelPlan, ConstellationSpec, build_link
from .ssfm import SimConfig

PRESETS = ("config1", "config2")


class ConfigError(ValueError):
    pass


_NUM = (int, float)
_OPT_NUM = (int, float, type(None))

# section -> key -> (allowed types, default)
SCHEMA = {
    "link": {
        "n_spans": ((int,), 20),
        "span_length_km": (_NUM, 100.0),
        "alpha_db_km": (_NUM, 0.2),
        "dispersion_ps_nm_km": (_NUM, 16.5),
        "aeff_um2": (_OPT_NUM, 80.0),
        "gamma_per_w_km": (_OPT_NUM, None),
        "n2": (_NUM, 2.6e-20),
        "nf_db": (_NUM, 5.0),
        "mode": ((str,), "gain"),
        "wavelength_nm": (_NUM, 1550.0),
        "ase_bandwidth_ghz": (_OPT_NUM, None),
        "noise_convention": ((str,), "physical"),
    },
    "plan": {
        "symbol_rate_gbd": (_NUM, 49.0),
        "spacing_ghz": (_NUM, 50.0),
        "channels": ((int,), 1),
        "powers_dbm": ((list,), [-4.0, 6.0, 1.0]),
    },
    "format": {
        "name": ((str,), "16qam"),
        "points": ((list, type(None)), None),
    },
    "mc": {
        "samples": ((int,), 1 << 16),
        "seed": ((int,), 0),
        "x4": ((str,), "zero"),
        "convention": ((str,), "exact"),
        "ndfwm": ((bool,), True),
    },
    "ssfm": {
        "symbols": ((int,), 1 << 14),
        "sps": ((int,), 4),
        "rolloff": (_NUM, 0.001),
        "max_phase": (_NUM, 3e-3),
        "max_step_km": (_NUM, 1.0),
        "fixed_step_km": (_OPT_NUM, None),
        "runs": ((int,), 4),
        "seed": ((int,), 0),
        "dbp": ((bool,), True),
        "workers": ((int,), 1),
        "tolerance_db": (_NUM, 0.75),
    },
    "output": {
        "dir": ((str,), "results"),
    },
}
_CHOICES = {("link", "mode"): ("gain", "power"),
            ("link", "noise_convention"): ("physical", "log-gain"),
            ("mc", "x4"): ("zero", "mc"),
            ("mc", "convention"): ("exact", "simplified")}


def _validate(raw):
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object")
    out = {}
    for sec, value in raw.items():
        if sec == "name":
            continue
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section {sec!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"{sec}: must be an object")
        for key in value:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
    for sec, keys in SCHEMA.items():
        given = raw.get(sec, {})
        out[sec] = {}
        for key, (types, default) in keys.items():
            v = given.get(key, copy.deepcopy(default))
            # bool is an int subclass; keep the two apart
            if isinstance(v, bool) and bool not in types:
                raise ConfigError(f"{sec}.{key}: expected {_names(types)}, got bool")
            if not isinstance(v, types):
                raise ConfigError(f"{sec}.{key}: expected {_names(types)}, got {type(v).__name__}")
            if (sec, key) in _CHOICES and v not in _CHOICES[(sec, key)]:
                raise ConfigError(f"{sec}.{key}: must be one of {_CHOICES[(sec, key)]}, got {v!r}")
            out[sec][key] = v
    p = out["plan"]["powers_dbm"]
    if len(p) != 3 or not all(isinstance(x, _NUM) and not isinstance(x, bool) for x in p):
        raise ConfigError("plan.powers_dbm: expected [start, stop, step]")
    if p[2] <= 0 or p[1] < p[0]:
        raise ConfigError("plan.powers_dbm: need start <= stop and step > 0")
    pl = out["plan"]
    if pl["spacing_ghz"] < pl["symbol_rate_gbd"]:
        raise ConfigError(f"plan: channel overlap: {pl['symbol_rate_gbd']} GBd needs spacing >= "
                          f"{pl['symbol_rate_gbd']} GHz, got {pl['spacing_ghz']} GHz")
    out["name"] = raw.get("name", "custom")
    return out


def _names(types):
    return "/".join("null" if t is type(None) else t.__name__ for t in types)


@dataclass
class RunConfig:
    data: dict

    @property
    def name(self):
        return self.data["name"]

    def __getitem__(self, sec):
        return self.data[sec]

    def to_dict(self):
        return copy.deepcopy(self.data)

    def dumps(self):
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def digest(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]

    def override(self, **changes):
        """Copy with ``section__key=value`` overrides, revalidated."""
        d = self.to_dict()
        for k, v in changes.items():
            sec, key = k.split("__", 1)
            d.setdefault(sec, {})[key] = v
        return RunConfig(_validate(d))

    # builders -------------------------------------------------------------

    @property
    def powers_dbm(self):
        a, b, s = self.data["plan"]["powers_dbm"]
        return np.round(np.arange(a, b + s / 2, s), 10)

    def plan(self, power_dbm=0.0):
        p = self.data["plan"]
        return ChannelPlan.from_engineering(p["symbol_rate_gbd"], p["spacing_ghz"], p["channels"],
                                            power_dbm)

    def link(self):
        ln = self.data["link"]
        bw = ln["ase_bandwidth_ghz"]
        return build_link(ln["n_spans"], ln["span_length_km"], ln["alpha_db_km"],
                          ln["dispersion_ps_nm_km"], ln["nf_db"],
                          gamma_per_w_km=ln["gamma_per_w_km"], aeff_um2=ln["aeff_um2"],
                          n2=ln["n2"], wavelength=ln["wavelength_nm"] * 1e-9, mode=ln["mode"],
                          ase_bandwidth=None if bw is None else bw * 1e9, plan=self.plan(),
                          noise_convention=ln["noise_convention"])

    def constellation(self):
        f = self.data["format"]
        if f["points"] is not None:
            pts = np.array([complex(*p) for p in f["points"]])
            return ConstellationSpec(f["name"], pts)
        return ConstellationSpec.by_name(f["name"])

    def sim(self):
        s = self.data["ssfm"]
        return SimConfig(symbols=s["symbols"], sps=s["sps"], rolloff=float(s["rolloff"]),
                         max_phase=float(s["max_phase"]), max_step=s["max_step_km"] * 1e3,
                         fixed_step=None if s["fixed_step_km"] is None else s["fixed_step_km"] * 1e3,
                         runs=s["runs"], seed=s["seed"], dbp=s["dbp"], workers=s["workers"])


def parse_config(source):
    """Parse a JSON config from a path, a JSON string or a dict."""
    if isinstance(source, dict):
        return RunConfig(_validate(source))
    text = source
    where = "<string>"
    if isinstance(source, str) and not source.strip():
        raise ConfigError(f"{where}: empty config")
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        where = str(source)
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"{where}: {exc.strerror}") from None
    if not text.strip():
        raise ConfigError(f"{where}: empty config")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return RunConfig(_validate(raw))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("nsni.presets").joinpath(f"{name}.json").read_text()
    return parse_config(text)
