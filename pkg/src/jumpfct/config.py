"""Experiment configuration: INI text with dotted section names, checked against a JSON schema."""

from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .analytic_core import Degenerate, Erlang, Exponential, ProcessSpec, TwoPoint, WienerParams
from .bounds import DEFAULT_TIME_ORDER
from .montecarlo import DEFAULT_STRIDE, SimConfig, default_horizon
from .quadrature import DEFAULT_ORDER

DEFAULTS = {
    "sim": {"n_samples": 1000000, "horizon": "auto", "seed": 0, "stream_stride": DEFAULT_STRIDE, "bandwidth": "auto"},
    "grid": {"t_max": "auto", "step": 0.01},
    "bounds": {"n_max": "auto", "quad_order": DEFAULT_TIME_ORDER, "x_order": DEFAULT_ORDER},
    "outputs": {"directory": "out", "formats": "csv"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def load_schema() -> dict:
    text = resources.files("jumpfct").joinpath("data/config_schema.json").read_text()
    return json.loads(text)


def _coerce(text: str):
    raw = text.strip()
    low = raw.lower()
    if low in ("auto", "csv", "") or not raw:
        return low if low else raw
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_ini(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    return {sec: {k: _coerce(v) for k, v in parser.items(sec)} for sec in parser.sections()}


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "oneOf" and err.absolute_path:
            message = f"invalid value {err.instance!r}"
        else:
            message = err.message
        raise ConfigError(message, path)


@dataclass
class ExperimentConfig:
    spec: ProcessSpec
    sim: SimConfig
    t_max: float
    step: float
    n_max: int | None = None
    quad_order: int = DEFAULT_TIME_ORDER
    x_order: int = DEFAULT_ORDER
    bandwidth: float | str = "auto"
    directory: str = "out"
    formats: str = "csv"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        import numpy as np

        count = int(math.floor(self.t_max / self.step + 1e-9))
        return np.arange(1, count + 1) * self.step


def _spec_from(raw) -> ProcessSpec:
    w = raw["spec.wiener"]
    wiener = WienerParams(float(w["mu"]), float(w["sigma2"]), float(w.get("x0", 0.0)))
    j = raw["spec.jumps"]
    if j["kind"] == "degenerate":
        jumps = Degenerate(float(j["a"]))
    else:
        jumps = TwoPoint(float(j["a"]), float(j["b"]), float(j["eta"]))
    r = raw["spec.renewals"]
    renewals = Exponential(float(r["lam"])) if r["kind"] == "exponential" else Erlang(int(r["n"]), float(r["lam"]))
    return ProcessSpec(wiener, jumps, renewals, float(raw["spec"]["boundary_s"]))


def build(raw: dict) -> ExperimentConfig:
    validate(raw)
    merged = {k: dict(v) for k, v in raw.items()}
    for sec, vals in DEFAULTS.items():
        merged[sec] = {**vals, **merged.get(sec, {})}
    try:
        spec = _spec_from(merged)
    except ValueError as exc:
        raise ConfigError(str(exc), "spec") from exc
    sim = merged["sim"]
    horizon = default_horizon(spec) if sim["horizon"] == "auto" else float(sim["horizon"])
    try:
        sim_cfg = SimConfig(int(sim["n_samples"]), horizon, int(sim["seed"]), int(sim["stream_stride"]))
    except ValueError as exc:
        raise ConfigError(str(exc), "sim") from exc
    grid = merged["grid"]
    t_max = horizon if grid["t_max"] == "auto" else float(grid["t_max"])
    step = float(grid["step"])
    if not t_max > step:
        raise ConfigError(f"t_max={t_max} must exceed step={step}", "grid.t_max")
    bnd = merged["bounds"]
    out = merged["outputs"]
    return ExperimentConfig(
        spec=spec,
        sim=sim_cfg,
        t_max=t_max,
        step=step,
        n_max=None if bnd["n_max"] == "auto" else int(bnd["n_max"]),
        quad_order=int(bnd["quad_order"]),
        x_order=int(bnd["x_order"]),
        bandwidth=sim["bandwidth"],
        directory=str(out["directory"]),
        formats=str(out["formats"]),
        raw=raw,
    )


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return build(parse_ini(text))


def dump_ini(raw: dict) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for sec in sorted(raw):
        parser[sec] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in raw[sec].items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def figure1_raw(mu=1.0, eta=1.0, a=3.75, b=3.75, s=5.0, lam=0.2, sigma2=0.2) -> dict:
    """The base parameter set shared by the density figures and the closeness table."""
    jumps = {"kind": "degenerate", "a": a} if eta == 1.0 else {"kind": "two_point", "a": a, "b": b, "eta": eta}
    return {
        "spec": {"boundary_s": s},
        "spec.wiener": {"mu": mu, "sigma2": sigma2, "x0": 0.0},
        "spec.jumps": jumps,
        "spec.renewals": {"kind": "exponential", "lam": lam},
    }
