"""Run configuration: INI-style sections, comma lists, strict key checking."""

from __future__ import annotations

import configparser
import io
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

METHOD_CHOICES = ("nonsecular", "semisecular", "reduced", "secular_localized", "secular_eigen")
BASIS_CHOICES = ("localized", "eigen", "both")


class ConfigError(ValueError):
    pass


def _floats(text) -> tuple:
    text = str(text).strip()
    if text.startswith("linspace(") and text.endswith(")"):
        a, b, n = [s.strip() for s in text[9:-1].split(",")]
        return tuple(float(x) for x in np.linspace(float(a), float(b), int(n)))
    if not text:
        return ()
    return tuple(float(s) for s in text.split(","))


def _words(text) -> tuple:
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _terms(text) -> tuple:
    """``expr:coef; expr:coef`` -> ((expr, coef), ...)."""
    out = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        expr, _, coef = chunk.rpartition(":")
        if not expr:
            raise ConfigError(f"extra term {chunk!r} needs the form expr:coefficient")
        out.append((expr.strip(), float(coef)))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(f"{e}:{c!r}" for e, c in value)
        return ", ".join(_fmt(v) for v in value)
    return str(value)


# (section, key, attribute, parser, default)
_SCHEMA = [
    ("spin", "S", "S", float, 2.0),
    ("spin", "D", "D", float, -1.0),
    ("spin", "E", "E", float, 0.05),
    ("spin", "g", "g", float, 2.0),
    ("spin", "field_direction", "field_direction", _floats, (0.0, 0.0, 1.0)),
    ("spin", "extra_terms", "extra_terms", _terms, ()),
    ("spin", "pairing_threshold", "pairing_threshold", float, 0.5),
    ("bath", "form", "bath_form", str, "debye_cubic"),
    ("bath", "alpha", "alpha", float, 1e-3),
    ("bath", "cutoff", "cutoff", float, 10.0),
    ("bath", "table", "table", str, ""),
    ("bath", "couplings", "couplings", str, "quadrupolar"),
    ("bath", "strength", "strength", float, 1.0),
    ("grid", "temperatures", "temperatures", _floats, ()),
    ("grid", "temperature_unit", "temperature_unit", str, "energy"),
    ("grid", "fields", "fields", _floats, (0.0,)),
    ("methods", "methods", "methods", _words, ("nonsecular", "semisecular", "reduced")),
    ("methods", "basis", "basis", str, "localized"),
    ("methods", "order", "order", str, "adaptive"),
    ("tolerances", "overlap_threshold", "overlap_threshold", float, 0.5),
    ("tolerances", "sc_tol", "sc_tol", float, 1e-10),
    ("tolerances", "max_iter", "max_iter", int, 200),
    ("tolerances", "damping", "damping", float, 1.0),
    ("tolerances", "term_tol", "term_tol", float, 1e-10),
    ("tolerances", "max_order", "max_order", int, 8),
    ("tolerances", "bracket", "bracket", _bool, True),
    ("tunneling", "temperature", "tunnel_temperature", float, 1.0),
    ("tunneling", "pair", "tunnel_pair", int, 0),
    ("tunneling", "bias", "tunnel_bias", _floats, (-0.05, 0.05, 21.0)),
    ("output", "csv", "csv_name", str, "rates.csv"),
    ("output", "plot_prefix", "plot_prefix", str, "lambda_"),
]


@dataclass(frozen=True)
class RunConfig:
    S: float = 2.0
    D: float = -1.0
    E: float = 0.05
    g: float = 2.0
    field_direction: tuple = (0.0, 0.0, 1.0)
    extra_terms: tuple = ()
    pairing_threshold: float = 0.5
    bath_form: str = "debye_cubic"
    alpha: float = 1e-3
    cutoff: float = 10.0
    table: str = ""
    couplings: str = "quadrupolar"
    strength: float = 1.0
    temperatures: tuple = ()
    temperature_unit: str = "energy"
    fields: tuple = (0.0,)
    methods: tuple = ("nonsecular", "semisecular", "reduced")
    basis: str = "localized"
    order: str = "adaptive"
    overlap_threshold: float = 0.5
    sc_tol: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    term_tol: float = 1e-10
    max_order: int = 8
    bracket: bool = True
    tunnel_temperature: float = 1.0
    tunnel_pair: int = 0
    tunnel_bias: tuple = (-0.05, 0.05, 21.0)
    csv_name: str = "rates.csv"
    plot_prefix: str = "lambda_"
    warnings: tuple = field(default=(), compare=False)

    def validate(self) -> "RunConfig":
        for name in ("temperatures", "fields"):
            grid = getattr(self, name)
            if len(grid) == 0:
                raise ConfigError(f"{name} grid is empty")
            if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
                raise ConfigError(f"{name} grid must be strictly increasing")
        if any(t <= 0 for t in self.temperatures):
            raise ConfigError("temperatures must be positive")
        if not self.methods:
            raise ConfigError("method list is empty")
        bad = [m for m in self.methods if m not in METHOD_CHOICES]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHOD_CHOICES}")
        if self.basis not in BASIS_CHOICES:
            raise ConfigError(f"basis must be one of {BASIS_CHOICES}")
        if self.order != "adaptive":
            try:
                if int(self.order) < 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("order must be 'adaptive' or a non-negative integer") from None
        if self.temperature_unit not in ("energy", "kelvin"):
            raise ConfigError("temperature_unit must be 'energy' or 'kelvin'")
        if len(self.field_direction) != 3 or not np.any(self.field_direction):
            raise ConfigError("field_direction must be a non-zero 3-vector")
        if len(self.tunnel_bias) != 3 or int(self.tunnel_bias[2]) < 1:
            raise ConfigError("tunneling bias must be 'min, max, points'")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must be in (0, 1]")
        if self.bath_form == "tabulated" and not self.table:
            raise ConfigError("tabulated bath needs a table path")
        return self

    def echo(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, key, attr, _, _ in _SCHEMA:
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, key, _fmt(getattr(self, attr)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def reduced_bases(self) -> tuple:
        return ("localized", "eigen") if self.basis == "both" else (self.basis,)


def parse_config(text: str, strict: bool = True) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    known = {(s, k): (a, p) for s, k, a, p, _ in _SCHEMA}
    values, notes = {}, []
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            if (sec, key) not in known:
                msg = f"unknown key '{key}' in section [{sec}]"
                if strict:
                    raise ConfigError(msg)
                notes.append(msg)
                warnings.warn(msg, stacklevel=2)
                continue
            attr, parser = known[(sec, key)]
            try:
                values[attr] = parser(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for [{sec}] {key}: {raw!r} ({exc})") from exc
    return RunConfig(**values, warnings=tuple(notes)).validate()


def load_config(path, strict: bool = True) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, strict)


def defaults() -> dict:
    return {attr: default for _, _, attr, _, default in _SCHEMA}


_check = {f.name for f in fields(RunConfig)} - {"warnings"}
assert _check == {a for _, _, a, _, _ in _SCHEMA}, "schema and RunConfig drifted apart"
