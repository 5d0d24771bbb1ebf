"""INI-style configuration files.

    [model]
    L = 1
    epsilon = 0.05
    D_hat = 1
    grid_n = 320          ; optional, defaults to the coarsest resolving grid

    [A0]
    kind = constant
    params = 1

    [gamma]
    kind = affine
    params = 2, 1         ; gamma(x) = 2 + x

``params`` is a comma- or whitespace-separated list of numbers whose meaning
depends on ``kind`` (see ``CoefficientField``): piecewise and sampled fields
take interleaved ``x0, y0, x1, y1, ...`` pairs.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path

from .errors import ParameterError
from .model import COEFFICIENT_KINDS, CoefficientField, ModelParams, check_params

MODEL_KEYS = ("L", "epsilon", "D_hat", "grid_n")
FIELD_KEYS = ("kind", "params")


class ConfigError(ParameterError):
    """The configuration file is missing, malformed or describes invalid parameters."""


def _numbers(text: str, where: str) -> list[float]:
    parts = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    try:
        return [float(s) for s in parts]
    except ValueError as exc:
        raise ConfigError(f"{where}: params must be numbers ({exc})") from None


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive: D_hat, L
    return cp


def _field(cp, section: str) -> CoefficientField:
    if not cp.has_section(section):
        raise ConfigError(f"missing section [{section}]")
    sec = cp[section]
    unknown = set(sec) - set(FIELD_KEYS)
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(sorted(unknown))}")
    for key in FIELD_KEYS:
        if key not in sec:
            raise ConfigError(f"[{section}] is missing '{key}'")
    kind = sec["kind"].strip()
    if kind not in COEFFICIENT_KINDS:
        raise ConfigError(f"[{section}] kind must be one of {', '.join(COEFFICIENT_KINDS)}")
    vals = _numbers(sec["params"], f"[{section}]")
    try:
        return CoefficientField(kind, tuple(vals))
    except ParameterError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def parse_config(text: str) -> ModelParams:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not cp.has_section("model"):
        raise ConfigError("missing section [model]")
    extra = set(cp.sections()) - {"model", "A0", "gamma"}
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    m = cp["model"]
    unknown = set(m) - set(MODEL_KEYS)
    if unknown:
        raise ConfigError(f"[model] has unknown keys: {', '.join(sorted(unknown))}")
    vals = {}
    for key in ("L", "epsilon", "D_hat"):
        if key not in m:
            raise ConfigError(f"[model] is missing '{key}'")
        try:
            vals[key] = float(m[key])
        except ValueError:
            raise ConfigError(f"[model] {key} must be a number") from None
    grid_n = None
    if "grid_n" in m:
        try:
            grid_n = int(m["grid_n"])
        except ValueError:
            raise ConfigError("[model] grid_n must be an integer") from None
    p = ModelParams(
        L=vals["L"],
        epsilon=vals["epsilon"],
        D_hat=vals["D_hat"],
        A0=_field(cp, "A0"),
        gamma=_field(cp, "gamma"),
        grid_n=16 if grid_n is None else grid_n,
    )
    if grid_n is None and p.L > 0 and p.epsilon > 0:
        p = p.with_resolution()
    try:
        return check_params(p)
    except ParameterError as exc:
        raise ConfigError(exc.problems) from None


def load_config(path) -> ModelParams:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_config(p: ModelParams) -> str:
    """Serialize parameters in the format read by ``parse_config``."""
    lines = [
        "[model]",
        f"L = {_fmt(p.L)}",
        f"epsilon = {_fmt(p.epsilon)}",
        f"D_hat = {_fmt(p.D_hat)}",
        f"grid_n = {int(p.grid_n)}",
    ]
    for name, fld in (("A0", p.A0), ("gamma", p.gamma)):
        lines += ["", f"[{name}]", f"kind = {fld.kind}", "params = " + ", ".join(map(_fmt, fld.values))]
    return "\n".join(lines) + "\n"
