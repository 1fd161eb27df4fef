"""Run configuration: a line-oriented ``key = value`` grammar.

Grammar (one assignment per line, ``#`` starts a comment):

    field.kind   = zero | linear | taylor-green
    field.<opt>  = <float>              # per-kind options, e.g. amplitude
    params.R     = <float>              # dimensionless block ...
    params.St    = <float>
    params.Re    = <float>
    params.mu    = <float>              # ... or the direct-rates block
    params.kappa = <float>
    params.gamma = <float>
    params.g     = <float>, <float>, ...
    ic.<i>.y     = <float>, <float>, ...
    ic.<i>.w     = <float>, <float>, ...
    time.t0      = <float>
    time.T       = <float>
    time.N       = <int>
    scheme       = marching | picard
    tol          = <float>
    sensitivity.inverse = true | false

``ic.y`` / ``ic.w`` are shorthand for ``ic.0.*``.  Exactly one of the two
parameter blocks may appear (neither selects the documented defaults).
Unknown keys are hard errors, as are repeated keys; parsing touches no
files, network, or environment.  :func:`render_config` is the canonical
writer and round-trips through :func:`parse_config`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

import numpy as np

from .flowfield import FlowField, Params, derive_params, make_field, params_from_rates
from .solver import State

__all__ = ["ConfigError", "RunConfig", "parse_config", "render_config"]

DIMENSIONLESS_KEYS = ("R", "St", "Re")
RATE_KEYS = ("mu", "kappa", "gamma")
DEFAULT_DIMENSIONLESS = (("R", 2.0 / 3.0), ("St", 0.1), ("Re", 100.0))
FIELD_KINDS = ("zero", "linear", "taylor-green")
SCHEMES = ("marching", "picard")

_KEY_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.\[\]-]*$")


class ConfigError(ValueError):
    """Config syntax or constraint violation, with line/key context."""


@dataclass(frozen=True)
class RunConfig:
    """Validated, immutable run description (plain tuples throughout)."""

    field_kind: str = "zero"
    field_options: tuple = ()          # sorted (name, value) pairs
    param_mode: str = "dimensionless"  # or "rates"
    param_values: tuple = DEFAULT_DIMENSIONLESS
    g: tuple = (0.0, 0.0)
    ics: tuple = (((0.0, 0.0), (0.0, 0.0)),)  # ((y...), (w...)) per particle
    t0: float = 0.0
    T: float = 1.0
    N: int = 256
    scheme: str = "marching"
    tol: float = 1e-12
    sensitivity_inverse: bool = True

    def params(self) -> Params:
        vals = dict(self.param_values)
        g = np.asarray(self.g)
        if self.param_mode == "dimensionless":
            return derive_params(vals["R"], vals["St"], vals["Re"], g=g,
                                 dim=len(self.g))
        return params_from_rates(vals["mu"], vals["kappa"], vals["gamma"],
                                 g=g, dim=len(self.g))

    def field(self) -> FlowField:
        opts = dict(self.field_options)
        if self.field_kind == "zero":
            opts.setdefault("dim", len(self.g))
        return make_field(self.field_kind, **opts)

    def states(self) -> list[State]:
        return [State(y=np.asarray(y), w=np.asarray(w)) for y, w in self.ics]


def _parse_scalar(raw: str, lineno: int):
    if "," in raw:
        try:
            return tuple(float(tok) for tok in raw.split(","))
        except ValueError:
            raise ConfigError(f"line {lineno}: bad vector value {raw!r}") from None
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(raw)
    except ValueError:
        return raw  # bare word (field kind, scheme tag)


def _expect_vector(value, key: str):
    if isinstance(value, tuple):
        return value
    if isinstance(value, float):
        return (value,)
    raise ConfigError(f"{key}: expected a vector of numbers")


def _expect_float(value, key: str) -> float:
    if not isinstance(value, float):
        raise ConfigError(f"{key}: expected a number")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate; unknown keys and repeats are hard errors."""
    entries: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        # ic.y / ic.w shorthand
        if key in ("ic.y", "ic.w"):
            key = f"ic.0.{key[-1]}"
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = _parse_scalar(raw, lineno)

    kwargs: dict = {}
    consumed: set[str] = set()

    def take(key: str, default=None):
        consumed.add(key)
        return entries.get(key, default)

    kind = take("field.kind", "zero")
    if kind not in FIELD_KINDS:
        raise ConfigError(f"field.kind: unknown kind {kind!r} "
                          f"(choose from {', '.join(FIELD_KINDS)})")
    kwargs["field_kind"] = kind
    opts = []
    for key, value in entries.items():
        if key.startswith("field.") and key != "field.kind":
            consumed.add(key)
            opts.append((key[len("field."):], value))
    kwargs["field_options"] = tuple(sorted(opts))

    dimless = [k for k in DIMENSIONLESS_KEYS if f"params.{k}" in entries]
    rates = [k for k in RATE_KEYS if f"params.{k}" in entries]
    if dimless and rates:
        raise ConfigError(
            "params: ambiguous parameter block — give either R/St/Re or "
            "mu/kappa/gamma, not both")
    if dimless or rates:
        want = DIMENSIONLESS_KEYS if dimless else RATE_KEYS
        have = dimless or rates
        missing = [k for k in want if k not in have]
        if missing:
            raise ConfigError(f"params: incomplete block, missing "
                              f"{', '.join('params.' + k for k in missing)}")
        kwargs["param_mode"] = "dimensionless" if dimless else "rates"
        kwargs["param_values"] = tuple(
            (k, _expect_float(take(f"params.{k}"), f"params.{k}")) for k in want)
    g = take("params.g")
    if g is not None:
        kwargs["g"] = _expect_vector(g, "params.g")
    dim = len(kwargs.get("g", RunConfig.g))

    ic_keys = sorted(k for k in entries if k.startswith("ic."))
    if ic_keys:
        ics = []
        for i in range(len(ic_keys)):  # upper bound; loop breaks when absent
            ky, kw = f"ic.{i}.y", f"ic.{i}.w"
            if ky not in entries and kw not in entries:
                break
            y = _expect_vector(take(ky, (0.0,) * dim), ky)
            w = _expect_vector(take(kw, (0.0,) * dim), kw)
            if len(y) != len(w):
                raise ConfigError(f"ic.{i}: y and w dimensions differ")
            ics.append((y, w))
        if not ics:
            raise ConfigError("ic: initial-condition indices must start at 0")
        kwargs["ics"] = tuple(ics)

    t0 = take("time.t0")
    if t0 is not None:
        kwargs["t0"] = _expect_float(t0, "time.t0")
    T = take("time.T")
    if T is not None:
        kwargs["T"] = _expect_float(T, "time.T")
    N = take("time.N")
    if N is not None:
        N = _expect_float(N, "time.N")
        if N != int(N):
            raise ConfigError("time.N: expected an integer")
        kwargs["N"] = int(N)

    scheme = take("scheme")
    if scheme is not None:
        if scheme not in SCHEMES:
            raise ConfigError(f"scheme: unknown scheme {scheme!r}")
        kwargs["scheme"] = scheme
    tol = take("tol")
    if tol is not None:
        kwargs["tol"] = _expect_float(tol, "tol")
    inv = take("sensitivity.inverse")
    if inv is not None:
        if not isinstance(inv, bool):
            raise ConfigError("sensitivity.inverse: expected true or false")
        kwargs["sensitivity_inverse"] = inv

    unknown = sorted(set(entries) - consumed)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    cfg = RunConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.N < 2:
        raise ConfigError("time.N: need at least 2 steps")
    if not cfg.T > cfg.t0:
        raise ConfigError("time.T: horizon must exceed time.t0")
    if cfg.tol <= 0:
        raise ConfigError("tol: must be positive")
    if cfg.param_mode == "dimensionless":
        vals = dict(cfg.param_values)
        if not 0.0 < vals["R"] <= 2.0:
            raise ConfigError("params.R: density ratio must lie in (0, 2]")
        if vals["St"] <= 0 or vals["Re"] <= 0:
            raise ConfigError("params.St/params.Re: must be positive")
    else:
        vals = dict(cfg.param_values)
        if vals["mu"] < 0 or vals["kappa"] < 0:
            raise ConfigError("params.mu/params.kappa: must be nonnegative")
    dim = len(cfg.g)
    for i, (y, w) in enumerate(cfg.ics):
        if len(y) != dim:
            raise ConfigError(f"ic.{i}: dimension {len(y)} does not match "
                              f"params.g dimension {dim}")
    cfg.field()  # rejects bad field options early


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    """Canonical writer; ``parse_config(render_config(c)) == c``."""
    lines = [f"field.kind = {cfg.field_kind}"]
    for name, value in cfg.field_options:
        lines.append(f"field.{name} = {_fmt(value)}")
    for name, value in cfg.param_values:
        lines.append(f"params.{name} = {_fmt(value)}")
    lines.append(f"params.g = {_fmt(cfg.g)}")
    for i, (y, w) in enumerate(cfg.ics):
        lines.append(f"ic.{i}.y = {_fmt(y)}")
        lines.append(f"ic.{i}.w = {_fmt(w)}")
    lines.append(f"time.t0 = {_fmt(cfg.t0)}")
    lines.append(f"time.T = {_fmt(cfg.T)}")
    lines.append(f"time.N = {cfg.N}")
    lines.append(f"scheme = {cfg.scheme}")
    lines.append(f"tol = {_fmt(cfg.tol)}")
    lines.append(f"sensitivity.inverse = {_fmt(cfg.sensitivity_inverse)}")
    return "\n".join(lines) + "\n"
