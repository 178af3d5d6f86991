"""Flat ``key=value`` experiment configs.

Every key is declared in ``KEYS`` with a parser and a default; unknown keys
are rejected. ``dump`` writes a canonical form that parses back to an equal
config.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .fields import GridSpec, read_snapshot
from .operators import make_operator, Operator
from .sublevel import ObstacleSet


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple[float, ...]:
    s = s.strip()
    return tuple(float(v) for v in s.split(",")) if s else ()


def _ints(s: str) -> tuple[int, ...]:
    s = s.strip()
    return tuple(int(v) for v in s.split(",")) if s else ()


def _opt_float(s: str):
    s = s.strip()
    return None if s in ("", "none", "auto") else float(s)


def _str(s: str) -> str:
    return s.strip()


def parse_grid(spec: str) -> GridSpec:
    """``"lo:hi:n,lo:hi:n"`` -> GridSpec."""
    lower, upper, counts = [], [], []
    for part in spec.split(","):
        lo, hi, n = part.split(":")
        lower.append(float(lo))
        upper.append(float(hi))
        counts.append(int(n))
    return GridSpec(tuple(lower), tuple(upper), tuple(counts))


def format_grid(g: GridSpec) -> str:
    return ",".join(f"{lo!r}:{hi!r}:{n}" for lo, hi, n in zip(g.lower, g.upper, g.counts))


# key -> (parser, default). Defaults describe the radial example in 2D.
KEYS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "seed": (int, 0),
    "grid": (_str, "-4.0:4.0:101,-4.0:4.0:101"),
    "K.kind": (_str, "ball"),
    "K.center": (_floats, (0.0, 0.0)),
    "K.radius": (float, 1.0),
    "K.file": (_str, ""),
    "op.kind": (_str, "nonlocal_eikonal"),
    "op.b": (float, 1.0),
    "op.a_drift": (float, 0.0),
    "op.c": (float, 0.0),
    "op.gamma": (_str, "isotropic"),
    "op.V": (_str, "arctan_shifted:0.0"),
    "op.a_coef": (float, 1.0),
    "op.alpha": (float, 0.5),
    "init.kind": (_str, "cone"),
    "init.path": (_str, ""),
    "evolve.t_end": (float, 0.5),
    "evolve.cfl_first": (float, 0.5),
    "evolve.cfl_second": (float, 0.25),
    "evolve.snapshots": (_floats, ()),
    "evolve.eps_grad": (_opt_float, None),
    "evolve.c0": (_opt_float, None),
    "envelope.lambda": (float, 0.5),
    "envelope.q": (_opt_float, None),
    "envelope.search": (_str, "auto"),
    "envelope.q_list": (_floats, (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)),
    "envelope.fraction": (float, 0.5),
    "analysis.qc_tol": (_opt_float, None),
    "analysis.convex_tol": (float, 1.0),
    "analysis.levels": (_floats, (1.5,)),
    "analysis.relabel": (_str, "sqrt"),
    "analysis.shift": (float, 0.5),
    "check.n_samples": (int, 10_000),
    "check.beta": (_floats, (0.9, 0.99, 0.999)),
    "check.r_lo": (float, 1.0),
    "check.r_hi": (float, 10.0),
    "check.p_max": (float, 10.0),
    "oracle.R": (float, 1.0),
    "oracle.t": (float, 0.5),
    "oracle.r": (_floats, (0.0, 0.5, 1.0, 2.0, 3.0)),
    "oracle.variant": (_str, "s51"),
    "oracle.k": (float, 1.0),
    "oracle.c0": (float, 1.0),
    "oracle.C_scale": (float, 1.0),
    "oracle.times": (_floats, (0.0, 0.1, 0.25, 0.5)),
    "oracle.boxes": (_floats, (1.0, 2.0, 3.0, 4.0)),
    "convergence.N": (_ints, (101, 201, 401)),
    "convergence.mode": (_str, "radial"),
    "convergence.r_max": (float, 8.0),
}


def _canon(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_canon(e) for e in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key not in KEYS:
            raise KeyError(key)
        return self.values.get(key, KEYS[key][1])

    def set(self, key: str, raw: str) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parser = KEYS[key][0]
        try:
            self.values[key] = parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None

    def resolved(self) -> dict[str, Any]:
        return {k: self[k] for k in sorted(KEYS)}

    def dump(self) -> str:
        return "".join(f"{k}={_canon(v)}\n" for k, v in self.resolved().items())

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.resolved() == other.resolved()

    # builders -----------------------------------------------------------

    def grid(self) -> GridSpec:
        try:
            return parse_grid(self["grid"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid spec {self['grid']!r} ({exc})") from None

    def obstacle(self) -> ObstacleSet | None:
        kind = self["K.kind"]
        if kind == "none":
            return None
        if kind == "ball":
            dim = self.grid().dim
            return ObstacleSet.ball(self["K.center"][:dim], self["K.radius"])
        if kind == "mask":
            try:
                m = read_snapshot(self["K.file"])
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read K.file {self['K.file']!r}: {exc}") from None
            return ObstacleSet.from_mask(m.grid, m.values > 0.5)
        raise ConfigError(f"unknown K.kind {kind!r}")

    def operator(self) -> Operator:
        kind = self["op.kind"]
        K = self.obstacle()
        a_max = K.measure_total if K is not None else math.inf
        params: dict[str, Any]
        if kind == "nonlocal_eikonal":
            params = {"b": self["op.b"], "a_max": a_max}
        elif kind == "aniso_flow":
            params = {"a_drift": self["op.a_drift"], "b": self["op.b"], "c": self["op.c"],
                      "gamma": self["op.gamma"], "a_max": a_max}
        elif kind == "u_dep_flow":
            params = {"V": self["op.V"], "a_max": a_max}
        elif kind == "viscous_hj":
            params = {"a_coef": self["op.a_coef"], "alpha": self["op.alpha"]}
        else:
            raise ConfigError(f"unknown op.kind {kind!r}")
        try:
            return make_operator(kind, **params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        cfg.set(key.strip(), raw)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
