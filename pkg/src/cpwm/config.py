"""Run configuration: flat ``key = value`` text with ``[potential]`` sections.

Example::

    # Eckart barrier at the barrier-top energy
    scheme = constant_velocity
    energy = 400 cm-1
    n_points = 20
    dt = 0.05
    x_left = -2.0
    x_right = 2.0
    t_max = 7800

    [potential]
    type = eckart
    v0 = 400 cm-1
    alpha = 3.0

Each ``[potential]`` section adds one term; several sections are summed.
An optional ``[bench]`` section holds reference values for the ``bench`` verb.
Energies (``energy`` and potential heights) accept a trailing unit tag
``hartree`` or ``cm-1``; lengths are in bohr.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .potentials import (
    Eckart,
    EffectivePotential,
    PotentialModel,
    SumPotential,
    TabulatedPotential,
    TanhRamp,
    Zero,
    double_barrier,
)
from .trajgrid import SchemeKind
from .units import DEFAULT_MASS, to_hartree

_REQUIRED = ("scheme", "energy", "n_points", "dt", "x_left", "x_right", "t_max")

# potential keys carrying an energy (unit tag allowed) or a length
_POTENTIAL_KEYS = {
    "eckart": ({"v0"}, {"alpha", "center"}),
    "tanh_ramp": ({"v_left", "v_right"}, {"x0", "beta"}),
    "barrier_ramp": ({"v0", "v_right"}, {"alpha", "beta", "center"}),
    "double_barrier": ({"v0", "v_delta"}, {"x0", "alpha", "beta"}),
    "tabulated": (set(), set()),
    "zero": (set(), set()),
}
_POTENTIAL_REQUIRED = {
    "eckart": ("v0", "alpha"),
    "tanh_ramp": ("v_right", "beta"),
    "barrier_ramp": ("v0", "alpha", "v_right", "beta"),
    "double_barrier": ("v0", "x0", "alpha", "beta", "v_delta"),
    "tabulated": ("file",),
    "zero": (),
}
_BENCH_KEYS = {"p_refl", "p_trans", "tol_refl", "tol_trans", "label", "unitarity_tol"}


def _number(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", key=key) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite", key=key)
    return value


def _energy(key, text):
    parts = text.split()
    if len(parts) == 1:
        return _number(key, parts[0])
    if len(parts) == 2:
        try:
            return to_hartree(_number(key, parts[0]), parts[1])
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", key=key) from None
    raise ConfigError(f"{key}: expected '<value> [hartree|cm-1]', got {text!r}", key=key)


def _integer(key, text):
    value = _number(key, text)
    if value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {text!r}", key=key)
    return int(value)


@dataclass
class RunConfig:
    scheme: str
    energy: float
    n_points: int
    dt: float
    x_left: float
    x_right: float
    t_max: float
    potential: list
    mass: float = DEFAULT_MASS
    x0: float | None = None
    beta: float | None = None
    edge_samples: int = 5
    stationarity_tol: float | None = None
    snapshot_stride: int | None = None
    output: str | None = None
    tol_refl: float | None = None
    tol_trans: float | None = None
    integrator: str = "euler"
    bench: dict = field(default_factory=dict)
    base_dir: str = field(default=".", repr=False, compare=False)

    def __post_init__(self):
        self.scheme = SchemeKind.parse(self.scheme).value
        if self.integrator != "euler":
            raise ConfigError("integrator: only 'euler' is available", key="integrator")
        if self.n_points < 5:
            raise ConfigError("n_points: need at least 5", key="n_points")
        if self.dt <= 0.0:
            raise ConfigError("dt: must be positive", key="dt")
        if self.t_max < 0.0:
            raise ConfigError("t_max: must be non-negative", key="t_max")
        if not self.x_left < self.x_right:
            raise ConfigError("x_left must be below x_right", key="x_left")
        if self.mass <= 0.0:
            raise ConfigError("mass: must be positive", key="mass")
        if not self.potential:
            raise ConfigError("missing [potential] section", key="potential")

    # -- model construction -----------------------------------------------------
    def build_potential(self) -> PotentialModel:
        terms = [potential_from_dict(p, self.base_dir) for p in self.potential]
        return terms[0] if len(terms) == 1 else SumPotential(tuple(terms))

    def build_veff(self, potential: PotentialModel) -> EffectivePotential | None:
        """Ramp trajectory potential; ``None`` lets the grid builder choose."""
        if SchemeKind.parse(self.scheme) is not SchemeKind.RAMP:
            return None
        va, vb = potential.asymptotes()
        x0 = potential.center() if self.x0 is None else self.x0
        beta = 1.0 / potential.scale() if self.beta is None else self.beta
        if va == vb:
            return EffectivePotential.zero()
        return EffectivePotential.ramp(va, vb, x0, beta)

    # -- serialisation ------------------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        if not out["bench"]:
            out.pop("bench")
        return out

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "RunConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key {key!r}", key=key)
        for key in _REQUIRED + ("potential",):
            if key not in data:
                raise ConfigError(f"missing required key {key!r}", key=key)
        return cls(**data, base_dir=str(base_dir))

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data, self.base_dir)


def potential_from_dict(spec: dict, base_dir=".") -> PotentialModel:
    """Build a potential from a section dictionary (or a model ``to_dict`` output)."""
    kind = spec.get("type")
    if kind == "eckart":
        return Eckart(spec["v0"], spec["alpha"], spec.get("center", 0.0))
    if kind == "tanh_ramp":
        return TanhRamp(spec.get("v_left", 0.0), spec["v_right"], spec.get("x0", 0.0), spec["beta"])
    if kind == "barrier_ramp":
        c = spec.get("center", 0.0)
        return SumPotential((Eckart(spec["v0"], spec["alpha"], c),
                             TanhRamp(0.0, spec["v_right"], c, spec["beta"])))
    if kind == "double_barrier":
        return double_barrier(spec["v0"], spec["x0"], spec["alpha"], spec["beta"], spec["v_delta"])
    if kind == "sum":
        return SumPotential(tuple(potential_from_dict(t, base_dir) for t in spec["terms"]))
    if kind == "tabulated":
        if "file" in spec:
            path = Path(spec["file"])
            if not path.is_absolute():
                path = Path(base_dir) / path
            return TabulatedPotential.from_file(path)
        return TabulatedPotential(spec["x"], spec["v"])
    if kind == "zero":
        return Zero()
    raise ConfigError(f"unknown potential type {kind!r}", key="type")


def _parse_potential_section(items, where) -> dict:
    if "type" not in items:
        raise ConfigError(f"{where}: missing required key 'type'", key="type")
    kind = items.pop("type")
    if kind not in _POTENTIAL_KEYS:
        raise ConfigError(f"{where}: unknown potential type {kind!r}", key="type")
    energies, lengths = _POTENTIAL_KEYS[kind]
    out = {"type": kind}
    for key, text in items.items():
        if key in energies:
            out[key] = _energy(key, text)
        elif key in lengths:
            out[key] = _number(key, text)
        elif kind == "tabulated" and key == "file":
            out[key] = text
        else:
            raise ConfigError(f"{where}: unknown key {key!r} for {kind}", key=key)
    for key in _POTENTIAL_REQUIRED[kind]:
        if key not in out:
            raise ConfigError(f"{where}: missing required key {key!r}", key=key)
    return out


def parse_config_text(text: str, base_dir=".") -> RunConfig:
    top: dict = {}
    sections: list = []
    current = top
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in ("potential", "bench"):
                raise ConfigError(f"line {lineno}: unknown section [{name}]", key=name)
            if name == "bench" and any(s[0] == "bench" for s in sections):
                raise ConfigError(f"line {lineno}: duplicate [bench] section", key="bench")
            current = {}
            sections.append((name, current, lineno))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key=key)
        current[key] = value

    data: dict = {}
    converters = {
        "scheme": str, "output": str, "integrator": str,
        "energy": lambda v: _energy("energy", v),
        "n_points": lambda v: _integer("n_points", v),
        "edge_samples": lambda v: _integer("edge_samples", v),
        "snapshot_stride": lambda v: _integer("snapshot_stride", v),
    }
    floats = {"dt", "x_left", "x_right", "t_max", "mass", "x0", "beta",
              "stationarity_tol", "tol_refl", "tol_trans"}
    for key, value in top.items():
        if key in converters:
            data[key] = converters[key](value)
        elif key in floats:
            data[key] = _number(key, value)
        else:
            raise ConfigError(f"unknown key {key!r}", key=key)

    data["potential"] = [
        _parse_potential_section(dict(items), f"[potential] at line {lineno}")
        for name, items, lineno in sections if name == "potential"
    ]
    for name, items, _ in sections:
        if name == "bench":
            bench = {}
            for key, value in items.items():
                if key not in _BENCH_KEYS:
                    raise ConfigError(f"[bench]: unknown key {key!r}", key=key)
                bench[key] = value if key == "label" or value == "oracle" else _number(key, value)
            data["bench"] = bench
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ConfigError(f"missing required key {missing[0]!r}", key=missing[0])
    if not data["potential"]:
        raise ConfigError("missing [potential] section", key="potential")
    return RunConfig.from_dict(data, base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key="config") from None
    return parse_config_text(text, base_dir=path.parent)
