"""Scenario file parsing: strict INI-style documents.

Sections: [model] (r, rate spec, mechanism spec), [population] (N list,
initial law), [run] (T, h, seed, replicas), [lux3] (coefficients, when the
mechanism is lux3), [checks] (lattice meshes and tolerances).  Unknown keys
or sections are errors; all validation happens before any computation.

Coefficient entries are either float literals (constants) or named time
profiles: const:c, linear:a,b (a + b*t), sin:a,b,w (a + b*sin(w*t)).
"""

from __future__ import annotations

import configparser
import math
from typing import Callable

import numpy as np

from .errors import ScenarioError
from .harness import CheckSettings, InitialLaw, Scenario
from .kernel import RateField
from .lux3 import Lux3Params

_ALLOWED_KEYS = {
    "model": {"r", "rate", "rate_matrix", "rate_matrix0", "rate_matrix1",
              "rate_qmid", "rate_qscale", "mechanism", "phi", "psi"},
    "population": {"n_values", "initial_law", "initial_point", "q0"},
    "run": {"t", "h", "seed", "replicas"},
    "lux3": {"alpha", "beta", "delta", "logf"},
    "checks": {"simplex_mesh", "q_min", "q_max", "q_points", "time_points", "b_lower"},
}


def make_profile(spec: str) -> Callable[[float], float]:
    """Parse one coefficient entry into a function of time."""
    spec = spec.strip()
    if ":" not in spec:
        try:
            c = float(spec)
        except ValueError:
            raise ScenarioError(f"bad coefficient {spec!r}: not a number or named profile")
        return lambda t, c=c: c
    name, _, argstr = spec.partition(":")
    try:
        args = [float(a) for a in argstr.split(",")]
    except ValueError:
        raise ScenarioError(f"bad profile arguments in {spec!r}")
    if name == "const" and len(args) == 1:
        return lambda t, c=args[0]: c
    if name == "linear" and len(args) == 2:
        return lambda t, a=args[0], b=args[1]: a + b * t
    if name == "sin" and len(args) == 3:
        return lambda t, a=args[0], b=args[1], w=args[2]: a + b * math.sin(w * t)
    raise ScenarioError(f"unknown profile {spec!r} (use const:c, linear:a,b or sin:a,b,w)")


def profile_is_constant(spec: str) -> bool:
    spec = spec.strip()
    return ":" not in spec or spec.startswith("const:")


class _Section:
    """Typed key access with spec-named error messages."""

    def __init__(self, name: str, data: dict[str, str]):
        self.name = name
        self.data = data

    def require(self, key: str) -> str:
        if key.lower() not in self.data:
            raise ScenarioError(f"missing required key {self.name}.{key}")
        return self.data[key.lower()]

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.data.get(key.lower(), default)

    def req_int(self, key: str) -> int:
        raw = self.require(key)
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"{self.name}.{key}: expected integer, got {raw!r}")

    def req_float(self, key: str) -> float:
        raw = self.require(key)
        try:
            return float(raw)
        except ValueError:
            raise ScenarioError(f"{self.name}.{key}: expected number, got {raw!r}")

    def opt_int(self, key: str, default: int) -> int:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"{self.name}.{key}: expected integer, got {raw!r}")

    def opt_float(self, key: str, default: float) -> float:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ScenarioError(f"{self.name}.{key}: expected number, got {raw!r}")


def _parse_matrix(text: str, r: int, where: str) -> np.ndarray:
    rows = [row.strip() for row in text.split(";") if row.strip()]
    if len(rows) != r:
        raise ScenarioError(f"{where}: expected {r} rows, got {len(rows)}")
    try:
        mat = np.array([[float(v) for v in row.replace(",", " ").split()] for row in rows])
    except ValueError:
        raise ScenarioError(f"{where}: non-numeric entry")
    if mat.shape != (r, r):
        raise ScenarioError(f"{where}: expected {r}x{r} entries")
    return mat


def _parse_vector(text: str, n: int, where: str) -> list[str]:
    parts = text.replace(",", " ").split() if ":" not in text else text.split()
    if len(parts) != n:
        raise ScenarioError(f"{where}: expected {n} entries, got {len(parts)}")
    return parts


def parse_scenario_string(text: str) -> Scenario:
    # no inline comments: ';' separates matrix rows inside values
    cp = configparser.ConfigParser(strict=True, interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario parse failure: {exc}") from exc

    for sec in cp.sections():
        if sec not in _ALLOWED_KEYS:
            raise ScenarioError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key.lower() not in {k.lower() for k in _ALLOWED_KEYS[sec]}:
                raise ScenarioError(f"unknown key {sec}.{key}")
    for sec in ("model", "population", "run"):
        if sec not in cp:
            raise ScenarioError(f"missing required section [{sec}]")

    model = _Section("model", dict(cp["model"]))
    population = _Section("population", dict(cp["population"]))
    run = _Section("run", dict(cp["run"]))

    r = model.req_int("r")
    if r < 2:
        raise ScenarioError("model.r must be >= 2")

    rate_kind = model.require("rate").strip().lower()
    if rate_kind == "zero":
        rate = RateField.zero(r)
    elif rate_kind == "constant":
        rate = RateField.constant(_parse_matrix(model.require("rate_matrix"), r, "model.rate_matrix"))
    elif rate_kind == "logistic":
        rate = RateField.logistic_blend(
            _parse_matrix(model.require("rate_matrix0"), r, "model.rate_matrix0"),
            _parse_matrix(model.require("rate_matrix1"), r, "model.rate_matrix1"),
            q_mid=model.opt_float("rate_qmid", 0.0),
            q_scale=model.opt_float("rate_qscale", 1.0),
        )
    else:
        raise ScenarioError(f"unknown rate selector {rate_kind!r} (zero | constant | logistic)")

    checks = CheckSettings()
    if "checks" in cp:
        cs = _Section("checks", dict(cp["checks"]))
        checks = CheckSettings(
            simplex_mesh=cs.opt_int("simplex_mesh", 32),
            q_min=cs.opt_float("q_min", -5.0),
            q_max=cs.opt_float("q_max", 5.0),
            q_points=cs.opt_int("q_points", 41),
            time_points=cs.opt_int("time_points", 1000),
            b_lower=cs.opt_float("b_lower", 1e-9),
        )

    mech_kind = model.require("mechanism").strip().lower()
    affine_phi = affine_psi = None
    lux_params = None
    lux_constant = False
    if mech_kind == "affine":
        affine_phi = make_profile(model.require("phi"))
        affine_psi = make_profile(model.require("psi"))
    elif mech_kind == "lux3":
        if r != 3:
            raise ScenarioError("lux3 mechanism needs model.r = 3")
        if "lux3" not in cp:
            raise ScenarioError("missing required section [lux3]")
        lux = _Section("lux3", dict(cp["lux3"]))
        alpha_specs = _parse_vector(lux.require("alpha"), 3, "lux3.alpha")
        beta_specs = _parse_vector(lux.require("beta"), 3, "lux3.beta")
        delta_specs = _parse_vector(lux.require("delta"), 3, "lux3.delta")
        logf_spec = lux.require("logF").strip()
        lux_constant = all(profile_is_constant(s) for s in
                           alpha_specs + beta_specs + delta_specs + [logf_spec])
        lux_params = Lux3Params(
            alpha=tuple(make_profile(s) for s in alpha_specs),
            beta=tuple(make_profile(s) for s in beta_specs),
            delta=tuple(make_profile(s) for s in delta_specs),
            log_fundamental=make_profile(logf_spec),
            b_lower=checks.b_lower,
        )
    else:
        raise ScenarioError(f"unknown mechanism {mech_kind!r} (affine | lux3)")

    n_raw = population.require("n_values").replace(",", " ").split()
    try:
        n_values = tuple(int(v) for v in n_raw)
    except ValueError:
        raise ScenarioError("population.n_values: expected integers")
    initial = InitialLaw(
        kind=population.require("initial_law").strip().lower(),
        point=np.array([float(v) for v in
                        _parse_vector(population.require("initial_point"), r,
                                      "population.initial_point")]),
        q0=population.req_float("q0"),
    )

    T = run.req_float("T")
    h = run.req_float("h")
    seed = run.req_int("seed")
    replicas = run.req_int("replicas")

    scenario = Scenario(
        r=r, n_values=n_values, T=T, h=h, seed=seed, replicas=replicas,
        rate=rate, mech_kind=mech_kind, initial=initial,
        affine_phi=affine_phi, affine_psi=affine_psi, lux_params=lux_params,
        checks=checks,
    )
    if lux_params is not None:
        # reject scenarios whose clearing denominator can vanish on the simplex
        sample_ts = np.linspace(0.0, T, 101)
        lux_params.validate_times(sample_ts)
    object.__setattr__(scenario, "_lux_constant", lux_constant)
    return scenario


def parse_scenario_file(path: str) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario_string(text)
