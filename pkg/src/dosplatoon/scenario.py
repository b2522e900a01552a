"""Scenario files: INI-style run configuration for the command line.

A scenario bundles everything a command needs: platoon constants, the
pole-placement target, tuning knobs, the attack schedule, the leader
maneuver, and simulation options. Unknown sections or keys are rejected
by name so typos surface immediately instead of silently falling back
to defaults. Values are validated through the same dataclass
constructors the library uses.

delta_grid syntax: "geom <lo> <hi> <n>", "linear <lo> <hi> <n>", or
"list v1,v2,...". Leader segments: "0:0, 1:2, 6:0" pairs of
start_time:command with strictly increasing start times.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import PlatoonError, ScenarioError
from .model import Gains, PerformanceSpec, PlatoonParams
from .sim import AttackSchedule, LeaderProfile
from .tuner import TuningConfig, default_delta_grid

_KNOWN = {
    "platoon": ("h", "tau_d", "Ts", "m"),
    "performance": ("lambda_M", "zeta_m"),
    "tuning": ("n_k1", "n_k2", "delta_grid", "Delta_max", "epsilon", "tol_feas"),
    "attack": ("kind", "Delta", "seed"),
    "leader": ("segments",),
    "sim": ("t_end", "substeps", "v0", "r", "L"),
}


@dataclass(frozen=True)
class SimOptions:
    t_end: float = 30.0
    substeps: int = 20
    v0: float = 15.0
    r: float = 2.0
    L: float = 4.5


@dataclass(frozen=True)
class Scenario:
    """Validated run configuration with reference-setup defaults."""

    params: PlatoonParams = field(
        default_factory=lambda: PlatoonParams(h=0.7, tau_d=0.1, Ts=0.05, m=10))
    spec: PerformanceSpec = field(
        default_factory=lambda: PerformanceSpec(lambda_M=-0.367, zeta_m=0.7))
    tuning: TuningConfig = field(default_factory=TuningConfig)
    attack: AttackSchedule = field(
        default_factory=lambda: AttackSchedule(kind="none"))
    leader: LeaderProfile = field(default_factory=LeaderProfile.standard)
    sim: SimOptions = field(default_factory=SimOptions)
    # True when the file set [attack] Delta explicitly; verify re-checks
    # certificates against that Delta instead of the one they were issued at.
    attack_delta_set: bool = False


def _parse_number(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError:
        want = "an integer" if kind is int else "a number"
        raise ScenarioError(
            f"key '{key}' in section [{section}] must be {want}, got {raw!r}"
        ) from None


def parse_delta_grid(text: str) -> np.ndarray:
    parts = text.split()
    if not parts:
        raise ScenarioError("delta_grid must not be empty")
    mode = parts[0]
    if mode in ("geom", "linear"):
        if len(parts) != 4:
            raise ScenarioError(
                f"delta_grid '{mode}' needs exactly <lo> <hi> <n>, got {text!r}"
            )
        try:
            lo, hi = float(parts[1]), float(parts[2])
            n = int(parts[3])
        except ValueError:
            raise ScenarioError(f"delta_grid has non-numeric bounds: {text!r}") from None
        if n < 1:
            raise ScenarioError(f"delta_grid needs n >= 1, got {n}")
        if not (0.0 < lo <= hi):
            raise ScenarioError(f"delta_grid needs 0 < lo <= hi, got {lo}, {hi}")
        if n == 1:
            return np.array([lo])
        fn = np.geomspace if mode == "geom" else np.linspace
        return fn(lo, hi, n)
    if mode == "list":
        body = text[len("list"):].strip()
        try:
            values = [float(v) for v in body.split(",") if v.strip()]
        except ValueError:
            raise ScenarioError(f"delta_grid list has non-numeric entries: {text!r}") from None
        if not values:
            raise ScenarioError("delta_grid list must not be empty")
        return np.array(values)
    raise ScenarioError(
        f"delta_grid must start with 'geom', 'linear', or 'list', got {mode!r}"
    )


def parse_segments(text: str) -> LeaderProfile:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ScenarioError(
                f"leader segment {chunk!r} must be start_time:command"
            )
        t_str, c_str = chunk.split(":", 1)
        try:
            pairs.append((float(t_str), float(c_str)))
        except ValueError:
            raise ScenarioError(f"leader segment {chunk!r} is not numeric") from None
    if not pairs:
        raise ScenarioError("leader segments must not be empty")
    try:
        return LeaderProfile(tuple(pairs))
    except PlatoonError as ex:
        raise ScenarioError(f"leader segments invalid: {ex}") from None


def load_scenario(path: str) -> Scenario:
    """Parse and validate an INI scenario file.

    Missing sections and keys fall back to the reference-setup defaults;
    anything present is checked by name and by value.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh, source=path)
    except OSError as ex:
        raise ScenarioError(f"cannot read scenario file: {ex}") from None
    except configparser.Error as ex:
        raise ScenarioError(f"scenario file is not valid INI: {ex}") from None

    for section in cp.sections():
        if section not in _KNOWN:
            raise ScenarioError(f"unknown section [{section}] in {path}")
        for key in cp[section]:
            if key not in _KNOWN[section]:
                raise ScenarioError(
                    f"unknown key '{key}' in section [{section}] of {path}"
                )

    def get(section, key, default, kind=float):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        if kind is str:
            return raw
        return _parse_number(section, key, raw, kind)

    base = Scenario()
    try:
        params = PlatoonParams(
            h=get("platoon", "h", base.params.h),
            tau_d=get("platoon", "tau_d", base.params.tau_d),
            Ts=get("platoon", "Ts", base.params.Ts),
            m=get("platoon", "m", base.params.m, int),
        )
        spec = PerformanceSpec(
            lambda_M=get("performance", "lambda_M", base.spec.lambda_M),
            zeta_m=get("performance", "zeta_m", base.spec.zeta_m),
        )
        grid = (parse_delta_grid(cp.get("tuning", "delta_grid").strip())
                if cp.has_option("tuning", "delta_grid") else default_delta_grid())
        tuning = TuningConfig(
            n_k1=get("tuning", "n_k1", base.tuning.n_k1, int),
            n_k2=get("tuning", "n_k2", base.tuning.n_k2, int),
            delta_grid=grid,
            Delta_max=get("tuning", "Delta_max", base.tuning.Delta_max, int),
            epsilon=get("tuning", "epsilon", base.tuning.epsilon),
            tol_feas=get("tuning", "tol_feas", base.tuning.tol_feas),
        )
        kind = get("attack", "kind", base.attack.kind, str)
        if kind == "explicit":
            raise ScenarioError(
                "attack kind 'explicit' needs per-link drop lists and is only "
                "available through the library API, not scenario files"
            )
        attack = AttackSchedule(
            kind=kind,
            Delta=get("attack", "Delta", base.attack.Delta, int),
            seed=get("attack", "seed", None, int) if cp.has_option("attack", "seed") else None,
        )
        leader = (parse_segments(cp.get("leader", "segments"))
                  if cp.has_option("leader", "segments") else base.leader)
        sim = SimOptions(
            t_end=get("sim", "t_end", base.sim.t_end),
            substeps=get("sim", "substeps", base.sim.substeps, int),
            v0=get("sim", "v0", base.sim.v0),
            r=get("sim", "r", base.sim.r),
            L=get("sim", "L", base.sim.L),
        )
    except ScenarioError:
        raise
    except PlatoonError as ex:
        raise ScenarioError(f"invalid value in {path}: {ex}") from None

    return Scenario(params=params, spec=spec, tuning=tuning, attack=attack,
                    leader=leader, sim=sim,
                    attack_delta_set=cp.has_option("attack", "Delta"))


def gains_from_args(kp: float | None, kd: float | None) -> Gains:
    if kp is None or kd is None:
        raise ScenarioError("both --kp and --kd are required for this command")
    try:
        return Gains(kp=kp, kd=kd)
    except PlatoonError as ex:
        raise ScenarioError(str(ex)) from None
