"""System constants, target descriptions and the scenario file format.

A scenario file is plain ``key = value`` text split into blocks::

    [radar]
    K = 1024
    golay_len = 512
    Q = 32
    ...

    [target]            # repeated, one block per point target
    range_m = 8.5
    azimuth_deg = 0
    velocity_mps = 15
    mean_rcs_sqm = 10
    fixed_amplitude = 3.1623   # optional

    [random]            # alternative to [target] blocks
    count = 3
    mean_rcs_sqm = 10, 5, 3
    positions = grid    # or continuous (default)

    [run]
    snr_db = -15, -10, -5, 0, 5, 10    # or a single value, or inf
    trials = 200
    rng_seed = 1

``#`` starts a comment.  Unknown keys are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path

import numpy as np

C = 299_792_458.0

DEFAULT_RANGE_RES_M = 0.085


class ValidationError(ValueError):
    """A parameter set or scenario violates one of its invariants."""


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RadarParams:
    """All radar constants.  ``None`` means "use the derived default".

    Defaults reproduce the 60 GHz, 32-antenna, 100-packet setup: 1024 fast-time
    samples holding a zero-padded 512-chip Golay sequence, 0.085 m range bins,
    181 azimuth bins at 1 degree and a 201-point Doppler grid over +-30 m/s.
    """

    K: int = 1024
    golay_len: int = 512
    Q: int = 32
    N: int = 100
    delta_phi_deg: float = 1.0
    D: int = 201
    v_span_mps: float = 30.0
    fc_hz: float = 60.0e9
    Ts_s: float | None = None
    T_PRI_s: float | None = None
    d_m: float | None = None
    range_gate_m: tuple[float, float] = (0.0, 40.0)
    P_tilde: int = 3
    residue_threshold: float = 0.0
    # power-of-two gain applied when float spectra enter the fixed-point MF datapath
    fx_scale_log2: int = -25

    def __post_init__(self):
        object.__setattr__(self, "range_gate_m", tuple(float(v) for v in self.range_gate_m))
        self.validate()

    # -- resolved constants -------------------------------------------------
    @property
    def wavelength(self) -> float:
        return C / self.fc_hz

    @property
    def ts(self) -> float:
        return self.Ts_s if self.Ts_s is not None else 2.0 * DEFAULT_RANGE_RES_M / C

    @property
    def range_res(self) -> float:
        return C * self.ts / 2.0

    @property
    def fd_max(self) -> float:
        return 2.0 * self.v_span_mps / self.wavelength

    @property
    def t_pri(self) -> float:
        return self.T_PRI_s if self.T_PRI_s is not None else 1.0 / (2.0 * self.fd_max)

    @property
    def spacing(self) -> float:
        return self.d_m if self.d_m is not None else self.wavelength / 2.0

    @property
    def I(self) -> int:  # noqa: E743
        return int(math.floor(180.0 / self.delta_phi_deg + 1e-9)) + 1

    @property
    def max_range_bin(self) -> int:
        return int(math.floor(self.range_gate_m[1] / self.range_res + 1e-9))

    @property
    def min_range_bin(self) -> int:
        return int(math.ceil(self.range_gate_m[0] / self.range_res - 1e-9))

    def validate(self) -> None:
        if not _is_pow2(self.K):
            raise ValidationError(f"K must be a power of two, got {self.K}")
        if not _is_pow2(self.golay_len):
            raise ValidationError(f"golay_len must be a power of two, got {self.golay_len}")
        if self.golay_len > self.K:
            raise ValidationError("golay_len exceeds K")
        if self.Q < 1 or self.N < 1:
            raise ValidationError("Q and N must be >= 1")
        if self.D < 2:
            raise ValidationError("D must be >= 2")
        if not (0 < self.delta_phi_deg <= 180):
            raise ValidationError("delta_phi_deg must be in (0, 180]")
        if self.v_span_mps <= 0 or self.fc_hz <= 0:
            raise ValidationError("v_span_mps and fc_hz must be positive")
        for name in ("Ts_s", "T_PRI_s", "d_m"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive")
        lo, hi = self.range_gate_m
        if not (0 <= lo < hi):
            raise ValidationError("range_gate_m must satisfy 0 <= min < max")
        if self.max_range_bin > self.K - self.golay_len:
            raise ValidationError(
                f"range gate reaches bin {self.max_range_bin}, echo would leave the "
                f"zero-padded packet (K - golay_len = {self.K - self.golay_len})"
            )
        if self.fd_max * self.t_pri > 0.5 + 1e-12:
            raise ValidationError("Doppler aliasing: f_Dmax * T_PRI exceeds 1/2")
        if self.P_tilde < 1:
            raise ValidationError("P_tilde must be >= 1")
        if self.residue_threshold < 0:
            raise ValidationError("residue_threshold must be >= 0")

    def with_(self, **changes) -> "RadarParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    I: int  # noqa: E741
    range_res: float
    fd_max: float
    duty_cycle: float
    wavelength: float
    t_pri: float
    azimuth_deg: np.ndarray
    doppler_hz: np.ndarray
    velocity_mps: np.ndarray

    @property
    def velocity_step(self) -> float:
        return float(self.velocity_mps[1] - self.velocity_mps[0])


def derive(params: RadarParams) -> DerivedParams:
    I = params.I  # noqa: E741
    az = -90.0 + params.delta_phi_deg * np.arange(I)
    fd = np.linspace(-params.fd_max, params.fd_max, params.D)
    # exact antisymmetry, linspace can be off by an ulp
    fd = 0.5 * (fd - fd[::-1])
    return DerivedParams(
        I=I,
        range_res=params.range_res,
        fd_max=params.fd_max,
        duty_cycle=params.K * params.ts / params.t_pri,
        wavelength=params.wavelength,
        t_pri=params.t_pri,
        azimuth_deg=az,
        doppler_hz=fd,
        velocity_mps=fd * params.wavelength / 2.0,
    )


@dataclass(frozen=True)
class TargetSpec:
    range_m: float
    azimuth_deg: float
    velocity_mps: float
    mean_rcs_sqm: float = 1.0
    fixed_amplitude: float | None = None

    def check(self, params: RadarParams) -> None:
        lo, hi = params.range_gate_m
        if not (lo <= self.range_m <= hi):
            raise ValidationError(f"target range {self.range_m} m outside gate {params.range_gate_m}")
        if not (-90.0 <= self.azimuth_deg <= 90.0):
            raise ValidationError(f"target azimuth {self.azimuth_deg} outside [-90, 90]")
        if abs(self.velocity_mps) > params.v_span_mps:
            raise ValidationError(f"target velocity {self.velocity_mps} exceeds v_span")
        if not self.mean_rcs_sqm > 0:
            raise ValidationError("mean_rcs_sqm must be positive")


POSITION_MODES = ("continuous", "grid")


@dataclass(frozen=True)
class RandomTargets:
    """Draw ``len(mean_rcs_sqm)`` targets uniformly over the field of view each trial.

    ``positions="continuous"`` draws range, azimuth and velocity from continuous
    uniform distributions.  ``positions="grid"`` draws uniformly over the
    estimator's range bins, azimuth bins and Doppler bins inside the gate.
    """

    mean_rcs_sqm: tuple[float, ...]
    positions: str = "continuous"

    def __post_init__(self):
        object.__setattr__(self, "mean_rcs_sqm", tuple(float(m) for m in self.mean_rcs_sqm))
        if self.positions not in POSITION_MODES:
            raise ValidationError(f"positions must be one of {POSITION_MODES}")

    @property
    def count(self) -> int:
        return len(self.mean_rcs_sqm)

    def draw(self, params: RadarParams, rng: np.random.Generator) -> list[TargetSpec]:
        if self.positions == "grid":
            der = derive(params)
            kmin, kmax = params.min_range_bin, params.max_range_bin
            out = []
            for rcs in self.mean_rcs_sqm:
                k = int(rng.integers(kmin, kmax + 1))
                i = int(rng.integers(len(der.azimuth_deg)))
                j = int(rng.integers(len(der.velocity_mps)))
                out.append(TargetSpec(k * params.range_res, float(der.azimuth_deg[i]),
                                      float(der.velocity_mps[j]), float(rcs)))
            return out
        lo, hi = params.range_gate_m
        out = []
        for rcs in self.mean_rcs_sqm:
            r, az, v = rng.uniform((lo, -90.0, -params.v_span_mps), (hi, 90.0, params.v_span_mps))
            out.append(TargetSpec(float(r), float(az), float(v), float(rcs)))
        return out


@dataclass(frozen=True)
class Scenario:
    params: RadarParams = field(default_factory=RadarParams)
    targets: tuple[TargetSpec, ...] | RandomTargets = ()
    snr_db: tuple[float, ...] = (math.inf,)
    trials: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.targets, RandomTargets):
            object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in np.atleast_1d(self.snr_db)))
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.snr_db:
            raise ValidationError("snr_db must not be empty")
        if not (0 <= self.rng_seed < 2**64):
            raise ValidationError("rng_seed must be a 64-bit unsigned integer")
        if isinstance(self.targets, RandomTargets):
            if self.targets.count < 1 or any(m <= 0 for m in self.targets.mean_rcs_sqm):
                raise ValidationError("random targets need positive mean_rcs_sqm values")
        else:
            if not self.targets:
                raise ValidationError("deterministic scenario needs at least one target")
            for t in self.targets:
                t.check(self.params)

    @cached_property
    def derived(self) -> DerivedParams:
        return derive(self.params)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def targets_for_trial(self, rng: np.random.Generator) -> list[TargetSpec]:
        if isinstance(self.targets, RandomTargets):
            return self.targets.draw(self.params, rng)
        return list(self.targets)


# -- file format ------------------------------------------------------------

_RADAR_INT = {"K", "golay_len", "Q", "N", "D", "P_tilde", "fx_scale_log2"}
_RADAR_FLOAT = {"delta_phi_deg", "v_span_mps", "fc_hz", "residue_threshold"}
_RADAR_OPT_FLOAT = {"Ts_s", "T_PRI_s", "d_m"}
_TARGET_KEYS = {"range_m", "azimuth_deg", "velocity_mps", "mean_rcs_sqm", "fixed_amplitude"}
_SECTION_RE = re.compile(r"^\[(\w+)\]$")


def _floats(text: str, line: int) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioParseError(f"expected number(s), got {text!r}", line) from None


def _int(text: str, line: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise ScenarioParseError(f"expected integer, got {text!r}", line) from None


def parse_scenario(text: str) -> Scenario:
    radar: dict = {}
    targets: list[dict] = []
    random_block: dict | None = None
    run: dict = {}
    section = None
    current: dict | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1)
            if section == "radar":
                current = radar
            elif section == "target":
                current = {}
                targets.append(current)
            elif section == "random":
                if random_block is not None:
                    raise ScenarioParseError("duplicate [random] block", lineno)
                current = random_block = {}
            elif section == "run":
                current = run
            else:
                raise ScenarioParseError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ScenarioParseError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ScenarioParseError("key outside of a section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current:
            raise ScenarioParseError(f"duplicate key {key!r}", lineno)

        if section == "radar":
            if key in _RADAR_INT:
                current[key] = _int(value, lineno)
            elif key in _RADAR_FLOAT:
                current[key] = _floats(value, lineno)[0]
            elif key in _RADAR_OPT_FLOAT:
                current[key] = None if value.lower() in ("auto", "none") else _floats(value, lineno)[0]
            elif key == "range_gate_m":
                vals = _floats(value, lineno)
                if len(vals) != 2:
                    raise ScenarioParseError("range_gate_m needs two values", lineno)
                current[key] = tuple(vals)
            else:
                raise ScenarioParseError(f"unknown [radar] key {key!r}", lineno)
        elif section == "target":
            if key not in _TARGET_KEYS:
                raise ScenarioParseError(f"unknown [target] key {key!r}", lineno)
            current[key] = _floats(value, lineno)[0]
        elif section == "random":
            if key == "count":
                current[key] = _int(value, lineno)
            elif key == "mean_rcs_sqm":
                current[key] = tuple(_floats(value, lineno))
            elif key == "positions":
                if value not in POSITION_MODES:
                    raise ScenarioParseError(f"positions must be one of {POSITION_MODES}", lineno)
                current[key] = value
            else:
                raise ScenarioParseError(f"unknown [random] key {key!r}", lineno)
        else:
            if key == "snr_db":
                current[key] = tuple(_floats(value, lineno))
            elif key in ("trials", "rng_seed"):
                current[key] = _int(value, lineno)
            else:
                raise ScenarioParseError(f"unknown [run] key {key!r}", lineno)

    if targets and random_block is not None:
        raise ValidationError("use either [target] blocks or a [random] block, not both")
    params = RadarParams(**radar)
    if random_block is not None:
        rcs = random_block.get("mean_rcs_sqm")
        if rcs is None:
            raise ValidationError("[random] needs mean_rcs_sqm")
        count = random_block.get("count", len(rcs))
        if count != len(rcs):
            raise ValidationError("[random] count does not match number of mean_rcs_sqm values")
        tgt: tuple[TargetSpec, ...] | RandomTargets = RandomTargets(
            rcs, random_block.get("positions", "continuous"))
    else:
        for t in targets:
            missing = {"range_m", "azimuth_deg", "velocity_mps"} - t.keys()
            if missing:
                raise ValidationError(f"[target] missing {sorted(missing)}")
        tgt = tuple(TargetSpec(**t) for t in targets)
    return Scenario(params=params, targets=tgt, **run)


def bundled_configs() -> list[str]:
    """Names of the scenario files shipped with the package."""
    from importlib.resources import files

    return sorted(p.name[:-4] for p in files("jrc_rsp").joinpath("configs").iterdir()
                  if p.name.endswith(".cfg"))


def load_scenario(ref: str | Path) -> Scenario:
    """Parse a scenario file, or a bundled config by name (``"ci"``, ``"paper3t.cfg"``)."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_text())
    from importlib.resources import files

    name = path.name[:-4] if path.name.endswith(".cfg") else path.name
    if str(ref) in (name, name + ".cfg") and name in bundled_configs():
        return parse_scenario(files("jrc_rsp").joinpath("configs", name + ".cfg").read_text())
    raise FileNotFoundError(f"no scenario file {str(ref)!r} (bundled: {', '.join(bundled_configs())})")


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_scenario(sc: Scenario) -> str:
    """Serialize ``sc`` so that ``parse_scenario(dump_scenario(sc)) == sc``."""
    lines = ["[radar]"]
    for f in fields(RadarParams):
        v = getattr(sc.params, f.name)
        if f.name == "range_gate_m":
            lines.append(f"range_gate_m = {_fmt(v[0])}, {_fmt(v[1])}")
        else:
            lines.append(f"{f.name} = {_fmt(v)}")
    if isinstance(sc.targets, RandomTargets):
        lines += ["", "[random]", f"count = {sc.targets.count}",
                  "mean_rcs_sqm = " + ", ".join(_fmt(float(m)) for m in sc.targets.mean_rcs_sqm),
                  f"positions = {sc.targets.positions}"]
    else:
        for t in sc.targets:
            lines += ["", "[target]"]
            for f in fields(TargetSpec):
                v = getattr(t, f.name)
                if v is not None:
                    lines.append(f"{f.name} = {_fmt(float(v))}")
    lines += ["", "[run]", "snr_db = " + ", ".join(_fmt(s) for s in sc.snr_db),
              f"trials = {sc.trials}", f"rng_seed = {sc.rng_seed}"]
    return "\n".join(lines) + "\n"
