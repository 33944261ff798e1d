"""Scenario configuration: dataclasses, YAML loading, reference profiles.

A scenario file is a YAML document with nested sections (funnel, trigger,
plant, ...).  Two modes exist: ``force_tracking`` runs a single leg
against a documented reference force profile on a vibrating test surface;
``posture`` runs the full six-leg robot over a terrain preset.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .body import BodyInertia, RobotGeometry
from .funnel import FunnelParams, TriggerParams
from .impedance import ImpedanceParams
from .leg import LegPlantParams
from .terrain import TerrainProfile, make_terrain


class ConfigError(ValueError):
    """Scenario configuration is unreadable or violates an invariant."""


def _smoothstep(theta: float) -> float:
    if theta <= 0.0:
        return 0.0
    if theta >= 1.0:
        return 1.0
    return 0.5 * (1.0 - math.cos(math.pi * theta))


def _smoothstep_d1(theta: float, duration: float) -> float:
    if theta <= 0.0 or theta >= 1.0:
        return 0.0
    return 0.5 * math.pi / duration * math.sin(math.pi * theta)


def _smoothstep_d2(theta: float, duration: float) -> float:
    if theta <= 0.0 or theta >= 1.0:
        return 0.0
    return 0.5 * (math.pi / duration) ** 2 * math.cos(math.pi * theta)


@dataclass
class StepCommand:
    at: float       # transition start time (s)
    level: float    # new force level (N)
    ramp: float     # transition duration (s); cosine-smoothed, never 0


@dataclass
class SineCommand:
    amp: float = 0.0
    freq: float = 1.0   # Hz
    start: float = 0.0
    end: float = math.inf


@dataclass
class SurfaceVibration:
    """Test-surface displacement exciting the leg spring mechanically.

    Multi-tone with fixed phases, cosine ramp-in over [onset_start,
    onset_end] so the funnel can settle before full excitation.
    """

    amp: float = 0.0           # displacement amplitude (m)
    freqs: tuple = (1.5, 2.7, 4.1)  # Hz
    onset_start: float = 0.5
    onset_end: float = 1.5

    def displacement(self, t: float) -> float:
        if self.amp == 0.0:
            return 0.0
        window = self.onset_end - self.onset_start
        gain = _smoothstep((t - self.onset_start) / window) if window > 0 else 1.0
        s = sum(math.sin(2.0 * math.pi * f * t + 0.7 * j)
                for j, f in enumerate(self.freqs))
        return self.amp * gain * s / len(self.freqs)


@dataclass
class ForceProfile:
    """Reference force for the single-leg rig: smoothed steps plus a sine."""

    steps: list[StepCommand] = field(default_factory=list)
    sine: SineCommand = field(default_factory=SineCommand)
    vibration: SurfaceVibration = field(default_factory=SurfaceVibration)
    rate_sup: float = 0.0  # documented max |d f_ref/dt| of steps + sine (N/s)

    def reference(self, t: float) -> float:
        level = 0.0
        prev = 0.0
        for step in self.steps:
            if t < step.at:
                break
            theta = (t - step.at) / step.ramp
            level = prev + (step.level - prev) * _smoothstep(theta)
            prev = step.level
        f = level
        if self.sine.amp != 0.0 and self.sine.start <= t <= self.sine.end:
            f += self.sine.amp * math.sin(
                2.0 * math.pi * self.sine.freq * (t - self.sine.start))
        return f

    def max_rate(self) -> float:
        """Analytic slew bound of the reference (steps + sine)."""
        rate = 0.0
        prev = 0.0
        for step in self.steps:
            rate = max(rate, abs(step.level - prev) * math.pi / (2.0 * step.ramp))
            prev = step.level
        rate += abs(self.sine.amp) * 2.0 * math.pi * self.sine.freq
        return rate


@dataclass
class BodyRaise:
    """Scripted smooth body-height raise so legs keep workspace headroom."""

    height: float = 0.0
    start: float = 0.5
    duration: float = 2.0

    def z_offset(self, t: float) -> tuple[float, float, float]:
        theta = (t - self.start) / self.duration
        return (self.height * _smoothstep(theta),
                self.height * _smoothstep_d1(theta, self.duration),
                self.height * _smoothstep_d2(theta, self.duration))


@dataclass
class ServoGains:
    """Outer posture loop shaping the reference acceleration."""

    kp: float = 25.0  # 1/s^2
    kd: float = 10.0  # 1/s


@dataclass
class RunSettings:
    duration: float = 20.0
    dt: float = 1e-3
    speed: float = 0.3          # forward drive (m/s), posture mode
    sensor_mode: str = "truth"  # truth | sampled-20hz
    seed: int = 0


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    mode: str = "posture"       # posture | force_tracking
    controller: str = "FC"      # FC | IC (posture mode)
    funnel: FunnelParams = field(default_factory=lambda: FunnelParams(750.0, 7.2, 250.0))
    trigger: TriggerParams = field(default_factory=lambda: TriggerParams(0.05, 9e-5, 10000.0))
    plant: LegPlantParams = field(default_factory=LegPlantParams)
    impedance: ImpedanceParams = field(default_factory=lambda: ImpedanceParams(114.0, 62.5, 109.0))
    geometry_edge: float = 0.8
    geometry_leg_drop: float = 0.45
    mass: float = 436.0
    inertia_diag: tuple = (145.0, 145.0, 186.0)
    servo: ServoGains = field(default_factory=ServoGains)
    body_raise: BodyRaise = field(default_factory=BodyRaise)
    terrain_preset: str = "flat"
    terrain_noise_amp: float = 0.0
    force_profile: ForceProfile = field(default_factory=ForceProfile)
    run: RunSettings = field(default_factory=RunSettings)
    f_ref_rate_sup: float | None = None  # posture-mode estimate (N/s)
    workspace_limit: float = 0.08        # m, vertical leg extension
    allocation_damping: float = 1e-6
    allocation_residual_tol: float = 1.0
    pft_sample_hz: float = 5.0           # IC terrain-plan update rate (vision)
    pft_latency: float = 0.2             # IC terrain-plan latency (s)
    ic_displacement_scale: float = 1e-3  # impedance output is in mm
    config_hash: str = ""
    source_path: str = ""

    def geometry(self) -> RobotGeometry:
        return RobotGeometry.regular_hexagon(self.geometry_edge, self.geometry_leg_drop)

    def inertia(self) -> BodyInertia:
        return BodyInertia(self.mass, np.diag(self.inertia_diag))

    def terrain(self) -> TerrainProfile:
        return make_terrain(self.terrain_preset, self.terrain_noise_amp, self.run.seed)

    def rate_estimate(self) -> float:
        """Commanded-profile estimate of sup |d f_ref/dt| used for validation."""
        if self.mode == "force_tracking":
            return self.force_profile.max_rate()
        if self.f_ref_rate_sup is None:
            raise ConfigError("posture scenarios must document f_ref_rate_sup")
        return self.f_ref_rate_sup

    def initial_error(self) -> float:
        """|e(0)| seen by the validator.

        The force rig starts with an unloaded leg, so the initial reference
        is all error.  Posture runs start from the standing equilibrium
        (springs preloaded to the static share), so e(0) = 0.
        """
        if self.mode == "force_tracking":
            return abs(self.force_profile.reference(0.0))
        return 0.0

    def reference_sup(self) -> float:
        """Bound on |f_ref| over the run, for the reachable-set estimate."""
        if self.mode == "force_tracking":
            peak = max([abs(s.level) for s in self.force_profile.steps] or [0.0])
            return peak + abs(self.force_profile.sine.amp)
        return self.mass * 9.81  # generous: a leg never carries more than the robot

    def validate(self) -> None:
        problems = []
        if self.mode not in ("posture", "force_tracking"):
            problems.append(f"unknown mode {self.mode!r}")
        if self.controller not in ("FC", "IC"):
            problems.append(f"unknown controller {self.controller!r}")
        if self.run.dt <= 0.0:
            problems.append(f"dt must be positive, got {self.run.dt}")
        if self.run.duration <= 0.0:
            problems.append(f"duration must be positive, got {self.run.duration}")
        if self.run.sensor_mode not in ("truth", "sampled-20hz"):
            problems.append(f"unknown sensor_mode {self.run.sensor_mode!r}")
        if self.workspace_limit <= 0.0:
            problems.append("workspace_limit must be positive")
        if self.mode == "posture" and self.controller == "FC" \
                and self.f_ref_rate_sup is None:
            problems.append("posture FC scenarios must document f_ref_rate_sup")
        if problems:
            raise ConfigError("; ".join(problems))


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in section {where!r}")
    return section[key]


def config_from_dict(doc: dict, name: str = "scenario") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    cfg = ScenarioConfig(name=doc.get("name", name))
    cfg.mode = doc.get("mode", cfg.mode)
    cfg.controller = doc.get("controller", cfg.controller)

    try:
        if "funnel" in doc:
            s = doc["funnel"]
            cfg.funnel = FunnelParams(float(_require(s, "a", "funnel")),
                                      float(_require(s, "b", "funnel")),
                                      float(_require(s, "xi", "funnel")))
        if "trigger" in doc:
            s = doc["trigger"]
            cfg.trigger = TriggerParams(float(_require(s, "rho5", "trigger")),
                                        float(_require(s, "varrho", "trigger")),
                                        float(_require(s, "u_hat", "trigger")))
        if "plant" in doc:
            s = doc["plant"]
            cfg.plant = LegPlantParams(float(s.get("b_damp", 1000.0)),
                                       float(s.get("k_stiff", 50000.0)),
                                       float(s.get("k_p", 50000.0)))
        if "impedance" in doc:
            s = doc["impedance"]
            cfg.impedance = ImpedanceParams(float(_require(s, "m", "impedance")),
                                            float(_require(s, "c", "impedance")),
                                            float(_require(s, "k", "impedance")))
        if "geometry" in doc:
            s = doc["geometry"]
            cfg.geometry_edge = float(s.get("edge_length", cfg.geometry_edge))
            cfg.geometry_leg_drop = float(s.get("leg_drop", cfg.geometry_leg_drop))
        if "inertia" in doc:
            s = doc["inertia"]
            cfg.mass = float(s.get("mass", cfg.mass))
            cfg.inertia_diag = (float(s.get("ixx", cfg.inertia_diag[0])),
                                float(s.get("iyy", cfg.inertia_diag[1])),
                                float(s.get("izz", cfg.inertia_diag[2])))
        if "servo" in doc:
            s = doc["servo"]
            cfg.servo = ServoGains(float(s.get("kp", cfg.servo.kp)),
                                   float(s.get("kd", cfg.servo.kd)))
        if "body_raise" in doc:
            s = doc["body_raise"]
            cfg.body_raise = BodyRaise(float(s.get("height", 0.0)),
                                       float(s.get("start", 0.5)),
                                       float(s.get("duration", 2.0)))
        if "terrain" in doc:
            s = doc["terrain"]
            cfg.terrain_preset = s.get("preset", cfg.terrain_preset)
            cfg.terrain_noise_amp = float(s.get("noise_amp", 0.0))
        if "force_profile" in doc:
            s = doc["force_profile"]
            steps = [StepCommand(float(st["t"]), float(st["level"]),
                                 float(st.get("ramp", 1.0)))
                     for st in s.get("steps", [])]
            steps.sort(key=lambda st: st.at)
            sine = SineCommand()
            if "sine" in s:
                ss = s["sine"]
                sine = SineCommand(float(ss.get("amp", 0.0)),
                                   float(ss.get("freq", 1.0)),
                                   float(ss.get("start", 0.0)),
                                   float(ss.get("end", math.inf)))
            vib = SurfaceVibration()
            if "vibration" in s:
                sv = s["vibration"]
                vib = SurfaceVibration(float(sv.get("amp", 0.0)),
                                       tuple(float(f) for f in
                                             sv.get("freqs", (1.5, 2.7, 4.1))),
                                       float(sv.get("onset_start", 0.5)),
                                       float(sv.get("onset_end", 1.5)))
            cfg.force_profile = ForceProfile(steps, sine, vib,
                                             float(s.get("rate_sup", 0.0)))
        if "run" in doc:
            s = doc["run"]
            cfg.run = RunSettings(float(s.get("duration", 20.0)),
                                  float(s.get("dt", 1e-3)),
                                  float(s.get("speed", 0.3)),
                                  str(s.get("sensor_mode", "truth")).lower(),
                                  int(s.get("seed", 0)))
        if "f_ref_rate_sup" in doc:
            cfg.f_ref_rate_sup = float(doc["f_ref_rate_sup"])
        if "workspace_limit" in doc:
            cfg.workspace_limit = float(doc["workspace_limit"])
        if "allocation" in doc:
            s = doc["allocation"]
            cfg.allocation_damping = float(s.get("damping", cfg.allocation_damping))
            cfg.allocation_residual_tol = float(
                s.get("residual_tol", cfg.allocation_residual_tol))
        if "pft_sample_hz" in doc:
            cfg.pft_sample_hz = float(doc["pft_sample_hz"])
        if "pft_latency" in doc:
            cfg.pft_latency = float(doc["pft_latency"])
        if "ic_displacement_scale" in doc:
            cfg.ic_displacement_scale = float(doc["ic_displacement_scale"])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}") from exc

    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = config_from_dict(doc, name=path.stem)
    cfg.config_hash = hashlib.sha256(raw).hexdigest()[:16]
    cfg.source_path = str(path)
    return cfg
