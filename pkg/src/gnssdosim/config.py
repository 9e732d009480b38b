"""Scenario and device-profile configuration: INI-style files, strict schema.

Profiles describe one device class (oscillator, actuation chain, receiver,
tagging, controller, outputs); scenarios bind profiles to named nodes with
per-node mounting, offsets, and roles, plus the drive trajectory and seeds.
Unknown sections or keys are rejected with the exact key path.
"""

from __future__ import annotations

import configparser
import enum
import os
from dataclasses import dataclass, replace

from .discipline import ControllerParams
from .efc_chain import EfcChainParams
from .errors import ConfigError
from .gnss import EnvErrorModel, EnvironmentClass, GnssMode, GnssReceiverParams
from .noisegen import NoiseKind
from .oscillator import OscillatorParams
from .outputs import OFF, ONE_PPS, OutputConfig, PulseMode, PulseModeKind
from .tagging import TaggingParams
from .timebase import FractionalFrequency, TimeSpan
from .trajectory import Trajectory, load_trajectory


class NodeRole(enum.Enum):
    PULSE_EMITTER = "emitter"
    LISTENER = "listener"


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    oscillator: OscillatorParams  # noise left empty; template below gets seeded per node
    noise_template: tuple[tuple[NoiseKind, float], ...]
    efc: EfcChainParams
    gnss: GnssReceiverParams
    tagging: TaggingParams
    controller: ControllerParams
    outputs: OutputConfig


@dataclass(frozen=True)
class NodeSpec:
    name: str
    profile: DeviceProfile
    role: NodeRole
    mounting_rpy_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_frequency_error_ppb: float | None = None  # overrides the profile
    initial_phase_offset_ns: float = 0.0
    antenna_bias_ns: float = 0.0
    cable_delay_ns: float | None = None  # overrides the profile


@dataclass(frozen=True)
class ScenarioConfig:
    duration: TimeSpan
    step: TimeSpan
    pulse_interval: TimeSpan
    calibration_window: tuple[TimeSpan, TimeSpan]
    master_seed: int
    common_slow_tau_s: float
    trajectory: Trajectory
    trajectory_path: str
    nodes: tuple[NodeSpec, ...]

    @property
    def emitter(self) -> NodeSpec:
        return next(n for n in self.nodes if n.role is NodeRole.PULSE_EMITTER)


class _Section:
    """Typed, path-aware access to one INI section."""

    def __init__(self, path: str, name: str, options: dict[str, str]):
        self._where = f"{os.path.basename(path)}#{name}"
        self._options = options
        self._seen: set[str] = set()

    def _raw(self, key, default):
        self._seen.add(key)
        if key in self._options:
            return self._options[key]
        if default is _REQUIRED:
            raise ConfigError(f"{self._where}/{key}", "required key missing")
        return default

    def get_float(self, key, default=None):
        raw = self._raw(key, default)
        if isinstance(raw, (int, float)) or raw is None:
            return raw
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self._where}/{key}", f"not a number: {raw!r}") from None

    def get_int(self, key, default=None):
        raw = self._raw(key, default)
        if isinstance(raw, int) or raw is None:
            return raw
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{self._where}/{key}", f"not an integer: {raw!r}") from None

    def get_bool(self, key, default=None):
        raw = self._raw(key, default)
        if isinstance(raw, bool) or raw is None:
            return raw
        low = raw.strip().lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{self._where}/{key}", f"not a boolean: {raw!r}")

    def get_str(self, key, default=None):
        raw = self._raw(key, default)
        return raw.strip() if isinstance(raw, str) else raw

    def get_vec3(self, key, default=None):
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        parts = raw.split()
        if len(parts) != 3:
            raise ConfigError(f"{self._where}/{key}", "expected three numbers")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{self._where}/{key}", f"not numbers: {raw!r}") from None

    def reject_unknown(self):
        unknown = set(self._options) - self._seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{self._where}/{key}", "unknown key")


_REQUIRED = object()


def _read_ini(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(os.path.basename(path), f"cannot read: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(os.path.basename(path), f"parse error: {exc}") from None
    return {name: dict(parser.items(name)) for name in parser.sections()}


def _section(path, sections, name, required=True) -> _Section:
    if name not in sections:
        if required:
            raise ConfigError(f"{os.path.basename(path)}#{name}", "required section missing")
        return _Section(path, name, {})
    return _Section(path, name, sections.pop(name))


_ENV_SECTIONS = {f"gnss.{env.value}": env for env in EnvironmentClass}

_NOISE_KEYS = {
    "white_fm_h0": NoiseKind.WHITE_FM,
    "flicker_fm_h1": NoiseKind.FLICKER_FM,
    "random_walk_fm_h2": NoiseKind.RANDOM_WALK_FM,
}


def _parse_pulse_mode(sec: _Section, key: str, default: str) -> PulseMode:
    raw = sec.get_str(key, default)
    if raw == "off":
        return OFF
    if raw == "one_pps":
        return ONE_PPS
    if raw.startswith("sysref_periodic:"):
        try:
            period_ns = int(raw.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"{sec._where}/{key}", f"bad sysref period in {raw!r}") from None
        return PulseMode(PulseModeKind.SYSREF_PERIODIC, TimeSpan.from_ns(period_ns))
    raise ConfigError(f"{sec._where}/{key}", f"unknown pulse mode {raw!r}")


def parse_profile(path: str) -> DeviceProfile:
    sections = _read_ini(path)

    osc = _section(path, sections, "oscillator")
    oscillator = OscillatorParams(
        nominal_frequency_hz=osc.get_float("nominal_frequency_hz", 100e6),
        efc_full_scale_offset=FractionalFrequency.from_ppm(osc.get_float("efc_full_scale_ppm", 2.0)),
        efc_voltage_min=osc.get_float("efc_voltage_min", 0.0),
        efc_voltage_max=osc.get_float("efc_voltage_max", 10.0),
        g_sensitivity_ppb_per_g=osc.get_float("g_sensitivity_ppb_per_g", 0.2),
        g_axis=osc.get_vec3("g_axis", (0.0, 0.0, 1.0)),
        aging_per_day=FractionalFrequency.from_ppb(osc.get_float("aging_ppb_per_day", 0.0)),
        initial_frequency_error=FractionalFrequency.from_ppb(
            osc.get_float("initial_frequency_error_ppb", 0.0)
        ),
    )
    osc.reject_unknown()

    noi = _section(path, sections, "noise", required=False)
    noise_template = tuple(
        (kind, noi.get_float(key, 0.0)) for key, kind in _NOISE_KEYS.items()
    )
    noi.reject_unknown()

    efc_sec = _section(path, sections, "efc", required=False)
    efc = EfcChainParams(
        dac_bits=efc_sec.get_int("dac_bits", 16),
        dither_period=efc_sec.get_int("dither_period", 16),
        gain_output_min=efc_sec.get_float("output_min_v", 0.0),
        gain_output_max=efc_sec.get_float("output_max_v", 10.0),
        lowpass_cutoff_hz=efc_sec.get_float("lowpass_cutoff_hz", 100.0),
        stage_noise_rms=efc_sec.get_float("stage_noise_rms_v", EfcChainParams().stage_noise_rms),
        update_interval=TimeSpan.from_us(efc_sec.get_int("update_interval_us", 10)),
    )
    efc_sec.reject_unknown()

    gns = _section(path, sections, "gnss")
    mode_raw = gns.get_str("mode", "multi_band_differential")
    try:
        mode = GnssMode(mode_raw)
    except ValueError:
        raise ConfigError("gnss/mode", f"unknown mode {mode_raw!r}") from None
    env_models = {}
    for sec_name, env in _ENV_SECTIONS.items():
        env_sec = _section(path, sections, sec_name)
        env_models[env] = EnvErrorModel(
            bias_ns=env_sec.get_float("bias_ns", 0.0),
            white_sigma_ns=env_sec.get_float("white_sigma_ns", 0.0),
            slow_sigma_ns=env_sec.get_float("slow_sigma_ns", 0.0),
            slow_tau_s=env_sec.get_float("slow_tau_s", 100.0),
            availability=env_sec.get_float("availability", 1.0 if env is not EnvironmentClass.NO_FIX else 0.0),
        )
        env_sec.reject_unknown()
    gnss = GnssReceiverParams(
        mode=mode,
        pulse_interval=TimeSpan.from_ms(gns.get_int("pulse_interval_ms", 100)),
        env_models=env_models,
        common_mode_fraction=gns.get_float("common_mode_fraction", 0.8),
    )
    gns.reject_unknown()

    tag = _section(path, sections, "tagging", required=False)
    tagging = TaggingParams(
        coarse_resolution=TimeSpan.from_ns(tag.get_int("coarse_resolution_ns", 10)),
        fine_sigma=TimeSpan(tag.get_int("fine_sigma_ps", 35)),
        fine_enabled=tag.get_bool("fine_enabled", True),
        averaging_window=tag.get_int("averaging_window", 10),
        cable_delay=TimeSpan(round(tag.get_float("cable_delay_ns", 0.0) * 1000)),
    )
    tag.reject_unknown()

    ctl = _section(path, sections, "controller", required=False)
    controller = ControllerParams(
        proportional_gain=ctl.get_float("proportional_gain", ControllerParams().proportional_gain),
        integral_gain=ctl.get_float("integral_gain", ControllerParams().integral_gain),
        update_interval=TimeSpan.from_s(ctl.get_int("update_interval_s", 1)),
        integrator_limit=ctl.get_float("integrator_limit_ppm", 2.0) * 1e-6,
        acquire_windows=ctl.get_int("acquire_windows", 5),
    )
    ctl.reject_unknown()

    out = _section(path, sections, "outputs", required=False)
    outputs = OutputConfig(
        clock_divisor=out.get_int("clock_divisor", 1),
        channels=tuple(
            _parse_pulse_mode(out, f"channel_{i}", "one_pps" if i == 0 else "off")
            for i in range(5)
        ),
    )
    out.reject_unknown()

    if sections:
        name = sorted(sections)[0]
        raise ConfigError(f"{os.path.basename(path)}#{name}", "unknown section")

    profile_name = os.path.splitext(os.path.basename(path))[0]
    return DeviceProfile(
        name=profile_name,
        oscillator=oscillator,
        noise_template=noise_template,
        efc=efc,
        gnss=gnss,
        tagging=tagging,
        controller=controller,
        outputs=outputs,
    )


def parse_scenario(path: str) -> ScenarioConfig:
    base_dir = os.path.dirname(os.path.abspath(path))
    sections = _read_ini(path)

    sc = _section(path, sections, "scenario")
    duration = TimeSpan.from_s(sc.get_int("duration_s", _REQUIRED))
    step = TimeSpan.from_ms(sc.get_int("step_ms", 10))
    pulse_interval = TimeSpan.from_ms(sc.get_int("measurement_pulse_interval_ms", 100))
    cal_start = TimeSpan.from_s(sc.get_int("calibration_start_s", 0))
    cal_end = TimeSpan.from_s(sc.get_int("calibration_end_s", _REQUIRED))
    master_seed = sc.get_int("master_seed", _REQUIRED)
    common_tau = sc.get_float("common_slow_tau_s", 100.0)
    traj_rel = sc.get_str("trajectory", _REQUIRED)
    sc.reject_unknown()

    traj_path = os.path.normpath(os.path.join(base_dir, traj_rel))
    trajectory = load_trajectory(traj_path)

    node_names = [name for name in sections if name.startswith("node.")]
    if not node_names:
        raise ConfigError("scenario", "no [node.<name>] sections")
    profiles: dict[str, DeviceProfile] = {}
    nodes = []
    for sec_name in node_names:
        node_name = sec_name.split(".", 1)[1]
        sec = _section(path, sections, sec_name)
        profile_rel = sec.get_str("profile", _REQUIRED)
        profile_path = os.path.normpath(os.path.join(base_dir, profile_rel))
        if profile_path not in profiles:
            profiles[profile_path] = parse_profile(profile_path)
        role_raw = sec.get_str("role", "listener")
        try:
            role = NodeRole(role_raw)
        except ValueError:
            raise ConfigError(f"{sec_name}/role", f"unknown role {role_raw!r}") from None
        freq_override = sec.get_float("initial_frequency_error_ppb", None)
        cable_override = sec.get_float("cable_delay_ns", None)
        nodes.append(
            NodeSpec(
                name=node_name,
                profile=profiles[profile_path],
                role=role,
                mounting_rpy_deg=sec.get_vec3("mounting_rpy_deg", (0.0, 0.0, 0.0)),
                initial_frequency_error_ppb=freq_override,
                initial_phase_offset_ns=sec.get_float("initial_phase_offset_ns", 0.0),
                antenna_bias_ns=sec.get_float("antenna_bias_ns", 0.0),
                cable_delay_ns=cable_override,
            )
        )
        sec.reject_unknown()

    if sections:
        name = sorted(sections)[0]
        raise ConfigError(f"{os.path.basename(path)}#{name}", "unknown section")

    config = ScenarioConfig(
        duration=duration,
        step=step,
        pulse_interval=pulse_interval,
        calibration_window=(cal_start, cal_end),
        master_seed=master_seed,
        common_slow_tau_s=common_tau,
        trajectory=trajectory,
        trajectory_path=traj_path,
        nodes=tuple(nodes),
    )
    validate_scenario(config)
    return config


def validate_scenario(config: ScenarioConfig) -> None:
    import numpy as np

    if config.duration.ps <= 0:
        raise ConfigError("scenario/duration_s", "must be positive")
    if config.step.ps <= 0 or config.pulse_interval.ps % config.step.ps != 0:
        raise ConfigError(
            "scenario/step_ms", "step must divide the measurement pulse interval"
        )
    emitters = [n.name for n in config.nodes if n.role is NodeRole.PULSE_EMITTER]
    if len(emitters) != 1:
        raise ConfigError(
            "scenario/role", f"exactly one emitter required, found {emitters or 'none'}"
        )
    cal_start, cal_end = config.calibration_window
    if not 0 <= cal_start.ps < cal_end.ps <= config.duration.ps:
        raise ConfigError("scenario/calibration", "window must lie inside the scenario")
    if not config.trajectory.covers(config.duration.ps):
        raise ConfigError(
            "scenario/trajectory",
            f"trajectory ends at {config.trajectory.end_ps} ps, scenario needs {config.duration.ps} ps",
        )
    # The calibration segment must precede motion: acceleration constant there.
    probe = np.linspace(cal_start.ps, cal_end.ps, 101)
    acc = config.trajectory.accel_series(probe)
    if float(np.ptp(acc, axis=0).max()) > 1e-9:
        raise ConfigError(
            "scenario/calibration", "vehicle must be stationary during the calibration window"
        )
    for node in config.nodes:
        if node.profile.controller.update_interval.ps % config.step.ps != 0:
            raise ConfigError(
                f"node.{node.name}", "controller update interval must be a step multiple"
            )
        window_ps = node.profile.tagging.averaging_window * node.profile.gnss.pulse_interval.ps
        if window_ps != node.profile.controller.update_interval.ps:
            raise ConfigError(
                f"node.{node.name}",
                "averaging window times pulse interval must equal the controller update interval",
            )
