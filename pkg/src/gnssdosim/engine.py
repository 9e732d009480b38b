"""Fixed-step multi-node scenario execution.

Clock phase evolves analytically inside each simulation step; pulse and tag
instants are recovered by interpolation, so hour-long multi-node runs stay
cheap while every timestamp keeps picosecond bookkeeping. One node emits a
measurement pulse on its own (drifting) 100 ms boundaries; every node
time-tags that pulse against its own time base, which is exactly the data the
pairwise relative-error analysis consumes.

RNG streams derive from the master seed as
PCG64(SeedSequence([master, slot, purpose, sub])), where slot 0 holds
scenario-shared streams and slot i+1 belongs to the i-th configured node, so
adding a node never perturbs existing streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import NodeRole, NodeSpec, ScenarioConfig
from .discipline import (
    ControllerMode,
    close_saturation,
    controller_step,
    initial_state as controller_initial_state,
)
from .efc_chain import command_to_target_voltage, lowpass_alpha
from .errors import ConfigError
from .gnss import (
    EnvironmentClass,
    GnssMode,
    apply_differential,
    generate_pulses,
    make_common_stream,
)
from .noisegen import NoiseSpec
from .oscillator import ClockState, Oscillator, local_to_true
from .outputs import PulseModeKind, mark_following_edge, schedule_pulse
from .tagging import TagSource, TimeTag, average_residuals, tag_event
from .timebase import FractionalFrequency, TimeInstant, TimeSpan
from .trajectory import rotation_matrix_rpy

# Stream purposes within a node slot; slot 0 is scenario-shared.
PURPOSE_OSC_NOISE = 0
PURPOSE_GNSS = 1
PURPOSE_TAG_FINE = 2
PURPOSE_EFC_STAGE = 3
SHARED_SLOT = 0
PURPOSE_COMMON_SLOW = 0
PURPOSE_BASE_STATION = 1


def stream_seed(master_seed: int, slot: int, purpose: int, sub: int = 0) -> int:
    """Documented seed-splitting rule; see module docstring."""
    seq = np.random.SeedSequence([master_seed, slot, purpose, sub])
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PulseRecord:
    pulse_idx: int
    emit_true_ps: int
    tag_local_ps: int
    valid: bool


@dataclass
class NodeLog:
    """Per-node scenario output.

    diagnostics rows carry simulation ground truth (true phase error); they
    are not observable by real hardware and are kept separate from the pulse
    records for that reason.
    """

    name: str
    role: NodeRole
    pulses: list[PulseRecord] = field(default_factory=list)
    events: list[tuple[int, str, str]] = field(default_factory=list)  # (t_ps, event, detail)
    diagnostics: list[tuple[int, float, int]] = field(default_factory=list)  # (t_ps, efc_v, phase_ps)


@dataclass
class ScenarioResult:
    logs: dict[str, NodeLog]
    seeds: dict[str, int]


class _NodeRuntime:
    def __init__(self, spec: NodeSpec, slot: int, config: ScenarioConfig, accel_veh: np.ndarray):
        profile = spec.profile
        n_steps = accel_veh.shape[0]
        master = config.master_seed

        osc_params = profile.oscillator
        if spec.initial_frequency_error_ppb is not None:
            osc_params = replace(
                osc_params,
                initial_frequency_error=FractionalFrequency.from_ppb(spec.initial_frequency_error_ppb),
            )
        noise = tuple(
            NoiseSpec(kind, amp, stream_seed(master, slot, PURPOSE_OSC_NOISE, k))
            for k, (kind, amp) in enumerate(profile.noise_template)
            if amp > 0.0
        )
        osc_params = replace(osc_params, noise=noise)

        # Effective vehicle-frame sensitivity: dot(axis_dev, R a) = dot(R^T axis_dev, a)
        rot = rotation_matrix_rpy(*spec.mounting_rpy_deg)
        axis_dev = np.array(osc_params.g_axis) * osc_params.g_sensitivity_ppb_per_g * 1e6
        g_eff = rot.T @ axis_dev
        g_femto = np.rint(accel_veh @ g_eff).astype(np.int64)
        # The oscillator integrates the precomputed acceleration projection;
        # its per-call accel input stays zero in engine runs.
        self.osc = Oscillator(
            replace(osc_params, g_sensitivity_ppb_per_g=0.0, g_axis=(0.0, 0.0, 1.0)),
            n_steps,
            config.step,
            extra_y_femto=g_femto,
        )
        self.osc_params = osc_params
        self.clock = ClockState(phase_error_ps=round(spec.initial_phase_offset_ns * 1000))

        self.spec = spec
        self.chain = profile.efc
        self.tagging = profile.tagging
        if spec.cable_delay_ns is not None:
            self.tagging = replace(self.tagging, cable_delay=TimeSpan(round(spec.cable_delay_ns * 1000)))
        self.ctrl_params = profile.controller
        self.ctrl = controller_initial_state(self.chain)
        self.v_cmd = command_to_target_voltage(self.chain, self.ctrl.last_command)
        self.v_filter = self.v_cmd
        self.alpha = lowpass_alpha(self.chain, config.step)

        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(stream_seed(master, slot, PURPOSE_EFC_STAGE)))
        )
        if self.chain.stage_noise_rms > 0.0:
            self.stage_noise = (rng.standard_normal(n_steps) * self.chain.stage_noise_rms).tolist()
        else:
            self.stage_noise = [0.0] * n_steps
        self.tag_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(stream_seed(master, slot, PURPOSE_TAG_FINE)))
        )

        self.gnss_params = replace(profile.gnss, antenna_bias_ns=spec.antenna_bias_ns)
        self.gnss_pulses = []  # filled by run_scenario once shared streams exist
        self.gnss_ptr = 0
        self.window: list[tuple[int, TimeTag | None]] = []  # (epoch_ps, tag)

        self.one_pps = profile.outputs.channels[0].kind is PulseModeKind.ONE_PPS
        self.next_pps_local = 10**12
        self.divisor = profile.outputs.clock_divisor
        self.last_mode = self.ctrl.mode
        self.sat_seen = 0
        self.pending: list[tuple[int, int, int]] = []  # (pulse_idx, emit_true_ps, arrival_ps)
        self.log = NodeLog(name=spec.name, role=spec.role)


def _emit_controller_events(node: _NodeRuntime, t1: int) -> None:
    if node.ctrl.mode is not node.last_mode:
        node.log.events.append((t1, "mode", node.ctrl.mode.value))
        node.last_mode = node.ctrl.mode
    events = node.ctrl.saturation_events
    while node.sat_seen < len(events):
        start_s, duration_s = events[node.sat_seen]
        node.log.events.append(
            (round(start_s * 1e12), "efc_saturation", f"duration_s={duration_s:.3f}")
        )
        node.sat_seen += 1


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Advance every node through the scenario; deterministic given the config."""
    step_ps = config.step.ps
    n_steps = config.duration.ps // step_ps
    if n_steps * step_ps != config.duration.ps:
        raise ConfigError("scenario/step_ms", "step must divide the duration")
    interval_ps = config.pulse_interval.ps

    times = np.arange(n_steps, dtype=np.float64) * step_ps
    accel_veh = config.trajectory.accel_series(times)

    n_pulse_epochs = config.duration.ps // interval_ps + 2
    common = make_common_stream(
        stream_seed(config.master_seed, SHARED_SLOT, PURPOSE_COMMON_SLOW),
        n_pulse_epochs,
        config.pulse_interval,
        config.common_slow_tau_s,
    )

    nodes = [
        _NodeRuntime(spec, slot + 1, config, accel_veh)
        for slot, spec in enumerate(config.nodes)
    ]

    # GNSS pulse trains; differential rovers get the shared base station's
    # systematic error subtracted (one stationary open-sky base per scenario).
    base_cache: dict[int, list] = {}
    for slot, node in enumerate(nodes, start=1):
        pulses = generate_pulses(
            node.gnss_params,
            config.trajectory.env_at,
            config.duration,
            stream_seed(config.master_seed, slot, PURPOSE_GNSS),
            common,
        )
        if node.gnss_params.mode is GnssMode.MULTI_BAND_DIFFERENTIAL:
            key = id(node.spec.profile)
            if key not in base_cache:
                base_params = replace(node.spec.profile.gnss, antenna_bias_ns=0.0)
                base_cache[key] = generate_pulses(
                    base_params,
                    lambda _t: EnvironmentClass.OPEN_SKY,
                    config.duration,
                    stream_seed(config.master_seed, SHARED_SLOT, PURPOSE_BASE_STATION),
                    common,
                )
            pulses = apply_differential(node.gnss_params, base_cache[key], pulses)
        node.gnss_pulses = pulses

    emitter = next(n for n in nodes if n.spec.role is NodeRole.PULSE_EMITTER)
    next_emit_local = interval_ps
    pulse_idx = 0

    for k in range(n_steps):
        t1 = (k + 1) * step_ps

        for node in nodes:
            node.v_filter += node.alpha * (node.v_cmd - node.v_filter)
            v_osc = node.v_filter + node.stage_noise[k]
            p = node.osc_params
            if v_osc < p.efc_voltage_min:
                v_osc = p.efc_voltage_min
            elif v_osc > p.efc_voltage_max:
                v_osc = p.efc_voltage_max
            node.clock = node.osc.step(node.clock, v_osc, (0.0, 0.0, 0.0), config.step)

        # Measurement pulses: the emitter fires at its own local 100 ms marks.
        emitter_local_t1 = t1 + emitter.clock.phase_error_ps
        while next_emit_local <= emitter_local_t1:
            emit_true = local_to_true(emitter.clock, next_emit_local)
            for node in nodes:
                if node is emitter:
                    node.log.pulses.append(
                        PulseRecord(pulse_idx, emit_true, next_emit_local, True)
                    )
                    continue
                arrival = emit_true + node.tagging.cable_delay.ps
                if arrival > t1:
                    node.pending.append((pulse_idx, emit_true, arrival))
                    continue
                tag = tag_event(
                    TimeInstant(arrival), node.clock, node.tagging, node.tag_rng,
                    TagSource.EXTERNAL_PULSE,
                )
                node.log.pulses.append(
                    PulseRecord(pulse_idx, emit_true, tag.local_timestamp.ps, tag.valid)
                )
            next_emit_local += interval_ps
            pulse_idx += 1

        for node in nodes:
            # pulses deferred from the previous step by cable delay
            if node.pending:
                still = []
                for idx, emit_true, arrival in node.pending:
                    if arrival <= t1:
                        tag = tag_event(
                            TimeInstant(arrival), node.clock, node.tagging, node.tag_rng,
                            TagSource.EXTERNAL_PULSE,
                        )
                        node.log.pulses.append(
                            PulseRecord(idx, emit_true, tag.local_timestamp.ps, tag.valid)
                        )
                    else:
                        still.append((idx, emit_true, arrival))
                node.pending = still

            # GNSS pulses arriving within this step
            pulses = node.gnss_pulses
            while node.gnss_ptr < len(pulses):
                pulse = pulses[node.gnss_ptr]
                arrival = pulse.true_time.ps + pulse.receiver_error.ps
                if arrival > t1:
                    break
                tag = None
                if pulse.valid:
                    tag = tag_event(
                        TimeInstant(arrival), node.clock, node.tagging, node.tag_rng,
                        TagSource.GNSS_PULSE,
                    )
                node.window.append((pulse.true_time.ps, tag))
                node.gnss_ptr += 1

            # 1PPS output at the node's own second boundaries (grid-scheduled)
            if node.one_pps:
                local_t1 = t1 + node.clock.phase_error_ps
                while node.next_pps_local <= local_t1:
                    ev = schedule_pulse(
                        TimeInstant(node.next_pps_local), TimeInstant(node.next_pps_local)
                    )
                    edge = mark_following_edge(ev.scheduled_local_time, node.divisor)
                    t_true = local_to_true(node.clock, node.next_pps_local)
                    node.log.events.append(
                        (t_true, "pulse_out",
                         f"ch=0 local_ps={ev.scheduled_local_time.ps} edge_ps={edge.ps}")
                    )
                    node.next_pps_local += 10**12

            # Controller update on its own boundary
            if t1 % node.ctrl_params.update_interval.ps == 0:
                tags = [t for _, t in node.window]
                epochs = [TimeInstant(e) for e, _ in node.window]
                usable = [(tag, e) for tag, e in zip(tags, epochs) if tag is not None]
                if usable:
                    residual, _count = average_residuals(
                        [t for t, _ in usable], [e for _, e in usable]
                    )
                else:
                    residual = None
                node.window = []
                cmd, node.ctrl = controller_step(
                    node.ctrl, node.ctrl_params, residual, t1 / 1e12,
                    node.osc_params, node.chain,
                )
                node.v_cmd = command_to_target_voltage(node.chain, cmd)
                _emit_controller_events(node, t1)
                node.log.diagnostics.append((t1, node.v_filter, node.clock.phase_error_ps))

    end_s = config.duration.ps / 1e12
    for node in nodes:
        node.ctrl = close_saturation(node.ctrl, end_s)
        _emit_controller_events(node, config.duration.ps)
        node.log.events.sort(key=lambda row: (row[0], row[1]))

    seeds = {"master": config.master_seed}
    for slot, spec in enumerate(config.nodes, start=1):
        seeds[f"{spec.name}/osc_noise"] = stream_seed(config.master_seed, slot, PURPOSE_OSC_NOISE, 0)
        seeds[f"{spec.name}/gnss"] = stream_seed(config.master_seed, slot, PURPOSE_GNSS)
        seeds[f"{spec.name}/tag_fine"] = stream_seed(config.master_seed, slot, PURPOSE_TAG_FINE)
        seeds[f"{spec.name}/efc_stage"] = stream_seed(config.master_seed, slot, PURPOSE_EFC_STAGE)
    seeds["shared/common_slow"] = stream_seed(config.master_seed, SHARED_SLOT, PURPOSE_COMMON_SLOW)
    seeds["shared/base_station"] = stream_seed(config.master_seed, SHARED_SLOT, PURPOSE_BASE_STATION)

    return ScenarioResult(logs={n.spec.name: n.log for n in nodes}, seeds=seeds)
