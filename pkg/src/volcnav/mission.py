"""Mission execution: the closed simulation loop, event log, and metrics.

One runner owns all mutable subsystem state and advances it on a fixed
control tick: sense -> estimate -> manage path -> plan locally -> step the
robot -> sample gas -> log. External commands (interventions, teleop, pause)
arrive on a serialized queue drained once per tick. Everything is a pure
function of (world, mission, config, seed), so identical runs produce
byte-identical logs.

Metrics follow the human-robot interaction convention: interaction effort is
the mean intervention duration, neglect tolerance the mean duration of the
k+1 autonomous segments around k interventions (lead-in and tail included),
attention demand IE/(IE+NT), and the autonomy rate the percentage of mission
time without operator input.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from . import local_planner
from .estimator import EstimatorConfig, FactorGraphEstimator
from .geo import Pose, quat_from_yaw
from .local_planner import CommandConfig, ControllerState, FieldError, PathManager, PathManagerConfig
from .mapping import ElevationMap, TraversabilityParams, simulate_range_scan
from .plume import GasSource, SpectrometerModel, SpectrometerState, concentration_at, spectrometer_read
from .robot import RobotState, SensorRig, SensorSimulator, SimulationFault, clamp_twist, step
from .roadgraph import GlobalPath, MissionPlan, PlanningError, RoadGraph, plan
from .world import World

LOG_SCHEMA_VERSION = 1
TERMINAL_EVENTS = ("mission-complete", "fault", "timeout", "planning-error")


class LogIntegrityError(RuntimeError):
    pass


class InterventionError(ValueError):
    pass


class MissionLog:
    """Append-only, time-monotone event log with ndjson persistence."""

    def __init__(self, meta: dict | None = None):
        self.meta = dict(meta or {})
        self.meta.setdefault("schema", LOG_SCHEMA_VERSION)
        self.events: list[dict] = []
        self._listeners: list = []

    def subscribe(self, fn):
        self._listeners.append(fn)

    def append(self, t: float, event_type: str, **data):
        if self.events and t < self.events[-1]["t"] - 1e-9:
            raise LogIntegrityError(f"event at t={t} before log head {self.events[-1]['t']}")
        evt = {"t": float(t), "type": event_type, **data}
        self.events.append(evt)
        for fn in self._listeners:
            fn(evt)
        return evt

    def record_intervention_start(self, t: float, operator: str = "operator"):
        if self._open_intervention() is not None:
            raise InterventionError("intervention already open")
        return self.append(t, "intervention-start", operator=operator)

    def record_intervention_end(self, t: float, operator: str = "operator"):
        if self._open_intervention() is None:
            raise InterventionError("no intervention open")
        return self.append(t, "intervention-end", operator=operator)

    def _open_intervention(self):
        open_t = None
        for e in self.events:
            if e["type"] == "intervention-start":
                open_t = e["t"]
            elif e["type"] == "intervention-end":
                open_t = None
        return open_t

    def interventions(self) -> list[tuple[float, float]]:
        closed, open_start = self.intervention_intervals()
        if open_start is not None:
            raise LogIntegrityError("unterminated intervention")
        return closed

    def intervention_intervals(self):
        """(closed intervals, start of a still-open intervention or None)."""
        out = []
        start = None
        for e in self.events:
            if e["type"] == "intervention-start":
                if start is not None:
                    raise LogIntegrityError("nested intervention start")
                start = e["t"]
            elif e["type"] == "intervention-end":
                if start is None:
                    raise LogIntegrityError("intervention end without start")
                out.append((start, e["t"]))
                start = None
        return out, start

    def terminal_event(self) -> dict | None:
        for e in reversed(self.events):
            if e["type"] in TERMINAL_EVENTS:
                return e
        return None

    def of_type(self, event_type: str):
        return [e for e in self.events if e["type"] == event_type]

    def to_ndjson(self) -> str:
        lines = [json.dumps({"type": "mission-meta", **self.meta}, sort_keys=True)]
        lines.extend(json.dumps(e, sort_keys=True) for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text: str) -> "MissionLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise LogIntegrityError("empty log")
        head = json.loads(lines[0])
        if head.get("type") != "mission-meta":
            raise LogIntegrityError("log must start with mission-meta")
        if head.get("schema") != LOG_SCHEMA_VERSION:
            raise LogIntegrityError(f"unsupported log schema {head.get('schema')!r}")
        meta = {k: v for k, v in head.items() if k != "type"}
        log = cls(meta)
        for ln in lines[1:]:
            e = json.loads(ln)
            log.events.append(e)
        return log


@dataclass
class Detection:
    t: float
    species: int
    value: float
    position: tuple


def detect_peaks(samples, species: int = 0, baseline_window: float = 30.0,
                 threshold_factor: float = 5.0, min_sustained: int = 2,
                 merge_gap: float = 10.0) -> list[Detection]:
    """Find sustained excursions above a rolling-median baseline.

    `samples` is a time-ordered list of (t, value, position) for one species.
    A detection is >= min_sustained consecutive samples above
    threshold_factor * baseline; its position is the robot position at the
    peak maximum. Detections closer than merge_gap seconds merge.
    """
    if len(samples) < min_sustained:
        return []
    t = np.array([s[0] for s in samples])
    v = np.array([s[1] for s in samples])
    if np.any(np.diff(t) < -1e-9):
        raise LogIntegrityError("gas series not time-ordered")
    dt = float(np.median(np.diff(t))) if len(t) > 1 else 1.0
    win = max(3, int(round(baseline_window / max(dt, 1e-6))))
    if win % 2 == 0:
        win += 1
    win = min(win, len(v) if len(v) % 2 == 1 else len(v) - 1)
    baseline = ndimage.median_filter(v, size=win, mode="nearest")
    above = v > threshold_factor * baseline
    detections: list[Detection] = []
    run = 0
    for i, flag in enumerate(np.append(above, False)):
        if flag:
            run += 1
            continue
        if run >= min_sustained:
            s = slice(i - run, i)
            peak = int(np.argmax(v[s])) + i - run
            det = Detection(float(t[peak]), species, float(v[peak]), tuple(samples[peak][2]))
            if detections and det.t - detections[-1].t < merge_gap:
                if det.value > detections[-1].value:
                    detections[-1] = det
            else:
                detections.append(det)
        run = 0
    return detections


@dataclass
class MetricsReport:
    length_m: float
    duration_s: float
    gas_detections: list
    interventions: int
    intervention_time_s: float
    ie_s: float
    nt_s: float
    rad: float
    autonomy_rate: float
    terminal: str

    def to_document(self) -> dict:
        return {
            "length_m": self.length_m,
            "duration_s": self.duration_s,
            "gas_detections": [
                {"t": d.t, "species": d.species, "value": d.value, "position": list(d.position)}
                for d in self.gas_detections
            ],
            "interventions": self.interventions,
            "intervention_time_s": self.intervention_time_s,
            "rad": self.rad,
            "autonomy_rate": self.autonomy_rate,
            "terminal": self.terminal,
        }


def compute_metrics(log: MissionLog, peak_params: dict | None = None,
                    interior_gaps_only: bool = False) -> MetricsReport:
    """Autonomy and detection metrics from a complete mission log.

    NT uses the k+1 autonomous segments delimited by k interventions
    (lead-in and tail included); `interior_gaps_only` switches to the k-1
    interior-gap convention.
    """
    terminal = log.terminal_event()
    if terminal is None:
        raise LogIntegrityError("log has no terminal event")
    t0 = log.events[0]["t"] if log.events else 0.0
    t_end = terminal["t"]
    total = t_end - t0

    intervals = log.interventions()
    t_int = sum(e - s for s, e in intervals)
    k = len(intervals)
    ie = t_int / k if k else 0.0
    if k == 0:
        nt = total
        rad = 0.0
    else:
        bounds = [t0] + [x for pair in intervals for x in pair] + [t_end]
        segments = [bounds[2 * i + 1] - bounds[2 * i] for i in range(k + 1)]
        if interior_gaps_only:
            segments = segments[1:-1]
        nt = sum(segments) / len(segments) if segments else 0.0
        rad = ie / (ie + nt) if (ie + nt) > 0 else 0.0
    ar = 100.0 * (1.0 - t_int / total) if total > 0 else 100.0

    length = 0.0
    prev = None
    for e in log.of_type("true-pose"):
        p = np.asarray(e["position"][:2])
        if prev is not None:
            length += float(np.hypot(*(p - prev)))
        prev = p

    by_species: dict[int, list] = {}
    for e in log.of_type("gas"):
        by_species.setdefault(int(e["amu"]), []).append((e["t"], e["value"], tuple(e["position"])))
    detections = []
    for species in sorted(by_species):
        detections.extend(detect_peaks(by_species[species], species=species, **(peak_params or {})))
    detections.sort(key=lambda d: d.t)

    return MetricsReport(
        length_m=length,
        duration_s=total,
        gas_detections=detections,
        interventions=k,
        intervention_time_s=t_int,
        ie_s=ie,
        nt_s=nt,
        rad=rad,
        autonomy_rate=ar,
        terminal=terminal["type"],
    )


@dataclass
class MissionConfig:
    control_rate_hz: float = 10.0
    map_rate_hz: float = 5.0
    field_rate_hz: float = 2.0
    solve_rate_hz: float = 1.0
    solve_iters: int = 3
    map_size: float = 12.0
    map_resolution: float = 0.06
    field_downsample: int = 2
    sensor_range: float = 9.0
    terminate_radius: float = 0.5
    arrival_radius: float = 1.5
    timeout_s: float = 1200.0
    teleop_hold_s: float = 0.5
    slip_uphill_gain: float = 8.0
    gas_mode: str = "always"            # "always" | "target-region" | "off"
    gas_region_radius: float = 12.0
    path: PathManagerConfig = field(default_factory=PathManagerConfig)
    command: CommandConfig = field(default_factory=CommandConfig)
    traversability: TraversabilityParams = field(default_factory=TraversabilityParams)
    estimator: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(window_duration=8.0))
    spectrometer: SpectrometerModel = field(default_factory=SpectrometerModel)
    rig: SensorRig = field(default_factory=SensorRig)


def config_fingerprint(config: MissionConfig, seed: int) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Pose):
            return {"p": o.position.tolist(), "q": o.orientation.tolist()}
        return str(o)

    blob = json.dumps({"seed": seed, "config": asdict(config)}, sort_keys=True, default=default)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class MissionRunner:
    """Owns one mission's mutable state; everything advances via tick()."""

    def __init__(self, world: World, graph: RoadGraph, mission: MissionPlan,
                 config: MissionConfig | None = None, seed: int = 0,
                 global_path: GlobalPath | None = None):
        self.world = world
        self.config = config or MissionConfig()
        self.seed = seed
        self.log = MissionLog({"seed": seed, "config": config_fingerprint(self.config, seed)})
        self.state = "idle"
        self._queue: list[dict] = []
        self._lock = threading.Lock()
        self.tick_index = 0
        self.dt = 1.0 / self.config.control_rate_hz

        try:
            self.path = global_path or plan(graph, mission, self.config.path.spacing)
        except PlanningError as err:
            self.log.append(0.0, "planning-error", reason=str(err))
            self.state = "faulted"
            return

        cfg = self.config
        rig = cfg.rig
        rig.seed = seed
        self.sensors = SensorSimulator(rig)
        self.estimator = FactorGraphEstimator(cfg.estimator)
        self.emap = ElevationMap(center=self.path.enu[0][:2], size=cfg.map_size, resolution=cfg.map_resolution)
        self.path_manager = PathManager(self.path.enu[:, :2], cfg.path)
        self.controller = ControllerState()
        self.fields = None
        self.spectro_state = SpectrometerState()
        self.gas_sources = [
            GasSource(tuple(s["position"]), int(s["species"]), float(s["rate"]),
                      float(s.get("release_height", 0.3)))
            for s in world.gas_source_specs
        ]
        self.gas_active = cfg.gas_mode == "always"

        start = self.path.enu[0]
        if len(self.path.enu) > 1:
            d = self.path.enu[1] - start
            yaw0 = math.atan2(d[1], d[0])
        else:
            yaw0 = 0.0
        z0 = float(world.height.sample(start[0], start[1]))
        self.robot = RobotState(
            Pose(np.array([start[0], start[1], z0]), quat_from_yaw(yaw0), frame="world", child_frame="base"),
            stamp=0.0,
        )
        self._target = None
        self._teleop = None          # (t_received, twist)
        self._next_target = 0
        self._goal_xy = self.path.enu[min(1, len(self.path.enu) - 1)][:2]
        self._est_cov_diag = None
        self._last_due = {}

    # -- external command surface (serialized queue) -------------------------

    def submit(self, command: dict):
        with self._lock:
            self._queue.append(dict(command))

    def _drain_queue(self, t: float):
        with self._lock:
            pending, self._queue = self._queue, []
        for cmd in pending:
            kind = cmd.get("type")
            try:
                if kind not in (None, "teleop"):
                    self.log.append(t, "command", command=kind)
                if kind == "intervene-start" and self.state == "running":
                    self.log.record_intervention_start(t, cmd.get("operator", "operator"))
                    self.state = "intervention"
                    self.log.append(t, "state-change", state=self.state)
                elif kind == "intervene-stop" and self.state == "intervention":
                    self.log.record_intervention_end(t, cmd.get("operator", "operator"))
                    self.state = "running"
                    self._teleop = None
                    self.log.append(t, "state-change", state=self.state)
                elif kind == "teleop" and self.state == "intervention":
                    self._teleop = (t, (cmd.get("vx", 0.0), cmd.get("vy", 0.0), cmd.get("omega", 0.0)))
                elif kind == "pause" and self.state in ("running", "intervention"):
                    self._pre_pause = self.state
                    self.state = "paused"
                    self.log.append(t, "state-change", state=self.state)
                elif kind == "resume" and self.state == "paused":
                    self.state = getattr(self, "_pre_pause", "running")
                    self.log.append(t, "state-change", state=self.state)
                elif kind == "stop":
                    self._terminate(t, "mission-complete", reason="operator stop")
            except InterventionError as err:
                self.log.append(t, "command-rejected", command=kind, reason=str(err))

    def _due(self, name: str, t: float, rate_hz: float) -> bool:
        nxt = self._last_due.get(name, 0.0)
        if t + 1e-9 >= nxt:
            self._last_due[name] = nxt + 1.0 / rate_hz if nxt + 1.0 / rate_hz > t else t + 1.0 / rate_hz
            return True
        return False

    def _terminate(self, t: float, event: str, **data):
        self.log.append(t, event, **data)
        self.state = "faulted" if event in ("fault", "timeout", "planning-error") else "finished"
        self.log.append(t, "state-change", state=self.state)

    # -- main loop ------------------------------------------------------------

    def start(self):
        if self.state != "idle":
            return
        self.state = "running"
        self.log.append(0.0, "mission-start")
        self.log.append(0.0, "state-change", state=self.state)

    def done(self) -> bool:
        return self.state in ("finished", "faulted")

    def tick(self) -> bool:
        """Advance one control period; returns False once terminal."""
        if self.state == "idle":
            self.start()
        if self.done():
            return False
        t = self.tick_index * self.dt
        self._drain_queue(t)
        if self.state == "paused":
            return True
        if self.done():
            return False
        cfg = self.config

        if t > cfg.timeout_s:
            self._terminate(t, "timeout")
            return False

        # sense and estimate
        batch = self.sensors.emit(self.robot, self.world, t)
        if batch.odom is not None:
            self.estimator.add_measurement(batch.odom)
            d = batch.odom.delta
            self.log.append(t, "odom", dx=d.position[0], dy=d.position[1], dyaw=d.yaw)
        if batch.gnss is not None:
            self.estimator.add_measurement(batch.gnss)
            self.log.append(t, "gnss", position=batch.gnss.position.tolist())
        if batch.slam is not None:
            self.estimator.add_measurement(batch.slam)
            self.log.append(t, "slam", position=batch.slam.pose.position.tolist(), yaw=batch.slam.pose.yaw)
        if self._due("solve", t, cfg.solve_rate_hz):
            report = self.estimator.optimize(max_iters=cfg.solve_iters)
            cov = self.estimator.marginal_covariance(self.estimator._latest_key())
            self._est_cov_diag = np.diag(cov)[:3].tolist() if cov is not None else None
            align = self.estimator.alignment()
            self.log.append(t, "alignment", position=align.position.tolist(), yaw=align.yaw)
            if report.degenerate:
                self.log.append(t, "estimator-degenerate", cost=report.final_cost)

        est_pose = self.estimator.current_pose() or self.robot.pose
        self.log.append(t, "pose-estimate", position=est_pose.position.tolist(), yaw=est_pose.yaw,
                        cov_diag=self._est_cov_diag)
        self.log.append(t, "true-pose", position=self.robot.pose.position.tolist(), yaw=self.robot.pose.yaw)

        # terrain mapping
        if self._due("map", t, cfg.map_rate_hz):
            self.emap.recenter(est_pose.position)  # scan the grid at its final placement
            samples = simulate_range_scan(self.world, self.robot.pose, est_pose, self.emap, cfg.sensor_range)
            self.emap.update(est_pose.position, samples, unique_cells=True)

        # path management
        if self._due("lookahead", t, cfg.path.update_rate_hz) or self._target is None:
            self._target = self.path_manager.update(est_pose.position)
            self._goal_xy = self._clamp_goal(self._target.goal, est_pose)
            self.log.append(t, "path-goal", anchor=int(self._target.anchor_index),
                            curvature=self._target.curvature, lookahead=self._target.lookahead,
                            goal=list(map(float, self._goal_xy)))

        # local fields
        if self._due("fields", t, cfg.field_rate_hz) and not np.isnan(self.emap.height).all():
            self.emap.score_traversability(cfg.traversability)
            self.emap.refine(cfg.traversability)
            try:
                self.fields = local_planner.build_fields(
                    self.emap, self._goal_xy, downsample=cfg.field_downsample
                )
            except FieldError as err:
                self.fields = None
                self.log.append(t, "field-error", reason=str(err))

        # command selection
        if self.state == "intervention":
            twist = (0.0, 0.0, 0.0)
            if self._teleop is not None and t - self._teleop[0] <= cfg.teleop_hold_s:
                twist = clamp_twist(*self._teleop[1], cfg.command.max_speed)
            source = "operator"
        elif self.fields is not None:
            cmd = local_planner.command(est_pose, self.fields, self.controller, self.dt,
                                        cfg.command, goal_xy=self._goal_xy)
            if cmd.stuck:
                self.log.append(t, "stuck")
            twist = (cmd.vx, cmd.vy, cmd.omega)
            source = "planner"
        else:
            twist, source = (0.0, 0.0, 0.0), "planner"
        self.log.append(t, "twist-command", vx=twist[0], vy=twist[1], omega=twist[2], source=source)

        # progress tracking against the resampled path (estimated frame)
        est_xy = est_pose.position[:2]
        while self._next_target < len(self.path.target_indices):
            tp = self.path.enu[self.path.target_indices[self._next_target]][:2]
            final = self._next_target == len(self.path.target_indices) - 1
            radius = cfg.terminate_radius if final else cfg.arrival_radius
            if float(np.hypot(*(est_xy - tp))) <= radius:
                self.log.append(t, "target-reached", index=self._next_target)
                self._next_target += 1
                if final:
                    self._terminate(t, "mission-complete")
                    return False
            else:
                break

        # actuation
        try:
            self.robot = step(self.robot, twist, self.dt, self.world, cfg.slip_uphill_gain)
        except SimulationFault as err:
            self._terminate(t, "fault", reason=str(err))
            return False

        # gas sampling
        if cfg.gas_mode == "target-region" and not self.gas_active:
            tp = self.path.enu[self.path.target_indices[-1]][:2]
            if float(np.hypot(*(est_xy - tp))) <= cfg.gas_region_radius:
                self.gas_active = True
                self.log.append(t, "gas-activated")
        if self.gas_active and cfg.gas_mode != "off":
            inlet = self.robot.pose.position + np.array([0.0, 0.0, cfg.spectrometer.inlet_height])
            conc = concentration_at(self.gas_sources, self.world.wind, inlet, t)
            readings, self.spectro_state = spectrometer_read(cfg.spectrometer, conc, self.spectro_state, self.dt)
            for r in readings:
                self.log.append(t, "gas", amu=r.species, value=r.value,
                                position=est_pose.position.tolist(), stamp=r.t)

        self.tick_index += 1
        return True

    def _clamp_goal(self, goal, est_pose):
        rel = np.asarray(goal, dtype=float) - est_pose.position[:2]
        limit = self.config.map_size / 2.0 - 0.6
        n = float(np.linalg.norm(rel))
        if n > limit:
            rel = rel * (limit / n)
        return est_pose.position[:2] + rel

    def run(self, max_ticks: int | None = None) -> MissionLog:
        self.start()
        ticks = 0
        while self.tick():
            ticks += 1
            if max_ticks is not None and ticks >= max_ticks:
                break
        return self.log


def run_mission(world: World, graph: RoadGraph, mission: MissionPlan,
                config: MissionConfig | None = None, seed: int = 0) -> MissionLog:
    """Plan and execute a full mission headless; returns the complete log."""
    return MissionRunner(world, graph, mission, config, seed).run()
