"""Deterministic leader-follower platoon simulator with fault injection.

Discrete-time (explicit Euler) longitudinal model. Followers run a
constant-time-gap CACC law fed by predecessor state delayed by the reaction
time; a communication failure freezes that feed at the last received value,
which is exactly the stale-data mechanism that turns a leader's braking into
a platoon crash. Safety-guard activations (reduce speed / change lane /
fall back to ACC / dissolve) take effect one reaction delay after their
event time.

Everything is plain float arithmetic in a fixed order: identical inputs
produce bit-identical traces.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .criticality import Fcm, RankBand
from .errors import ConfigError, DomainError, GuardNotInRow, ParseError, UnknownFault


class Mode(enum.Enum):
    CACC = "CACC"
    ACC = "ACC"
    DISSOLVED = "DISSOLVED"


@dataclass(frozen=True)
class VehicleState:
    id: int
    lane: int
    position: float  # front bumper, meters along lane
    speed: float
    acceleration: float
    mode: Mode


@dataclass(frozen=True)
class PlatoonConfig:
    n_vehicles: int
    initial_speed: float
    standstill_gap: float = 2.0
    time_gap: float = 1.0
    k_p: float = 0.2
    k_v: float = 0.7
    a_min: float = -6.0
    a_max: float = 2.5
    reaction_delay: float = 0.8
    dt: float = 0.1
    lane_count: int = 1
    vehicle_length: float = 4.5
    # Forward sensing range of the on-board obstacle/ranging sensors.
    sensor_range: float = 100.0
    # Speed tracking brakes no harder than this; emergency braking uses a_min.
    service_decel: float = 2.5
    # Dissolved vehicles fall back to solo driving with a wider time gap.
    dissolved_time_gap: float = 2.5

    def validate(self) -> None:
        if self.n_vehicles < 2:
            raise ConfigError(f"need at least 2 vehicles, got {self.n_vehicles}")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not self.a_min < 0 < self.a_max:
            raise ConfigError("need a_min < 0 < a_max")
        if self.time_gap <= 0 or self.standstill_gap <= 0:
            raise ConfigError("time_gap and standstill_gap must be positive")
        if self.lane_count < 1:
            raise ConfigError("need at least one lane")
        if self.initial_speed < 0 or self.reaction_delay < 0:
            raise ConfigError("initial_speed and reaction_delay must be >= 0")


# --- scenario events -------------------------------------------------------


@dataclass(frozen=True)
class ObstacleAppears:
    lane: int
    position: float


@dataclass(frozen=True)
class RsuWarning:
    lane: int
    position: float
    lead_time: float


@dataclass(frozen=True)
class CommFailure:
    from_vehicle: int
    to_vehicle: int
    duration: float


@dataclass(frozen=True)
class DetectionDegraded:
    vehicle: int
    range_factor: float


class GuardKind(enum.Enum):
    REDUCE_SPEED = "reduce_speed"
    CHANGE_LANE = "change_lane"
    ACTIVATE_ACC = "activate_acc"
    DISSOLVE_PLATOON = "dissolve_platoon"
    EXIT_PLATOON = "exit_platoon"


@dataclass(frozen=True)
class GuardActivation:
    kind: GuardKind
    target: float | int | None = None  # speed for reduce_speed, lane for change_lane


Event = ObstacleAppears | RsuWarning | CommFailure | DetectionDegraded | GuardActivation


@dataclass(frozen=True)
class ScenarioEvent:
    time: float
    event: Event
    fault: str | None = None  # qualified fault id this event represents, if any


@dataclass(frozen=True)
class TraceStep:
    time: float
    vehicles: tuple[VehicleState, ...]
    events: tuple[str, ...]


@dataclass(frozen=True)
class ScenarioOutcome:
    collision: bool
    first_collision: tuple[float, tuple[int | str, int | str]] | None
    min_gap: float
    trace: tuple[TraceStep, ...]
    obstacles: tuple[tuple[float, int, float], ...]  # (time appeared, lane, position)
    redundant_bindings: tuple[str, ...] = ()
    fired_bindings: tuple[str, ...] = ()


# --- bindings: FCM guards realized as scenario actions ---------------------


@dataclass(frozen=True)
class GuardBinding:
    fault: str
    guard: str
    actions: tuple[GuardActivation, ...]


@dataclass(frozen=True)
class BindingSet:
    bindings: tuple[GuardBinding, ...]
    redundant: tuple[str, ...]  # faults already ranked No Effect; binding is belt-and-braces

    def for_fault(self, fault: str) -> GuardBinding | None:
        for binding in self.bindings:
            if binding.fault == fault:
                return binding
        return None


def guard_bindings(matrix: Fcm, mapping: list[GuardBinding]) -> BindingSet:
    """Validate fault->guard-action bindings against a criticality matrix."""
    redundant = []
    for binding in mapping:
        if not matrix.has_row(binding.fault):
            raise UnknownFault(binding.fault)
        row = matrix.row(binding.fault)
        if binding.guard not in {gid for gid, _ in row.guards}:
            raise GuardNotInRow(f"{binding.guard!r} is not in the guards of {binding.fault!r}")
        if row.rank_after is RankBand.NO_EFFECT:
            redundant.append(binding.fault)
    return BindingSet(bindings=tuple(mapping), redundant=tuple(redundant))


# --- kinematics ------------------------------------------------------------


def stopping_distance(speed: float, reaction_delay: float, decel: float) -> float:
    """Closed-form distance to standstill: v*tau + v^2 / (2|a|)."""
    if speed < 0 or reaction_delay < 0:
        raise DomainError("speed and reaction delay must be >= 0")
    if decel >= 0:
        raise DomainError("deceleration must be negative")
    return speed * reaction_delay + speed * speed / (2.0 * abs(decel))


def init_platoon(cfg: PlatoonConfig) -> list[VehicleState]:
    """Leader at position 0, followers behind at the target CACC gap."""
    cfg.validate()
    gap = cfg.standstill_gap + cfg.time_gap * cfg.initial_speed
    spacing = gap + cfg.vehicle_length
    return [
        VehicleState(id=i, lane=0, position=-i * spacing, speed=cfg.initial_speed,
                     acceleration=0.0, mode=Mode.CACC)
        for i in range(cfg.n_vehicles)
    ]


def cacc_acceleration(gap: float, own_speed: float, predecessor_speed: float,
                      cfg: PlatoonConfig, time_gap: float | None = None) -> float:
    """Constant-time-gap law, before clamping."""
    h = cfg.time_gap if time_gap is None else time_gap
    target = cfg.standstill_gap + h * own_speed
    return cfg.k_p * (gap - target) + cfg.k_v * (predecessor_speed - own_speed)


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


def step(states: list[VehicleState], cfg: PlatoonConfig,
         views: dict[int, tuple[float, float]] | None = None) -> list[VehicleState]:
    """Advance the platoon one step.

    `views` optionally overrides the (position, speed) each follower sees for
    its predecessor; by default the current state is used (i.e. no delay).
    The full scenario engine feeds delayed or comm-frozen views through this.
    """
    out = []
    for state in states:
        if state.id == 0:
            accel = _clamp(cfg.k_v * (cfg.initial_speed - state.speed),
                           max(cfg.a_min, -cfg.service_decel),
                           min(cfg.a_max, cfg.service_decel))
        else:
            pred = states[state.id - 1]
            view = (views or {}).get(state.id, (pred.position, pred.speed))
            gap = view[0] - cfg.vehicle_length - state.position
            accel = _clamp(cacc_acceleration(gap, state.speed, view[1], cfg),
                           cfg.a_min, cfg.a_max)
        position = state.position + state.speed * cfg.dt
        speed = max(0.0, state.speed + accel * cfg.dt)
        out.append(replace(state, position=position, speed=speed, acceleration=accel))
    return out


# --- scenario engine -------------------------------------------------------


@dataclass
class _Vehicle:
    id: int
    lane: int
    position: float
    speed: float
    acceleration: float
    mode: Mode
    target_speed: float
    range_factor: float = 1.0
    # (obstacle index, first detection time) for the currently tracked obstacle
    detection: tuple[int, float] | None = None

    def snapshot(self) -> VehicleState:
        return VehicleState(id=self.id, lane=self.lane, position=self.position,
                            speed=self.speed, acceleration=self.acceleration, mode=self.mode)


class _Engine:
    def __init__(self, cfg: PlatoonConfig, events: list[ScenarioEvent],
                 bindings: BindingSet | None,
                 initial_states: list[VehicleState] | None = None):
        cfg.validate()
        self.cfg = cfg
        states = initial_states if initial_states is not None else init_platoon(cfg)
        if len(states) != cfg.n_vehicles:
            raise ConfigError("initial states do not match n_vehicles")
        self.vehicles = [
            _Vehicle(id=s.id, lane=s.lane, position=s.position, speed=s.speed,
                     acceleration=s.acceleration, mode=s.mode,
                     target_speed=cfg.initial_speed)
            for s in states
        ]
        for event in events:
            if event.time < 0:
                raise ConfigError("event time must be >= 0")
            self._check_event(event.event)
        self.pending = sorted(events, key=lambda e: e.time)
        self.bindings = bindings
        self.delay_steps = int(round(cfg.reaction_delay / cfg.dt))
        self.history: list[list[tuple[float, float]]] = []
        self.obstacles: list[tuple[float, int, float]] = []
        # (from, to) -> (position, speed, onset, expiry): the last state the
        # receiver got before the failure; held by dead reckoning while active.
        self.comm_freeze: dict[tuple[int, int], tuple[float, float, float, float]] = {}
        self.pending_guards: list[tuple[float, GuardActivation]] = []
        self.fired_bindings: list[str] = []
        self.time = 0.0

    def _check_event(self, event: Event) -> None:
        cfg = self.cfg
        if isinstance(event, (ObstacleAppears, RsuWarning)):
            if not 0 <= event.lane < cfg.lane_count:
                raise ConfigError(f"lane {event.lane} does not exist")
        elif isinstance(event, CommFailure):
            for vid in (event.from_vehicle, event.to_vehicle):
                if not 0 <= vid < cfg.n_vehicles:
                    raise ConfigError(f"vehicle {vid} does not exist")
        elif isinstance(event, DetectionDegraded):
            if not 0 <= event.vehicle < cfg.n_vehicles:
                raise ConfigError(f"vehicle {event.vehicle} does not exist")
        elif isinstance(event, GuardActivation):
            if event.kind is GuardKind.CHANGE_LANE and not 0 <= int(event.target) < cfg.lane_count:
                raise ConfigError(f"lane {event.target} does not exist")

    # -- views ---------------------------------------------------------

    def _sent_state(self, sender: int, at_step: int) -> tuple[float, float, float]:
        """Newest state message available: (position, speed, send time)."""
        index = max(0, at_step - self.delay_steps)
        position, speed = self.history[index][sender]
        return position, speed, index * self.cfg.dt

    def _predecessor_view(self, vid: int, at_step: int) -> tuple[float, float]:
        """What the follower believes about its predecessor.

        State messages age by the reaction delay and are dead-reckoned from
        their send time; while the link is down the receiver keeps
        extrapolating the last message it got, so a braking sender is still
        believed to cruise.
        """
        sender = vid - 1
        frozen = self.comm_freeze.get((sender, vid))
        if frozen is not None:
            position, speed, send_time, expiry = frozen
            if self.time < expiry:
                return (position + speed * (self.time - send_time), speed)
        position, speed, send_time = self._sent_state(sender, at_step)
        return (position + speed * (self.time - send_time), speed)

    # -- events ----------------------------------------------------------

    def _apply_event(self, scenario_event: ScenarioEvent, fired: list[str]) -> None:
        event = scenario_event.event
        fired.append(_describe_event(scenario_event))
        if isinstance(event, ObstacleAppears):
            self.obstacles.append((self.time, event.lane, event.position))
        elif isinstance(event, RsuWarning):
            pass  # informational broadcast; bindings may hang off its fault tag
        elif isinstance(event, CommFailure):
            at_step = len(self.history) - 1
            position, speed, send_time = self._sent_state(event.from_vehicle, at_step)
            self.comm_freeze[(event.from_vehicle, event.to_vehicle)] = (
                position, speed, send_time, self.time + event.duration)
        elif isinstance(event, DetectionDegraded):
            self.vehicles[event.vehicle].range_factor = event.range_factor
        elif isinstance(event, GuardActivation):
            self.pending_guards.append((self.time + self.cfg.reaction_delay, event))

        if scenario_event.fault is not None and self.bindings is not None:
            binding = self.bindings.for_fault(scenario_event.fault)
            if binding is not None and scenario_event.fault not in self.fired_bindings:
                self.fired_bindings.append(scenario_event.fault)
                fired.append(f"binding fired: {binding.guard} for {binding.fault}")
                for action in binding.actions:
                    self.pending_guards.append((self.time + self.cfg.reaction_delay, action))

    def _apply_guard(self, action: GuardActivation, fired: list[str]) -> None:
        fired.append(f"guard effective: {action.kind.value}"
                     + (f"({action.target})" if action.target is not None else ""))
        if action.kind is GuardKind.REDUCE_SPEED:
            for vehicle in self.vehicles:
                vehicle.target_speed = float(action.target)
        elif action.kind is GuardKind.CHANGE_LANE:
            for vehicle in self.vehicles:
                vehicle.lane = int(action.target)
        elif action.kind is GuardKind.ACTIVATE_ACC:
            for vehicle in self.vehicles:
                vehicle.mode = Mode.ACC
        else:  # dissolve_platoon / exit_platoon both end CACC coupling
            for vehicle in self.vehicles:
                vehicle.mode = Mode.DISSOLVED

    # -- sensing ---------------------------------------------------------

    def _nearest_ahead(self, vehicle: _Vehicle):
        """Closest entity ahead in the vehicle's lane: ('vehicle'|'obstacle', index, gap)."""
        best = None
        for other in self.vehicles:
            if other.id == vehicle.id or other.lane != vehicle.lane:
                continue
            if other.position > vehicle.position:
                gap = other.position - self.cfg.vehicle_length - vehicle.position
                if best is None or gap < best[2]:
                    best = ("vehicle", other.id, gap)
        for idx, (_, lane, position) in enumerate(self.obstacles):
            if lane != vehicle.lane:
                continue
            # An obstacle stays "ahead" until it is behind the vehicle's rear,
            # so overlap shows up as a negative gap instead of vanishing.
            if position > vehicle.position - self.cfg.vehicle_length:
                gap = position - vehicle.position
                if best is None or gap < best[2]:
                    best = ("obstacle", idx, gap)
        return best

    def _obstacle_brake(self, vehicle: _Vehicle) -> bool:
        """Emergency-brake flag: nearest-ahead obstacle inside sensed range,
        and the reaction delay since first detection has elapsed."""
        nearest = self._nearest_ahead(vehicle)
        sensed = self.cfg.sensor_range * vehicle.range_factor
        if nearest is None or nearest[0] != "obstacle" or nearest[2] > sensed:
            vehicle.detection = None
            return False
        if vehicle.detection is None or vehicle.detection[0] != nearest[1]:
            vehicle.detection = (nearest[1], self.time)
        return self.time >= vehicle.detection[1] + self.cfg.reaction_delay

    # -- control ---------------------------------------------------------

    def _acceleration(self, vehicle: _Vehicle, at_step: int) -> float:
        cfg = self.cfg
        comfort_lo = max(cfg.a_min, -cfg.service_decel)
        comfort_hi = min(cfg.a_max, cfg.service_decel)

        if vehicle.mode is Mode.CACC and vehicle.id > 0:
            view = self._predecessor_view(vehicle.id, at_step)
            gap = view[0] - cfg.vehicle_length - vehicle.position
            accel = _clamp(cacc_acceleration(gap, vehicle.speed, view[1], cfg),
                           cfg.a_min, cfg.a_max)
        else:
            # Leader, or a vehicle driving on its own sensors (ACC/dissolved).
            accel = _clamp(cfg.k_v * (vehicle.target_speed - vehicle.speed),
                           comfort_lo, comfort_hi)
            if vehicle.mode is not Mode.CACC:
                nearest = self._nearest_ahead(vehicle)
                sensed = cfg.sensor_range * vehicle.range_factor
                if nearest is not None and nearest[0] == "vehicle" and nearest[2] <= sensed:
                    other = self.vehicles[nearest[1]]
                    h = cfg.time_gap if vehicle.mode is Mode.ACC else cfg.dissolved_time_gap
                    following = _clamp(
                        cacc_acceleration(nearest[2], vehicle.speed, other.speed, cfg, h),
                        cfg.a_min, cfg.a_max)
                    accel = min(accel, following)

        if self._obstacle_brake(vehicle):
            accel = cfg.a_min
        return accel

    # -- collision scan ----------------------------------------------------

    def _scan_gaps(self):
        """Min gap over adjacent same-lane pairs, vehicles and obstacles alike."""
        min_gap = math.inf
        worst = None
        for vehicle in self.vehicles:
            nearest = self._nearest_ahead(vehicle)
            if nearest is None:
                continue
            kind, index, gap = nearest
            if gap < min_gap:
                min_gap = gap
                ahead = index if kind == "vehicle" else f"obstacle[{index}]"
                worst = (vehicle.id, ahead)
        return min_gap, worst

    # -- main loop ---------------------------------------------------------

    def run(self, duration: float) -> ScenarioOutcome:
        if duration < 0:
            raise ConfigError("duration must be >= 0")
        cfg = self.cfg
        steps = math.ceil(duration / cfg.dt)

        self.history.append([(v.position, v.speed) for v in self.vehicles])
        trace = [TraceStep(time=0.0, vehicles=tuple(v.snapshot() for v in self.vehicles),
                           events=())]
        min_gap = math.inf
        first_collision = None

        gap, worst = self._scan_gaps()
        min_gap = min(min_gap, gap)
        if gap <= 0 and first_collision is None:
            first_collision = (0.0, worst)

        for k in range(steps):
            fired: list[str] = []
            while self.pending and self.pending[0].time <= self.time + 1e-9:
                self._apply_event(self.pending.pop(0), fired)
            due = [g for g in self.pending_guards if g[0] <= self.time + 1e-9]
            self.pending_guards = [g for g in self.pending_guards if g[0] > self.time + 1e-9]
            for _, action in sorted(due, key=lambda g: g[0]):
                self._apply_guard(action, fired)

            at_step = len(self.history) - 1
            accels = [self._acceleration(v, at_step) for v in self.vehicles]
            for vehicle, accel in zip(self.vehicles, accels):
                vehicle.position += vehicle.speed * cfg.dt
                vehicle.speed = max(0.0, vehicle.speed + accel * cfg.dt)
                vehicle.acceleration = accel

            self.time = (k + 1) * cfg.dt
            self.history.append([(v.position, v.speed) for v in self.vehicles])
            trace.append(TraceStep(time=self.time,
                                   vehicles=tuple(v.snapshot() for v in self.vehicles),
                                   events=tuple(fired)))

            gap, worst = self._scan_gaps()
            min_gap = min(min_gap, gap)
            if gap <= 0 and first_collision is None:
                first_collision = (self.time, worst)

        return ScenarioOutcome(
            collision=first_collision is not None,
            first_collision=first_collision,
            min_gap=min_gap if min_gap != math.inf else math.inf,
            trace=tuple(trace),
            obstacles=tuple(self.obstacles),
            redundant_bindings=self.bindings.redundant if self.bindings else (),
            fired_bindings=tuple(self.fired_bindings),
        )


def run_scenario(cfg: PlatoonConfig, events: list[ScenarioEvent], duration: float,
                 bindings: BindingSet | None = None,
                 initial_states: list[VehicleState] | None = None) -> ScenarioOutcome:
    """Run one scenario to completion; deterministic for identical inputs."""
    return _Engine(cfg, events, bindings, initial_states).run(duration)


def _describe_event(scenario_event: ScenarioEvent) -> str:
    event = scenario_event.event
    if isinstance(event, ObstacleAppears):
        text = f"obstacle appears: lane {event.lane} at {event.position:g} m"
    elif isinstance(event, RsuWarning):
        text = f"RSU warning: lane {event.lane} at {event.position:g} m"
    elif isinstance(event, CommFailure):
        text = (f"comm failure {event.from_vehicle}->{event.to_vehicle} "
                f"for {event.duration:g} s")
    elif isinstance(event, DetectionDegraded):
        text = f"detection degraded: vehicle {event.vehicle} x{event.range_factor:g}"
    else:
        text = f"guard activation: {event.kind.value}" + (
            f"({event.target})" if event.target is not None else "")
    if scenario_event.fault:
        text += f" [{scenario_event.fault}]"
    return text


# --- scenario files ---------------------------------------------------------


def _parse_guard_action(obj: dict, locus: str) -> GuardActivation:
    try:
        kind = GuardKind(obj["action"])
    except (KeyError, ValueError):
        raise ParseError(f"unknown guard action in {obj!r}", locus) from None
    target = obj.get("target")
    if kind in (GuardKind.REDUCE_SPEED, GuardKind.CHANGE_LANE) and target is None:
        raise ParseError(f"{kind.value} needs a target", locus)
    return GuardActivation(kind=kind, target=target)


_EVENT_PARSERS = {
    "obstacle": lambda e, loc: ObstacleAppears(lane=e["lane"], position=e["position"]),
    "rsu_warning": lambda e, loc: RsuWarning(lane=e["lane"], position=e["position"],
                                             lead_time=e.get("lead_time", 0.0)),
    "comm_failure": lambda e, loc: CommFailure(from_vehicle=e["from_vehicle"],
                                               to_vehicle=e["to_vehicle"],
                                               duration=e["duration"]),
    "detection_degraded": lambda e, loc: DetectionDegraded(vehicle=e["vehicle"],
                                                           range_factor=e["range_factor"]),
    "guard": _parse_guard_action,
}


@dataclass(frozen=True)
class Scenario:
    config: PlatoonConfig
    events: tuple[ScenarioEvent, ...]
    duration: float
    bindings: tuple[GuardBinding, ...] = ()
    description: str = ""


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return parse_scenario(data)


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict) or "config" not in data:
        raise ParseError("scenario file needs a 'config' object", "$")
    known = {f for f in PlatoonConfig.__dataclass_fields__}
    extra = set(data["config"]) - known
    if extra:
        raise ParseError(f"unknown config fields: {sorted(extra)}", "$.config")
    try:
        config = PlatoonConfig(**data["config"])
    except TypeError as exc:
        raise ParseError(str(exc), "$.config") from exc

    events = []
    for i, e in enumerate(data.get("events", [])):
        locus = f"$.events[{i}]"
        parser = _EVENT_PARSERS.get(e.get("type"))
        if parser is None:
            raise ParseError(f"unknown event type {e.get('type')!r}", locus)
        try:
            event = parser(e, locus)
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", locus) from None
        events.append(ScenarioEvent(time=float(e.get("time", 0.0)), event=event,
                                    fault=e.get("fault")))

    bindings = []
    for i, b in enumerate(data.get("bindings", [])):
        locus = f"$.bindings[{i}]"
        actions = tuple(_parse_guard_action(a, f"{locus}.actions[{j}]")
                        for j, a in enumerate(b.get("actions", [])))
        try:
            bindings.append(GuardBinding(fault=b["fault"], guard=b["guard"], actions=actions))
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", locus) from None

    return Scenario(config=config, events=tuple(events),
                    duration=float(data.get("duration", 0.0)),
                    bindings=tuple(bindings), description=data.get("description", ""))


def trace_to_csv(outcome: ScenarioOutcome) -> str:
    lines = ["time,vehicle,lane,position,speed,acceleration,mode"]
    for step_ in outcome.trace:
        for v in step_.vehicles:
            lines.append(f"{step_.time:.3f},{v.id},{v.lane},{v.position:.6f},"
                         f"{v.speed:.6f},{v.acceleration:.6f},{v.mode.value}")
    return "\n".join(lines) + "\n"
