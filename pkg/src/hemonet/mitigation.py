"""Oxygen storage tanks and flow-weighted Monte Carlo robot histories.

Robots top up an on-board tank during each lung-capillary pass and draw
from it on circulation loops that run past a time threshold.  Two usage
policies are modeled: draw whenever past the threshold, or arm the tank
only once it has completely filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import PhysicalConstants
from .network import CirculationNetwork, Path, PathSet, enumerate_paths
from .oxygen import robot_flux
from .transport import SwarmConfig, uptake_factor  # noqa: F401  (re-export)

DEFAULT_TANK_CAPACITY = 1.8e10  # molecules: 100 pW for 60 s
DEFAULT_DRAW_POWER = 100.0e-12  # W
DEFAULT_USE_THRESHOLD = 60.0  # s since the last lung exit
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class TankSpec:
    """On-board oxygen store and its usage policy."""

    capacity: float = DEFAULT_TANK_CAPACITY  # molecules
    draw_power: float = DEFAULT_DRAW_POWER  # W
    use_threshold: float = DEFAULT_USE_THRESHOLD  # s
    policy: str = "always"  # or "when-full"
    supplement: bool = False  # top up ambient power to draw_power instead

    _POLICIES = ("always", "when-full")

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("tank capacity must be positive")
        if self.policy not in self._POLICIES:
            raise ValueError(f"unknown tank policy {self.policy!r}")

    def draw_rate(self, constants: PhysicalConstants) -> float:
        """Molecules per second at the nominal draw power."""
        return self.draw_power / constants.robot_energy_per_o2


@dataclass(frozen=True)
class TankEvent:
    """One lung return: arrival time, path taken, tank bookkeeping."""

    time: float  # s, cumulative robot clock at the lung return
    path_id: str
    fill_fraction_at_return: float
    molecules_drawn: float


@dataclass(frozen=True)
class TankTrace:
    events: tuple[TankEvent, ...]

    def __post_init__(self):
        fills = [e.fill_fraction_at_return for e in self.events]
        if any(not 0.0 <= f <= 1.0 for f in fills):
            raise ValueError("fill fractions must lie in [0, 1]")

    def __len__(self):
        return len(self.events)


def sample_path(paths: PathSet, rng: np.random.Generator, weights=None) -> Path:
    """Draw a circulation path with probability proportional to its flow.

    ``weights`` optionally overrides the per-path weights (path-selection
    mitigation, e.g. zero weight on the slow spleen).
    """
    if len(paths) == 0:
        raise ValueError("cannot sample from an empty path set")
    if weights is None:
        w = np.array([p.flow for p in paths])
    else:
        w = np.array([weights.get(p.id, p.flow) for p in paths], dtype=float)
    if w.sum() <= 0:
        raise ValueError("path weights must have positive total")
    idx = rng.choice(len(paths), p=w / w.sum())
    return paths[int(idx)]


def robot_transit_time(network: CirculationNetwork, segment_id: str) -> float:
    """Transit of a robot riding with the cells (s).

    Cells run ahead of the bulk in low-hematocrit stretches and lag in the
    spleen slits, so robot time is the hematocrit-weighted bulk time.
    """
    seg = network.segments[segment_id]
    prof = seg.hematocrit_profile
    hd = network.constants.discharge_hematocrit
    total = 0.0
    for (f0, h0), (f1, h1) in zip(prof.breakpoints, prof.breakpoints[1:]):
        total += (f1 - f0) * seg.transit_time * 0.5 * (h0 + h1) / hd
    return total


def lung_fill_per_pass(
    network: CirculationNetwork,
    spec: TankSpec,
    constants: PhysicalConstants | None = None,
    robot_radius: float = 1.0e-6,
) -> float:
    """Molecules added to the tank during one lung-capillary transit."""
    constants = constants or network.constants
    lung = network.segments[network.lung_id()]
    win = lung.hematocrit_profile.capillary_window
    from .network import hematocrit_at

    h_win = hematocrit_at(lung.hematocrit_profile, 0.5 * (win[0] + win[1]))
    window_blood_time = (win[1] - win[0]) * lung.transit_time
    robot_window_time = window_blood_time * h_win / constants.discharge_hematocrit
    flux = robot_flux(constants.lung_exit_plasma_concentration, robot_radius, constants)
    return min(flux * robot_window_time, spec.capacity)


@dataclass
class _PathTiming:
    path_id: str
    loop_time: float  # robot clock, lung window end to next window end
    pre_fill_time: float  # portion before the next fill event


def _path_timings(network: CirculationNetwork) -> dict[str, _PathTiming]:
    """Robot-clock duration of each loop, lung window end to window end."""
    lung = network.segments[network.lung_id()]
    win = lung.hematocrit_profile.capillary_window
    prof = lung.hematocrit_profile
    hd = network.constants.discharge_hematocrit

    def span_time(f_from: float, f_to: float) -> float:
        fracs = sorted({f for f, _ in prof.breakpoints} | {f_from, f_to})
        from .network import hematocrit_at

        total = 0.0
        for a, b in zip(fracs, fracs[1:]):
            if a < f_from or b > f_to:
                continue
            hm = 0.5 * (hematocrit_at(prof, a) + hematocrit_at(prof, b))
            total += (b - a) * lung.transit_time * hm / hd
        return total

    lung_tail = span_time(win[1], 1.0)
    lung_head = span_time(0.0, win[0])
    window_time = span_time(win[0], win[1])

    timings = {}
    for path in enumerate_paths(network):
        systemic = [s for s in path.segments if s != network.lung_id()]
        body_time = sum(robot_transit_time(network, sid) for sid in systemic)
        pre_fill = lung_tail + body_time + lung_head
        timings[path.id] = _PathTiming(
            path_id=path.id,
            loop_time=pre_fill + window_time,
            pre_fill_time=pre_fill,
        )
    return timings


def simulate_tank(
    spec: TankSpec,
    duration: float,
    swarm: SwarmConfig,
    network: CirculationNetwork,
    rng: np.random.Generator,
    constants: PhysicalConstants | None = None,
    path_weights: dict | None = None,
) -> TankTrace:
    """Walk one robot over flow-weighted random loops, tracking its tank.

    Starting with an empty tank at a lung exit, the robot adds a fixed top-up
    each lung pass and, past the use threshold on a loop, draws the nominal
    power until it reaches the lung or the tank runs dry.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    constants = constants or network.constants
    paths = enumerate_paths(network)
    timings = _path_timings(network)
    fill = lung_fill_per_pass(network, spec, constants, swarm.robot_radius)
    rate = spec.draw_rate(constants)

    level = 0.0
    armed = spec.policy == "always"
    clock = 0.0
    events: list[TankEvent] = []
    while clock < duration:
        path = sample_path(paths, rng, weights=path_weights)
        timing = timings[path.id]
        drawn = 0.0
        draw_window = timing.pre_fill_time - spec.use_threshold
        if draw_window > 0 and armed and rate > 0:
            drawn = min(level, rate * draw_window)
            level -= drawn
            if level <= 0.0:
                level = 0.0
                if spec.policy == "when-full":
                    armed = False
        clock += timing.loop_time
        events.append(
            TankEvent(
                time=clock,
                path_id=path.id,
                fill_fraction_at_return=level / spec.capacity,
                molecules_drawn=drawn,
            )
        )
        level = min(level + fill, spec.capacity)
        if spec.policy == "when-full" and level >= spec.capacity:
            armed = True
    return TankTrace(events=tuple(events))


@dataclass(frozen=True)
class TankHistogram:
    """Distribution of the tank fill fraction at lung returns."""

    policy: str
    bin_edges: tuple  # left edges plus final right edge, length bins+1
    counts: tuple
    n_events: int

    def mass_below(self, threshold: float) -> float:
        total = sum(self.counts)
        if total == 0:
            return 0.0
        acc = 0.0
        for left, right, cnt in zip(self.bin_edges, self.bin_edges[1:], self.counts):
            if right <= threshold:
                acc += cnt
            elif left < threshold:
                acc += cnt * (threshold - left) / (right - left)
        return acc / total

    @property
    def mode_bin_left_edge(self) -> float:
        i = int(np.argmax(self.counts))
        return self.bin_edges[i]


def tank_distribution(
    spec: TankSpec,
    robots: int,
    horizon: float,
    rng: np.random.Generator,
    network: CirculationNetwork,
    swarm: SwarmConfig | None = None,
    warmup: float = 600.0,
    bins: int = HISTOGRAM_BINS,
) -> TankHistogram:
    """Histogram of the fill fraction at lung return over many robots.

    Events inside the warmup window are discarded so the start-empty
    transient does not bias the distribution.
    """
    if robots < 1:
        raise ValueError("need at least one simulated robot history")
    swarm = swarm or SwarmConfig(robot_count=0.0)
    fills: list[float] = []
    for i in range(robots):
        sub = np.random.default_rng(rng.integers(0, 2**63 - 1))
        trace = simulate_tank(spec, horizon, swarm, network, sub)
        fills.extend(
            e.fill_fraction_at_return for e in trace.events if e.time > warmup
        )
    counts, edges = np.histogram(fills, bins=bins, range=(0.0, 1.0))
    return TankHistogram(
        policy=spec.policy,
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        n_events=len(fills),
    )
