"""Circulation network dataset: segments, topology, hematocrit profiles.

The default network aggregates the circulation into 17 segments (heart
chambers, lungs, ten systemic entry branches, portal plumbing and the two
venae cavae).  Values are a resting adult averaged over the heart cycle and
are stored in SI units; the on-disk JSON format uses clinical units
(s, L/min, mL, mmHg, MPa s/m^3).
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field, replace

from .constants import (
    DISCHARGE_HEMATOCRIT,
    L_PER_MIN_TO_M3_PER_S,
    ML_TO_M3,
    MMHG_TO_PA,
    MPA_S_PER_M3_TO_SI,
    PhysicalConstants,
)
from .errors import ConfigError, NetworkStructureError

HEMATOCRIT_LARGE_VESSEL = 0.45
HEMATOCRIT_CAPILLARY = 0.33
HEMATOCRIT_SPLEEN_SLIT = 0.71

#: Duration of hematocrit transitions flanking a capillary window (s).
RAMP_SECONDS = 1.0
#: Capillary transit for ordinary tissue, the lungs, and the slow-spleen
#: overhead (time outside the slits).
CAPILLARY_WINDOW_SECONDS = 1.0
LUNG_WINDOW_SECONDS = 0.75
SLOW_SPLEEN_OVERHEAD_SECONDS = 50.0

DEFAULT_PER_CAPILLARY_POWER = 2.0e-8  # W, ~3x the body-average per capillary


@dataclass(frozen=True)
class BloodGlobals:
    """Whole-body flow parameters."""

    total_volume: float  # m^3
    total_flow: float  # m^3/s
    systemic_pressure_drop: float  # Pa
    pulmonary_pressure_drop: float  # Pa

    def __post_init__(self):
        if self.total_volume <= 0 or self.total_flow <= 0:
            raise ValueError("blood volume and flow must be positive")

    @property
    def mean_circulation_time(self) -> float:
        return self.total_volume / self.total_flow


@dataclass(frozen=True)
class HematocritProfile:
    """Piecewise-linear hematocrit along a segment.

    Breakpoints are (fraction of transit, hematocrit) pairs with fractions
    strictly increasing from 0 to 1.  ``capillary_window`` marks the
    fraction interval spent in exchange vessels (or spleen slits), if any.
    """

    breakpoints: tuple[tuple[float, float], ...]
    capillary_window: tuple[float, float] | None = None

    def __post_init__(self):
        fracs = [f for f, _ in self.breakpoints]
        if len(fracs) < 2 or fracs[0] != 0.0 or fracs[-1] != 1.0:
            raise ValueError("profile must span fractions 0 to 1")
        if any(f1 <= f0 for f0, f1 in zip(fracs, fracs[1:])):
            raise ValueError("profile fractions must be strictly increasing")
        if any(not 0.0 <= h <= 1.0 for _, h in self.breakpoints):
            raise ValueError("hematocrit values must lie in [0, 1]")
        if self.capillary_window is not None:
            lo, hi = self.capillary_window
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError("capillary window must be an interval in [0, 1]")

    @property
    def start_value(self) -> float:
        return self.breakpoints[0][1]

    @property
    def end_value(self) -> float:
        return self.breakpoints[-1][1]


def hematocrit_at(profile: HematocritProfile, s: float) -> float:
    """Hematocrit at fraction-of-transit ``s`` by linear interpolation."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"fraction of transit must lie in [0, 1], got {s}")
    points = profile.breakpoints
    idx = bisect_right([f for f, _ in points], s) - 1
    if idx >= len(points) - 1:
        return points[-1][1]
    (f0, h0), (f1, h1) = points[idx], points[idx + 1]
    return h0 + (h1 - h0) * (s - f0) / (f1 - f0)


@dataclass(frozen=True)
class TissueDemand:
    """Oxygen demand of the tissue supplied by a segment's capillaries.

    Modes: ``none`` (no exchange), ``standard`` (fixed per-capillary power),
    ``coronary`` (demand scaled so the no-robot capillary exit holds 30% of
    the entry oxygen), ``scaled-by-transit`` (slow spleen: same total demand
    per pass as a one-second capillary transit).
    """

    mode: str = "none"
    per_capillary_power: float = DEFAULT_PER_CAPILLARY_POWER  # W

    _MODES = ("none", "standard", "coronary", "scaled-by-transit")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ConfigError(f"unknown tissue mode {self.mode!r}")
        if self.per_capillary_power < 0:
            raise ValueError("per-capillary power must be non-negative")


SEGMENT_KINDS = ("pump", "lung", "systemic", "vein", "portal-limb")


@dataclass(frozen=True)
class Segment:
    """One aggregated piece of the circulation."""

    id: str
    kind: str
    transit_time: float  # s
    flow: float  # m^3/s
    volume: float  # m^3
    resistance: float | None = None  # Pa s/m^3; None for heart-chamber pumps
    pressure_drop: float | None = None  # Pa; None for pumps
    hematocrit_profile: HematocritProfile = field(
        default_factory=lambda: flat_profile()
    )
    tissue: TissueDemand = field(default_factory=TissueDemand)

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigError(f"unknown segment kind {self.kind!r}")
        if self.transit_time <= 0 or self.flow <= 0 or self.volume <= 0:
            raise ValueError(f"segment {self.id}: t, F, V must be positive")

    @property
    def has_capillary_window(self) -> bool:
        return self.hematocrit_profile.capillary_window is not None

    def window_seconds(self) -> float | None:
        win = self.hematocrit_profile.capillary_window
        if win is None:
            return None
        return (win[1] - win[0]) * self.transit_time


@dataclass(frozen=True)
class Junction:
    """A merge or split node: several segments feeding or fed by one."""

    id: str
    kind: str  # "merge" or "split"
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class CirculationNetwork:
    """Directed graph of segments plus whole-body globals and constants."""

    globals: BloodGlobals
    segments: dict[str, Segment]
    edges: tuple[tuple[str, str], ...]
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        ids = set(self.segments)
        for a, b in self.edges:
            if a not in ids or b not in ids:
                raise NetworkStructureError(f"edge ({a}, {b}) references unknown segment")

    def downstream(self, seg_id: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.edges if a == seg_id)

    def upstream(self, seg_id: str) -> tuple[str, ...]:
        return tuple(a for a, b in self.edges if b == seg_id)

    @property
    def junctions(self) -> tuple[Junction, ...]:
        nodes = []
        for sid in self.segments:
            ups = self.upstream(sid)
            if len(ups) > 1:
                nodes.append(Junction(f"into-{sid}", "merge", ups, (sid,)))
            downs = self.downstream(sid)
            if len(downs) > 1:
                nodes.append(Junction(f"out-of-{sid}", "split", (sid,), downs))
        return tuple(nodes)

    def lung_id(self) -> str:
        lungs = [s.id for s in self.segments.values() if s.kind == "lung"]
        if len(lungs) != 1:
            raise NetworkStructureError(f"expected exactly one lung segment, found {lungs}")
        return lungs[0]

    def total_segment_volume(self) -> float:
        return sum(s.volume for s in self.segments.values())


# ---------------------------------------------------------------------------
# Hematocrit profile construction


def _dedupe(points: list[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    out: list[tuple[float, float]] = []
    for f, h in points:
        if out and abs(f - out[-1][0]) < 1e-12:
            continue
        out.append((f, h))
    return tuple(out)


def flat_profile(h: float = HEMATOCRIT_LARGE_VESSEL) -> HematocritProfile:
    return HematocritProfile(breakpoints=((0.0, h), (1.0, h)))


def capillary_profile(
    transit: float,
    window: float = CAPILLARY_WINDOW_SECONDS,
    ramp: float = RAMP_SECONDS,
    h_large: float = HEMATOCRIT_LARGE_VESSEL,
    h_window: float = HEMATOCRIT_CAPILLARY,
    window_start: float | None = None,
) -> HematocritProfile:
    """Profile with a capillary plateau mid-segment (or at ``window_start``).

    Short segments compress the flanking ramps so the window keeps its
    duration whenever ``transit`` allows.
    """
    window = min(window, transit)
    ramp = min(ramp, max((transit - window) / 2.0, 0.0))
    if window_start is None:
        ws = (transit - window) / 2.0
    else:
        ws = min(max(window_start, 0.0), transit - window)
    we = ws + window
    pts: list[tuple[float, float]] = []
    if ws > 0.0:
        pts += [(0.0, h_large), (max(ws - ramp, 0.0) / transit, h_large)]
    pts += [(ws / transit, h_window), (we / transit, h_window)]
    if we < transit:
        pts += [(min(we + ramp, transit) / transit, h_large), (1.0, h_large)]
    return HematocritProfile(
        breakpoints=_dedupe(sorted(pts)),
        capillary_window=(ws / transit, we / transit),
    )


def vein_entry_profile(transit: float, ramp: float = RAMP_SECONDS) -> HematocritProfile:
    """Portal-limb profile: large-vessel value ramping down to the capillary
    value at the segment end (the segment ends inside liver capillaries)."""
    ramp = min(ramp, transit)
    return HematocritProfile(
        breakpoints=_dedupe(
            [
                (0.0, HEMATOCRIT_LARGE_VESSEL),
                ((transit - ramp) / transit, HEMATOCRIT_LARGE_VESSEL),
                (1.0, HEMATOCRIT_CAPILLARY),
            ]
        )
    )


def slow_spleen_profile(transit: float) -> HematocritProfile:
    """Slow-spleen profile: most of the transit in high-hematocrit slits."""
    window = max(transit - SLOW_SPLEEN_OVERHEAD_SECONDS, 0.6 * transit)
    return capillary_profile(
        transit,
        window=window,
        h_window=HEMATOCRIT_SPLEEN_SLIT,
    )


def liver_profile(transit: float) -> HematocritProfile:
    """Liver segment starts inside its capillaries and carries the window."""
    return capillary_profile(transit, window_start=0.0)


# ---------------------------------------------------------------------------
# Default dataset

_MIN = L_PER_MIN_TO_M3_PER_S
_ML = ML_TO_M3
_MMHG = MMHG_TO_PA
_MPA = MPA_S_PER_M3_TO_SI

# Columns: transit s, resistance MPa s/m^3, flow L/min, volume mL,
# pressure drop mmHg, kind, tissue mode, profile builder.
#
# The published flow column rounds the spleen flows to 0.13 and 0.01 L/min;
# those roundings break V = tF, dP = RF and the portal junction balance.
# The values below restore the 90/10 split of the 0.15 L/min spleen flow
# that every other column of the table was computed from.
_DEFAULT_ROWS: list[tuple] = [
    # id, kind, t, R, F, V, dP, tissue mode, profile
    ("left-heart", "pump", 2.5, None, 5.0, 208.0, None, "none", "flat"),
    ("right-heart", "pump", 2.5, None, 5.0, 208.0, None, "none", "flat"),
    ("coronary", "systemic", 3.0, 3800.0, 0.2, 10.0, 95.0, "coronary", "capillary"),
    ("lungs", "lung", 6.0, 12.8, 5.0, 500.0, 8.0, "none", "lung"),
    ("head", "systemic", 25.0, 945.0, 0.8, 333.0, 94.5, "standard", "capillary"),
    ("arms", "systemic", 60.0, 1890.0, 0.4, 400.0, 94.5, "standard", "capillary"),
    ("spleen-fast", "systemic", 25.0, 5210.0, 0.135, 56.0, 87.8, "standard", "capillary"),
    ("spleen-slow", "systemic", 750.0, 46900.0, 0.015, 187.0, 87.8, "scaled-by-transit", "slit"),
    ("digestive", "systemic", 45.0, 868.0, 0.81, 607.0, 87.8, "standard", "capillary"),
    ("liver", "systemic", 25.0, 33.0, 1.2, 500.0, 4.9, "standard", "liver"),
    ("kidney", "systemic", 15.0, 752.0, 1.0, 250.0, 94.0, "standard", "capillary"),
    ("other-torso", "systemic", 51.0, 940.0, 0.8, 680.0, 94.0, "standard", "capillary"),
    ("hepatic", "portal-limb", 2.0, 2970.0, 0.24, 8.0, 89.0, "none", "vein-entry"),
    ("portal", "portal-limb", 3.0, 10.0, 0.96, 48.0, 1.2, "none", "vein-entry"),
    ("legs", "systemic", 120.0, 1250.0, 0.6, 1203.0, 94.0, "standard", "capillary"),
    ("svc", "vein", 1.0, 3.3, 1.2, 20.0, 0.5, "none", "flat"),
    ("ivc", "vein", 3.0, 2.2, 3.6, 180.0, 1.0, "none", "flat"),
]

SYSTEMIC_ENTRY_BRANCHES = (
    "head",
    "arms",
    "coronary",
    "kidney",
    "other-torso",
    "legs",
    "digestive",
    "spleen-fast",
    "spleen-slow",
    "hepatic",
)

_DEFAULT_EDGES: list[tuple[str, str]] = (
    [("left-heart", b) for b in SYSTEMIC_ENTRY_BRANCHES]
    + [
        ("head", "svc"),
        ("arms", "svc"),
        ("digestive", "portal"),
        ("spleen-fast", "portal"),
        ("spleen-slow", "portal"),
        ("portal", "liver"),
        ("hepatic", "liver"),
        ("liver", "ivc"),
        ("kidney", "ivc"),
        ("other-torso", "ivc"),
        ("legs", "ivc"),
        ("svc", "right-heart"),
        ("ivc", "right-heart"),
        ("coronary", "right-heart"),
        ("right-heart", "lungs"),
        ("lungs", "left-heart"),
    ]
)

_PROFILE_BUILDERS = {
    "flat": lambda t: flat_profile(),
    "capillary": lambda t: capillary_profile(t),
    "lung": lambda t: capillary_profile(t, window=LUNG_WINDOW_SECONDS),
    "slit": slow_spleen_profile,
    "liver": liver_profile,
    "vein-entry": vein_entry_profile,
}


def build_profile(archetype: str, transit: float) -> HematocritProfile:
    try:
        return _PROFILE_BUILDERS[archetype](transit)
    except KeyError:
        raise ConfigError(f"unknown profile archetype {archetype!r}") from None


def default_globals() -> BloodGlobals:
    return BloodGlobals(
        total_volume=5.4e-3,
        total_flow=5.0 * _MIN,
        systemic_pressure_drop=95.0 * _MMHG,
        pulmonary_pressure_drop=8.0 * _MMHG,
    )


def default_network(constants: PhysicalConstants | None = None) -> CirculationNetwork:
    """The embedded 17-segment resting-adult dataset."""
    segments: dict[str, Segment] = {}
    for sid, kind, t, r, f, v, dp, tissue_mode, prof in _DEFAULT_ROWS:
        segments[sid] = Segment(
            id=sid,
            kind=kind,
            transit_time=t,
            flow=f * _MIN,
            volume=v * _ML,
            resistance=None if r is None else r * _MPA,
            pressure_drop=None if dp is None else dp * _MMHG,
            hematocrit_profile=build_profile(prof, t),
            tissue=TissueDemand(mode=tissue_mode),
        )
    return CirculationNetwork(
        globals=default_globals(),
        segments=segments,
        edges=tuple(_DEFAULT_EDGES),
        constants=constants or PhysicalConstants(),
    )


# ---------------------------------------------------------------------------
# Path enumeration


@dataclass(frozen=True)
class Path:
    """One loop through the circulation, left heart back to the lungs."""

    id: str  # name of the entry branch after the left heart
    segments: tuple[str, ...]
    flow: float  # m^3/s, bottleneck flow consistent with junction splits
    transit_time: float  # s, sum of member transits


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]

    def __iter__(self):
        return iter(self.paths)

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, key):
        if isinstance(key, str):
            for p in self.paths:
                if p.id == key:
                    return p
            raise KeyError(key)
        return self.paths[key]

    def flow_weighted_mean_transit(self) -> float:
        return sum(p.flow * p.transit_time for p in self.paths) / sum(
            p.flow for p in self.paths
        )

    def total_flow(self) -> float:
        return sum(p.flow for p in self.paths)


def enumerate_paths(network: CirculationNetwork) -> PathSet:
    """All simple loops from the left heart through the lungs.

    The default network has exactly ten, one per systemic entry branch.
    """
    pumps = [s.id for s in network.segments.values() if s.kind == "pump"]
    starts = [p for p in pumps if network.lung_id() in network.upstream(p)]
    if len(starts) != 1:
        raise NetworkStructureError("expected exactly one pump fed by the lungs")
    start = starts[0]
    lung = network.lung_id()

    paths: list[Path] = []

    def walk(seg_id: str, trail: list[str]):
        trail.append(seg_id)
        if seg_id == lung:
            segs = tuple(trail)
            flow = min(network.segments[s].flow for s in segs)
            transit = sum(network.segments[s].transit_time for s in segs)
            paths.append(Path(id=segs[1], segments=segs, flow=flow, transit_time=transit))
        else:
            downs = network.downstream(seg_id)
            if not downs:
                raise NetworkStructureError(f"dead end at segment {seg_id!r}")
            for nxt in sorted(downs):
                if nxt in trail:
                    raise NetworkStructureError(
                        f"cycle through {nxt!r} before reaching the lungs"
                    )
                walk(nxt, trail)
        trail.pop()

    walk(start, [])
    paths.sort(key=lambda p: p.id)
    return PathSet(paths=tuple(paths))


# ---------------------------------------------------------------------------
# JSON config round-trip (disk units: s, L/min, mL, mmHg, MPa s/m^3)

_UNITS_HEADER = {
    "transit_time": "s",
    "flow": "L/min",
    "volume": "mL",
    "pressure_drop": "mmHg",
    "resistance": "MPa*s/m^3",
    "total_volume": "mL",
    "total_flow": "L/min",
    "per_capillary_power": "W",
    "constants": "SI",
}


def network_to_config(network: CirculationNetwork) -> dict:
    segs = []
    for s in network.segments.values():
        segs.append(
            {
                "id": s.id,
                "kind": s.kind,
                "transit_time": s.transit_time,
                "resistance": None if s.resistance is None else s.resistance / _MPA,
                "flow": s.flow / _MIN,
                "volume": s.volume / _ML,
                "pressure_drop": None
                if s.pressure_drop is None
                else s.pressure_drop / _MMHG,
                "tissue": {
                    "mode": s.tissue.mode,
                    "per_capillary_power": s.tissue.per_capillary_power,
                },
                "hematocrit_profile": {
                    "breakpoints": [list(bp) for bp in s.hematocrit_profile.breakpoints],
                    "capillary_window": None
                    if s.hematocrit_profile.capillary_window is None
                    else list(s.hematocrit_profile.capillary_window),
                },
            }
        )
    g = network.globals
    return {
        "units": dict(_UNITS_HEADER),
        "globals": {
            "total_volume": g.total_volume / _ML,
            "total_flow": g.total_flow / _MIN,
            "systemic_pressure_drop": g.systemic_pressure_drop / _MMHG,
            "pulmonary_pressure_drop": g.pulmonary_pressure_drop / _MMHG,
        },
        "constants": network.constants.to_dict(),
        "segments": segs,
        "edges": [list(e) for e in network.edges],
    }


def network_from_config(config: dict) -> CirculationNetwork:
    try:
        g = config["globals"]
        globals_ = BloodGlobals(
            total_volume=g["total_volume"] * _ML,
            total_flow=g["total_flow"] * _MIN,
            systemic_pressure_drop=g["systemic_pressure_drop"] * _MMHG,
            pulmonary_pressure_drop=g["pulmonary_pressure_drop"] * _MMHG,
        )
        constants = PhysicalConstants.from_dict(config.get("constants", {}))
        segments: dict[str, Segment] = {}
        for raw in config["segments"]:
            prof_raw = raw["hematocrit_profile"]
            profile = HematocritProfile(
                breakpoints=tuple(tuple(bp) for bp in prof_raw["breakpoints"]),
                capillary_window=None
                if prof_raw.get("capillary_window") is None
                else tuple(prof_raw["capillary_window"]),
            )
            tissue_raw = raw.get("tissue", {})
            segments[raw["id"]] = Segment(
                id=raw["id"],
                kind=raw["kind"],
                transit_time=raw["transit_time"],
                flow=raw["flow"] * _MIN,
                volume=raw["volume"] * _ML,
                resistance=None
                if raw.get("resistance") is None
                else raw["resistance"] * _MPA,
                pressure_drop=None
                if raw.get("pressure_drop") is None
                else raw["pressure_drop"] * _MMHG,
                hematocrit_profile=profile,
                tissue=TissueDemand(
                    mode=tissue_raw.get("mode", "none"),
                    per_capillary_power=tissue_raw.get(
                        "per_capillary_power", DEFAULT_PER_CAPILLARY_POWER
                    ),
                ),
            )
        edges = tuple((a, b) for a, b in config["edges"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed network config: {exc}") from exc
    return CirculationNetwork(
        globals=globals_, segments=segments, edges=edges, constants=constants
    )


def dump_network(network: CirculationNetwork) -> str:
    return json.dumps(network_to_config(network), indent=2)


def load_network(text: str) -> CirculationNetwork:
    return network_from_config(json.loads(text))
