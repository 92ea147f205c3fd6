"""Lagrangian oxygen transport along segments and around the circulation.

A blood parcel is followed at the bulk flow speed through each segment's
hematocrit profile.  The integrated variable is the plasma concentration
with the equilibrium cell buffer folded into an effective capacitance,
which is equivalent to stepping the local total oxygen with consumption
sinks while treating hematocrit changes as oxygen-neutral composition
exchange.  Robots travel with the cells, so their tube number density
follows the local hematocrit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .constants import DISCHARGE_HEMATOCRIT, PhysicalConstants
from .errors import ConfigError, IntegrationError, NetworkStructureError
from .network import CirculationNetwork, Segment, hematocrit_at
from .oxygen import (
    BloodState,
    equilibrated_state,
    hill_saturation,
    hill_slope,
    invert_total_oxygen,
    relative_tissue_power,
    robot_flux,
    robot_power,
    total_oxygen,
    total_oxygen_at,
)

DEFAULT_BLOOD_VOLUME = 5.4e-3  # m^3, used when no network context is given
CORONARY_EXIT_FRACTION = 0.30  # capillary-exit total oxygen over entry, no robots


# ---------------------------------------------------------------------------
# Consumption policies


@dataclass(frozen=True)
class ConsumptionPolicy:
    """How much of the incident oxygen flux robots actually take up.

    ``max-uptake`` takes everything; ``fraction`` a fixed share; and
    ``location-limited`` looks up a share per segment id or segment kind
    (unlisted segments default to full uptake).
    """

    mode: str = "max-uptake"
    fraction: float = 1.0
    limits: dict = field(default_factory=dict)

    _MODES = ("max-uptake", "fraction", "location-limited")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ConfigError(f"unknown consumption policy mode {self.mode!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        for key, val in self.limits.items():
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"uptake limit for {key!r} must lie in [0, 1]")

    def validate_for(self, network: CirculationNetwork) -> None:
        from .network import SEGMENT_KINDS

        known = set(network.segments) | set(SEGMENT_KINDS)
        unknown = set(self.limits) - known
        if unknown:
            raise ConfigError(f"uptake limits reference unknown segments/kinds: {sorted(unknown)}")


def uptake_factor(
    policy: ConsumptionPolicy,
    segment: Segment | str,
    concentration: float | None = None,
) -> float:
    """Effective uptake factor u in [0, 1] for a segment under a policy."""
    if policy.mode == "max-uptake":
        return 1.0
    if policy.mode == "fraction":
        return policy.fraction
    # location-limited: segment id takes precedence over segment kind
    if isinstance(segment, str):
        seg_id = kind = segment
    else:
        seg_id, kind = segment.id, segment.kind
    if seg_id in policy.limits:
        return policy.limits[seg_id]
    return policy.limits.get(kind, 1.0)


@dataclass(frozen=True)
class SwarmConfig:
    """Robot fleet description."""

    robot_count: float
    robot_radius: float = 1.0e-6  # m
    consumption_policy: ConsumptionPolicy = field(default_factory=ConsumptionPolicy)
    tank: "object | None" = None  # TankSpec, attached by the mitigation layer

    def __post_init__(self):
        if self.robot_count < 0:
            raise ValueError("robot count must be non-negative")
        if self.robot_radius <= 0:
            raise ValueError("robot radius must be positive")


# ---------------------------------------------------------------------------
# Tissue demand strength


def base_tissue_sink(constants: PhysicalConstants, per_capillary_power: float) -> float:
    """Unconstrained tissue consumption per m^3 of capillary blood (1/m^3/s)."""
    return per_capillary_power / (
        constants.tissue_energy_per_o2 * constants.capillary_blood_volume
    )


@lru_cache(maxsize=8)
def coronary_demand_multiplier(
    constants: PhysicalConstants,
    per_capillary_power: float = 2.0e-8,
    window_seconds: float = 1.0,
) -> float:
    """Demand multiplier making a robot-free coronary capillary pass leave
    30% of the entering total oxygen.

    Solved once by bisection; the saturating tissue uptake makes the exit
    ratio a smooth, monotone function of the multiplier.
    """
    c_in = constants.lung_exit_plasma_concentration
    h = 0.33
    t_in = total_oxygen_at(c_in, h, constants)
    q0 = base_tissue_sink(constants, per_capillary_power)

    def exit_ratio(mult: float) -> float:
        c_out = _integrate_constant_h_window(c_in, h, mult * q0, window_seconds, constants)
        return total_oxygen_at(c_out, h, constants) / t_in

    lo, hi = 1.0, 50.0
    if exit_ratio(hi) > CORONARY_EXIT_FRACTION:
        raise IntegrationError("coronary calibration bracket too small")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if exit_ratio(mid) > CORONARY_EXIT_FRACTION:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _integrate_constant_h_window(
    c0: float, h: float, q: float, duration: float, constants: PhysicalConstants
) -> float:
    """Plasma concentration after a tissue-only window at fixed hematocrit."""
    cap = constants.cell_o2_capacity
    km = constants.tissue_michaelis_constant

    def rhs(_t, c, *_a):
        ceff = c if c > 0.0 else 0.0
        beta = (1.0 - h) + h * cap * hill_slope(ceff, constants)
        sink = q * ceff / (ceff + km)
        return (-sink / beta, 0.0, 0.0, 0.0)

    c_end, *_ = _rk45(
        rhs, 0.0, duration, (c0, 0.0, 0.0, 0.0), duration / 20.0, 1e-10, c0, 1.0
    )
    return c_end


def effective_tissue_sink(segment: Segment, constants: PhysicalConstants) -> float:
    """Tissue sink strength (molecules/m^3/s at full demand) for a segment."""
    mode = segment.tissue.mode
    if mode == "none" or not segment.has_capillary_window:
        return 0.0
    q0 = base_tissue_sink(constants, segment.tissue.per_capillary_power)
    if mode == "standard":
        return q0
    if mode == "coronary":
        return q0 * coronary_demand_multiplier(constants, segment.tissue.per_capillary_power)
    if mode == "scaled-by-transit":
        # Same total demand over the long slit transit as a one-second pass.
        return q0 * (1.0 / segment.window_seconds())
    raise ConfigError(f"unhandled tissue mode {mode!r}")


# ---------------------------------------------------------------------------
# Cash-Karp embedded Runge-Kutta 4(5)

_CK_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (0.3, -0.9, 1.2),
    (-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0),
    (
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ),
)
_CK_C = (0.0, 0.2, 0.3, 0.6, 1.0, 0.875)
_CK_B5 = (37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0)
_CK_B4 = (
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
)


def _rk45(rhs, t0, t1, y0, max_step, rtol, c_scale, a_scale, on_accept=None):
    """Adaptive Cash-Karp RK4(5) on the 4-component transport state.

    Components: plasma concentration and three running totals (robot
    consumption, tissue consumption, hematocrit-exchange).  Raises
    IntegrationError on step-size underflow.
    """
    t = t0
    y = y0
    span = t1 - t0
    if span <= 0.0:
        return y
    h = min(max_step, span)
    atol_c = 1e-12 * c_scale
    atol_a = 1e-9 * a_scale
    min_step = 1e-13 * span
    while t < t1 - 1e-12 * span:
        h = min(h, t1 - t)
        k1 = rhs(t, *y)
        k2 = rhs(
            t + _CK_C[1] * h,
            *(y[i] + h * _CK_A[0][0] * k1[i] for i in range(4)),
        )
        k3 = rhs(
            t + _CK_C[2] * h,
            *(y[i] + h * (_CK_A[1][0] * k1[i] + _CK_A[1][1] * k2[i]) for i in range(4)),
        )
        k4 = rhs(
            t + _CK_C[3] * h,
            *(
                y[i]
                + h * (_CK_A[2][0] * k1[i] + _CK_A[2][1] * k2[i] + _CK_A[2][2] * k3[i])
                for i in range(4)
            ),
        )
        k5 = rhs(
            t + _CK_C[4] * h,
            *(
                y[i]
                + h
                * (
                    _CK_A[3][0] * k1[i]
                    + _CK_A[3][1] * k2[i]
                    + _CK_A[3][2] * k3[i]
                    + _CK_A[3][3] * k4[i]
                )
                for i in range(4)
            ),
        )
        k6 = rhs(
            t + _CK_C[5] * h,
            *(
                y[i]
                + h
                * (
                    _CK_A[4][0] * k1[i]
                    + _CK_A[4][1] * k2[i]
                    + _CK_A[4][2] * k3[i]
                    + _CK_A[4][3] * k4[i]
                    + _CK_A[4][4] * k5[i]
                )
                for i in range(4)
            ),
        )
        ks = (k1, k2, k3, k4, k5, k6)
        y5 = tuple(
            y[i] + h * sum(_CK_B5[j] * ks[j][i] for j in range(6)) for i in range(4)
        )
        y4 = tuple(
            y[i] + h * sum(_CK_B4[j] * ks[j][i] for j in range(6)) for i in range(4)
        )
        err_c = abs(y5[0] - y4[0]) / (atol_c + rtol * max(abs(y5[0]), abs(y[0])))
        err_a = max(
            abs(y5[i] - y4[i]) / (atol_a + rtol * max(abs(y5[i]), abs(y[i])))
            for i in range(1, 4)
        )
        ratio = max(err_c, err_a)
        if ratio != ratio:  # NaN: state blew up
            raise IntegrationError(
                "non-finite step error", {"t": t, "h": h, "state": y}
            )
        if ratio <= 1.0:
            t += h
            c = y5[0]
            if c < 0.0:
                c = 0.0
            y = (c, y5[1], y5[2], y5[3])
            if on_accept is not None:
                on_accept(t, y)
            h = min(
                max_step,
                h * min(5.0, max(0.2, 0.9 * (ratio + 1e-16) ** -0.2)),
            )
        else:
            h = h * max(0.1, 0.9 * ratio**-0.25)
            if h < min_step:
                raise IntegrationError(
                    "step-size underflow",
                    {"t": t, "remaining": t1 - t, "state": y, "ratio": ratio},
                )
    return y


# ---------------------------------------------------------------------------
# Segment traces and results


@dataclass(frozen=True)
class SegmentTrace:
    """Sampled history of a parcel (and the robots riding with it)."""

    segment_id: str
    times: tuple  # s, bulk-flow clock from 0 to the segment transit
    plasma_concentration: tuple
    cell_saturation: tuple
    hematocrit: tuple
    robot_power: tuple  # W
    relative_tissue_power: tuple
    robot_times: tuple  # s, clock of a robot moving with the cells

    def __len__(self):
        return len(self.times)

    def state_at(self, i: int) -> BloodState:
        return BloodState(
            plasma_concentration=self.plasma_concentration[i],
            cell_saturation=self.cell_saturation[i],
            local_hematocrit=self.hematocrit[i],
        )

    @property
    def min_robot_power(self) -> float:
        return min(self.robot_power)


@dataclass(frozen=True)
class MassAudit:
    """Oxygen ledger of one segment pass, all per unit time (molecules/s).

    ``delivered`` counts the drop of the local total oxygen between the
    segment ends, ``exchange`` the oxygen moved in or out by hematocrit
    (cell volume fraction) changes rather than consumption.  The residual
    is the integrator's bookkeeping error.
    """

    total_in: float
    total_out: float
    exchange: float  # per m^3, integral of (cell capacity * S - c) dh
    robot_consumed: float  # molecules/m^3 over the pass
    tissue_consumed: float
    flow: float

    @property
    def consumed_rate(self) -> float:
        return (self.robot_consumed + self.tissue_consumed) * self.flow

    @property
    def delivered_rate(self) -> float:
        return (self.total_in - self.total_out + self.exchange) * self.flow

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.total_in), 1.0) * self.flow
        return abs(self.delivered_rate - self.consumed_rate) / scale


@dataclass(frozen=True)
class SegmentResult:
    segment_id: str
    state_in: BloodState
    state_out: BloodState
    trace: SegmentTrace
    audit: MassAudit
    capillary_exit_relative_tissue_power: float | None
    capillary_exit_robot_power: float | None

    @property
    def min_robot_power(self) -> float:
        return self.trace.min_robot_power

    @property
    def end_concentration(self) -> float:
        return self.state_out.plasma_concentration


# ---------------------------------------------------------------------------
# Segment integration


def _pieces(segment: Segment):
    """(t0, t1, h0, h1, in_window) spans with piecewise-linear hematocrit."""
    prof = segment.hematocrit_profile
    transit = segment.transit_time
    cuts = {f for f, _ in prof.breakpoints}
    if prof.capillary_window is not None:
        cuts.update(prof.capillary_window)
    fracs = sorted(cuts)
    win = prof.capillary_window
    out = []
    for f0, f1 in zip(fracs, fracs[1:]):
        h0 = hematocrit_at(prof, f0)
        h1 = hematocrit_at(prof, f1)
        inside = win is not None and f0 >= win[0] - 1e-12 and f1 <= win[1] + 1e-12
        out.append((f0 * transit, f1 * transit, h0, h1, inside))
    return out


def integrate_segment(
    state_in: BloodState,
    segment: Segment,
    swarm: SwarmConfig,
    constants: PhysicalConstants,
    *,
    blood_volume: float = DEFAULT_BLOOD_VOLUME,
    max_step_fraction: float = 0.01,
    rtol: float = 1.0e-9,
    uptake: float | None = None,
) -> tuple[BloodState, SegmentTrace, MassAudit]:
    """Carry a blood parcel through one segment.

    Returns the exit state, the sampled trace and the oxygen ledger.  Lung
    segments reset the parcel to the lung-exit state at the end of their
    capillary window; consumption acts before and after that window.
    """
    if not state_in.equilibrated:
        raise ValueError("integrate_segment requires an equilibrated input state")
    u = uptake if uptake is not None else uptake_factor(swarm.consumption_policy, segment)
    cap_mol = constants.cell_o2_capacity
    km = constants.tissue_michaelis_constant
    four_pi_dr = 4.0 * math.pi * constants.oxygen_diffusion_coefficient * swarm.robot_radius
    rho_coef = (
        (swarm.robot_count / blood_volume) * u * four_pi_dr / constants.discharge_hematocrit
    )
    q_full = effective_tissue_sink(segment, constants)
    pieces = _pieces(segment)
    h_start = segment.hematocrit_profile.start_value

    # Rebase to the profile's starting hematocrit; composition changes at a
    # boundary carry the plasma concentration and saturation unchanged.
    c0 = state_in.plasma_concentration
    state0 = (
        state_in
        if abs(state_in.local_hematocrit - h_start) < 1e-12
        else equilibrated_state(c0, h_start, constants)
    )

    times = [0.0]
    concs = [c0]
    hemas = [h_start]
    c_scale = max(c0, constants.lung_exit_plasma_concentration)
    a_scale = max(total_oxygen(state0, constants), 1.0)

    is_lung = segment.kind == "lung"
    lung_reset_c = constants.lung_exit_plasma_concentration

    y = (c0, 0.0, 0.0, 0.0)
    totals_in = [total_oxygen(state0, constants)]
    totals_out = []

    def on_accept(t, state):
        times.append(t)
        concs.append(state[0])

    for t0, t1, h0, h1, inside in pieces:
        if t1 - t0 <= 0.0:
            continue
        if is_lung and inside:
            # Alveolar exchange dominates inside the lung window: ramp the
            # trace to the reset state, suspend consumption bookkeeping.
            totals_out.append(total_oxygen_at(y[0], h0, constants))
            n = max(int((t1 - t0) / max((t1 - t0) * max_step_fraction, 1e-9)), 2)
            c_from = y[0]
            for i in range(1, n + 1):
                frac = i / n
                times.append(t0 + frac * (t1 - t0))
                concs.append(c_from + frac * (lung_reset_c - c_from))
            y = (lung_reset_c, y[1], y[2], y[3])
            totals_in.append(total_oxygen_at(lung_reset_c, h1, constants))
            for i in range(len(hemas), len(times)):
                hemas.append(h0 + (h1 - h0) * (times[i] - t0) / (t1 - t0))
            continue

        slope_h = (h1 - h0) / (t1 - t0)
        q_here = q_full if inside else 0.0

        def rhs(t, c, _ar, _at, _ae, t0=t0, h0=h0, slope_h=slope_h, q_here=q_here):
            ceff = c if c > 0.0 else 0.0
            h = h0 + slope_h * (t - t0)
            sat = hill_saturation(ceff, constants)
            beta = (1.0 - h) + h * cap_mol * hill_slope(ceff, constants)
            sink_robot = rho_coef * h * ceff
            sink_tissue = q_here * ceff / (ceff + km) if q_here else 0.0
            return (
                -(sink_robot + sink_tissue) / beta,
                sink_robot,
                sink_tissue,
                (cap_mol * sat - ceff) * slope_h,
            )

        max_step = (t1 - t0) * max_step_fraction
        y = _rk45(rhs, t0, t1, y, max_step, rtol, c_scale, a_scale, on_accept)
        times[-1] = t1  # snap the final accepted point onto the piece boundary
        for i in range(len(hemas), len(times)):
            hemas.append(h0 + slope_h * (times[i] - t0))

    h_end = segment.hematocrit_profile.end_value
    state_out = equilibrated_state(y[0], h_end, constants)
    totals_out.append(total_oxygen(state_out, constants))

    sats = [hill_saturation(c, constants) for c in concs]
    powers = [
        robot_power(robot_flux(c, swarm.robot_radius, constants), u, constants)
        for c in concs
    ]
    rels = [relative_tissue_power(c, constants) for c in concs]
    rtimes = [0.0]
    inv_hd = 1.0 / constants.discharge_hematocrit
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        rtimes.append(rtimes[-1] + 0.5 * dt * (hemas[i] + hemas[i - 1]) * inv_hd)

    trace = SegmentTrace(
        segment_id=segment.id,
        times=tuple(times),
        plasma_concentration=tuple(concs),
        cell_saturation=tuple(sats),
        hematocrit=tuple(hemas),
        robot_power=tuple(powers),
        relative_tissue_power=tuple(rels),
        robot_times=tuple(rtimes),
    )
    audit = MassAudit(
        total_in=sum(totals_in),
        total_out=sum(totals_out),
        exchange=y[3],
        robot_consumed=y[1],
        tissue_consumed=y[2],
        flow=segment.flow,
    )
    return state_out, trace, audit


# ---------------------------------------------------------------------------
# Junction mixing


def merge_states(
    inputs: list[tuple[BloodState, float]], constants: PhysicalConstants
) -> BloodState:
    """Flow-weighted mixing of merging streams, re-equilibrated.

    Total oxygen and hematocrit are averaged with flow weights; the merged
    plasma concentration is recovered by inverting the total at the merged
    hematocrit.
    """
    if not inputs:
        raise ValueError("merge requires at least one input stream")
    if any(flow <= 0 for _, flow in inputs):
        raise ValueError("merge flows must be positive")
    flow_sum = sum(flow for _, flow in inputs)
    t_mix = sum(total_oxygen(st, constants) * fl for st, fl in inputs) / flow_sum
    h_mix = sum(st.local_hematocrit * fl for st, fl in inputs) / flow_sum
    c_mix = invert_total_oxygen(t_mix, h_mix, constants)
    return equilibrated_state(c_mix, h_mix, constants)


# ---------------------------------------------------------------------------
# Full-circulation sweep


@dataclass(frozen=True)
class SystemReport:
    """Steady-state sweep output for one swarm size."""

    robot_count: float
    segments: dict[str, SegmentResult]
    min_robot_power: float
    min_robot_power_segment: str
    min_end_concentration: float
    min_end_concentration_segment: str
    min_relative_tissue_power: float | None
    min_relative_tissue_power_segment: str | None
    average_capillary_exit_robot_power: float | None

    def trace(self, segment_id: str) -> SegmentTrace:
        return self.segments[segment_id].trace


def _topological_order(network: CirculationNetwork) -> list[str]:
    """Segment order from the left heart to the lungs, cycle cut at the lung."""
    lung = network.lung_id()
    indeg = {sid: 0 for sid in network.segments}
    for a, b in network.edges:
        if a == lung:
            continue
        indeg[b] += 1
    ready = sorted(sid for sid, d in indeg.items() if d == 0)
    order = []
    while ready:
        sid = ready.pop(0)
        order.append(sid)
        for a, b in network.edges:
            if a == sid and a != lung:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
        ready.sort()
    if len(order) != len(network.segments):
        raise NetworkStructureError("segment graph is not a single loop over the lungs")
    return order


def lung_exit_state(
    network: CirculationNetwork, constants: PhysicalConstants | None = None
) -> BloodState:
    """Equilibrated state of blood leaving the lung capillary window."""
    constants = constants or network.constants
    lung = network.segments[network.lung_id()]
    win = lung.hematocrit_profile.capillary_window
    h = hematocrit_at(lung.hematocrit_profile, win[1])
    return equilibrated_state(constants.lung_exit_plasma_concentration, h, constants)


EXCHANGE_TISSUE_MODES = ("standard", "coronary")


def sweep_circulation(
    network: CirculationNetwork,
    swarm: SwarmConfig,
    constants: PhysicalConstants | None = None,
    *,
    max_step_fraction: float = 0.01,
    rtol: float = 1.0e-9,
) -> SystemReport:
    """Propagate the lung-exit state once around the whole network.

    Splits pass the state unchanged; merges mix flow-weighted.  The lung
    reset decouples successive circuits, so a single pass is the steady
    state.  Reported minima: robot power over all traces, end-of-segment
    concentration over non-pump, non-lung segments, and relative tissue
    power at the exit of tissue-exchange capillaries (the slow-spleen
    slits filter blood rather than feed tissue and are excluded there).
    """
    constants = constants or network.constants
    swarm.consumption_policy.validate_for(network)
    blood_volume = network.globals.total_volume
    lung = network.lung_id()

    # The state entering the segments after the lung depends only on the
    # in-lung reset, so the lung tail can be integrated up front with an
    # arbitrary equilibrated inlet.
    seed = lung_exit_state(network, constants)
    lung_seg = network.segments[lung]
    kwargs = dict(
        blood_volume=blood_volume, max_step_fraction=max_step_fraction, rtol=rtol
    )
    primed_exit, _, _ = integrate_segment(seed, lung_seg, swarm, constants, **kwargs)

    order = _topological_order(network)
    results: dict[str, SegmentResult] = {}
    end_states: dict[str, BloodState] = {}

    for sid in order:
        seg = network.segments[sid]
        ups = network.upstream(sid)
        if lung in ups:
            state_in = primed_exit
        elif len(ups) == 1:
            state_in = end_states[ups[0]]
        else:
            state_in = merge_states(
                [(end_states[u], network.segments[u].flow) for u in ups], constants
            )
        state_out, trace, audit = integrate_segment(state_in, seg, swarm, constants, **kwargs)
        end_states[sid] = state_out

        exit_rel = None
        exit_pow = None
        if seg.has_capillary_window:
            win_end = seg.hematocrit_profile.capillary_window[1] * seg.transit_time
            idx = _index_at_time(trace.times, win_end)
            exit_rel = trace.relative_tissue_power[idx]
            exit_pow = trace.robot_power[idx]
        results[sid] = SegmentResult(
            segment_id=sid,
            state_in=state_in,
            state_out=state_out,
            trace=trace,
            audit=audit,
            capillary_exit_relative_tissue_power=exit_rel,
            capillary_exit_robot_power=exit_pow,
        )

    min_pow_sid = min(results, key=lambda s: results[s].min_robot_power)
    conc_candidates = {
        sid: r
        for sid, r in results.items()
        if network.segments[sid].kind not in ("pump", "lung")
    }
    min_conc_sid = min(conc_candidates, key=lambda s: results[s].end_concentration)

    rel_candidates = {
        sid: r.capillary_exit_relative_tissue_power
        for sid, r in results.items()
        if network.segments[sid].tissue.mode in EXCHANGE_TISSUE_MODES
        and r.capillary_exit_relative_tissue_power is not None
    }
    min_rel_sid = min(rel_candidates, key=rel_candidates.get) if rel_candidates else None

    window_segments = [
        (sid, r)
        for sid, r in results.items()
        if r.capillary_exit_robot_power is not None
        and network.segments[sid].kind != "lung"
    ]
    if window_segments:
        wsum = sum(network.segments[sid].flow for sid, _ in window_segments)
        avg_pow = (
            sum(
                network.segments[sid].flow * r.capillary_exit_robot_power
                for sid, r in window_segments
            )
            / wsum
        )
    else:
        avg_pow = None

    return SystemReport(
        robot_count=swarm.robot_count,
        segments=results,
        min_robot_power=results[min_pow_sid].min_robot_power,
        min_robot_power_segment=min_pow_sid,
        min_end_concentration=results[min_conc_sid].end_concentration,
        min_end_concentration_segment=min_conc_sid,
        min_relative_tissue_power=rel_candidates.get(min_rel_sid),
        min_relative_tissue_power_segment=min_rel_sid,
        average_capillary_exit_robot_power=avg_pow,
    )


def _index_at_time(times: tuple, target: float) -> int:
    """Index of the trace sample closest to ``target`` (boundaries hit exactly)."""
    best, best_d = 0, abs(times[0] - target)
    for i, t in enumerate(times):
        d = abs(t - target)
        if d < best_d:
            best, best_d = i, d
    return best
