"""Case studies of circulation paths with atypical oxygen behavior.

Three loops differ most from the average circuit: the portal system passes
two capillary networks in series, the slow spleen compartment holds blood
in high-hematocrit slits for hundreds of seconds, and the coronary circuit
pairs a short transit with outsized tissue demand.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constants import PhysicalConstants
from .network import CirculationNetwork
from .transport import SegmentTrace, SwarmConfig, SystemReport, sweep_circulation


def _concat_traces(traces: list[SegmentTrace], label: str) -> SegmentTrace:
    """Stitch consecutive segment traces into one time axis."""
    times: list[float] = []
    robot_times: list[float] = []
    conc: list[float] = []
    sat: list[float] = []
    hem: list[float] = []
    power: list[float] = []
    rel: list[float] = []
    t_off = 0.0
    rt_off = 0.0
    for trace in traces:
        start = 1 if times else 0  # drop duplicated join points
        times.extend(t + t_off for t in trace.times[start:])
        robot_times.extend(t + rt_off for t in trace.robot_times[start:])
        conc.extend(trace.plasma_concentration[start:])
        sat.extend(trace.cell_saturation[start:])
        hem.extend(trace.hematocrit[start:])
        power.extend(trace.robot_power[start:])
        rel.extend(trace.relative_tissue_power[start:])
        t_off += trace.times[-1]
        rt_off += trace.robot_times[-1]
    return SegmentTrace(
        segment_id=label,
        times=tuple(times),
        plasma_concentration=tuple(conc),
        cell_saturation=tuple(sat),
        hematocrit=tuple(hem),
        robot_power=tuple(power),
        relative_tissue_power=tuple(rel),
        robot_times=tuple(robot_times),
    )


@dataclass(frozen=True)
class PortalReport:
    """Robot power through the two-capillary portal route."""

    portal_side: SegmentTrace  # digestive -> portal vein -> liver
    hepatic_side: SegmentTrace  # hepatic artery -> liver
    merge_power_jump_portal: float  # W, power change crossing the liver merge
    merge_power_jump_hepatic: float
    sweep: SystemReport


def portal_trace(
    network: CirculationNetwork,
    swarm: SwarmConfig,
    constants: PhysicalConstants | None = None,
) -> PortalReport:
    """Concatenated power history for robots taking the portal route.

    Blood arriving through the portal vein mixes with fresher hepatic
    arterial blood in the liver capillaries, so the portal-side power jumps
    up at the merge while the hepatic-side power drops.
    """
    report = sweep_circulation(network, swarm, constants)
    digestive = report.trace("digestive")
    portal = report.trace("portal")
    liver = report.trace("liver")
    hepatic = report.trace("hepatic")
    portal_side = _concat_traces([digestive, portal, liver], "digestive+portal+liver")
    hepatic_side = _concat_traces([hepatic, liver], "hepatic+liver")
    return PortalReport(
        portal_side=portal_side,
        hepatic_side=hepatic_side,
        merge_power_jump_portal=liver.robot_power[0] - portal.robot_power[-1],
        merge_power_jump_hepatic=liver.robot_power[0] - hepatic.robot_power[-1],
        sweep=report,
    )


@dataclass(frozen=True)
class SpleenReport:
    """Slow-compartment transit: long slit passage at high hematocrit."""

    trace: SegmentTrace
    min_cell_saturation: float
    fully_desaturated: bool  # cells emptied before leaving the slits
    end_robot_power: float
    sweep: SystemReport

    DESATURATION_THRESHOLD = 0.01


def spleen_trace(
    network: CirculationNetwork,
    swarm: SwarmConfig,
    constants: PhysicalConstants | None = None,
) -> SpleenReport:
    report = sweep_circulation(network, swarm, constants)
    trace = report.trace("spleen-slow")
    min_sat = min(trace.cell_saturation)
    return SpleenReport(
        trace=trace,
        min_cell_saturation=min_sat,
        fully_desaturated=min_sat < SpleenReport.DESATURATION_THRESHOLD,
        end_robot_power=trace.robot_power[-1],
        sweep=report,
    )


@dataclass(frozen=True)
class CoronaryReport:
    """Heart-muscle circuit: tissue takes most of the oxygen."""

    trace: SegmentTrace
    window_relative_tissue_power: tuple  # inside the capillary only
    window_times: tuple
    min_relative_tissue_power: float
    capillary_entry_total: float
    capillary_exit_total: float
    sweep: SystemReport


def coronary_report(
    network: CirculationNetwork,
    swarm: SwarmConfig,
    constants: PhysicalConstants | None = None,
) -> CoronaryReport:
    from .oxygen import total_oxygen_at

    constants = constants or network.constants
    report = sweep_circulation(network, swarm, constants)
    seg = network.segments["coronary"]
    trace = report.trace("coronary")
    win = seg.hematocrit_profile.capillary_window
    t0, t1 = (f * seg.transit_time for f in win)
    idx = [i for i, t in enumerate(trace.times) if t0 - 1e-9 <= t <= t1 + 1e-9]
    rel = tuple(trace.relative_tissue_power[i] for i in idx)
    times = tuple(trace.times[i] for i in idx)
    c_entry = trace.plasma_concentration[idx[0]]
    c_exit = trace.plasma_concentration[idx[-1]]
    h_win = trace.hematocrit[idx[0]]
    return CoronaryReport(
        trace=trace,
        window_relative_tissue_power=rel,
        window_times=times,
        min_relative_tissue_power=min(rel),
        capillary_entry_total=total_oxygen_at(c_entry, h_win, constants),
        capillary_exit_total=total_oxygen_at(c_exit, trace.hematocrit[idx[-1]], constants),
        sweep=report,
    )
