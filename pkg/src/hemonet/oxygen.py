"""Oxygen bookkeeping: Hill saturation, totals, inversion, robot uptake.

Blood carries oxygen dissolved in plasma and bound to hemoglobin.  Binding
equilibrates fast compared with vessel transits, so a blood state is fully
described by the plasma concentration, the equilibrium cell saturation and
the local (tube) hematocrit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import PhysicalConstants


@dataclass(frozen=True)
class BloodState:
    """Oxygen state of blood at one point in the flow."""

    plasma_concentration: float  # molecules/m^3
    cell_saturation: float  # dimensionless, in [0, 1]
    local_hematocrit: float  # dimensionless
    equilibrated: bool = True

    def __post_init__(self):
        if self.plasma_concentration < 0:
            raise ValueError("plasma concentration must be non-negative")
        if not 0.0 <= self.cell_saturation <= 1.0:
            raise ValueError("cell saturation must lie in [0, 1]")
        if not 0.0 <= self.local_hematocrit < 1.0:
            raise ValueError("hematocrit must lie in [0, 1)")


def hill_saturation(c: float, constants: PhysicalConstants) -> float:
    """Equilibrium hemoglobin saturation at plasma concentration ``c``."""
    if c < 0:
        raise ValueError(f"concentration must be non-negative, got {c}")
    if c == 0.0:
        return 0.0
    z = (c / constants.hill_c50) ** constants.hill_exponent
    return z / (1.0 + z)


def hill_slope(c: float, constants: PhysicalConstants) -> float:
    """dS/dc of the Hill curve; 0 at c = 0 for exponents above 1."""
    if c <= 0.0:
        return 0.0
    z = (c / constants.hill_c50) ** constants.hill_exponent
    return constants.hill_exponent * z / (c * (1.0 + z) ** 2)


def equilibrated_state(
    c: float, hematocrit: float, constants: PhysicalConstants
) -> BloodState:
    return BloodState(
        plasma_concentration=c,
        cell_saturation=hill_saturation(c, constants),
        local_hematocrit=hematocrit,
    )


def total_oxygen(state: BloodState, constants: PhysicalConstants) -> float:
    """Oxygen per m^3 of whole blood: plasma plus cell-bound."""
    h = state.local_hematocrit
    return (
        (1.0 - h) * state.plasma_concentration
        + h * constants.cell_o2_capacity * state.cell_saturation
    )


def total_oxygen_at(c: float, hematocrit: float, constants: PhysicalConstants) -> float:
    """Total oxygen for an equilibrated state with plasma concentration c."""
    return (1.0 - hematocrit) * c + hematocrit * constants.cell_o2_capacity * hill_saturation(
        c, constants
    )


def oxygen_buffer_slope(c: float, hematocrit: float, constants: PhysicalConstants) -> float:
    """d(total oxygen)/dc at fixed hematocrit: the equilibrium buffering."""
    return (1.0 - hematocrit) + hematocrit * constants.cell_o2_capacity * hill_slope(
        c, constants
    )


def invert_total_oxygen(
    total: float,
    hematocrit: float,
    constants: PhysicalConstants,
    rtol: float = 1.0e-12,
) -> float:
    """Plasma concentration whose equilibrated total oxygen equals ``total``.

    The total is strictly increasing in c, so a safeguarded Newton iteration
    inside a shrinking bracket always converges.
    """
    if total < 0:
        raise ValueError("total oxygen must be non-negative")
    if total == 0.0:
        return 0.0
    if hematocrit >= 1.0:
        raise ValueError("hematocrit must be below 1 for inversion")
    lo = 0.0
    hi = total / (1.0 - hematocrit)  # plasma-only bound: f(hi) >= total
    c = min(hi, total)  # starting guess
    for _ in range(200):
        f = total_oxygen_at(c, hematocrit, constants) - total
        if f > 0.0:
            hi = c
        else:
            lo = c
        if abs(f) <= rtol * total:
            return c
        slope = oxygen_buffer_slope(c, hematocrit, constants)
        step = f / slope if slope > 0 else None
        nxt = c - step if step is not None else None
        if nxt is None or not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)  # bisect when Newton leaves the bracket
        if nxt == c:
            return c
        c = nxt
    return c


def robot_flux(c: float, r: float, constants: PhysicalConstants) -> float:
    """Diffusive oxygen current onto an absorbing sphere (molecules/s)."""
    if c < 0:
        raise ValueError("concentration must be non-negative")
    return 4.0 * math.pi * constants.oxygen_diffusion_coefficient * r * c


def robot_power(flux: float, uptake: float, constants: PhysicalConstants) -> float:
    """Fuel-cell power from capturing ``uptake`` of the incident flux (W)."""
    if flux < 0:
        raise ValueError("flux must be non-negative")
    if not 0.0 <= uptake <= 1.0:
        raise ValueError("uptake factor must lie in [0, 1]")
    return uptake * flux * constants.robot_energy_per_o2


def relative_tissue_power(c: float, constants: PhysicalConstants) -> float:
    """Tissue oxygen uptake relative to its unconstrained demand.

    Saturating (Michaelis-Menten) dependence on the local plasma
    concentration; close to one until the plasma is nearly depleted.
    """
    ceff = max(c, 0.0)
    return ceff / (ceff + constants.tissue_michaelis_constant)
