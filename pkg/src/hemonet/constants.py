"""Physical constants for blood oxygen transport and microrobot power.

All values are SI: m, s, Pa, W, molecules/m^3.  Defaults describe a resting
adult and 1 um spherical robots running glucose-oxygen fuel cells.  Every
value can be overridden through the JSON network config (`constants` block).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

# Blood oxygen bookkeeping uses number concentrations (molecules per m^3 of
# phase volume) rather than partial pressures; 1 mmHg of dissolved O2 in
# plasma is about 7e20 molecules/m^3.

MMHG_TO_PA = 133.322
L_PER_MIN_TO_M3_PER_S = 1.0e-3 / 60.0
ML_TO_M3 = 1.0e-6
MPA_S_PER_M3_TO_SI = 1.0e6

#: Discharge (large-vessel) hematocrit that robot and cell densities are
#: referenced to.
DISCHARGE_HEMATOCRIT = 0.45


@dataclass(frozen=True)
class PhysicalConstants:
    """Transport, binding and robot hardware constants."""

    # Oxygen diffusion in plasma at body temperature.
    oxygen_diffusion_coefficient: float = 2.0e-9  # m^2/s
    robot_radius: float = 1.0e-6  # m
    # Fuel-cell energy per O2 molecule: 1.8e10 molecules sustain 100 pW for 60 s.
    robot_energy_per_o2: float = 6.0e-9 / 1.8e10  # J = 3.333e-19
    # Tissue metabolic energy per O2 molecule consumed.
    tissue_energy_per_o2: float = 4.8e-19  # J
    # Hemoglobin binding: Hill exponent and half-saturation concentration
    # (P50 of 26 mmHg at plasma solubility 1.4e-3 mol/m^3/mmHg).
    hill_exponent: float = 2.7
    hill_c50: float = 2.2e22  # molecules/m^3
    # Bound-oxygen capacity per m^3 of packed red cells (MCHC 330 g/L,
    # 4 sites per hemoglobin of 64.5 kg/mol).
    cell_o2_capacity: float = 1.23e25  # molecules/m^3
    # Plasma concentration leaving a lung capillary.
    lung_exit_plasma_concentration: float = 7.16e22  # molecules/m^3
    discharge_hematocrit: float = DISCHARGE_HEMATOCRIT
    capillary_radius: float = 4.0e-6  # m
    capillary_length: float = 1.0e-3  # m
    # Half-max concentration of the tissue-uptake saturation curve (~1 mmHg).
    tissue_michaelis_constant: float = 7.0e20  # molecules/m^3
    plasma_viscosity: float = 1.0e-3  # Pa s

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0.0:
                raise ValueError(f"constant {name} must be positive, got {value}")
        if not self.hill_exponent > 1.0:
            raise ValueError("hill_exponent must exceed 1")
        if not 0.0 < self.discharge_hematocrit < 1.0:
            raise ValueError("discharge_hematocrit must lie in (0, 1)")

    @property
    def capillary_blood_volume(self) -> float:
        """Blood volume of one capillary tube (m^3)."""
        return math.pi * self.capillary_radius**2 * self.capillary_length

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalConstants":
        return replace(cls(), **data)


DEFAULT_CONSTANTS = PhysicalConstants()
