"""Reference constants for dry asphalt concrete ground slabs.

Literature property values and the default prior widths used throughout the
package, plus previously reported posterior statistics kept here as
documentation and as convenient defaults for configuration files.  None of
the estimation code depends on the posterior statistics.
"""

from __future__ import annotations

from .domain import ReferenceScales

# Literature values for dry asphalt concrete (also the default prior means).
LITERATURE_CONDUCTIVITY = 2.27  # W/(m K)
LITERATURE_HEAT_CAPACITY = 2.1e6  # J/(m3 K)
LITERATURE_SURFACE_COEFFICIENT = 10.0  # W/(m2 K)

# Default prior standard deviations (5% of the mean for the material
# properties, a wide 50% for the surface coefficient).
PRIOR_STD_CONDUCTIVITY = 0.1135  # W/(m K)
PRIOR_STD_HEAT_CAPACITY = 0.021e6  # J/(m3 K)
PRIOR_STD_SURFACE_COEFFICIENT = 5.0  # W/(m2 K)

# Measurement noise of the thermocouple chains, kelvin.
DEFAULT_NOISE_STD = 0.25

# Default scale of the Rayleigh density on the smoothing weight, and the
# robustness sweep exercised by the acceptance suite, in m^4 K^2 / W^2.
DEFAULT_SMOOTHNESS_SCALE = 2.22
SMOOTHNESS_SCALE_SWEEP = (2.22, 3.33, 22.22)

# Three-interval partitions (hours) used by the reference case studies:
# case A splits where the net radiation changes magnitude, case B where the
# wind regime changes.
CASE_A_PARTITION_H = (0.0, 6.0, 18.0, 28.0)
CASE_B_PARTITION_H = (0.0, 6.0, 24.0, 28.0)

# Reported posterior means for the field dataset (documentation only; the
# raw field data are not distributed, so these are not reproducible here).
CASE_A_MEAN_SURFACE = (12.65, 8.47, 10.86)  # W/(m2 K)
CASE_A_MEAN_CONDUCTIVITY = 1.35  # W/(m K)
CASE_A_MEAN_HEAT_CAPACITY = 0.94e6  # J/(m3 K)
CASE_B_MEAN_SURFACE = (11.82, 8.91, 11.696)
CASE_B_MEAN_CONDUCTIVITY = 1.31
CASE_B_MEAN_HEAT_CAPACITY = 0.91e6

# Empirical convective correlation used by standard district-scale tools.
WIND_CORRELATION_INTERCEPT = 4.0  # W/(m2 K)
WIND_CORRELATION_SLOPE = 4.0  # W s/(m3 K)

DEFAULT_REFERENCES = ReferenceScales(
    time=3600.0,
    temperature=300.0,
    conductivity=LITERATURE_CONDUCTIVITY,
    heat_capacity=LITERATURE_HEAT_CAPACITY,
    surface_coefficient=LITERATURE_SURFACE_COEFFICIENT,
)
