"""
Physical constants and lab-unit conversions for Weak Gauge Lab.

All internal arithmetic is SI. The configuration boundary speaks nm, fs,
meV, Tesla and V/m and converts exactly once through the factors below.
"""

# Carrier charge (C) and effective mass (kg) of the simulated electron.
CHARGE = -1.6e-19
ELECTRON_MASS = 9.1093837e-31
EFFECTIVE_MASS_RATIO = 0.067
EFFECTIVE_MASS = EFFECTIVE_MASS_RATIO * ELECTRON_MASS
HBAR = 1.054571817e-34

# Lab units -> SI
NM = 1e-9
FS = 1e-15
PS = 1e-12
MEV = 1.602176634e-22
PER_NM = 1e9

# Explicit stepper stability bound on hbar*dt/(dx^2*m)
STABILITY_LIMIT = 0.5

# Default mesh
DEFAULT_DX = 0.2 * NM
DEFAULT_DT = 0.01 * FS

# Cosine gauge family
GAUGE_AMPLITUDE = 1e-14  # V*s
GAUGE_WAVENUMBER = 8e6  # 1/m
GAUGE_FREQUENCY = 1e13  # rad/s
DEFAULT_THETA_COUNT = 8

# Numerical thresholds
DENOMINATOR_FLOOR = 1e-12
DENSITY_MASK = 1e-10
BOUNDARY_CLIP = 1e-10
BOUNDARY_LEAK = 1e-6
MIN_SENSOR_VELOCITY = 1e3  # m/s
