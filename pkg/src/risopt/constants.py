"""Physical constants (SI units)."""

SPEED_OF_LIGHT = 299792458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K
FREE_SPACE_IMPEDANCE = 376.99111843077515  # ohms, 120*pi (classical convention)
