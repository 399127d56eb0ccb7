"""Universal constants and default material data.

Unit system: SI throughout (m, K, N/m^2, C/mol, mol/m^3). Solvers operate
on non-dimensional quantities derived in :mod:`poreshape.params`.
"""

from typing import Final

# Universal constants
FARADAY: Final[float] = 96485.0          # C/mol
GAS_CONSTANT: Final[float] = 8.314       # J/(mol K)
EPS0: Final[float] = 8.8542e-12          # F/m, vacuum permittivity

BAR: Final[float] = 1.0e5                # N/m^2 per bar


def bar_to_pa(p_bar: float) -> float:
    return p_bar * BAR


def pa_to_bar(p_pa: float) -> float:
    return p_pa / BAR


# Default material data: water-filled proton-conducting nanochannel in an
# elastomer at operating temperature.
DEFAULT_PHYSICS: Final[dict] = {
    "T": 353.0,            # K
    "gamma": 6.5e-2,       # N/m, surface tension of H2O
    "k_S": 5.09e9,         # N/m^2, elastic bulk modulus
    "G_S": 9.22e7,         # N/m^2, elastic shear modulus
    "eps_r": 80.0,         # relative permittivity near the interface
    "sigma_c": 0.16022,    # C/m^2, magnitude of the wall surface charge
    "p_S0": -6.5e7,        # N/m^2, reference solid pressure
    "p0": 1.4e6,           # N/m^2, reference liquid pressure
    "c0": 477.90,          # mol/m^3, reference proton concentration
}
