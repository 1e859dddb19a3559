"""Magnetic and transport material parameters.

All quantities are SI. Fields produced from these constants are B-fields in
tesla, following the common micromagnetics convention B_an = 2*K/M_S.
"""

from dataclasses import dataclass, replace

from .constants import MU0


@dataclass(frozen=True)
class Material:
    """Constants of one ferromagnetic free layer and its SOT underlayer.

    k_u is the full magneto-crystalline PMA constant. In the
    ``effective_medium`` demag mode the anisotropy actually applied is
    k_eff = k_u - mu0*m_s**2/2 (thin-film local demag folded in); in
    ``full_fft`` mode k_u is applied as-is and the demag solver supplies
    the correction physically.
    """

    m_s: float               # saturation magnetization [A/m]
    a_ex: float              # exchange stiffness [J/m]
    k_u: float               # uniaxial PMA constant, easy axis z [J/m^3]
    d_ex: float              # interfacial DMI constant [J/m^2]
    alpha: float             # Gilbert damping
    theta_sh: float          # effective spin Hall angle (signed)
    t_fm: float              # ferromagnet layer thickness [m]
    j_rkky: float = 0.0      # interlayer coupling [J/m^2], negative = AF
    rho_hm: float = 2.0e-6   # heavy-metal resistivity [Ohm m]
    demag_mode: str = "effective_medium"   # or "full_fft"

    def __post_init__(self):
        if self.m_s <= 0 or self.a_ex <= 0 or self.k_u <= 0:
            raise ValueError("m_s, a_ex and k_u must be positive")
        # alpha = 0 is allowed for undamped test configurations
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.t_fm <= 0:
            raise ValueError("t_fm must be positive")
        if self.demag_mode not in ("effective_medium", "full_fft"):
            raise ValueError(f"unknown demag_mode {self.demag_mode!r}")

    @property
    def k_eff(self):
        """Anisotropy constant applied by the anisotropy kernel [J/m^3]."""
        if self.demag_mode == "effective_medium":
            return self.k_u - 0.5 * MU0 * self.m_s**2
        return self.k_u

    @property
    def b_an(self):
        """Net PMA field 2*k_eff/m_s [T] (effective-medium value)."""
        return 2.0 * (self.k_u - 0.5 * MU0 * self.m_s**2) / self.m_s

    @property
    def wall_delta(self):
        """Wall width parameter sqrt(a_ex/k_an) [m] from net anisotropy."""
        return (self.a_ex / (self.k_u - 0.5 * MU0 * self.m_s**2)) ** 0.5

    def with_(self, **kw):
        return replace(self, **kw)


# W/CoFeB/MgO stack used for the simulated test devices.
SIM2023 = Material(
    m_s=1.1e6,
    a_ex=16e-12,
    k_u=1.27e6,
    d_ex=1.0e-3,
    alpha=0.02,
    theta_sh=0.30,
    t_fm=0.6e-9,
    rho_hm=2.0e-6,
)

# Same stack with an antiferromagnetically coupled second CoFeB layer.
SIM2023_SAF = SIM2023.with_(j_rkky=-1.6667e-3)

# Slightly improved stack used by the analytical device estimates:
# a_ex 20 pJ/m, net anisotropy 5e5 J/m^3, D 0.5 mJ/m^2, t 1 nm.
DESIGN_SEC8 = Material(
    m_s=1.1e6,
    a_ex=20e-12,
    k_u=5.0e5 + 0.5 * MU0 * 1.1e6**2,
    d_ex=0.5e-3,
    alpha=0.02,
    theta_sh=0.30,
    t_fm=1.0e-9,
    rho_hm=2.0e-6,
)

PRESETS = {
    "sim2023": SIM2023,
    "sim2023_saf": SIM2023_SAF,
    "design_sec8": DESIGN_SEC8,
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown material preset {name!r}; available: {sorted(PRESETS)}"
        ) from None
