"""Closed-form device-design calculus.

Analytical estimators for domain-wall width, Bloch/Neel wall energies,
geometric pinning barriers, thermally activated error rates, SOT source
material comparison and whole-device write-cost estimates, plus the reduced
two-variable (position, internal angle) wall model used as an independent
cross-check of the 2D dynamics.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .constants import MU0, KB, HBAR, QE, GAMMA_LL

LN2 = math.log(2.0)


def wall_width(a_ex, k_an):
    """Characteristic wall width pi*sqrt(a_ex/k_an) [m]."""
    if a_ex <= 0 or k_an <= 0:
        raise ValueError("a_ex and k_an must be positive")
    return math.pi * math.sqrt(a_ex / k_an)


def bloch_energy(t, w, a_ex, k_an):
    """Bloch wall energy t*w*4*sqrt(a_ex*k_an) [J]."""
    return t * w * 4.0 * math.sqrt(a_ex * k_an)


def neel_energy(t, w, a_ex, k_an, d_ex, m_s):
    """Neel wall energy including DMI gain and dipolar surcharge [J].

    E = t*w*(4*sqrt(a_ex*k_an) - pi*d_ex + (ln2/pi)*mu0*m_s^2*t)
    """
    sigma = 4.0 * math.sqrt(a_ex * k_an) - math.pi * d_ex \
        + (LN2 / math.pi) * MU0 * m_s**2 * t
    return t * w * sigma


def neel_max_thickness(d_ex, m_s):
    """Largest layer thickness at which the Neel wall stays favorable [m].

    Solves pi*d_ex = (ln2/pi)*mu0*m_s^2*t for t.
    """
    return math.pi**2 * d_ex / (LN2 * MU0 * m_s**2)


def pinning_barrier(t, delta_w, a_ex, k_an, n_layers=1):
    """Energy barrier of a width-modulation pinning site [J].

    The wall must lengthen by delta_w to escape, costing the wall energy
    per unit length times delta_w, per coupled layer.
    """
    return n_layers * 4.0 * t * delta_w * math.sqrt(a_ex * k_an)


def required_delta_w(stability_factor, t_op, t, a_ex, k_an, n_layers=1):
    """Width modulation needed for a stability_factor*kB*T_op barrier [m]."""
    return stability_factor * KB * t_op / (n_layers * 4.0 * t * math.sqrt(a_ex * k_an))


def arrhenius_error(barrier_over_kt, f0, lifetime):
    """Expected escape count f0*exp(-barrier)*lifetime over the lifetime."""
    return f0 * math.exp(-barrier_over_kt) * lifetime


@dataclass(frozen=True)
class SotMaterialRow:
    """One SOT source material candidate."""

    name: str
    theta_sh: float        # signed spin Hall angle
    rho: float             # resistivity at 5 nm thickness [Ohm m]
    dmi_for_cofeb: float   # interfacial DMI it induces in CoFeB [J/m^2]

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")


# Resistivities quoted at 5 nm film thickness.
TABLE1_ROWS = [
    SotMaterialRow("Pt", 0.07, 30e-8, 1.0e-3),
    SotMaterialRow("beta-Ta", -0.12, 200e-8, 0.05e-3),
    SotMaterialRow("beta-W", -0.30, 200e-8, 0.5e-3),
]

# Anchor: critical current density of the reference material [A/m^2].
# Ratios between materials follow J ~ 1/|theta_sh|.
J_CRIT_REFERENCE = 1.0e12  # = 1.0e8 A/cm^2 for beta-W


def material_comparison(rows=None, reference="beta-W", j_ref=J_CRIT_REFERENCE):
    """Critical current and normalized power for each SOT source material.

    Returns a list of dicts with keys name, theta_sh, rho, dmi_for_cofeb,
    j_crit [A/m^2] and power_norm (rho/theta^2 normalized to the reference).
    """
    rows = TABLE1_ROWS if rows is None else rows
    ref = next((r for r in rows if r.name == reference), None)
    if ref is None:
        raise ValueError(f"reference material {reference!r} not in rows")
    for r in rows:
        if r.theta_sh == 0.0:
            raise ValueError(f"material {r.name!r} has zero spin Hall angle")
    p_ref = ref.rho / ref.theta_sh**2
    out = []
    for r in rows:
        out.append({
            "name": r.name,
            "theta_sh": r.theta_sh,
            "rho": r.rho,
            "dmi_for_cofeb": r.dmi_for_cofeb,
            "j_crit": abs(ref.theta_sh / r.theta_sh) * j_ref,
            "power_norm": (r.rho / r.theta_sh**2) / p_ref,
        })
    return out


@dataclass(frozen=True)
class DesignInputs:
    """Inputs of the analytical device design bundle."""

    t: float                     # per-ferromagnet thickness [m]
    w: float                     # full channel width [m]
    delta_w: float               # width modulation of pinning sites [m]
    a_ex: float                  # [J/m]
    k_an: float                  # net anisotropy [J/m^3]
    d_ex: float                  # [J/m^2]
    m_s: float                   # [A/m]
    t_op: float = 358.15         # operating temperature [K] (85 C)
    f0: float = 1.0e9            # attempt frequency [Hz]
    lifetime: float = 10 * 365.25 * 86400.0   # retention target [s]
    stability_factor: float = 60.0
    n_layers: int = 1

    def __post_init__(self):
        if min(self.t, self.w, self.delta_w, self.a_ex, self.k_an,
               self.d_ex, self.m_s, self.t_op, self.f0, self.lifetime) <= 0:
            raise ValueError("all design inputs must be positive")
        if self.stability_factor < 0:
            raise ValueError("stability_factor must be >= 0")
        if self.n_layers not in (1, 2):
            raise ValueError("n_layers must be 1 or 2")


@dataclass(frozen=True)
class DesignReport:
    """Analytical design summary for one parameter set."""

    inputs: DesignInputs
    wall_width_m: float
    e_bloch_per_area: float      # [J/m^2]
    e_neel_per_area: float       # [J/m^2]
    neel_stable: bool
    t_max_neel: float            # [m]
    delta_w_required: float      # [m]
    barrier_j: float             # barrier at the requested delta_w [J]
    error_rate: float            # expected escapes over the lifetime
    table2: dict = field(default_factory=dict)

    def lines(self):
        nm = 1e-9
        i = self.inputs
        rows = [
            ("wall width d = pi*sqrt(A/K)", f"{self.wall_width_m/nm:.2f} nm"),
            ("Bloch wall energy / area", f"{self.e_bloch_per_area:.4e} J/m^2"),
            ("Neel wall energy / area", f"{self.e_neel_per_area:.4e} J/m^2"),
            ("Neel wall stable", "yes" if self.neel_stable else "no"),
            ("max thickness for Neel wall", f"{self.t_max_neel/nm:.2f} nm"),
            (f"delta_w for {i.stability_factor:.0f} kT at {i.t_op:.2f} K",
             f"{self.delta_w_required/nm:.2f} nm"),
            ("barrier at given delta_w", f"{self.barrier_j:.3e} J "
             f"({self.barrier_j/(KB*i.t_op):.1f} kT)"),
            ("expected escapes over lifetime", f"{self.error_rate:.2e}"),
        ]
        for k, v in self.table2.items():
            rows.append((k, v))
        width = max(len(k) for k, _ in rows)
        return [f"{k:<{width}}  {v}" for k, v in rows]


def design_report(inputs, rho_hm=2.0e-6, hm_thickness=5e-9,
                  current_path_width=None, j_write=None, step_length=None,
                  v_wall=None):
    """Evaluate the full analytical design bundle for one input set.

    The optional write-cost arguments invoke :func:`device_estimate`.
    """
    i = inputs
    d = wall_width(i.a_ex, i.k_an)
    e_b = 4.0 * math.sqrt(i.a_ex * i.k_an)
    e_n = e_b - math.pi * i.d_ex + (LN2 / math.pi) * MU0 * i.m_s**2 * i.t
    t_max = neel_max_thickness(i.d_ex, i.m_s)
    dw_req = required_delta_w(i.stability_factor, i.t_op, i.t, i.a_ex,
                              i.k_an, i.n_layers)
    barrier = pinning_barrier(i.t, i.delta_w, i.a_ex, i.k_an, i.n_layers)
    err = arrhenius_error(barrier / (KB * i.t_op), i.f0, i.lifetime)
    table2 = {}
    if j_write is not None:
        est = device_estimate(
            j_write=j_write, rho_hm=rho_hm, hm_thickness=hm_thickness,
            current_path_width=current_path_width, step_length=step_length,
            v_wall=v_wall)
        table2 = {
            "total write current": f"{est['total_current']*1e6:.0f} uA",
            "write time per step": f"{est['write_time']*1e9:.2f} ns",
            "write energy per step": f"{est['write_energy']:.2e} J",
        }
    return DesignReport(
        inputs=i,
        wall_width_m=d,
        e_bloch_per_area=e_b,
        e_neel_per_area=e_n,
        neel_stable=e_n < e_b,
        t_max_neel=t_max,
        delta_w_required=dw_req,
        barrier_j=barrier,
        error_rate=err,
        table2=table2,
    )


def device_estimate(j_write, rho_hm, hm_thickness, current_path_width,
                    step_length, v_wall):
    """Write current, time and energy for one switching step.

    The drive current flows through a heavy-metal sheet of cross-section
    hm_thickness x current_path_width and length ~ current_path_width.
    """
    area = hm_thickness * current_path_width
    total_current = j_write * area
    resistance = rho_hm * current_path_width / area
    write_time = step_length / v_wall
    energy = total_current**2 * resistance * write_time
    return {
        "total_current": total_current,
        "resistance": resistance,
        "write_time": write_time,
        "write_energy": energy,
    }


def one_d_wall_model(material, b_dl, duration, polarity=1, n_eval=400,
                     phi0=None, sigma_sign=1.0):
    """Reduced rigid-wall model: position q and internal angle phi.

    Derived by Galerkin projection of the damping-like-torque LLG onto the
    translation and rotation modes of the tanh wall profile, with current
    along +x and spin polarization sigma_sign * (z x j) = sigma_sign * y:

        dq/dt   = -g' * (pi/2) * (D/M_S) * sin(phi)
        dphi/dt =  g' * (pi/2) * [alpha*Q*D/(M_S*delta)*sin(phi)
                                  - sigma_sign*B_DL*cos(phi)]

    with g' = gamma/(1+alpha^2), delta = sqrt(A/K_an), Q = +1 for an
    up-down wall (m_z: +1 -> -1 along +x) and Q = -1 for down-up.
    b_dl is the signed damping-like effective field [T].

    Returns (t, q, phi, v_steady) where v_steady is the velocity averaged
    over the last 20% of the run.
    """
    m = material
    delta = m.wall_delta
    gp = GAMMA_LL / (1.0 + m.alpha**2)
    q_coef = -gp * 0.5 * math.pi * m.d_ex / m.m_s
    if phi0 is None:
        # equilibrium chirality: minimize pi*Q*D*cos(phi)
        phi0 = math.pi if polarity * m.d_ex > 0 else 0.0

    def rhs(_t, y):
        phi = y[1]
        dq = q_coef * math.sin(phi)
        dphi = gp * 0.5 * math.pi * (
            m.alpha * polarity * m.d_ex / (m.m_s * delta) * math.sin(phi)
            - sigma_sign * b_dl * math.cos(phi))
        return [dq, dphi]

    t_eval = np.linspace(0.0, duration, n_eval)
    sol = solve_ivp(rhs, (0.0, duration), [0.0, phi0], t_eval=t_eval,
                    rtol=1e-10, atol=1e-14, method="RK45")
    q, phi = sol.y
    tail = max(2, n_eval // 5)
    v = (q[-1] - q[-tail]) / (sol.t[-1] - sol.t[-tail])
    return sol.t, q, phi, v


def sot_effective_field(theta_sh, j, m_s, t_fm):
    """Damping-like SOT effective field hbar*theta*j/(2*e*M_S*t) [T]."""
    return HBAR * theta_sh * j / (2.0 * QE * m_s * t_fm)
