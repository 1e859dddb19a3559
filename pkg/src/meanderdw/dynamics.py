"""Time integration of the magnetization under spin-orbit-torque drive.

The equation of motion is the Landau-Lifshitz form

    dm/dt = -g' [ m x B_eff + alpha m x (m x B_eff) ] - g' m x (B_DL s x m)

with g' = gamma/(1+alpha^2), B_eff the sum of the enabled field terms plus
the stochastic thermal field, and B_DL s the damping-like SOT effective
field with spin polarization s = z x j_hat. Two integrators are provided:
a stochastic Heun scheme (fixed step, mandatory at T > 0, same noise in
predictor and corrector) and an adaptive Dormand-Prince 5(4) pair for
deterministic runs. m is renormalized after every accepted step.

Sign convention: with theta_sh > 0 and d_ex > 0 (left-handed Neel walls),
an up-down wall on a straight strip driven by current along +x moves
along +x. The calibration test pins this down.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .constants import HBAR, QE, GAMMA_LL
from .errors import SolverDivergenceError, RelaxationError, GeometryError
from .fields import EffectiveField, ThermalField
from .mesh import (GeometryMask, REGION_SEED, build_current_map)
from . import analysis

_DT_MIN = 1e-18


@dataclass
class MagState:
    """Unit magnetization on the occupied cells, plus pinning flags."""

    m: np.ndarray                  # (n, 3)
    time: float = 0.0
    pinned: np.ndarray = None      # (n,) bool

    def __post_init__(self):
        self.m = np.ascontiguousarray(self.m, dtype=float)
        if self.pinned is None:
            self.pinned = np.zeros(len(self.m), dtype=np.bool_)

    def copy(self):
        return MagState(self.m.copy(), self.time, self.pinned.copy())

    def max_norm_error(self):
        return float(np.abs(np.linalg.norm(self.m, axis=1) - 1.0).max())


def uniform_state(graph, polarity=1):
    m = np.zeros((graph.n, 3))
    m[:, 2] = float(polarity)
    return MagState(m)


def seed_domain(state, mask_or_graph, seed_polarity, pin=True):
    """Set the seed block to seed_polarity*z and the rest to the opposite.

    On SAF bilayers the polarity refers to the bottom layer; the top layer
    is set antiparallel. With pin=True the mask's pinned cells (seed block
    and any end block) are excluded from the dynamics.
    """
    graph = (mask_or_graph.cell_graph()
             if isinstance(mask_or_graph, GeometryMask) else mask_or_graph)
    if seed_polarity not in (-1, 1):
        raise ValueError("seed_polarity must be +1 or -1")
    in_seed = graph.region == REGION_SEED
    if not in_seed.any():
        raise GeometryError("mask has no seed region")
    m = np.zeros((graph.n, 3))
    sign = np.where(in_seed, float(seed_polarity), -float(seed_polarity))
    sign = np.where(graph.layer == 2, -sign, sign)   # AF-coupled top layer
    m[:, 2] = sign
    pinned = graph.pinned.copy() if pin else np.zeros(graph.n, dtype=np.bool_)
    return MagState(m, state.time if state is not None else 0.0, pinned)


def seeded_wall_state(graph, material, wall_s, polarity=1, pin=True,
                      tilt_deg=0.0):
    """Analytic Neel-wall initial state at arclength wall_s.

    polarity +1 puts +z (bottom layer) on the seed side (s < wall_s). The
    in-plane wall moment follows the chirality selected by the sign of
    d_ex; on SAF bilayers the top layer is antiparallel. A nonzero
    tilt_deg shears the wall line in the (s, d) plane.
    """
    delta = material.wall_delta
    shear = math.tan(math.radians(tilt_deg))
    u = (graph.s - wall_s - shear * graph.d) / delta
    q = np.where(graph.layer == 2, -float(polarity), float(polarity))
    mz = -q * np.tanh(u)
    chi = -q * np.sign(material.d_ex if material.d_ex != 0 else 1.0)
    t = graph.mask.path.tangent_at(graph.s)
    sech = 1.0 / np.cosh(np.clip(np.abs(u), 0, 40.0))
    m = np.empty((graph.n, 3))
    m[:, 0] = chi * sech * t[:, 0]
    m[:, 1] = chi * sech * t[:, 1]
    m[:, 2] = mz
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    # fixed blocks keep their nominal orientation
    pinned = graph.pinned.copy() if pin else np.zeros(graph.n, dtype=np.bool_)
    m[pinned, 0] = 0.0
    m[pinned, 1] = 0.0
    m[pinned, 2] = np.sign(mz[pinned])
    return MagState(m, 0.0, pinned)


@dataclass(frozen=True)
class SolverConfig:
    """Integration parameters.

    dt is the fixed Heun step; tol the per-step error tolerance (radians)
    of the adaptive pair. heun_stochastic is mandatory when temperature
    is positive.
    """

    dt: float = 50e-15
    tol: float = 1e-5
    max_dm_per_step: float = 0.2
    scheme: str = "rk45_deterministic"   # or "heun_stochastic"
    gamma: float = GAMMA_LL
    temperature: float = 0.0
    rng_seed: int = 0
    sot_layers: str = "bottom"           # "bottom" or "both" (SAF)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("heun_stochastic", "rk45_deterministic"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.temperature > 0 and self.scheme != "heun_stochastic":
            raise ValueError("temperature > 0 requires heun_stochastic")
        if self.sot_layers not in ("bottom", "both"):
            raise ValueError("sot_layers must be 'bottom' or 'both'")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class PulseSegment:
    """One drive interval: direction token, amplitude, duration."""

    direction: object          # '+x','-x','+y','-y','off', vector, or +/-1
    j0: float
    duration: float
    label: str = ""

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if self.j0 < 0:
            raise ValueError("j0 must be >= 0")


_TOKENS = {"+x": (1.0, 0.0, 0.0), "-x": (-1.0, 0.0, 0.0),
           "+y": (0.0, 1.0, 0.0), "-y": (0.0, -1.0, 0.0)}


@dataclass(frozen=True)
class PulseProgram:
    """Ordered drive segments plus the observable recording period."""

    segments: tuple
    sample_every: float
    current_model: str = "uniform_direction"

    def __post_init__(self):
        if self.sample_every <= 0:
            raise ValueError("sample_every must be positive")
        if self.current_model not in ("uniform_direction",
                                      "channel_following"):
            raise ValueError(f"unknown current model {self.current_model!r}")
        for seg in self.segments:
            self._segment_vector(seg)   # validates tokens

    def _segment_vector(self, seg):
        d = seg.direction
        if isinstance(d, str):
            if d == "off":
                return None
            if self.current_model == "channel_following":
                if d in ("fwd", "+s"):
                    return 1.0
                if d in ("rev", "-s"):
                    return -1.0
                raise ValueError(
                    f"channel_following direction must be fwd/rev, got {d!r}")
            if d not in _TOKENS:
                raise ValueError(f"unknown direction token {d!r}")
            return np.array(_TOKENS[d])
        if self.current_model == "channel_following":
            if float(d) in (-1.0, 1.0):
                return float(d)
            raise ValueError("channel_following direction must be +1/-1")
        v = np.asarray(d, dtype=float)
        if v.shape == (2,):
            v = np.array([v[0], v[1], 0.0])
        if v.shape != (3,) or abs(v[2]) > 1e-12:
            raise ValueError("direction must be an in-plane vector")
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero direction vector; use 'off'")
        return v / n

    @property
    def total_duration(self):
        return sum(s.duration for s in self.segments)

    def validate_for(self, mask):
        """Four-way devices only take +/-x, +/-y drive."""
        if mask.kind == "four_way" and self.current_model == "uniform_direction":
            for seg in self.segments:
                v = self._segment_vector(seg)
                if v is None:
                    continue
                if not (abs(abs(v[0]) - 1) < 1e-9 and abs(v[1]) < 1e-9
                        or abs(abs(v[1]) - 1) < 1e-9 and abs(v[0]) < 1e-9):
                    raise ValueError(
                        "four-way devices only take +/-x or +/-y current")


def sot_field_vectors(graph, material, current_map, layers="bottom"):
    """Per-cell damping-like SOT field B_DL * sigma_hat [T], (n, 3).

    B_DL = hbar * theta_sh * |j| / (2 e M_S t_fm); sigma_hat = z x j_hat.
    On SAF meshes the torque acts on the layer adjacent to the heavy metal
    (saf_bottom) unless layers='both'.
    """
    if current_map is None:
        return np.zeros((graph.n, 3))
    j = current_map.j
    jmag = np.linalg.norm(j[:, :2], axis=1)
    scale = HBAR * material.theta_sh / (2.0 * QE * material.m_s * material.t_fm)
    out = np.zeros((graph.n, 3))
    nz = jmag > 0
    # sigma = z x j_hat = (-jy, jx, 0)/|j|
    out[nz, 0] = -j[nz, 1] / jmag[nz] * scale * jmag[nz]
    out[nz, 1] = j[nz, 0] / jmag[nz] * scale * jmag[nz]
    if layers == "bottom":
        out[graph.layer == 2] = 0.0
    return np.ascontiguousarray(out)


def sot_torque(m, graph, material, current_map, layers="bottom",
               gamma=GAMMA_LL):
    """dm/dt contribution of the damping-like torque, (n, 3) [rad/s]."""
    sot = sot_field_vectors(graph, material, current_map, layers)
    gp = gamma / (1.0 + material.alpha ** 2)
    ms = np.sum(m * sot, axis=1, keepdims=True)
    return -gp * (sot - m * ms)


class Integrator:
    """Shared machinery: effective field, SOT vector, step kernels.

    Runs fully fused numba steps when only local field terms are enabled;
    with FFT demag on, the field is assembled per stage in numpy.
    """

    def __init__(self, graph, material, config, k_map=None, b_applied=None,
                 terms=None):
        self.graph = graph
        self.material = material
        self.config = config
        self.eff = EffectiveField(graph, material, k_map=k_map,
                                  b_applied=b_applied, terms=terms)
        self.gamma_prime = config.gamma / (1.0 + material.alpha ** 2)
        self.fused = self.eff._demag is None
        n = graph.n
        self.pinned = np.ascontiguousarray(graph.pinned, dtype=np.bool_)
        self.sot = np.zeros((n, 3))
        self._zero_noise = np.zeros((1, 3))
        self._b = np.zeros((n, 3))
        self._k1 = np.zeros((n, 3))
        self._k2 = np.zeros((n, 3))
        self._mtmp = np.zeros((n, 3))
        self.thermal = ThermalField(graph, material, config.temperature,
                                    config.dt, config.rng_seed, config.gamma)

    def set_current(self, current_map):
        self.sot = sot_field_vectors(self.graph, self.material, current_map,
                                     self.config.sot_layers)

    def rhs(self, m, b, out):
        return K.llg_rhs(m, b, self.sot, self.material.alpha,
                         self.gamma_prime, self.pinned, out)

    def field(self, m, out):
        self.eff.compute(m, out=out)
        return out

    def rhs_eval(self, m, out, noise=None):
        """Fused field + right-hand side into ``out``."""
        g = self.graph
        if self.fused:
            return K.rhs_eval(
                m, noise if noise is not None else self._zero_noise,
                noise is not None, self.sot, g.nb, g.nbw, self.eff._kfac,
                g.partner, g.partner_w, self.eff.coef,
                self.material.alpha, self.gamma_prime, self.pinned,
                self._b, out)
        self.eff.compute(m, out=self._b)
        if noise is not None:
            self._b += noise
        return self.rhs(m, self._b, out)

    def max_torque(self, m):
        self.eff.compute(m, out=self._b)
        return K.max_torque(m, self._b, self.pinned)

    def heun_step(self, m, out, dt, noise, noise_scale):
        """One stochastic Heun step; same noise in both stages."""
        g = self.graph
        if self.fused:
            K.heun_step_fused(
                m, noise if noise is not None else self._zero_noise,
                noise is not None, noise_scale, self.sot, g.nb, g.nbw,
                self.eff._kfac, g.partner, g.partner_w, self.eff.coef,
                self.material.alpha, self.gamma_prime, self.pinned, dt,
                self._k1, self._mtmp, out)
        else:
            b = self.field(m, self._b)
            if noise is not None:
                b += noise * noise_scale
            self.rhs(m, b, self._k1)
            K.step_normalize(m, self._k1, dt, self._mtmp)
            b2 = self.field(self._mtmp, self._b)
            if noise is not None:
                b2 += noise * noise_scale
            self.rhs(self._mtmp, b2, self._k2)
            K.step2_normalize(m, self._k1, self._k2, dt, out)
        if not math.isfinite(out[0, 0]):
            raise SolverDivergenceError("non-finite magnetization", dt=dt)
        return out


# Dormand-Prince 5(4) tableau
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                   11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


class RK45Stepper:
    """Adaptive embedded Dormand-Prince pair with renormalization."""

    def __init__(self, integrator):
        self.intg = integrator
        n = integrator.graph.n
        self.ks = np.zeros((7, n, 3))
        self._ytmp = np.zeros((n, 3))
        self._y5 = np.zeros((n, 3))
        self._y4 = np.zeros((n, 3))
        self._acoef = [np.array(row) for row in _DP_A]
        self.dt = None

    def step(self, m, out, dt_max):
        """Advance one accepted step of size <= dt_max.

        Returns the step size taken; self.dt carries the proposal for the
        next step. Raises SolverDivergenceError on dt underflow.
        """
        intg = self.intg
        cfg = intg.config
        if self.dt is None:
            self.dt = min(dt_max, 1e-13)
        clipped = self.dt > dt_max
        dt = min(self.dt, dt_max)
        while True:
            if dt < _DT_MIN:
                raise SolverDivergenceError(
                    "adaptive step size underflow",
                    dt=dt, max_torque=intg.max_torque(m))
            ks = self.ks
            intg.rhs_eval(m, ks[0])
            for s in range(1, 7):
                K.rk_combine(m, ks[:s], self._acoef[s], dt, self._ytmp, True)
                intg.rhs_eval(self._ytmp, ks[s])
            rot = K.rk_combine(m, ks, _DP_B5, dt, self._y5, True)
            # error estimate: dt * max_i |sum_s e_s k_s,i| (radians)
            K.rk_combine(m, ks, _DP_E, dt, self._y4, False)
            err = K.max_diff(self._y4, m)
            if not math.isfinite(err) or not math.isfinite(rot):
                dt *= 0.2
                clipped = False
                continue
            if err > cfg.tol or rot > cfg.max_dm_per_step:
                fac = 0.9 * (cfg.tol / err) ** 0.2 if err > 0 else 0.5
                dt *= min(0.9, max(0.2, fac))
                clipped = False
                continue
            out[:] = self._y5
            grow = 0.9 * (cfg.tol / err) ** 0.2 if err > 0 else 5.0
            proposal = dt * min(5.0, max(0.2, grow))
            # a boundary-clipped step must not shrink the proposal
            self.dt = max(self.dt, proposal) if clipped else proposal
            return dt


def llg_step(state, graph, material, config, current_map=None, k_map=None,
             b_applied=None, step_index=0, terms=None):
    """Advance one integration step; returns the new state.

    With heun_stochastic the step is exactly config.dt (same thermal noise
    realization in predictor and corrector); with rk45_deterministic the
    step is adaptive and bounded by config.dt.
    """
    intg = Integrator(graph, material, config, k_map=k_map,
                      b_applied=b_applied, terms=terms)
    intg.set_current(current_map)
    m_new = np.empty_like(state.m)
    if config.scheme == "heun_stochastic":
        noise = (intg.thermal.sample(step_index)
                 if config.temperature > 0 else None)
        intg.heun_step(state.m, m_new, config.dt, noise, 1.0)
        dt = config.dt
    else:
        stepper = RK45Stepper(intg)
        dt = stepper.step(state.m, m_new, config.dt)
    return MagState(m_new, state.time + dt, state.pinned)


def relax(state, graph, material, config=None, k_map=None, b_applied=None,
          terms=None, torque_tol=None, max_iter=100000, rot_cap=0.2):
    """Energy descent with precession disabled.

    Integrates dm/dt = -g' m x (m x B) with a projected midpoint rule
    until max_i |m_i x B_i| < torque_tol (tesla; default 1e-4 * B_an).
    The step obeys both a rotation cap and the explicit-stability limit of
    the stiffest exchange mode; the cap shrinks if the energy rises and
    recovers afterwards. Returns (state, final_energy_dict).
    """
    config = config or SolverConfig()
    intg = Integrator(graph, material, config, k_map=k_map,
                      b_applied=b_applied, terms=terms)
    if torque_tol is None:
        torque_tol = 1e-4 * abs(material.b_an)
    m = state.m.copy()
    b = intg._b
    k1 = intg._k1
    k2 = intg._k2
    mid = intg._mtmp
    gp = intg.gamma_prime
    pinned = intg.pinned
    # explicit stability bound from the largest exchange eigenvalue
    mesh = graph.mesh
    b_stiff = (8.0 * material.a_ex / material.m_s
               * sum(1.0 / c**2 for c in mesh.cell_size[:2 + (mesh.nz > 2)])
               + abs(material.b_an)
               + abs(material.j_rkky) / (material.m_s * material.t_fm))
    dt_stab = 1.0 / (gp * b_stiff)
    cap = rot_cap
    e_prev = None
    tq = float("inf")
    for it in range(max_iter):
        intg.field(m, b)
        tq = K.max_torque(m, b, pinned)
        if tq < torque_tol:
            e = intg.eff.energies(m)
            return MagState(m, state.time, state.pinned), e
        K.damping_rhs(m, b, gp, pinned, k1)
        rate = float(np.max(np.linalg.norm(k1, axis=1)))
        dt = min(cap / rate, dt_stab) if rate > 0 else dt_stab
        K.step_normalize(m, k1, 0.5 * dt, mid)
        intg.field(mid, b)
        K.damping_rhs(mid, b, gp, pinned, k2)
        K.step_normalize(m, k2, dt, m)
        if it % 32 == 0:
            e_now = sum(intg.eff.energies(m).values())
            if e_prev is not None and e_now > e_prev + abs(e_prev) * 1e-13:
                cap = max(cap * 0.5, 1e-3)
            else:
                cap = min(cap * 1.25, rot_cap)
            e_prev = e_now
    raise RelaxationError(
        f"relaxation did not converge in {max_iter} iterations "
        f"(max torque {tq:.3e} T, tol {torque_tol:.3e} T)", max_torque=tq)


class Trajectory:
    """Recorded observable rows plus segment-boundary snapshots.

    Columns: time, j vector, switching ratio and state index over the
    readout region, first-wall position and tilt, per-term energies, and
    the largest |m x B| over the cells.
    """

    COLUMNS = ("time_s", "jx_A_per_m2", "jy_A_per_m2", "switching_ratio",
               "state_index", "wall_s_m", "wall_tilt_deg", "E_total_J",
               "E_exch_J", "E_anis_J", "E_dmi_J", "E_demag_J", "E_rkky_J",
               "E_zeeman_J", "max_torque_T")

    def __init__(self, sample_every):
        self.sample_every = sample_every
        self.rows = []
        self.snapshots = []   # (time, label, m copy)

    def add_row(self, **kw):
        self.rows.append(tuple(kw.get(c, 0.0) for c in self.COLUMNS))

    def add_snapshot(self, time, label, m):
        self.snapshots.append((time, label, m.copy()))

    def column(self, name):
        i = self.COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    @property
    def times(self):
        return self.column("time_s")

    def __len__(self):
        return len(self.rows)


class _Recorder:
    """Builds trajectory rows from the current state."""

    def __init__(self, intg, mask, readout=None, wall_obs=True):
        self.intg = intg
        self.mask = mask
        self.graph = intg.graph
        self.readout = readout
        self.wall_obs = wall_obs
        self.region = analysis.readout_region(self.graph, readout)
        self.n_states = mask.n_states

    def row(self, traj, m, time, jvec):
        e = self.intg.eff.energies(m)
        self.intg.eff.compute(m, out=self.intg._b)
        mtq = K.max_torque(m, self.intg._b, self.intg.pinned)
        r = analysis.switching_ratio(m, self.graph, self.region)
        wall_s = float("nan")
        tilt = float("nan")
        if self.wall_obs:
            obs = analysis.wall_observation(
                m, self.graph, tilt_fit=False,
                delta_hint=self.intg.material.wall_delta)
            if obs.wall_count > 0:
                wall_s = obs.positions_arclength[0]
                tilt = obs.tilt_deg[0]
        traj.add_row(
            time_s=time, jx_A_per_m2=jvec[0], jy_A_per_m2=jvec[1],
            switching_ratio=r,
            state_index=analysis.state_index(r, self.n_states),
            wall_s_m=wall_s, wall_tilt_deg=tilt,
            E_total_J=sum(e.values()),
            E_exch_J=e.get("exchange", 0.0),
            E_anis_J=e.get("anisotropy", 0.0),
            E_dmi_J=e.get("dmi", 0.0),
            E_demag_J=e.get("demag", 0.0),
            E_rkky_J=e.get("rkky", 0.0),
            E_zeeman_J=e.get("zeeman", 0.0),
            max_torque_T=mtq)


def run_pulse_program(state, mask, material, program, config, k_map=None,
                      readout=None, wall_obs=True, snapshot_stride=0):
    """Execute the drive segments in order and record observables.

    Observables are sampled on the global grid t = k * sample_every;
    snapshots are stored at every segment boundary (and every
    snapshot_stride-th sample if nonzero). Returns a Trajectory. On solver
    divergence the partial trajectory is attached to the raised error.
    """
    program.validate_for(mask)
    graph = mask.cell_graph()
    intg = Integrator(graph, material, config, k_map=k_map)
    rec = _Recorder(intg, mask, readout=readout, wall_obs=wall_obs)
    traj = Trajectory(program.sample_every)

    m = state.m.copy()
    t0 = state.time
    delta = program.sample_every
    rec.row(traj, m, t0, np.zeros(2))
    traj.add_snapshot(t0, "initial", m)
    sample_k = 1
    heun = config.scheme == "heun_stochastic"
    stepper = None if heun else RK45Stepper(intg)
    global_step = 0
    m_next = np.empty_like(m)
    t_seg_start = t0

    try:
        for seg in program.segments:
            vec = program._segment_vector(seg)
            if vec is None or seg.j0 == 0.0:
                cmap = None
                jvec = np.zeros(2)
            else:
                cmap = build_current_map(graph, program.current_model,
                                         vec, seg.j0)
                jv = cmap.mean_vector
                jvec = np.array([jv[0], jv[1]])
            intg.set_current(cmap)
            t_seg_end = t_seg_start + seg.duration

            t = t_seg_start
            while t < t_seg_end - 1e-3 * config.dt:
                t_target = min(t_seg_end, t0 + sample_k * delta)
                if heun:
                    dt = min(config.dt, t_target - t)
                    noise = None
                    scale = 1.0
                    if config.temperature > 0:
                        noise = intg.thermal.sample(global_step)
                        if dt != config.dt:
                            scale = math.sqrt(config.dt / dt)
                    intg.heun_step(m, m_next, dt, noise, scale)
                else:
                    dt = stepper.step(m, m_next, t_target - t)
                m, m_next = m_next, m
                t += dt
                global_step += 1
                if t >= t0 + sample_k * delta - 1e-3 * config.dt:
                    rec.row(traj, m, t, jvec)
                    if snapshot_stride and (sample_k % snapshot_stride == 0):
                        traj.add_snapshot(t, f"sample_{sample_k}", m)
                    sample_k += 1
            t_seg_start = t_seg_end
            label = seg.label or f"segment_{len(traj.snapshots)}"
            traj.add_snapshot(t_seg_start, label, m)
    except SolverDivergenceError as err:
        err.trajectory = traj
        raise
    return MagState(m, t_seg_start, state.pinned), traj
