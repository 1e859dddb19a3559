"""Effective-field terms entering the magnetization dynamics.

Each term adds its B-field contribution (tesla) on the occupied cells and
reports its energy (joules). Fields satisfy B = -(1/(M_S V)) dE/dm exactly
at the discrete level, term by term.

Demag comes in two modes: ``effective_medium`` folds the thin-film local
demag into the anisotropy (K_eff = K_u - mu0 M_S^2/2) and contributes no
field of its own; ``full_fft`` runs the tensor convolution solver and
leaves the anisotropy at the bare K_u.
"""

import numpy as np

from . import _kernels as K
from .constants import KB, GAMMA_LL
from .demag import DemagFFT

TERM_NAMES = ("exchange", "anisotropy", "dmi", "demag", "rkky", "zeeman")


class FieldBuffer:
    """Accumulated field (n, 3) [T] plus per-term energies [J]."""

    def __init__(self, n):
        self.b = np.zeros((n, 3))
        self.energy = {}

    @property
    def total_energy(self):
        return float(sum(self.energy.values()))


class EffectiveField:
    """Sums the enabled field terms over one cell graph.

    ``terms`` selects a subset of TERM_NAMES; by default every applicable
    term is on (demag only in full_fft mode, rkky only on SAF bilayers
    with a nonzero coupling, zeeman only when b_applied is nonzero). The
    local terms evaluate in one fused kernel pass with disabled terms
    zero-masked.
    """

    def __init__(self, graph, material, k_map=None, b_applied=None,
                 terms=None):
        self.graph = graph
        self.material = material
        mesh = graph.mesh
        cx, cy, cz = mesh.cell_size
        v = mesh.cell_volume
        m_s = material.m_s

        self.b_applied = (np.zeros(3) if b_applied is None
                          else np.asarray(b_applied, dtype=float))
        saf = bool(graph.partner_w.any())
        if terms is None:
            terms = ["exchange", "anisotropy", "dmi"]
            if material.demag_mode == "full_fft":
                terms.append("demag")
            if saf and material.j_rkky != 0.0:
                terms.append("rkky")
            if np.any(self.b_applied != 0.0):
                terms.append("zeeman")
        unknown = set(terms) - set(TERM_NAMES)
        if unknown:
            raise ValueError(f"unknown field terms: {sorted(unknown)}")
        if "rkky" in terms and not saf:
            raise ValueError("rkky term requires a SAF bilayer mesh")
        self.terms = tuple(terms)

        on = self.terms.__contains__
        c = np.zeros(K.NCOEF)
        if on("exchange"):
            a_ex = material.a_ex
            c[0:3] = [2 * a_ex / (m_s * cx**2), 2 * a_ex / (m_s * cy**2),
                      2 * a_ex / (m_s * cz**2)]
            c[10:13] = [a_ex * v / cx**2, a_ex * v / cy**2, a_ex * v / cz**2]
        if on("dmi"):
            d = material.d_ex
            c[3:5] = [d / (m_s * cx), d / (m_s * cy)]
            c[13:15] = [d * v / cx, d * v / cy]
        if on("anisotropy"):
            k_eff = material.k_eff
            c[5] = 2 * k_eff / m_s
            c[15] = k_eff * v
        if on("zeeman"):
            c[6:9] = self.b_applied
            c[16] = m_s * v
        if on("rkky"):
            c[9] = material.j_rkky / (m_s * material.t_fm)
            c[17] = material.j_rkky * v / material.t_fm
        self.coef = c

        if k_map is None:
            self._kfac = np.ones(graph.n)
        else:
            self._kfac = np.ascontiguousarray(
                k_map[graph.ix, graph.iy, graph.iz], dtype=float)

        self._demag = None
        if on("demag"):
            if material.demag_mode != "full_fft":
                raise ValueError("demag term requires demag_mode='full_fft'")
            if cx != cy:
                raise ValueError("full_fft demag requires cx == cy")
            self._demag = DemagFFT(graph, m_s)

    def compute(self, m, out=None, energies=False):
        """Sum the enabled terms; returns (b, energy_dict | None)."""
        g = self.graph
        if out is None:
            out = np.zeros((g.n, 3))
        K.local_field(m, g.nb, g.nbw, self._kfac, g.partner, g.partner_w,
                      self.coef, out)
        bd = None
        if self._demag is not None:
            bd = self._demag.apply(m)
            out += bd
        e = None
        if energies:
            e = self._local_energy_dict(m)
            if self._demag is not None:
                e["demag"] = self._demag.energy(m, bd)
        return out, e

    def energies(self, m):
        """Per-term energy dict of the enabled terms [J]."""
        e = self._local_energy_dict(m)
        if self._demag is not None:
            e["demag"] = self._demag.energy(m)
        return e

    def _local_energy_dict(self, m):
        g = self.graph
        e_ex, e_dmi, e_an, e_ze, e_rk = K.local_energies(
            m, g.nb, g.nbw, self._kfac, g.partner, g.partner_w, g.layer,
            self.coef)
        vals = {"exchange": e_ex, "anisotropy": e_an, "dmi": e_dmi,
                "zeeman": e_ze, "rkky": e_rk}
        return {t: float(vals[t]) for t in self.terms if t in vals}


def _single_term(graph, material, m, term, **kw):
    eff = EffectiveField(graph, material, terms=[term], **kw)
    buf = FieldBuffer(graph.n)
    _, e = eff.compute(m, out=buf.b, energies=True)
    buf.energy.update(e)
    return buf


def exchange_field(m, graph, material):
    """Exchange contribution with free boundaries."""
    return _single_term(graph, material, m, "exchange")


def anisotropy_field(m, graph, material, k_map=None):
    """Uniaxial PMA contribution with optional per-cell grain factors."""
    return _single_term(graph, material, m, "anisotropy", k_map=k_map)


def dmi_field(m, graph, material):
    """Interfacial DMI contribution with chiral free-edge condition."""
    return _single_term(graph, material, m, "dmi")


def demag_field(m, graph, material):
    """Demagnetization contribution.

    effective_medium mode returns a zero field (the correction lives in
    the anisotropy term); full_fft mode runs the FFT tensor solver.
    """
    if material.demag_mode == "effective_medium":
        buf = FieldBuffer(graph.n)
        buf.energy["demag"] = 0.0
        return buf
    return _single_term(graph, material, m, "demag")


def rkky_field(m, graph, material):
    """Interlayer RKKY coupling on a SAF bilayer."""
    return _single_term(graph, material, m, "rkky")


def zeeman_field(m, graph, material, b_applied):
    """Constant applied field (test instrumentation; devices run
    field-free)."""
    return _single_term(graph, material, m, "zeeman", b_applied=b_applied)


def total_effective_field(m, graph, material, k_map=None, b_applied=None,
                          terms=None):
    """All enabled terms summed, with per-term energies retained."""
    eff = EffectiveField(graph, material, k_map=k_map, b_applied=b_applied,
                         terms=terms)
    buf = FieldBuffer(graph.n)
    _, e = eff.compute(m, out=buf.b, energies=True)
    buf.energy.update(e)
    return buf


def thermal_sigma(material, temperature, dt, cell_volume, gamma=GAMMA_LL):
    """Per-component std of the stochastic field over one step [T].

    sigma^2 = 2 alpha kB T / (gamma M_S V dt), the fluctuation-dissipation
    variance for the LLG written with B-fields in tesla.
    """
    if temperature == 0:
        return 0.0
    return np.sqrt(2.0 * material.alpha * KB * temperature
                   / (gamma * material.m_s * cell_volume * dt))


class ThermalField:
    """Stochastic thermal field from a counter-based generator.

    The draw for a given (seed, step) is a pure function of those values
    and the cell index, independent of execution order: each step uses a
    fresh Philox stream keyed by the seed with the step index as counter.
    """

    def __init__(self, graph, material, temperature, dt, seed,
                 gamma=GAMMA_LL):
        if temperature < 0:
            raise ValueError("temperature must be >= 0")
        self.n = graph.n
        self.temperature = temperature
        self.sigma = thermal_sigma(material, temperature, dt,
                                   graph.cell_volume, gamma)
        self.seed = int(seed)

    def sample(self, step):
        """(n, 3) field array for the given global step index [T]."""
        if self.temperature == 0:
            return np.zeros((self.n, 3))
        bitgen = np.random.Philox(
            key=[np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF),
                 np.uint64(0x9E3779B97F4A7C15)],
            counter=[np.uint64(0), np.uint64(0), np.uint64(0),
                     np.uint64(step)])
        rng = np.random.Generator(bitgen)
        return self.sigma * rng.standard_normal((self.n, 3))
