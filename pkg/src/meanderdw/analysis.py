"""Device observables extracted from magnetization states.

Readout samples the layer adjacent to the MgO barrier: the top layer on
SAF bilayers, the film itself otherwise. The switching ratio is the
area-weighted mean out-of-plane magnetization of the readout region, which
maps linearly onto the MTJ conductance.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit


@dataclass(frozen=True)
class ReadoutModel:
    """Linear area-fraction MTJ readout."""

    g_parallel: float = 1e-3     # parallel-state conductance [S]
    tmr: float = 1.0             # (R_AP - R_P)/R_P; 1.0 = 100%
    s_range: tuple = None        # (s_lo, s_hi) readout window, None = full

    def __post_init__(self):
        if self.g_parallel <= 0:
            raise ValueError("g_parallel must be positive")
        if self.tmr < 0:
            raise ValueError("tmr must be >= 0")


@dataclass(frozen=True)
class WallObservation:
    """Detected domain walls along the channel."""

    positions_arclength: tuple   # [m] one per wall
    tilt_deg: tuple              # signed tilt vs channel normal
    width_fit_m: float           # tanh fit of the first wall, nan if none
    wall_count: int


def readout_layer(graph):
    """Cell selector of the layer the MTJ tunnels into."""
    if graph.layer.max() == 0:
        return np.ones(graph.n, dtype=bool)
    return graph.layer == 2


def readout_region(graph, model=None):
    """Boolean readout-cell selector for a ReadoutModel (or full channel)."""
    sel = readout_layer(graph)
    if model is not None and model.s_range is not None:
        lo, hi = model.s_range
        sel = sel & (graph.s >= lo) & (graph.s <= hi)
    return sel


def switching_ratio(m, graph, region=None):
    """r = <m_z> over the readout region, in [-1, 1]."""
    if region is None:
        region = readout_region(graph)
    if not np.any(region):
        raise ValueError("empty readout region")
    return float(m[region, 2].mean())


def conductance(r, model):
    """MTJ conductance of a readout ratio r.

    Parallel fraction f = (1+r)/2; G = f G_P + (1-f) G_P/(1+TMR).
    """
    if not -1.0 - 1e-9 <= r <= 1.0 + 1e-9:
        raise ValueError("switching ratio outside [-1, 1]")
    f = 0.5 * (1.0 + r)
    return f * model.g_parallel + (1.0 - f) * model.g_parallel / (1.0 + model.tmr)


def state_index(r, n_states):
    """Nearest level of the uniform grid on [-1, 1]; ties round down."""
    if n_states < 2:
        raise ValueError("n_states must be >= 2")
    x = (r + 1.0) * (n_states - 1) / 2.0
    idx = int(math.ceil(x - 0.5))
    return min(max(idx, 0), n_states - 1)


def _tanh_profile(s, s0, delta, amp):
    return amp * np.tanh((s - s0) / delta)


def wall_observation(m, graph, delta_hint=6e-9, tilt_fit=True,
                     region=None):
    """Locate domain walls as zero crossings of the arclength m_z profile.

    The profile averages m_z across the channel width in bins of one cell
    size along the path. Tilt is the slope angle of the per-row crossing
    positions (positive = counterclockwise from the channel normal); width
    is pi times the tanh fit scale of the first wall.
    """
    sel = readout_layer(graph) if region is None else region
    s = graph.s[sel]
    d = graph.d[sel]
    mz = m[sel, 2]
    cell = max(graph.mesh.cell_size[0], graph.mesh.cell_size[1])

    s_min, s_max = s.min(), s.max()
    nbins = max(4, int((s_max - s_min) / cell) + 1)
    edges = np.linspace(s_min, s_max + 1e-15, nbins + 1)
    which = np.clip(np.digitize(s, edges) - 1, 0, nbins - 1)
    sums = np.bincount(which, weights=mz, minlength=nbins)
    cnts = np.bincount(which, minlength=nbins)
    ok = cnts > 0
    prof = np.full(nbins, np.nan)
    prof[ok] = sums[ok] / cnts[ok]
    centers = 0.5 * (edges[:-1] + edges[1:])

    valid = np.flatnonzero(ok)
    positions = []
    for a, b in zip(valid[:-1], valid[1:]):
        pa, pb = prof[a], prof[b]
        if pa == 0.0:
            positions.append(centers[a])
        elif pa * pb < 0.0:
            t = pa / (pa - pb)
            positions.append(centers[a] + t * (centers[b] - centers[a]))
    # merge crossings closer than the wall width (profile noise)
    merged = []
    for p in positions:
        if merged and p - merged[-1] < 2.0 * delta_hint:
            merged[-1] = 0.5 * (merged[-1] + p)
        else:
            merged.append(p)
    positions = merged

    if not positions:
        return WallObservation((), (), float("nan"), 0)

    tilts = []
    for s0 in positions:
        tilts.append(_wall_tilt(s, d, mz, s0, delta_hint, cell)
                     if tilt_fit else float("nan"))

    width = _wall_width_fit(centers[ok], prof[ok], positions[0], delta_hint)
    return WallObservation(tuple(positions), tuple(tilts), width,
                           len(positions))


def _wall_tilt(s, d, mz, s0, delta_hint, cell):
    """Slope angle of per-row zero crossings around one wall."""
    window = max(4.0 * delta_hint, 6.0 * cell)
    near = np.abs(s - s0) < window
    if not near.any():
        return float("nan")
    rows = np.round(d[near] / cell).astype(int)
    ss = s[near]
    zz = mz[near]
    xs, ys = [], []
    for r in np.unique(rows):
        in_row = rows == r
        if in_row.sum() < 3:
            continue
        order = np.argsort(ss[in_row])
        sr = ss[in_row][order]
        zr = zz[in_row][order]
        sign_change = np.nonzero(zr[:-1] * zr[1:] < 0)[0]
        if len(sign_change) != 1:
            continue
        i = sign_change[0]
        t = zr[i] / (zr[i] - zr[i + 1])
        xs.append(r * cell)
        ys.append(sr[i] + t * (sr[i + 1] - sr[i]))
    if len(xs) < 3:
        return float("nan")
    slope = np.polyfit(np.array(xs), np.array(ys), 1)[0]
    return math.degrees(math.atan(slope))


def _wall_width_fit(s_prof, prof, s0, delta_hint):
    """pi * delta from a tanh fit of the m_z profile around s0."""
    near = np.abs(s_prof - s0) < max(6.0 * delta_hint, 10e-9)
    if near.sum() < 5:
        return float("nan")
    sign = 1.0 if prof[near][-1] > prof[near][0] else -1.0
    try:
        popt, _ = curve_fit(
            _tanh_profile, s_prof[near], prof[near],
            p0=(s0, delta_hint, sign), maxfev=2000)
    except RuntimeError:
        return float("nan")
    return math.pi * abs(popt[1])
