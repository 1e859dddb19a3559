"""Simulation domain construction.

Rectilinear meshes, parametric channel masks (straight strip, meandering
serpentine, wound four-way), seed regions, defect injection and per-cell
current-density maps.

The channel region is the union of discs centered on a densely sampled
centerline, with disc radius equal to half the local channel width. A cell
is occupied iff its center falls inside that region. Defect injection
perturbs the two channel edges independently and re-rasterizes.
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import GeometryError, DefectError

REGION_VACUUM = 0
REGION_CHANNEL = 1
REGION_SEED = 2
REGION_PINNING = 3

# centerline sampling step as a fraction of the smallest in-plane cell size
_PATH_SAMPLING = 0.25


@dataclass(frozen=True)
class Mesh:
    """Rectilinear cell grid. Sizes in meters; origin is the lower-left
    corner of cell (0, 0)."""

    nx: int
    ny: int
    nz: int
    cell_size: tuple
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.nz < 1:
            raise GeometryError("cell counts must be >= 1")
        if len(self.cell_size) != 3 or min(self.cell_size) <= 0:
            raise GeometryError("cell_size must be three positive lengths")

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def extent(self):
        """((x0, x1), (y0, y1)) bounding box in meters."""
        x0, y0 = self.origin
        return ((x0, x0 + self.nx * self.cell_size[0]),
                (y0, y0 + self.ny * self.cell_size[1]))

    @property
    def cell_volume(self):
        cx, cy, cz = self.cell_size
        return cx * cy * cz

    def cell_centers_xy(self):
        """Cell-center coordinate arrays, shape (nx,) and (ny,)."""
        cx, cy = self.cell_size[0], self.cell_size[1]
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * cx
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * cy
        return x, y


def build_mesh(nx, ny, nz, cell_size, origin=(0.0, 0.0)):
    return Mesh(int(nx), int(ny), int(nz), tuple(cell_size), tuple(origin))


# Cell size matching the simulated devices: 2 nm x 2 nm x 0.6 nm.
DEFAULT_CELL = (2e-9, 2e-9, 0.6e-9)


@dataclass(frozen=True)
class SerpentineSpec:
    """Meandering channel: straight segments joined by 180-degree U-turns.

    Each U-turn is a circular arc of outer radius ``u_turn_outer_radius``.
    The width tapers linearly from ``width`` to ``neck_width`` between
    ``taper_upstream`` before the turn apex and ``taper_length`` after it,
    then recovers to ``width`` over ``taper_length * taper_asymmetry``.
    The neck (the latch point) sits at the end of the narrowing ramp. A
    nonzero upstream extension keeps the wall on a forward-pulling slope
    when the drive shuts off at the apex; a small ``taper_asymmetry``
    shortens the recovery ramp.
    """

    n_segments: int
    segment_lengths: tuple        # straight length per segment [m]
    width: float                  # wide channel width w [m]
    neck_width: float             # w_neck [m]
    taper_length: float           # [m]
    u_turn_outer_radius: float    # [m]
    taper_asymmetry: float = 1.0  # in (0, 1]
    seed_length: float = 0.0      # extra stub before segment 0 [m]
    taper_upstream: float = 0.0   # narrowing start before the apex [m]

    def __post_init__(self):
        if self.n_segments < 1:
            raise GeometryError("serpentine needs at least one segment")
        if len(self.segment_lengths) != self.n_segments:
            raise GeometryError("segment_lengths must have n_segments entries")
        if min(self.segment_lengths) <= 0:
            raise GeometryError("segment lengths must be positive")
        if not 0 < self.neck_width < self.width:
            raise GeometryError("need 0 < neck_width < width")
        if self.taper_length <= 0:
            raise GeometryError("taper_length must be positive")
        if self.u_turn_outer_radius < self.width:
            raise GeometryError("u_turn_outer_radius must be >= width")
        if not 0 < self.taper_asymmetry <= 1:
            raise GeometryError("taper_asymmetry must be in (0, 1]")
        if self.taper_upstream < 0:
            raise GeometryError("taper_upstream must be >= 0")


def serpentine_spec(n_segments, segment_length, width, neck_width,
                    taper_length, u_turn_outer_radius, taper_asymmetry=1.0,
                    seed_length=0.0, taper_upstream=0.0):
    """Convenience constructor with a uniform segment length."""
    lengths = tuple([float(segment_length)] * int(n_segments))
    return SerpentineSpec(int(n_segments), lengths, width, neck_width,
                          taper_length, u_turn_outer_radius, taper_asymmetry,
                          seed_length, taper_upstream)


@dataclass(frozen=True)
class FourWaySpec:
    """Wound channel with 90-degree turns and width-modulation pinning.

    ``turn_sequence`` is a string of 'L'/'R' turns; its length fixes the
    number of inter-state steps (n_states - 1). A wall crossing a corner
    pivots and coasts roughly one channel width into the next segment, so
    the pinning notches sit ``pinning_notch_offset`` past each corner
    (inside the following segment), where they capture the wall arriving
    from either direction. Rest positions are the start notch plus one
    notch per corner, ``step_length`` apart along the channel.
    """

    turn_sequence: str
    width_wide: float
    width_narrow: float
    pinning_notch_depth: float     # per-side indent at a pinning site [m]
    pinning_notch_length: float    # full arclength extent of a notch [m]
    center_extent: float           # device center square side [m]
    n_states: int
    step_length: float             # rest-to-rest arclength [m]
    seed_length: float = 0.0
    end_stub_length: float = 0.0   # channel continuation past last corner
    pinning_notch_offset: float = 0.0   # notch center past its corner [m]

    def __post_init__(self):
        if self.n_states < 2:
            raise GeometryError("need at least two states")
        if len(self.turn_sequence) != self.n_states - 1:
            raise GeometryError("turn_sequence must have n_states - 1 turns")
        if any(c not in "LR" for c in self.turn_sequence.upper()):
            raise GeometryError("turn_sequence may only contain 'L' and 'R'")
        if not 0 < self.width_narrow < self.width_wide:
            raise GeometryError("need 0 < width_narrow < width_wide")
        if self.pinning_notch_depth < 0 or self.pinning_notch_length <= 0:
            raise GeometryError("invalid pinning notch dimensions")
        if 2 * self.pinning_notch_depth > self.width_wide - self.width_narrow:
            raise GeometryError("notch depth narrows below width_narrow")
        if self.step_length <= self.pinning_notch_length:
            raise GeometryError("step_length must exceed the notch length")
        if not 0 <= self.pinning_notch_offset < self.step_length:
            raise GeometryError("notch offset must be in [0, step_length)")


def four_way_spec(n_states, width_wide=50e-9, width_narrow=25e-9,
                  step_length=100e-9, center_extent=500e-9,
                  pinning_notch_depth=None, pinning_notch_length=30e-9,
                  turn_sequence=None, seed_length=None, end_stub_length=None,
                  pinning_notch_offset=None):
    """Four-way spec with a boustrophedon default winding."""
    if turn_sequence is None:
        # headings E,N,W,N,E,... -> turns L,L,R,R,L,L,...
        pattern = "LLRR"
        turn_sequence = "".join(pattern[i % 4] for i in range(n_states - 1))
    if pinning_notch_depth is None:
        pinning_notch_depth = 0.5 * (width_wide - width_narrow)
    if seed_length is None:
        seed_length = 1.5 * width_wide
    if pinning_notch_offset is None:
        pinning_notch_offset = width_wide
    if end_stub_length is None:
        end_stub_length = (pinning_notch_offset + width_wide
                           + pinning_notch_length)
    return FourWaySpec(turn_sequence, width_wide, width_narrow,
                       pinning_notch_depth, pinning_notch_length,
                       center_extent, int(n_states), step_length,
                       seed_length, end_stub_length, pinning_notch_offset)


@dataclass(frozen=True)
class DefectSpec:
    """Lithography edge roughness and deposition grain disorder."""

    edge_roughness_amplitude: float = 0.0   # RMS edge displacement [m]
    edge_roughness_corr_length: float = 10e-9
    grain_mean_diameter: float = 0.0        # 0 disables grains
    grain_k_sigma: float = 0.0              # relative std of per-grain K_u
    rng_seed: int = 0

    def __post_init__(self):
        if self.edge_roughness_amplitude < 0 or self.grain_mean_diameter < 0:
            raise ValueError("defect amplitudes must be >= 0")
        if not 0.0 <= self.grain_k_sigma <= 0.5:
            raise ValueError("grain_k_sigma must be in [0, 0.5]")
        if self.edge_roughness_corr_length <= 0:
            raise ValueError("correlation length must be positive")


class ChannelPath:
    """Densely sampled channel centerline with local width.

    Arrays: points (P, 2), s (P,), width (P,), tangent (P, 2). The normal
    is the tangent rotated +90 degrees, so the left edge is at +normal.
    """

    def __init__(self, points, width):
        points = np.asarray(points, dtype=float)
        seg = np.diff(points, axis=0)
        ds = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(ds == 0):
            raise GeometryError("channel path has duplicate points")
        self.points = points
        self.s = np.concatenate([[0.0], np.cumsum(ds)])
        self.width = np.asarray(width, dtype=float)
        tan = np.empty_like(points)
        tan[:-1] = seg / ds[:, None]
        tan[-1] = tan[-2]
        tan[1:-1] = 0.5 * (tan[:-2] + tan[1:-1])   # vertex average
        norm = np.hypot(tan[:, 0], tan[:, 1])
        self.tangent = tan / norm[:, None]
        self.normal = np.column_stack([-self.tangent[:, 1], self.tangent[:, 0]])

    @property
    def length(self):
        return self.s[-1]

    @cached_property
    def _tree(self):
        return cKDTree(self.points)

    def locate(self, xy):
        """Map points (N, 2) to (s, d, index) channel coordinates.

        d is the signed transverse offset, positive on the +normal (left)
        side of the centerline.
        """
        xy = np.atleast_2d(xy)
        _, idx = self._tree.query(xy)
        rel = xy - self.points[idx]
        d = rel[:, 0] * self.normal[idx, 0] + rel[:, 1] * self.normal[idx, 1]
        along = (rel[:, 0] * self.tangent[idx, 0]
                 + rel[:, 1] * self.tangent[idx, 1])
        return self.s[idx] + along, d, idx

    def width_at(self, s):
        return np.interp(s, self.s, self.width)

    def point_at(self, s):
        x = np.interp(s, self.s, self.points[:, 0])
        y = np.interp(s, self.s, self.points[:, 1])
        return np.column_stack([x, y]) if np.ndim(s) else np.array([x, y])

    def tangent_at(self, s):
        tx = np.interp(s, self.s, self.tangent[:, 0])
        ty = np.interp(s, self.s, self.tangent[:, 1])
        t = np.column_stack([tx, ty]) if np.ndim(s) else np.array([tx, ty])
        n = np.linalg.norm(t, axis=-1, keepdims=True)
        return t / n


@njit(cache=True)
def _stamp_discs(occ, pxs, pys, radii, x0, y0, cw, ch, nx, ny):
    """Mark cells whose center lies inside the union of discs."""
    for k in range(pxs.shape[0]):
        px, py, r = pxs[k], pys[k], radii[k]
        if r <= 0.0:
            continue
        i_lo = max(0, int(math.floor((px - r - x0) / cw - 0.5)))
        i_hi = min(nx - 1, int(math.ceil((px + r - x0) / cw - 0.5)))
        j_lo = max(0, int(math.floor((py - r - y0) / ch - 0.5)))
        j_hi = min(ny - 1, int(math.ceil((py + r - y0) / ch - 0.5)))
        r2 = r * r
        for i in range(i_lo, i_hi + 1):
            dx = x0 + (i + 0.5) * cw - px
            for j in range(j_lo, j_hi + 1):
                dy = y0 + (j + 0.5) * ch - py
                if dx * dx + dy * dy <= r2:
                    occ[i, j] = True
    return occ


@dataclass
class GeometryMask:
    """Discretized channel: occupancy, regions, path metadata.

    occupancy and region_id have shape (nx, ny, nz); all layers share the
    same in-plane footprint. pinned marks fixed-orientation cells (seed
    block, and the end block of four-way devices).
    """

    mesh: Mesh
    occupancy: np.ndarray
    region_id: np.ndarray
    layer_roles: tuple
    path: ChannelPath
    cusp_positions: tuple = ()
    latch_positions: tuple = ()
    state_positions: tuple = ()
    pinned: np.ndarray = None
    width_ref: float = 0.0
    n_states: int = 2
    kind: str = "strip"
    seed_length: float = 0.0
    pinning_spans: tuple = ()      # arclength spans tagged REGION_PINNING
    pinned_spans: tuple = ()       # extra pinned spans (four-way end block)
    edge_offsets: tuple = None     # defect edge displacement, per side

    def __post_init__(self):
        if self.pinned is None:
            self.pinned = np.zeros_like(self.occupancy)

    @property
    def n_occupied(self):
        return int(self.occupancy.sum())

    def layer_footprint(self):
        return self.occupancy[:, :, 0]

    @cached_property
    def channel_coords(self):
        """(s_grid, d_grid) arrays of shape (nx, ny) for the footprint."""
        x, y = self.mesh.cell_centers_xy()
        xx, yy = np.meshgrid(x, y, indexing="ij")
        s, d, _ = self.path.locate(np.column_stack([xx.ravel(), yy.ravel()]))
        return s.reshape(xx.shape), d.reshape(xx.shape)

    def cell_graph(self):
        if not hasattr(self, "_graph"):
            self._graph = build_cell_graph(self)
        return self._graph


def _layer_roles(nz):
    if nz == 1:
        return ("single",)
    if nz == 2:
        return ("saf_bottom", "saf_top")
    raise GeometryError("channel generators support a single film (nz=1) "
                        "or a SAF bilayer (nz=2)")


def _rasterize(mesh, path, edge_offsets=None):
    """Occupancy footprint of a variable-width tube around ``path``.

    edge_offsets = (left, right): signed displacement of each edge along
    the +normal direction, sampled on path.s.
    """
    if edge_offsets is None:
        centers = path.points
        radii = 0.5 * path.width
    else:
        left, right = edge_offsets
        shift = 0.5 * (left + right)
        half = 0.5 * (path.width + left - right)
        if np.any(half <= 0):
            raise GeometryError("edge displacement closed the channel")
        centers = path.points + shift[:, None] * path.normal
        radii = half
    occ = np.zeros((mesh.nx, mesh.ny), dtype=np.bool_)
    x0, y0 = mesh.origin
    _stamp_discs(occ, np.ascontiguousarray(centers[:, 0]),
                 np.ascontiguousarray(centers[:, 1]),
                 np.ascontiguousarray(radii, dtype=float), x0, y0,
                 mesh.cell_size[0], mesh.cell_size[1], mesh.nx, mesh.ny)
    return occ


def _check_fits(mesh, path):
    (xa, xb), (ya, yb) = mesh.extent
    r = 0.5 * path.width
    if (np.any(path.points[:, 0] - r < xa)
            or np.any(path.points[:, 0] + r > xb)
            or np.any(path.points[:, 1] - r < ya)
            or np.any(path.points[:, 1] + r > yb)):
        raise GeometryError("channel does not fit inside the mesh")


def _check_connected(footprint):
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    _, n = ndimage.label(footprint, structure=structure)
    return n == 1


def _build_mask(mesh, path, *, kind, width_ref, cusps=(), latches=(),
                states=(), n_states=2, seed_length=0.0, pinning_spans=(),
                pinned_spans=(), edge_offsets=None):
    """Rasterize and assemble a GeometryMask."""
    footprint = _rasterize(mesh, path, edge_offsets)
    if not footprint.any():
        raise GeometryError("channel rasterized to an empty mask")
    if not _check_connected(footprint):
        if edge_offsets is not None:
            raise DefectError("edge roughness severed the channel")
        raise GeometryError("channel footprint is not 4-connected")

    nz = mesh.nz
    x, y = mesh.cell_centers_xy()
    xx, yy = np.meshgrid(x, y, indexing="ij")
    s_grid, _, _ = path.locate(np.column_stack([xx.ravel(), yy.ravel()]))
    s_grid = s_grid.reshape(footprint.shape)

    region = np.where(footprint, REGION_CHANNEL, REGION_VACUUM).astype(np.int8)
    for s_lo, s_hi in pinning_spans:
        region[footprint & (s_grid >= s_lo) & (s_grid <= s_hi)] = REGION_PINNING
    if seed_length > 0:
        region[footprint & (s_grid <= seed_length)] = REGION_SEED

    pinned2d = np.zeros_like(footprint)
    if seed_length > 0:
        pinned2d |= footprint & (s_grid <= seed_length)
    for s_lo, s_hi in pinned_spans:
        pinned2d |= footprint & (s_grid >= s_lo) & (s_grid <= s_hi)

    return GeometryMask(
        mesh=mesh,
        occupancy=np.repeat(footprint[:, :, None], nz, axis=2),
        region_id=np.repeat(region[:, :, None], nz, axis=2),
        layer_roles=_layer_roles(nz),
        path=path,
        cusp_positions=tuple(cusps),
        latch_positions=tuple(latches),
        state_positions=tuple(states),
        pinned=np.repeat(pinned2d[:, :, None], nz, axis=2),
        width_ref=width_ref,
        n_states=n_states,
        kind=kind,
        seed_length=seed_length,
        pinning_spans=tuple(pinning_spans),
        pinned_spans=tuple(pinned_spans),
        edge_offsets=edge_offsets)


def generate_strip(mesh, length, width, seed_length=0.0, y_center=None):
    """Straight channel along +x, for calibration and tilt studies.

    The channel ends are rounded half-discs, so the footprint spans
    length + width along x.
    """
    cmin = min(mesh.cell_size[0], mesh.cell_size[1])
    if width / max(mesh.cell_size[0], mesh.cell_size[1]) < 3:
        raise GeometryError("strip narrower than 3 cells")
    ds = _PATH_SAMPLING * cmin
    x_start = mesh.origin[0] + mesh.cell_size[0] + 0.5 * width
    if y_center is None:
        y_center = mesh.origin[1] + 0.5 * mesh.ny * mesh.cell_size[1]
    n = max(2, int(round(length / ds)) + 1)
    xs = np.linspace(x_start, x_start + length, n)
    path = ChannelPath(np.column_stack([xs, np.full(n, y_center)]),
                       np.full(n, width))
    _check_fits(mesh, path)
    return _build_mask(mesh, path, kind="strip", width_ref=width,
                       seed_length=seed_length, n_states=2)


def full_film(mesh):
    """Every cell occupied; for film-level field validation studies."""
    (xa, xb), (ya, yb) = mesh.extent
    y_mid = 0.5 * (ya + yb)
    n = max(2, int(mesh.nx))
    xs = np.linspace(xa, xb, n)
    path = ChannelPath(np.column_stack([xs, np.full(n, y_mid)]),
                       np.full(n, yb - ya))
    occ = np.ones((mesh.nx, mesh.ny, mesh.nz), dtype=np.bool_)
    return GeometryMask(
        mesh=mesh, occupancy=occ,
        region_id=np.full(occ.shape, REGION_CHANNEL, dtype=np.int8),
        layer_roles=_layer_roles(mesh.nz), path=path,
        width_ref=yb - ya, kind="film")


def mesh_for_serpentine(spec, cell_size=DEFAULT_CELL, nz=1):
    """Smallest mesh that fits the serpentine with its margins."""
    cx, cy = cell_size[0], cell_size[1]
    cmin = min(cx, cy)
    w = spec.width
    r_c = spec.u_turn_outer_radius - 0.5 * w
    margin = spec.u_turn_outer_radius + 2 * cmin
    span_x = (margin + spec.seed_length + max(spec.segment_lengths)
              + r_c + 0.5 * w + 2 * cmin)
    span_y = margin + (spec.n_segments - 1) * 2 * r_c + 0.5 * w + 2 * cmin
    return build_mesh(int(math.ceil(span_x / cx)) + 1,
                      int(math.ceil(span_y / cy)) + 1, nz, cell_size)


def mesh_for_four_way(spec, cell_size=DEFAULT_CELL, nz=2):
    """Smallest mesh that fits the four-way winding with its margins."""
    cx, cy = cell_size[0], cell_size[1]
    cmin = min(cx, cy)
    w = spec.width_wide
    lead = (spec.seed_length + spec.pinning_notch_length
            + spec.step_length - spec.pinning_notch_offset)
    pos = np.zeros(2)
    heading = 0
    lo = pos.copy()
    hi = pos + np.array(_HEADINGS[heading]) * lead
    verts = [pos, hi.copy()]
    for turn in spec.turn_sequence.upper():
        heading = (heading + (1 if turn == "L" else 3)) % 4
        verts.append(verts[-1] + np.array(_HEADINGS[heading]) * spec.step_length)
    if spec.end_stub_length > 0:
        verts[-1] = verts[-2] + np.array(_HEADINGS[heading]) * spec.end_stub_length
    v = np.array(verts)
    span = v.max(axis=0) - v.min(axis=0) + w + 2 * (0.5 * w + 2 * cmin) + 2 * cmin
    return build_mesh(int(math.ceil(span[0] / cx)) + 1,
                      int(math.ceil(span[1] / cy)) + 1, nz, cell_size)


def _arc_points(center, radius, a0, a1, ds):
    n = max(2, int(math.ceil(abs(a1 - a0) * radius / ds)) + 1)
    ang = np.linspace(a0, a1, n)
    return np.column_stack([center[0] + radius * np.cos(ang),
                            center[1] + radius * np.sin(ang)])


def generate_serpentine(mesh, spec):
    """Meandering channel mask with U-turn cusps and neck latch points."""
    cmin = min(mesh.cell_size[0], mesh.cell_size[1])
    if spec.neck_width / max(mesh.cell_size[0], mesh.cell_size[1]) < 3:
        raise GeometryError("neck narrower than 3 cells")
    ds = _PATH_SAMPLING * cmin
    w = spec.width
    r_c = spec.u_turn_outer_radius - 0.5 * w

    margin = spec.u_turn_outer_radius + 2 * cmin
    pos = np.array([mesh.origin[0] + margin, mesh.origin[1] + margin])
    heading = 1
    pieces = []
    cusps = []
    s_run = 0.0
    for k in range(spec.n_segments):
        length = spec.segment_lengths[k] + (spec.seed_length if k == 0 else 0)
        n = max(2, int(round(length / ds)) + 1)
        xs = np.linspace(pos[0], pos[0] + heading * length, n)
        pieces.append(np.column_stack([xs, np.full(n, pos[1])])
                      if not pieces else
                      np.column_stack([xs, np.full(n, pos[1])])[1:])
        pos = np.array([xs[-1], pos[1]])
        s_run += length
        if k < spec.n_segments - 1:
            center = (pos[0], pos[1] + r_c)
            if heading > 0:
                arc = _arc_points(center, r_c, -0.5 * math.pi, 0.5 * math.pi, ds)
            else:
                arc = _arc_points(center, r_c, -0.5 * math.pi, -1.5 * math.pi, ds)
            pieces.append(arc[1:])
            cusps.append(s_run + 0.5 * math.pi * r_c)   # arc apex
            s_run += math.pi * r_c
            pos = arc[-1]
            heading = -heading

    points = np.concatenate(pieces)
    seg = np.diff(points, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
    width = np.full(len(points), w)
    pre = spec.taper_upstream
    narrow_len = pre + spec.taper_length
    widen_len = spec.taper_length * spec.taper_asymmetry
    latches, pin_spans = [], []
    for sa in cusps:
        latches.append(sa + spec.taper_length)
        pin_spans.append((sa - pre, sa + spec.taper_length + widen_len))
        down = np.clip((s - sa + pre) / narrow_len, 0.0, 1.0)
        up = np.clip((s - sa - spec.taper_length) / widen_len, 0.0, 1.0)
        width = np.minimum(width, w - (w - spec.neck_width) * (down - up))

    path = ChannelPath(points, width)
    _check_fits(mesh, path)
    return _build_mask(
        mesh, path, kind="serpentine", width_ref=w, cusps=cusps,
        latches=latches, n_states=spec.n_segments,
        seed_length=spec.seed_length, pinning_spans=pin_spans)


_HEADINGS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def generate_four_way(mesh, spec):
    """Wound channel with 90-degree corners carved into pinning notches."""
    cmin = min(mesh.cell_size[0], mesh.cell_size[1])
    if spec.width_narrow / max(mesh.cell_size[0], mesh.cell_size[1]) < 3:
        raise GeometryError("narrow width below 3 cells")
    ds = _PATH_SAMPLING * cmin
    w = spec.width_wide

    off = spec.pinning_notch_offset
    s_state0 = spec.seed_length + spec.pinning_notch_length
    # first corner placed so that rest positions are step_length apart
    lead = s_state0 + spec.step_length - off
    verts = [np.zeros(2)]
    heading = 0
    verts.append(verts[-1] + np.array(_HEADINGS[heading]) * lead)
    corner_s = [lead]
    for turn in spec.turn_sequence.upper():
        heading = (heading + (1 if turn == "L" else 3)) % 4
        verts.append(verts[-1] + np.array(_HEADINGS[heading]) * spec.step_length)
        corner_s.append(corner_s[-1] + spec.step_length)
    corner_s = corner_s[:-1]                  # drop the channel end vertex
    if spec.end_stub_length > 0:
        verts[-1] = verts[-2] + np.array(_HEADINGS[heading]) * spec.end_stub_length
    dense = _densify(np.array(verts), ds)

    # reject windings whose arms overlap: spatially close point pairs that
    # are far apart along the channel
    tree = cKDTree(dense)
    pairs = tree.query_pairs(0.98 * w, output_type="ndarray")
    if len(pairs):
        arc_gap = np.abs(pairs[:, 0] - pairs[:, 1]) * ds
        if np.any(arc_gap > 2.5 * w):
            raise GeometryError("four-way channel arms overlap")

    span = dense.max(axis=0) - dense.min(axis=0) + w
    if max(span) > spec.center_extent:
        raise GeometryError(
            f"winding spans {max(span)*1e9:.0f} nm, exceeding the device "
            f"center extent {spec.center_extent*1e9:.0f} nm")

    shift = (np.array(mesh.origin) + 0.5 * w + 2 * cmin) - dense.min(axis=0)
    dense = dense + shift

    seg = np.diff(dense, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
    w_min = w - 2 * spec.pinning_notch_depth
    width = np.full(len(dense), w)
    half = 0.5 * spec.pinning_notch_length
    notch_centers = [s_state0] + [sc + off for sc in corner_s]
    pin_spans = []
    for sc in notch_centers:
        ramp = np.clip(1.0 - np.abs(s - sc) / half, 0.0, 1.0)
        width = np.minimum(width, w - (w - w_min) * ramp)
        pin_spans.append((sc - half, sc + half))

    path = ChannelPath(dense, width)
    _check_fits(mesh, path)
    pinned_spans = []
    if spec.end_stub_length > 0:
        pinned_spans.append((s[-1] - 0.6 * spec.end_stub_length, s[-1] + w))
    return _build_mask(
        mesh, path, kind="four_way", width_ref=w,
        cusps=tuple(corner_s), latches=tuple(notch_centers),
        states=tuple(notch_centers), n_states=spec.n_states,
        seed_length=spec.seed_length, pinning_spans=pin_spans,
        pinned_spans=pinned_spans)


def _densify(verts, ds):
    pieces = []
    for a, b in zip(verts[:-1], verts[1:]):
        n = max(2, int(round(np.linalg.norm(b - a) / ds)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        seg = a[None, :] * (1 - t) + b[None, :] * t
        pieces.append(seg if not pieces else seg[1:])
    return np.concatenate(pieces)


def apply_defects(mask, k_map, spec, max_retries=20):
    """Inject edge roughness and grain anisotropy disorder.

    Returns a new (mask, k_map). k_map is the per-cell multiplicative
    anisotropy factor, shape (nx, ny, nz); pass None for a pristine film.
    Identical rng_seed gives bit-identical output. Raises DefectError if
    roughness keeps severing the channel.
    """
    mesh = mask.mesh
    if k_map is None:
        k_map = np.ones((mesh.nx, mesh.ny, mesh.nz))

    roughness = spec.edge_roughness_amplitude > 0
    grains = spec.grain_mean_diameter > 0 and spec.grain_k_sigma > 0
    if not roughness and not grains:
        return mask, k_map

    new_mask = mask
    if roughness:
        path = mask.path
        ds = float(np.diff(path.s).mean())
        for attempt in range(max_retries):
            rng = np.random.Generator(np.random.Philox(
                key=[np.uint64(spec.rng_seed), np.uint64(attempt)]))
            left = _correlated_noise(rng, len(path.s), ds,
                                     spec.edge_roughness_corr_length,
                                     spec.edge_roughness_amplitude)
            right = _correlated_noise(rng, len(path.s), ds,
                                      spec.edge_roughness_corr_length,
                                      spec.edge_roughness_amplitude)
            try:
                new_mask = _build_mask(
                    mesh, path, kind=mask.kind, width_ref=mask.width_ref,
                    cusps=mask.cusp_positions, latches=mask.latch_positions,
                    states=mask.state_positions, n_states=mask.n_states,
                    seed_length=mask.seed_length,
                    pinning_spans=mask.pinning_spans,
                    pinned_spans=mask.pinned_spans,
                    edge_offsets=(left, right))
                break
            except (DefectError, GeometryError):
                continue
        else:
            raise DefectError(
                f"edge roughness severed the channel after {max_retries} "
                f"attempts (seed {spec.rng_seed})", seed=spec.rng_seed)

    new_k = k_map
    if grains:
        rng = np.random.Generator(np.random.Philox(
            key=[np.uint64(spec.rng_seed), np.uint64(0xC0FFEE)]))
        (xa, xb), (ya, yb) = mesh.extent
        area = (xb - xa) * (yb - ya)
        n_grains = max(1, int(round(area / spec.grain_mean_diameter**2)))
        centers = np.column_stack([rng.uniform(xa, xb, n_grains),
                                   rng.uniform(ya, yb, n_grains)])
        factors = rng.normal(1.0, spec.grain_k_sigma, n_grains)
        factors = np.clip(factors, 0.05, None)   # K_u must stay positive
        x, y = mesh.cell_centers_xy()
        xx, yy = np.meshgrid(x, y, indexing="ij")
        _, gid = cKDTree(centers).query(
            np.column_stack([xx.ravel(), yy.ravel()]))
        cell_f = factors[gid].reshape(mesh.nx, mesh.ny)
        new_k = k_map * cell_f[:, :, None]
    return new_mask, new_k


def _correlated_noise(rng, n, ds, corr_length, amplitude):
    """Gaussian-filtered white noise rescaled to RMS ``amplitude``."""
    white = rng.standard_normal(n)
    sigma_samples = corr_length / ds
    kern_n = int(6 * sigma_samples) | 1
    xk = np.arange(kern_n) - kern_n // 2
    kern = np.exp(-0.5 * (xk / sigma_samples) ** 2)
    kern /= kern.sum()
    smooth = np.convolve(white, kern, mode="same")
    rms = smooth.std()
    if rms == 0:
        return np.zeros(n)
    return smooth * (amplitude / rms)


@dataclass
class CellGraph:
    """Flat occupied-cell arrays used by the field and dynamics kernels.

    Cells are ordered by C-order scan of (ix, iy, iz); every reduction in
    the kernels runs serially in this order, which makes results
    independent of thread count. Missing neighbors point back to the cell
    itself with weight 0, which realizes free boundary conditions in the
    difference kernels. In SAF bilayers the vertical links are removed
    (the layers couple through RKKY only).
    """

    mask: GeometryMask
    n: int
    index_of: np.ndarray       # (nx, ny, nz) -> flat index or -1
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray
    nb: np.ndarray             # (n, 6) neighbor indices [+x,-x,+y,-y,+z,-z]
    nbw: np.ndarray            # (n, 6) float weights
    layer: np.ndarray          # 0 single, 1 saf_bottom, 2 saf_top
    partner: np.ndarray        # RKKY partner index (self if none)
    partner_w: np.ndarray
    pinned: np.ndarray
    region: np.ndarray
    s: np.ndarray              # arclength of cell center
    d: np.ndarray              # signed transverse offset

    @property
    def mesh(self):
        return self.mask.mesh

    @property
    def cell_volume(self):
        return self.mask.mesh.cell_volume

    def flatten_grid(self, grid):
        """Pick occupied-cell values out of an (nx, ny, nz) array."""
        return np.ascontiguousarray(grid[self.ix, self.iy, self.iz])

    def to_grid(self, values, fill=0.0):
        """Scatter per-cell values (n,) or (n, k) onto the full grid."""
        mesh = self.mask.mesh
        shape = (mesh.nx, mesh.ny, mesh.nz) + np.shape(values)[1:]
        grid = np.full(shape, fill, dtype=float)
        grid[self.ix, self.iy, self.iz] = values
        return grid


def build_cell_graph(mask):
    mesh = mask.mesh
    occ = mask.occupancy
    idx = np.full(occ.shape, -1, dtype=np.int64)
    ix, iy, iz = np.nonzero(occ)
    n = ix.size
    idx[ix, iy, iz] = np.arange(n)

    saf = mesh.nz == 2
    offsets = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
               (0, 0, 1), (0, 0, -1)]
    nb = np.empty((n, 6), dtype=np.int64)
    nbw = np.zeros((n, 6))
    me = np.arange(n)
    for a, (dx, dy, dz) in enumerate(offsets):
        jx, jy, jz = ix + dx, iy + dy, iz + dz
        ok = ((jx >= 0) & (jx < mesh.nx) & (jy >= 0) & (jy < mesh.ny)
              & (jz >= 0) & (jz < mesh.nz))
        if saf and dz != 0:
            ok &= False     # no exchange across the spacer
        j = idx[np.clip(jx, 0, mesh.nx - 1), np.clip(jy, 0, mesh.ny - 1),
                np.clip(jz, 0, mesh.nz - 1)]
        ok &= j >= 0
        nb[:, a] = np.where(ok, j, me)
        nbw[:, a] = ok.astype(float)

    if saf:
        layer = np.where(iz == 0, 1, 2).astype(np.int8)
        pj = idx[ix, iy, 1 - iz]
        partner = np.where(pj >= 0, pj, me)
        partner_w = (pj >= 0).astype(float)
    else:
        layer = np.zeros(n, dtype=np.int8)
        partner = me.copy()
        partner_w = np.zeros(n)

    s_grid, d_grid = mask.channel_coords
    return CellGraph(
        mask=mask, n=n, index_of=idx,
        ix=ix.astype(np.int32), iy=iy.astype(np.int32), iz=iz.astype(np.int32),
        nb=nb, nbw=nbw, layer=layer,
        partner=partner, partner_w=partner_w,
        pinned=mask.pinned[ix, iy, iz].copy(),
        region=mask.region_id[ix, iy, iz].copy(),
        s=s_grid[ix, iy].copy(), d=d_grid[ix, iy].copy())


@dataclass(frozen=True)
class CurrentMap:
    """Per-cell in-plane current density in the heavy-metal layer [A/m^2]."""

    j: np.ndarray              # (n, 3)
    model: str                 # uniform_direction or channel_following
    j0: float
    direction: object          # unit vector, or +/-1 for channel_following

    @property
    def mean_vector(self):
        return self.j.mean(axis=0) if len(self.j) else np.zeros(3)


def build_current_map(mask_or_graph, model, direction, j0):
    """Realize a drive-current model on the occupied cells.

    uniform_direction: every cell carries j0 * direction (unit, in-plane).
    channel_following: direction is +1/-1 along the channel tangent, with
    magnitude scaled by width_ref / w(s) for current continuity.
    """
    graph = (mask_or_graph.cell_graph()
             if isinstance(mask_or_graph, GeometryMask) else mask_or_graph)
    mask = graph.mask
    if j0 < 0:
        raise ValueError("j0 must be >= 0")
    if model == "uniform_direction":
        direction = np.asarray(direction, dtype=float)
        if direction.shape == (2,):
            direction = np.array([direction[0], direction[1], 0.0])
        if direction.shape != (3,):
            raise ValueError("direction must be an in-plane vector")
        if abs(direction[2]) > 1e-12:
            raise ValueError("current direction must be in-plane")
        nrm = np.linalg.norm(direction)
        if nrm == 0:
            if j0 != 0:
                raise ValueError("zero direction with nonzero j0")
            direction = np.array([1.0, 0.0, 0.0])
        else:
            direction = direction / nrm
        j = np.tile(direction * j0, (graph.n, 1))
        return CurrentMap(j=j, model=model, j0=j0,
                          direction=tuple(direction))
    if model == "channel_following":
        if mask.path is None:
            raise GeometryError("channel_following requires a channel path")
        sgn = float(direction)
        if sgn not in (-1.0, 1.0):
            raise ValueError("channel_following direction must be +1 or -1")
        t = mask.path.tangent_at(graph.s)
        mag = j0 * mask.width_ref / mask.path.width_at(graph.s)
        j = np.zeros((graph.n, 3))
        j[:, 0] = sgn * mag * t[:, 0]
        j[:, 1] = sgn * mag * t[:, 1]
        return CurrentMap(j=j, model=model, j0=j0, direction=sgn)
    raise ValueError(f"unknown current model {model!r}")
