"""File outputs: trajectory CSV, OVF 2.0 snapshots, PPM images.

All writes are atomic (temp file in the target directory + rename).
"""

import os
import tempfile

import numpy as np

from .dynamics import Trajectory

CSV_HEADER = ("time_s,jx_A_per_m2,jy_A_per_m2,switching_ratio,state_index,"
              "wall_s_m,wall_tilt_deg,E_total_J,E_exch_J,E_anis_J,E_dmi_J,"
              "E_demag_J,E_rkky_J,max_torque_T")

# trajectory columns emitted to CSV, in header order
_CSV_COLUMNS = ("time_s", "jx_A_per_m2", "jy_A_per_m2", "switching_ratio",
                "state_index", "wall_s_m", "wall_tilt_deg", "E_total_J",
                "E_exch_J", "E_anis_J", "E_dmi_J", "E_demag_J", "E_rkky_J",
                "max_torque_T")


def _atomic_write(path, data, mode="w"):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix="~")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(trajectory, path):
    """Write trajectory rows under the fixed header."""
    lines = [CSV_HEADER]
    idx = [Trajectory.COLUMNS.index(c) for c in _CSV_COLUMNS]
    for row in trajectory.rows:
        vals = []
        for c, i in zip(_CSV_COLUMNS, idx):
            v = row[i]
            if c == "state_index":
                vals.append(str(int(v)))
            else:
                vals.append(repr(float(v)))
        lines.append(",".join(vals))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a trajectory CSV back into a dict of column arrays."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_snapshot_ovf(m_or_state, mask, path, title="magnetization"):
    """OVF 2.0 text snapshot of the magnetization on the full grid.

    One "mx my mz" triple per cell in x-fastest order; vacuum cells are
    written as 0 0 0.
    """
    m = getattr(m_or_state, "m", m_or_state)
    mesh = mask.mesh
    graph = mask.cell_graph()
    grid = graph.to_grid(m)           # (nx, ny, nz, 3), zeros in vacuum
    cx, cy, cz = mesh.cell_size
    x0, y0 = mesh.origin
    head = [
        "# OOMMF OVF 2.0",
        "# Segment count: 1",
        "# Begin: Segment",
        "# Begin: Header",
        f"# Title: {title}",
        "# meshtype: rectangular",
        "# meshunit: m",
        f"# xmin: {x0!r}",
        f"# ymin: {y0!r}",
        "# zmin: 0.0",
        f"# xmax: {x0 + mesh.nx * cx!r}",
        f"# ymax: {y0 + mesh.ny * cy!r}",
        f"# zmax: {mesh.nz * cz!r}",
        f"# xbase: {x0 + 0.5 * cx!r}",
        f"# ybase: {y0 + 0.5 * cy!r}",
        f"# zbase: {0.5 * cz!r}",
        f"# xstepsize: {cx!r}",
        f"# ystepsize: {cy!r}",
        f"# zstepsize: {cz!r}",
        f"# xnodes: {mesh.nx}",
        f"# ynodes: {mesh.ny}",
        f"# znodes: {mesh.nz}",
        "# valuedim: 3",
        "# valuelabels: mx my mz",
        "# valueunits: 1 1 1",
        "# End: Header",
        "# Begin: Data Text",
    ]
    body = []
    for k in range(mesh.nz):
        for j in range(mesh.ny):
            for i in range(mesh.nx):
                v = grid[i, j, k]
                body.append(f"{v[0]!r} {v[1]!r} {v[2]!r}")
    tail = ["# End: Data Text", "# End: Segment", ""]
    _atomic_write(path, "\n".join(head + body + tail))


def read_snapshot_ovf(path):
    """Read an OVF 2.0 text file back; returns (grid (nx,ny,nz,3), meta)."""
    meta = {}
    data = []
    in_data = False
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line.startswith("#"):
                stripped = line.lstrip("#").strip()
                if stripped.startswith("Begin: Data"):
                    if "Text" not in stripped:
                        raise ValueError("only OVF text data is supported")
                    in_data = True
                    continue
                if stripped.startswith("End: Data"):
                    in_data = False
                    continue
                if ":" in stripped:
                    key, _, val = stripped.partition(":")
                    meta[key.strip()] = val.strip()
                continue
            if in_data and line:
                data.append([float(t) for t in line.split()])
    if meta.get("meshtype") != "rectangular":
        raise ValueError("only rectangular OVF meshes are supported")
    nx = int(meta["xnodes"])
    ny = int(meta["ynodes"])
    nz = int(meta["znodes"])
    arr = np.array(data).reshape(nz, ny, nx, 3)
    return np.transpose(arr, (2, 1, 0, 3)), meta


def write_ppm(m_or_state, mask, path, z_layer=-1):
    """Binary P6 image of one z-layer: m_z mapped to gray, vacuum blue.

    Rows run top to bottom (decreasing y); luminance =
    round(255*(m_z+1)/2); vacuum pixels are (0, 0, 128).
    """
    m = getattr(m_or_state, "m", m_or_state)
    mesh = mask.mesh
    graph = mask.cell_graph()
    if z_layer < 0:
        z_layer = mesh.nz + z_layer
    grid = graph.to_grid(m)
    occ = mask.occupancy[:, :, z_layer]
    mz = grid[:, :, z_layer, 2]
    lum = np.rint(255.0 * (mz + 1.0) / 2.0).astype(np.uint8)
    img = np.zeros((mesh.ny, mesh.nx, 3), dtype=np.uint8)
    img[:, :, 2] = 128                      # vacuum: mid blue
    occ_t = occ.T                           # (ny, nx)
    for c in range(3):
        chan = img[:, :, c]
        chan[occ_t] = lum.T[occ_t]
    img = img[::-1]                         # top row = max y
    header = f"P6\n{mesh.nx} {mesh.ny}\n255\n".encode("ascii")
    _atomic_write(path, header + img.tobytes(), mode="wb")


def read_ppm(path):
    """Read a binary P6 image; returns (ny, nx, 3) uint8."""
    with open(path, "rb") as f:
        raw = f.read()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM file")
    w, h = (int(t) for t in parts[1].split())
    body = parts[3]
    return np.frombuffer(body[:w * h * 3], dtype=np.uint8).reshape(h, w, 3)
