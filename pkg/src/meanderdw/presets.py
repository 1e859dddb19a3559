"""Shipped experiments reproducing the paper-style behaviors at desk scale.

Every preset is an ExperimentConfig factory plus a set of acceptance
assertions evaluated on the finished trajectory. Geometries are shrunk so
each run completes in minutes; the behavioral properties (latching,
surface-tension turning, four-direction stepping, tilt suppression) are
scale-independent.

The serpentine and four-way presets use the SAF free layer. A single-FM
serpentine shows chirality-driven internal-angle oscillations and backward
automotion after current-off at these drives (the same pathology the
two-way device exhibits before the SAF upgrade), so the reliable switching
contract is only met by the SAF stack; the FM variant ships as a config
for offline study.
"""

import math

import numpy as np

from .analysis import state_index
from .config import (ExperimentConfig, MeshSection, MaterialSection,
                     GeometrySection, OutputSection)
from .dynamics import PulseProgram, PulseSegment, SolverConfig
from .analysis import ReadoutModel
from .mesh import (serpentine_spec, four_way_spec, mesh_for_serpentine,
                   mesh_for_four_way, DEFAULT_CELL, DefectSpec)

CELL = DEFAULT_CELL


def _geometry_params(d):
    return tuple(sorted(d.items()))


# ---------------------------------------------------------------- strips

def calibration_strip(seed=0):
    """Sign calibration: an up-down wall driven by +x current moves +x.

    T = 0 deterministic run on a single-layer strip; the summary asserts
    forward motion.
    """
    length, width = 700e-9, 64e-9
    nx = int(math.ceil((length + width + 3 * CELL[0]) / CELL[0]))
    ny = int(math.ceil(width / CELL[1])) + 8
    program = PulseProgram(
        segments=(PulseSegment("+x", 2.5e11, 1.0e-9, "drive"),),
        sample_every=20e-12)
    return ExperimentConfig(
        mesh=MeshSection(nx=nx, ny=ny, nz=1, cell=CELL),
        material=MaterialSection(preset="sim2023"),
        geometry=GeometrySection(kind="strip", params=_geometry_params(
            {"length": length, "width": width, "seed_length": 60e-9})),
        program=program,
        solver=SolverConfig(scheme="rk45_deterministic", tol=3e-4,
                            max_dm_per_step=0.3, rng_seed=seed),
        readout=ReadoutModel(),
        output=OutputSection(directory="out/calibration_strip"))


def _strip_config(preset_name, nz, j0, duration, seed, name):
    length, width = 900e-9, 96e-9
    nx = int(math.ceil((length + width + 3 * CELL[0]) / CELL[0]))
    ny = int(math.ceil(width / CELL[1])) + 8
    program = PulseProgram(
        segments=(PulseSegment("+x", j0, duration, "drive"),),
        sample_every=20e-12)
    return ExperimentConfig(
        mesh=MeshSection(nx=nx, ny=ny, nz=nz, cell=CELL),
        material=MaterialSection(preset=preset_name),
        geometry=GeometrySection(kind="strip", params=_geometry_params(
            {"length": length, "width": width, "seed_length": 60e-9})),
        program=program,
        solver=SolverConfig(scheme="heun_stochastic", dt=5e-14,
                            temperature=300.0, rng_seed=seed),
        readout=ReadoutModel(),
        output=OutputSection(directory=f"out/{name}"))


def fig6_fm_strip(seed=0):
    """Ferromagnetic test strip at the two-way drive density."""
    return _strip_config("sim2023", 1, 2.5e11, 2.5e-9, seed, "fig6_fm")


def fig6_saf_strip(seed=0):
    """SAF test strip at the four-way drive density."""
    return _strip_config("sim2023_saf", 2, 8.33e11, 0.6e-9, seed, "fig6_saf")


# ----------------------------------------------------------- serpentine

SERPENTINE = dict(
    n_segments=7, segment_length=150e-9, width=32e-9, neck_width=28e-9,
    taper_length=65e-9, taper_upstream=55e-9, taper_asymmetry=1.0,
    u_turn_outer_radius=34e-9, seed_length=60e-9)

SERPENTINE_DRIVE = dict(j0=2.5e11, t_drive=0.55e-9, t_off=0.55e-9)


def fig2_serpentine(seed=1, n_pulses=6):
    """Two-way switching in a meandering SAF channel at 2.5e7 A/cm^2."""
    p = SERPENTINE
    spec = serpentine_spec(
        p["n_segments"], p["segment_length"], p["width"], p["neck_width"],
        p["taper_length"], p["u_turn_outer_radius"],
        taper_asymmetry=p["taper_asymmetry"], seed_length=p["seed_length"],
        taper_upstream=p["taper_upstream"])
    mesh = mesh_for_serpentine(spec, CELL, nz=2)
    segs = []
    d = SERPENTINE_DRIVE
    for k in range(n_pulses):
        token = "+x" if k % 2 == 0 else "-x"
        segs.append(PulseSegment(token, d["j0"], d["t_drive"], f"drive{k+1}"))
        segs.append(PulseSegment("off", 0.0, d["t_off"], f"settle{k+1}"))
    program = PulseProgram(segments=tuple(segs), sample_every=25e-12)
    geo = dict(p)
    geo.pop("n_segments")
    params = {"n_segments": p["n_segments"],
              "segment_length": p["segment_length"], "width": p["width"],
              "neck_width": p["neck_width"], "taper_length": p["taper_length"],
              "taper_upstream": p["taper_upstream"],
              "taper_asymmetry": p["taper_asymmetry"],
              "u_turn_outer_radius": p["u_turn_outer_radius"],
              "seed_length": p["seed_length"]}
    return ExperimentConfig(
        mesh=MeshSection(nx=mesh.nx, ny=mesh.ny, nz=2, cell=CELL),
        material=MaterialSection(preset="sim2023_saf"),
        geometry=GeometrySection(kind="serpentine",
                                 params=_geometry_params(params)),
        program=program,
        solver=SolverConfig(scheme="heun_stochastic", dt=5e-14,
                            temperature=300.0, rng_seed=seed),
        readout=ReadoutModel(),
        output=OutputSection(directory="out/fig2_serpentine"))


# ------------------------------------------------------------- four-way

FOUR_WAY = dict(
    n_states=4, width_wide=50e-9, width_narrow=25e-9, step_length=100e-9,
    center_extent=500e-9, pinning_notch_depth=12.5e-9,
    pinning_notch_length=30e-9, pinning_notch_offset=50e-9,
    turn_sequence="LLR", seed_length=75e-9, end_stub_length=130e-9)

FOUR_WAY_DRIVE = dict(j0=8.33e11, t_drive=0.3e-9, t_off=0.3e-9)

# state transitions 0->1->2->1->2->3->2; rest positions sit just past each
# corner inside the next segment, so reversing drives against that
# segment's direction
FOUR_WAY_SEQUENCE = (("+x", +1), ("+y", +1), ("+x", -1), ("+y", +1),
                     ("-x", +1), ("-y", -1))


def fig8_four_way(seed=1):
    """Bidirectional four-direction stepping of the wound SAF channel."""
    p = FOUR_WAY
    spec = four_way_spec(
        p["n_states"], width_wide=p["width_wide"],
        width_narrow=p["width_narrow"], step_length=p["step_length"],
        center_extent=p["center_extent"],
        pinning_notch_depth=p["pinning_notch_depth"],
        pinning_notch_length=p["pinning_notch_length"],
        pinning_notch_offset=p["pinning_notch_offset"],
        turn_sequence=p["turn_sequence"], seed_length=p["seed_length"],
        end_stub_length=p["end_stub_length"])
    mesh = mesh_for_four_way(spec, CELL, nz=2)
    d = FOUR_WAY_DRIVE
    segs = []
    for k, (token, _) in enumerate(FOUR_WAY_SEQUENCE):
        segs.append(PulseSegment(token, d["j0"], d["t_drive"], f"step{k+1}"))
        segs.append(PulseSegment("off", 0.0, d["t_off"], f"settle{k+1}"))
    program = PulseProgram(segments=tuple(segs), sample_every=25e-12)
    return ExperimentConfig(
        mesh=MeshSection(nx=mesh.nx, ny=mesh.ny, nz=2, cell=CELL),
        material=MaterialSection(preset="sim2023_saf"),
        geometry=GeometrySection(kind="four_way",
                                 params=_geometry_params(p)),
        program=program,
        solver=SolverConfig(scheme="heun_stochastic", dt=5e-14,
                            temperature=300.0, rng_seed=seed),
        readout=ReadoutModel(),
        output=OutputSection(directory="out/fig8_four_way"))


PRESET_BUILDERS = {
    "calibration_strip": calibration_strip,
    "fig2_serpentine": fig2_serpentine,
    "fig6_fm_vs_saf": None,     # two-run preset, handled by run_preset
    "fig8_four_way": fig8_four_way,
}


def expected_state_path():
    """Programmed four-way state sequence, starting from state 0."""
    states = [0]
    for _, delta in FOUR_WAY_SEQUENCE:
        states.append(states[-1] + delta)
    return states
