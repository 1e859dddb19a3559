"""Micromagnetic simulator and design toolkit for current-driven
multi-bit domain-wall memory in meandering channels."""

__version__ = "0.1.0"

from .materials import Material, SIM2023, SIM2023_SAF, DESIGN_SEC8, get_preset
from .mesh import (Mesh, GeometryMask, SerpentineSpec, FourWaySpec,
                   DefectSpec, CurrentMap, build_mesh, generate_strip,
                   generate_serpentine, generate_four_way, four_way_spec,
                   serpentine_spec, apply_defects, build_current_map,
                   full_film)
from .fields import (FieldBuffer, EffectiveField, ThermalField,
                     exchange_field, anisotropy_field, dmi_field,
                     demag_field, rkky_field, zeeman_field,
                     total_effective_field, thermal_sigma)
from .dynamics import (MagState, SolverConfig, PulseSegment, PulseProgram,
                       Trajectory, uniform_state, seed_domain, seeded_wall_state, llg_step,
                       relax, run_pulse_program, sot_torque,
                       sot_field_vectors)
from .analysis import (ReadoutModel, WallObservation, switching_ratio,
                       conductance, wall_observation, state_index)
from . import design
