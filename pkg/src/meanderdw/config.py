"""Experiment configuration: parsing, validation, effective-config output.

Format: sectioned key-value text. ``[section]`` headers, ``key = value``
entries, ``#`` comments. Dimensioned values carry a unit suffix) from the
table below; the expected dimension of every key is fixed by the schema
and mismatches are rejected with line/column diagnostics. The ``pulse``
key may repeat; everything else may not.

    [mesh]      nx, ny, nz, cell
    [material]  preset + optional constant overrides
    [geometry]  kind = strip | serpentine | four_way + its parameters
    [defects]   edge roughness / grain disorder (optional)
    [program]   sample_every, current_model, pulse lines
    [solver]    scheme, dt, tol, temperature, seed, ...
    [readout]   g_parallel, tmr, s_min/s_max window (optional)
    [output]    directory, snapshot_stride, wall_observables
"""

import difflib
import math
from dataclasses import dataclass, field, asdict

from .errors import ConfigError
from .materials import get_preset, PRESETS
from .mesh import (build_mesh, generate_strip, generate_serpentine,
                   generate_four_way, SerpentineSpec, FourWaySpec,
                   DefectSpec, apply_defects, DEFAULT_CELL)
from .dynamics import PulseProgram, PulseSegment, SolverConfig
from .analysis import ReadoutModel

# unit -> (dimension, SI factor)
UNITS = {
    "m": ("length", 1.0), "um": ("length", 1e-6), "nm": ("length", 1e-9),
    "s": ("time", 1.0), "us": ("time", 1e-6), "ns": ("time", 1e-9),
    "ps": ("time", 1e-12), "fs": ("time", 1e-15),
    "A/m2": ("current_density", 1.0), "A/cm2": ("current_density", 1e4),
    "K": ("temperature", 1.0),
    "J/m": ("energy_per_length", 1.0), "pJ/m": ("energy_per_length", 1e-12),
    "J/m2": ("energy_per_area", 1.0), "mJ/m2": ("energy_per_area", 1e-3),
    "J/m3": ("energy_per_volume", 1.0), "MJ/m3": ("energy_per_volume", 1e6),
    "A/m": ("magnetization", 1.0), "MA/m": ("magnetization", 1e6),
    "T": ("field", 1.0), "mT": ("field", 1e-3),
    "S": ("conductance", 1.0), "mS": ("conductance", 1e-3),
    "ohm.m": ("resistivity", 1.0), "uohm.cm": ("resistivity", 1e-8),
}

_DIRECTION_TOKENS = ("+x", "-x", "+y", "-y", "off", "fwd", "rev")


@dataclass(frozen=True)
class MeshSection:
    nx: int
    ny: int
    nz: int
    cell: tuple = DEFAULT_CELL


@dataclass(frozen=True)
class MaterialSection:
    preset: str = "sim2023"
    overrides: tuple = ()    # sorted (name, value) pairs

    def build(self):
        mat = get_preset(self.preset)
        if self.overrides:
            mat = mat.with_(**dict(self.overrides))
        return mat


@dataclass(frozen=True)
class GeometrySection:
    kind: str
    params: tuple            # sorted (name, value) pairs

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def build(self, mesh):
        p = dict(self.params)
        if self.kind == "strip":
            return generate_strip(mesh, p["length"], p["width"],
                                  seed_length=p.get("seed_length", 0.0))
        if self.kind == "serpentine":
            n = int(p["n_segments"])
            spec = SerpentineSpec(
                n_segments=n,
                segment_lengths=tuple([p["segment_length"]] * n),
                width=p["width"], neck_width=p["neck_width"],
                taper_length=p["taper_length"],
                u_turn_outer_radius=p["u_turn_outer_radius"],
                taper_asymmetry=p.get("taper_asymmetry", 1.0),
                seed_length=p.get("seed_length", 0.0),
                taper_upstream=p.get("taper_upstream", 0.0))
            return generate_serpentine(mesh, spec)
        if self.kind == "four_way":
            spec = FourWaySpec(
                turn_sequence=p["turn_sequence"],
                width_wide=p["width_wide"], width_narrow=p["width_narrow"],
                pinning_notch_depth=p["pinning_notch_depth"],
                pinning_notch_length=p["pinning_notch_length"],
                center_extent=p["center_extent"],
                n_states=int(p["n_states"]),
                step_length=p["step_length"],
                seed_length=p.get("seed_length", 0.0),
                end_stub_length=p.get("end_stub_length", 0.0),
                pinning_notch_offset=p.get("pinning_notch_offset", 0.0))
            return generate_four_way(mesh, spec)
        raise ConfigError(f"unknown geometry kind {self.kind!r}")


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    snapshot_stride: int = 0
    wall_observables: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    mesh: MeshSection
    material: MaterialSection
    geometry: GeometrySection
    program: PulseProgram
    solver: SolverConfig
    defects: DefectSpec = DefectSpec()
    readout: ReadoutModel = ReadoutModel()
    output: OutputSection = OutputSection()

    def build(self):
        """Instantiate (mesh, mask, k_map, material) for a run."""
        mesh = build_mesh(self.mesh.nx, self.mesh.ny, self.mesh.nz,
                          self.mesh.cell)
        mask = self.geometry.build(mesh)
        mask, k_map = apply_defects(mask, None, self.defects)
        return mesh, mask, k_map, self.material.build()


# schema: section -> key -> kind
# kinds: int, float, bool, token:<choices>, str, q:<dimension>, cell3,
#        pulse (repeatable)
_SCHEMA = {
    "mesh": {"nx": "int", "ny": "int", "nz": "int", "cell": "cell3"},
    "material": {
        "preset": "token:" + ",".join(sorted(PRESETS)),
        "m_s": "q:magnetization", "a_ex": "q:energy_per_length",
        "k_u": "q:energy_per_volume", "d_ex": "q:energy_per_area",
        "alpha": "float", "theta_sh": "float", "t_fm": "q:length",
        "j_rkky": "q:energy_per_area", "rho_hm": "q:resistivity",
        "demag_mode": "token:effective_medium,full_fft",
    },
    "geometry": {
        "kind": "token:strip,serpentine,four_way",
        "length": "q:length", "width": "q:length",
        "seed_length": "q:length",
        "n_segments": "int", "segment_length": "q:length",
        "neck_width": "q:length", "taper_length": "q:length",
        "u_turn_outer_radius": "q:length", "taper_asymmetry": "float",
        "taper_upstream": "q:length",
        "n_states": "int", "width_wide": "q:length",
        "width_narrow": "q:length", "step_length": "q:length",
        "center_extent": "q:length", "pinning_notch_depth": "q:length",
        "pinning_notch_offset": "q:length",
        "pinning_notch_length": "q:length", "turn_sequence": "str",
        "end_stub_length": "q:length",
    },
    "defects": {
        "edge_roughness_amplitude": "q:length",
        "edge_roughness_corr_length": "q:length",
        "grain_mean_diameter": "q:length", "grain_k_sigma": "float",
        "rng_seed": "int",
    },
    "program": {
        "sample_every": "q:time",
        "current_model": "token:uniform_direction,channel_following",
        "pulse": "pulse",
    },
    "solver": {
        "scheme": "token:heun_stochastic,rk45_deterministic",
        "dt": "q:time", "tol": "float", "max_dm_per_step": "float",
        "temperature": "q:temperature", "seed": "int", "gamma": "float",
        "sot_layers": "token:bottom,both",
    },
    "readout": {
        "g_parallel": "q:conductance", "tmr": "float",
        "s_min": "q:length", "s_max": "q:length",
    },
    "output": {
        "directory": "str", "snapshot_stride": "int",
        "wall_observables": "bool",
    },
}

_REQUIRED = {
    "mesh": ("nx", "ny", "nz"),
    "geometry": ("kind",),
    "program": ("sample_every", "pulse"),
}

_GEOMETRY_REQUIRED = {
    "strip": ("length", "width"),
    "serpentine": ("n_segments", "segment_length", "width", "neck_width",
                   "taper_length", "u_turn_outer_radius"),
    "four_way": ("n_states", "width_wide", "width_narrow", "step_length",
                 "center_extent", "pinning_notch_depth",
                 "pinning_notch_length", "turn_sequence"),
}


def _suggest(name, candidates):
    close = difflib.get_close_matches(name, candidates, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _parse_number(tok, line_no, col):
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"expected a number, got {tok!r}", line_no, col)


def _parse_quantity(tokens, dim, line_no, col):
    """number [unit] with the unit's dimension checked against ``dim``."""
    val = _parse_number(tokens[0], line_no, col)
    if len(tokens) == 1:
        if val == 0.0:
            return 0.0
        raise ConfigError(
            f"missing unit; expected a {dim} unit such as "
            f"{_units_for(dim)}", line_no, col)
    if len(tokens) > 2:
        raise ConfigError(f"too many tokens in quantity {' '.join(tokens)!r}",
                          line_no, col)
    unit = tokens[1]
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r}"
                          + _suggest(unit, UNITS.keys()), line_no, col)
    udim, factor = UNITS[unit]
    if udim != dim:
        raise ConfigError(
            f"unit mismatch: {unit!r} is a {udim} unit, expected {dim} "
            f"({_units_for(dim)})", line_no, col)
    return val * factor


def _units_for(dim):
    return ", ".join(sorted(u for u, (d, _) in UNITS.items() if d == dim))


def _parse_value(kind, tokens, line_no, col):
    if kind == "int":
        v = _parse_number(tokens[0], line_no, col)
        if len(tokens) != 1 or v != int(v):
            raise ConfigError(f"expected an integer, got {' '.join(tokens)!r}",
                              line_no, col)
        return int(v)
    if kind == "float":
        if len(tokens) != 1:
            raise ConfigError("expected a bare number (no unit)",
                              line_no, col)
        return _parse_number(tokens[0], line_no, col)
    if kind == "bool":
        t = tokens[0].lower()
        if t in ("true", "yes", "on", "1"):
            return True
        if t in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"expected a boolean, got {tokens[0]!r}",
                          line_no, col)
    if kind.startswith("token:"):
        choices = kind[6:].split(",")
        if tokens[0] not in choices:
            raise ConfigError(
                f"invalid value {tokens[0]!r}; one of {choices}"
                + _suggest(tokens[0], choices), line_no, col)
        return tokens[0]
    if kind == "str":
        return " ".join(tokens)
    if kind.startswith("q:"):
        return _parse_quantity(tokens, kind[2:], line_no, col)
    if kind == "cell3":
        # three lengths: "2 nm 2 nm 0.6 nm" (or bare SI numbers)
        vals = []
        i = 0
        while i < len(tokens):
            pair = tokens[i:i + 2]
            if len(pair) == 2 and pair[1] in UNITS:
                vals.append(_parse_quantity(pair, "length", line_no, col))
                i += 2
            else:
                vals.append(_parse_number(tokens[i], line_no, col))
                i += 1
        if len(vals) != 3:
            raise ConfigError("cell needs exactly three lengths",
                              line_no, col)
        return tuple(vals)
    raise AssertionError(kind)


def _parse_pulse(tokens, line_no, col):
    """<direction> [<j> <unit>] <duration> <unit> [label]"""
    if not tokens:
        raise ConfigError("empty pulse line", line_no, col)
    d = tokens[0]
    if d not in _DIRECTION_TOKENS:
        raise ConfigError(f"unknown pulse direction {d!r}; one of "
                          f"{_DIRECTION_TOKENS}"
                          + _suggest(d, _DIRECTION_TOKENS), line_no, col)
    rest = tokens[1:]
    if d == "off":
        j0 = 0.0
    else:
        if len(rest) < 2:
            raise ConfigError("pulse needs a current density", line_no, col)
        j0 = _parse_quantity(rest[:2], "current_density", line_no, col)
        rest = rest[2:]
    if len(rest) < 2:
        raise ConfigError("pulse needs a duration", line_no, col)
    dur = _parse_quantity(rest[:2], "time", line_no, col)
    label = " ".join(rest[2:])
    return PulseSegment(direction=d, j0=j0, duration=dur, label=label)


def parse_config_text(text, name="<config>"):
    """Parse config text into an ExperimentConfig, validating everything."""
    sections = {}
    pulses = []
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = raw.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header",
                                  line_no, col)
            section = stripped[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]"
                    + _suggest(section, _SCHEMA.keys()), line_no, col)
            sections.setdefault(section, {})
            continue
        if section is None:
            raise ConfigError("key outside of any [section]", line_no, col)
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line_no, col)
        key, _, val = stripped.partition("=")
        key = key.strip()
        vcol = raw.index("=") + 2
        schema = _SCHEMA[section]
        if key not in schema:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]"
                + _suggest(key, schema.keys()), line_no, col)
        tokens = val.split()
        if not tokens:
            raise ConfigError(f"missing value for {key!r}", line_no, vcol)
        kind = schema[key]
        if kind == "pulse":
            pulses.append(_parse_pulse(tokens, line_no, vcol))
            continue
        if key in sections[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]",
                              line_no, col)
        sections[section][key] = _parse_value(kind, tokens, line_no, vcol)

    for sec, keys in _REQUIRED.items():
        if sec not in sections:
            raise ConfigError(f"missing required section [{sec}] in {name}")
        for k in keys:
            if k == "pulse":
                if not pulses:
                    raise ConfigError("program has no pulse lines")
                continue
            if k not in sections[sec]:
                raise ConfigError(f"missing required key {k!r} in [{sec}]")

    geo = sections["geometry"]
    kind = geo["kind"]
    for k in _GEOMETRY_REQUIRED[kind]:
        if k not in geo:
            raise ConfigError(f"geometry kind {kind!r} requires key {k!r}")
    extra = (set(geo) - {"kind", "seed_length"}
             - set(_GEOMETRY_REQUIRED[kind])
             - ({"taper_asymmetry"} if kind == "serpentine" else set())
             - ({"end_stub_length", "pinning_notch_offset"}
                if kind == "four_way" else set())
             - ({"taper_upstream"} if kind == "serpentine" else set()))
    if extra:
        raise ConfigError(
            f"keys {sorted(extra)} do not apply to geometry kind {kind!r}")

    mesh = MeshSection(
        nx=sections["mesh"]["nx"], ny=sections["mesh"]["ny"],
        nz=sections["mesh"]["nz"],
        cell=sections["mesh"].get("cell", DEFAULT_CELL))

    mat_sec = sections.get("material", {})
    overrides = tuple(sorted((k, v) for k, v in mat_sec.items()
                             if k != "preset"))
    material = MaterialSection(preset=mat_sec.get("preset", "sim2023"),
                               overrides=overrides)
    material.build()    # validates preset + overrides now

    geometry = GeometrySection(
        kind=kind, params=tuple(sorted((k, v) for k, v in geo.items()
                                       if k != "kind")))

    dsec = sections.get("defects", {})
    defects = DefectSpec(
        edge_roughness_amplitude=dsec.get("edge_roughness_amplitude", 0.0),
        edge_roughness_corr_length=dsec.get("edge_roughness_corr_length",
                                            10e-9),
        grain_mean_diameter=dsec.get("grain_mean_diameter", 0.0),
        grain_k_sigma=dsec.get("grain_k_sigma", 0.0),
        rng_seed=dsec.get("rng_seed", 0))

    psec = sections["program"]
    program = PulseProgram(
        segments=tuple(pulses),
        sample_every=psec["sample_every"],
        current_model=psec.get("current_model", "uniform_direction"))

    ssec = sections.get("solver", {})
    solver = SolverConfig(
        dt=ssec.get("dt", 50e-15),
        tol=ssec.get("tol", 1e-5),
        max_dm_per_step=ssec.get("max_dm_per_step", 0.2),
        scheme=ssec.get("scheme", "heun_stochastic"
                        if ssec.get("temperature", 0.0) > 0
                        else "rk45_deterministic"),
        gamma=ssec.get("gamma", SolverConfig().gamma),
        temperature=ssec.get("temperature", 0.0),
        rng_seed=ssec.get("seed", 0),
        sot_layers=ssec.get("sot_layers", "bottom"))

    rsec = sections.get("readout", {})
    s_range = None
    if "s_min" in rsec or "s_max" in rsec:
        if not ("s_min" in rsec and "s_max" in rsec):
            raise ConfigError("readout needs both s_min and s_max")
        s_range = (rsec["s_min"], rsec["s_max"])
    readout = ReadoutModel(
        g_parallel=rsec.get("g_parallel", 1e-3),
        tmr=rsec.get("tmr", 1.0), s_range=s_range)

    osec = sections.get("output", {})
    output = OutputSection(
        directory=osec.get("directory", "out"),
        snapshot_stride=osec.get("snapshot_stride", 0),
        wall_observables=osec.get("wall_observables", True))

    return ExperimentConfig(mesh=mesh, material=material, geometry=geometry,
                            program=program, solver=solver, defects=defects,
                            readout=readout, output=output)


def parse_config(path):
    with open(path) as f:
        text = f.read()
    return parse_config_text(text, name=str(path))


def _fmt_q(value, dim):
    """Value with its canonical SI unit token."""
    unit = {u: u for u, (d, f) in UNITS.items() if d == dim and f == 1.0}
    return f"{value!r} {next(iter(unit))}"


def effective_config_text(cfg):
    """Render a config that parses back into an equal ExperimentConfig."""
    L = []
    m = cfg.mesh
    L += ["[mesh]", f"nx = {m.nx}", f"ny = {m.ny}", f"nz = {m.nz}",
          f"cell = {m.cell[0]!r} m {m.cell[1]!r} m {m.cell[2]!r} m", ""]
    L += ["[material]", f"preset = {cfg.material.preset}"]
    dims = {"m_s": "A/m", "a_ex": "J/m", "k_u": "J/m3", "d_ex": "J/m2",
            "t_fm": "m", "j_rkky": "J/m2", "rho_hm": "ohm.m"}
    for k, v in cfg.material.overrides:
        unit = dims.get(k)
        if k in ("alpha", "theta_sh"):
            L.append(f"{k} = {v!r}")
        elif k == "demag_mode":
            L.append(f"{k} = {v}")
        else:
            L.append(f"{k} = {v!r} {unit}")
    L.append("")
    g = cfg.geometry
    L += ["[geometry]", f"kind = {g.kind}"]
    for k, v in g.params:
        if k in ("n_segments", "n_states"):
            L.append(f"{k} = {int(v)}")
        elif k == "turn_sequence":
            L.append(f"{k} = {v}")
        elif k == "taper_asymmetry":
            L.append(f"{k} = {v!r}")
        else:
            L.append(f"{k} = {v!r} m")
    L.append("")
    d = cfg.defects
    L += ["[defects]",
          f"edge_roughness_amplitude = {d.edge_roughness_amplitude!r} m",
          f"edge_roughness_corr_length = {d.edge_roughness_corr_length!r} m",
          f"grain_mean_diameter = {d.grain_mean_diameter!r} m",
          f"grain_k_sigma = {d.grain_k_sigma!r}",
          f"rng_seed = {d.rng_seed}", ""]
    p = cfg.program
    L += ["[program]", f"sample_every = {p.sample_every!r} s",
          f"current_model = {p.current_model}"]
    for seg in p.segments:
        if seg.direction == "off" or seg.j0 == 0.0:
            L.append(f"pulse = off {seg.duration!r} s {seg.label}".rstrip())
        else:
            L.append(f"pulse = {seg.direction} {seg.j0!r} A/m2 "
                     f"{seg.duration!r} s {seg.label}".rstrip())
    L.append("")
    s = cfg.solver
    L += ["[solver]", f"scheme = {s.scheme}", f"dt = {s.dt!r} s",
          f"tol = {s.tol!r}", f"max_dm_per_step = {s.max_dm_per_step!r}",
          f"temperature = {s.temperature!r} K", f"seed = {s.rng_seed}",
          f"gamma = {s.gamma!r}", f"sot_layers = {s.sot_layers}", ""]
    r = cfg.readout
    L += ["[readout]", f"g_parallel = {r.g_parallel!r} S",
          f"tmr = {r.tmr!r}"]
    if r.s_range is not None:
        L += [f"s_min = {r.s_range[0]!r} m", f"s_max = {r.s_range[1]!r} m"]
    L.append("")
    o = cfg.output
    L += ["[output]", f"directory = {o.directory}",
          f"snapshot_stride = {o.snapshot_stride}",
          f"wall_observables = {'true' if o.wall_observables else 'false'}",
          ""]
    return "\n".join(L)
