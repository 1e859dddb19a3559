"""Domain construction: meshes, channel masks, defects, current maps."""

import numpy as np
import pytest
from scipy import ndimage
from shapely.geometry import Point
from shapely.ops import unary_union

from meanderdw import mesh as M
from meanderdw.errors import GeometryError, DefectError
from meanderdw import design as D

CELL = (2e-9, 2e-9, 0.6e-9)


def serp_spec(**kw):
    args = dict(n_segments=3, segment_length=400e-9, width=50e-9,
                neck_width=25e-9, taper_length=60e-9,
                u_turn_outer_radius=60e-9, seed_length=60e-9)
    args.update(kw)
    return M.serpentine_spec(**args)


class TestMesh:
    def test_film_extent(self):
        m = M.build_mesh(500, 250, 1, CELL)
        (xa, xb), (ya, yb) = m.extent
        assert xb - xa == pytest.approx(1000e-9)
        assert yb - ya == pytest.approx(500e-9)
        assert m.n_cells == 125000

    def test_single_cell(self):
        m = M.build_mesh(1, 1, 1, (2e-9, 2e-9, 2e-9))
        assert m.n_cells == 1
        assert m.cell_volume == pytest.approx(8e-27)

    def test_two_layer(self):
        m = M.build_mesh(64, 64, 2, CELL)
        assert m.n_cells == 8192

    def test_rejects_bad_dimensions(self):
        with pytest.raises(GeometryError):
            M.build_mesh(0, 5, 1, CELL)
        with pytest.raises(GeometryError):
            M.build_mesh(5, 5, 1, (2e-9, -1e-9, 2e-9))


class TestSerpentine:
    def test_counts(self):
        spec = serp_spec()
        mesh = M.mesh_for_serpentine(spec, CELL)
        mask = M.generate_serpentine(mesh, spec)
        assert len(mask.cusp_positions) == 2
        assert len(mask.latch_positions) == 2
        assert mask.n_states == 3

    def test_zero_segments_rejected(self):
        with pytest.raises(GeometryError):
            serp_spec(n_segments=0)

    def test_narrow_neck_rejected(self):
        spec = serp_spec(neck_width=5e-9, width=50e-9)
        mesh = M.mesh_for_serpentine(spec, CELL)
        with pytest.raises(GeometryError):
            M.generate_serpentine(mesh, spec)

    def test_too_small_mesh_rejected(self):
        spec = serp_spec()
        with pytest.raises(GeometryError):
            M.generate_serpentine(M.build_mesh(50, 50, 1, CELL), spec)

    def test_determinism(self):
        spec = serp_spec()
        mesh = M.mesh_for_serpentine(spec, CELL)
        a = M.generate_serpentine(mesh, spec)
        b = M.generate_serpentine(mesh, spec)
        assert np.array_equal(a.occupancy, b.occupancy)
        assert np.array_equal(a.region_id, b.region_id)

    def test_connected_and_regions(self):
        spec = serp_spec()
        mesh = M.mesh_for_serpentine(spec, CELL)
        mask = M.generate_serpentine(mesh, spec)
        fp = mask.layer_footprint()
        structure = [[0, 1, 0], [1, 1, 1], [0, 1, 0]]
        _, n = ndimage.label(fp, structure=np.array(structure))
        assert n == 1
        assert (mask.region_id == M.REGION_SEED).any()
        assert (mask.region_id == M.REGION_PINNING).any()

    def test_cusps_on_path(self):
        spec = serp_spec()
        mesh = M.mesh_for_serpentine(spec, CELL)
        mask = M.generate_serpentine(mesh, spec)
        for s in mask.cusp_positions:
            assert 0 <= s <= mask.path.length
            # the apex is a point of the widest channel
            assert mask.path.width_at(s) == pytest.approx(spec.width,
                                                          rel=1e-4)
        for s in mask.latch_positions:
            # neck minimum, up to the path sampling resolution
            assert mask.path.width_at(s) == pytest.approx(spec.neck_width,
                                                          rel=2e-3)

    def test_rasterization_against_disc_union_oracle(self):
        """Occupancy equals an independent point-in-union test."""
        spec = serp_spec(n_segments=2, segment_length=150e-9)
        mesh = M.mesh_for_serpentine(spec, CELL)
        mask = M.generate_serpentine(mesh, spec)
        path = mask.path
        discs = [Point(p[0], p[1]).buffer(w / 2, quad_segs=64)
                 for p, w in zip(path.points[::2], path.width[::2])]
        region = unary_union(discs)
        x, y = mesh.cell_centers_xy()
        xx, yy = np.meshgrid(x, y, indexing="ij")
        inside = np.array([region.covers(Point(px, py))
                           for px, py in zip(xx.ravel(), yy.ravel())])
        got = mask.layer_footprint().ravel()
        # the oracle samples every other pearl with polygonized discs, so
        # allow a one-boundary-cell band of disagreement
        diff = got != inside
        assert diff.sum() <= 0.02 * got.sum()
        # area agreement within one boundary-cell layer
        boundary_cells = np.count_nonzero(
            got.reshape(xx.shape) ^ ndimage.binary_erosion(
                got.reshape(xx.shape)))
        cell_area = mesh.cell_size[0] * mesh.cell_size[1]
        assert abs(got.sum() * cell_area - region.area) <= \
            boundary_cells * cell_area


class TestFourWay:
    def test_default_preset_counts(self):
        spec = M.four_way_spec(16, step_length=60e-9, center_extent=700e-9)
        mesh = M.mesh_for_four_way(spec, CELL)
        mask = M.generate_four_way(mesh, spec)
        assert len(mask.cusp_positions) == 15
        assert len(mask.state_positions) == 16
        assert spec.width_wide == 50e-9 and spec.width_narrow == 25e-9

    def test_minimal_device(self):
        spec = M.four_way_spec(2, step_length=100e-9, center_extent=500e-9)
        mesh = M.mesh_for_four_way(spec, CELL)
        mask = M.generate_four_way(mesh, spec)
        assert len(mask.cusp_positions) == 1
        assert len(mask.state_positions) == 2

    def test_barrier_matches_design_calc(self):
        spec = M.four_way_spec(4, step_length=100e-9, center_extent=500e-9)
        t, a_ex, k_an = 0.6e-9, 16e-12, 5.097e5
        dw = 2 * spec.pinning_notch_depth
        barrier = 4 * t * dw * np.sqrt(a_ex * k_an)
        assert barrier == pytest.approx(
            D.pinning_barrier(t, dw, a_ex, k_an, 1), rel=1e-12)

    def test_self_intersection_rejected(self):
        with pytest.raises(GeometryError):
            spec = M.four_way_spec(5, step_length=100e-9,
                                   center_extent=800e-9,
                                   turn_sequence="LLLL")
            mesh = M.build_mesh(400, 400, 2, CELL)
            M.generate_four_way(mesh, spec)

    def test_winding_fits_center_extent(self):
        spec = M.four_way_spec(4, step_length=100e-9, center_extent=220e-9)
        mesh = M.build_mesh(300, 300, 2, CELL)
        with pytest.raises(GeometryError):
            M.generate_four_way(mesh, spec)

    def test_layers_identical_in_plane(self):
        spec = M.four_way_spec(4, step_length=100e-9, center_extent=500e-9)
        mesh = M.mesh_for_four_way(spec, CELL, nz=2)
        mask = M.generate_four_way(mesh, spec)
        assert np.array_equal(mask.occupancy[:, :, 0], mask.occupancy[:, :, 1])
        assert mask.layer_roles == ("saf_bottom", "saf_top")

    def test_state_spacing(self):
        spec = M.four_way_spec(4, step_length=100e-9, center_extent=500e-9)
        mesh = M.mesh_for_four_way(spec, CELL)
        mask = M.generate_four_way(mesh, spec)
        gaps = np.diff(mask.state_positions)
        assert np.allclose(gaps, 100e-9, rtol=1e-9)


class TestDefects:
    def make(self):
        spec = serp_spec(n_segments=2, segment_length=200e-9)
        mesh = M.mesh_for_serpentine(spec, CELL)
        return M.generate_serpentine(mesh, spec)

    def test_zero_amplitudes_identity(self):
        mask = self.make()
        spec = M.DefectSpec()
        out_mask, k_map = M.apply_defects(mask, None, spec)
        assert out_mask is mask
        assert np.all(k_map == 1.0)

    def test_seed_determinism(self):
        mask = self.make()
        spec = M.DefectSpec(edge_roughness_amplitude=1.5e-9,
                            grain_mean_diameter=15e-9, grain_k_sigma=0.05,
                            rng_seed=99)
        m1, k1 = M.apply_defects(mask, None, spec)
        m2, k2 = M.apply_defects(mask, None, spec)
        assert np.array_equal(m1.occupancy, m2.occupancy)
        assert np.array_equal(k1, k2)

    def test_roughness_changes_edge_and_stays_connected(self):
        mask = self.make()
        spec = M.DefectSpec(edge_roughness_amplitude=2e-9,
                            edge_roughness_corr_length=12e-9, rng_seed=3)
        rough, _ = M.apply_defects(mask, None, spec)
        assert not np.array_equal(rough.occupancy, mask.occupancy)
        fp = rough.layer_footprint()
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        _, n = ndimage.label(fp, structure=structure)
        assert n == 1

    def test_grain_statistics(self):
        # mean per-grain factor over >= 1e4 grains within 3 sigma/sqrt(N)
        mesh = M.build_mesh(500, 500, 1, (2e-9, 2e-9, 0.6e-9))
        mask = M.full_film(mesh)
        sigma = 0.1
        spec = M.DefectSpec(grain_mean_diameter=8e-9, grain_k_sigma=sigma,
                            rng_seed=11)
        _, k_map = M.apply_defects(mask, None, spec)
        n_grains = (1000e-9 * 1000e-9) / (8e-9) ** 2
        assert n_grains >= 1e4
        mean = k_map.mean()   # cell-weighted mean of the grain factors
        assert abs(mean - 1.0) <= 4 * sigma / np.sqrt(n_grains)

    def test_severed_channel_raises_with_seed(self):
        mask = self.make()
        spec = M.DefectSpec(edge_roughness_amplitude=40e-9,
                            edge_roughness_corr_length=4e-9, rng_seed=7)
        with pytest.raises(DefectError) as err:
            M.apply_defects(mask, None, spec, max_retries=3)
        assert err.value.seed == 7


class TestCurrentMap:
    def make(self):
        spec = serp_spec(n_segments=2, segment_length=200e-9)
        mesh = M.mesh_for_serpentine(spec, CELL)
        return M.generate_serpentine(mesh, spec)

    def test_uniform(self):
        mask = self.make()
        cm = M.build_current_map(mask, "uniform_direction", (1, 0, 0), 2.5e11)
        assert np.allclose(cm.j, [2.5e11, 0, 0])

    def test_zero_density(self):
        mask = self.make()
        cm = M.build_current_map(mask, "uniform_direction", (0, 1, 0), 0.0)
        assert np.all(cm.j == 0.0)

    def test_continuity_scaling_at_neck(self):
        mask = self.make()
        g = mask.cell_graph()
        cm = M.build_current_map(mask, "channel_following", +1, 1e11)
        s_neck = mask.latch_positions[0]
        i = np.argmin(np.abs(g.s - s_neck) + np.abs(g.d))
        ratio = np.linalg.norm(cm.j[i]) / 1e11
        assert ratio == pytest.approx(50 / 25, rel=0.02)

    def test_out_of_plane_rejected(self):
        mask = self.make()
        with pytest.raises(ValueError):
            M.build_current_map(mask, "uniform_direction", (0, 0, 1), 1e10)

    def test_negative_density_rejected(self):
        mask = self.make()
        with pytest.raises(ValueError):
            M.build_current_map(mask, "uniform_direction", (1, 0, 0), -1e10)
