import numpy as np
import pytest

from perturbfem.geometry import (PerturbedDomain, boundary_radius,
                                 boundary_points, hausdorff_distance,
                                 hausdorff_between_point_sets,
                                 shifted_disk_errors, shifted_disk_lens_area,
                                 ellipse_map_diagnostics)

UPSILONS = [0.0, 0.0125, 0.025, 0.05, 0.1]


class TestPerturbedDomain:
    def test_validation(self):
        with pytest.raises(ValueError):
            PerturbedDomain(4)
        with pytest.raises(ValueError):
            PerturbedDomain(2, -0.1)
        with pytest.raises(ValueError):
            PerturbedDomain(2, 0.1, kind="banana")

    def test_immutable(self):
        d = PerturbedDomain(2, 0.1)
        with pytest.raises(Exception):
            d.upsilon = 0.2


class TestBoundaryRadius:
    def test_2d_formula(self):
        d = PerturbedDomain(2, 0.1)
        # sin(8 phi) = 1 at phi = pi/16
        assert boundary_radius(d, (np.pi / 16,)) == pytest.approx(
            1.0 - 0.02 + 0.1, abs=1e-15)
        assert boundary_radius(d, (0.0,)) == pytest.approx(0.98, abs=1e-15)

    def test_3d_formula(self):
        d = PerturbedDomain(3, 0.1)
        theta, phi = np.pi / 6, np.pi / 6   # sin(3*.) = 1 at both angles
        assert boundary_radius(d, (theta, phi)) == pytest.approx(
            1.0 - 0.02 + 0.1, abs=1e-15)

    def test_periodic(self):
        d = PerturbedDomain(2, 0.05)
        phi = np.linspace(0, 2 * np.pi, 17)
        np.testing.assert_allclose(boundary_radius(d, (phi,)),
                                   boundary_radius(d, (phi + 2 * np.pi,)),
                                   atol=1e-12)

    def test_unit_ball_kind(self):
        d = PerturbedDomain(2, 0.0, kind="unit_ball")
        assert boundary_radius(d, (1.234,)) == 1.0

    def test_arity_checked(self):
        with pytest.raises(ValueError):
            boundary_radius(PerturbedDomain(2), (0.1, 0.2))
        with pytest.raises(ValueError):
            boundary_radius(PerturbedDomain(3), (0.1,))


class TestHausdorff:
    def test_identical_domains(self):
        d = PerturbedDomain(2, 0.05)
        assert hausdorff_distance(d, d, 512) == 0.0

    def test_translated_circles(self):
        phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        a = np.column_stack([np.cos(phi), np.sin(phi)])
        b = a + np.array([0.05, 0.0])
        assert hausdorff_between_point_sets(a, b) == pytest.approx(0.05,
                                                                   rel=1e-3)

    def test_perturbed_vs_ball_2d(self):
        # max |rho - 1| = 1.2 * upsilon for the sin(8 phi) family
        d = hausdorff_distance(PerturbedDomain(2, 0.0),
                               PerturbedDomain(2, 0.1), 4096)
        assert 0.10 <= d <= 0.12 + 1e-9

    def test_perturbed_vs_ball_3d(self):
        d = hausdorff_distance(PerturbedDomain(3, 0.0),
                               PerturbedDomain(3, 0.1), 128)
        assert 0.08 <= d <= 0.12 + 1e-9

    def test_input_checks(self):
        with pytest.raises(ValueError):
            hausdorff_distance(PerturbedDomain(2), PerturbedDomain(3), 128)
        with pytest.raises(ValueError):
            hausdorff_distance(PerturbedDomain(2), PerturbedDomain(2), 32)

    def test_boundary_points_shapes(self):
        assert boundary_points(PerturbedDomain(2, 0.1), 100).shape == (100, 2)
        assert boundary_points(PerturbedDomain(3, 0.1), 10).shape == (100, 3)


class TestShiftedDisk:
    def test_validation(self):
        for bad in (0.0, 0.5, -0.1):
            with pytest.raises(ValueError):
                shifted_disk_errors(bad, 32)
        with pytest.raises(ValueError):
            shifted_disk_errors(0.1, 1)

    def test_asymptotics_small_upsilon(self):
        ups = 1e-3
        l2, h1 = shifted_disk_errors(ups, 64)
        assert 0.97 <= l2 / (np.sqrt(np.pi) * ups) <= 1.03
        assert 0.97 <= h1 / np.sqrt(8.0 * ups) <= 1.03

    def test_lens_h1_matches_linear_form(self):
        # on the lens the error gradient is constant (-2 ups, 0), so the
        # lens-restricted H1 error is 2 ups sqrt(lens area) -> 2 sqrt(pi) ups
        ups = 1e-2
        area = shifted_disk_lens_area(ups, 64)
        h1_lens = 2.0 * ups * np.sqrt(area)
        assert abs(h1_lens / (2.0 * np.sqrt(np.pi) * ups) - 1.0) < 0.05

    def test_lens_area_limit(self):
        assert shifted_disk_lens_area(1e-4, 32) == pytest.approx(np.pi,
                                                                 rel=1e-3)

    def test_quadrature_saturation(self):
        a = shifted_disk_errors(0.05, 32)
        b = shifted_disk_errors(0.05, 64)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        assert a[1] == pytest.approx(b[1], rel=1e-12)

    def test_against_grid_oracle(self):
        # independent midpoint-grid evaluation of the same integrals
        ups = 0.05
        n = 1500
        g = (np.arange(n) + 0.5) / n * 2.4 - 1.2
        X, Y = np.meshgrid(g, g, indexing="ij")
        cell = (2.4 / n) ** 2
        in_disk = X * X + Y * Y < 1.0
        in_shift = (X - ups) ** 2 + Y * Y < 1.0
        e = np.where(in_disk, 1.0 - X * X - Y * Y, 0.0) \
            - np.where(in_shift, 1.0 - (X - ups) ** 2 - Y * Y, 0.0)
        l2_ref = np.sqrt(np.sum(e[in_disk] ** 2) * cell)
        lens = in_disk & in_shift
        cres = in_disk & ~in_shift
        h1_ref = np.sqrt(4.0 * ups * ups * np.sum(lens) * cell
                         + np.sum(4.0 * (X[cres] ** 2 + Y[cres] ** 2)) * cell)
        l2, h1 = shifted_disk_errors(ups, 64)
        assert l2 == pytest.approx(l2_ref, rel=2e-2)
        assert h1 == pytest.approx(h1_ref, rel=2e-2)


class TestEllipseMap:
    def test_defect_closed_form(self):
        pts = np.array([[0.0, 0.0], [0.5, 0.3], [-0.7, 0.1]])
        for ups in UPSILONS:
            diag = ellipse_map_diagnostics(ups, pts)
            assert abs(diag.sup_norm_defect - (2 * ups + ups * ups)) <= 1e-12
            assert diag.jacobian_min == diag.jacobian_max == 1.0

    def test_example_value(self):
        diag = ellipse_map_diagnostics(0.1, np.zeros((1, 2)))
        assert diag.sup_norm_defect == pytest.approx(0.21, abs=1e-12)

    def test_input_checks(self):
        with pytest.raises(ValueError):
            ellipse_map_diagnostics(-0.1, np.zeros((1, 2)))
        with pytest.raises(ValueError):
            ellipse_map_diagnostics(0.1, np.array([[1.5, 0.0]]))
