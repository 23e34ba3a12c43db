import numpy as np
import pytest

from perturbfem.analysis import (ErrorReport, exact_laplace, exact_stokes,
                                 analytic_problem, error_norms,
                                 divergence_norm, convergence_table,
                                 upsilon_scaling)
from perturbfem.fem import fe_space, interpolate
from perturbfem.geometry import PerturbedDomain
from perturbfem.meshgen import (coarse_mesh, refine_uniform,
                                elevate_to_isoparametric)


def disk_mesh(level, degree, upsilon=0.0):
    domain = PerturbedDomain(2, upsilon)
    mesh = coarse_mesh(domain)
    for _ in range(level):
        mesh = refine_uniform(mesh, domain)
    return elevate_to_isoparametric(mesh, domain, degree)


def fd_gradient(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        out[a] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


def fd_laplacian(fn, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    total = 0.0
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        total += (fn(x + e) - 2 * fn(x) + fn(x - e)) / h ** 2
    return total


class TestExactLaplace:
    def test_point_values(self):
        u0, g0, f0 = exact_laplace(2, [0.0, 0.0])
        assert u0 == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(g0, [0.0, 0.0], atol=1e-15)
        assert f0 == pytest.approx(np.pi ** 2 / 2.0, abs=1e-14)
        _, _, f_half = exact_laplace(2, [0.5, 0.0])
        assert f_half == pytest.approx(3.9660, abs=1e-3)

    def test_vanishes_on_unit_sphere(self):
        for dim in (2, 3):
            x = np.zeros(dim)
            x[0] = 1.0
            u, _, _ = exact_laplace(dim, x)
            assert abs(u) < 1e-15

    @pytest.mark.parametrize("dim", [2, 3])
    def test_gradient_consistent(self, dim):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, dim)
            _, grad, _ = exact_laplace(dim, x)
            fd = fd_gradient(lambda y: exact_laplace(dim, y)[0], x)
            np.testing.assert_allclose(grad, fd, atol=1e-8)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_forcing_is_negative_laplacian(self, dim):
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, dim)
            _, _, f = exact_laplace(dim, x)
            lap = fd_laplacian(lambda y: exact_laplace(dim, y)[0], x)
            assert f == pytest.approx(-lap, abs=1e-6)

    def test_origin_regular(self):
        # the sinc form keeps the removable singularity at r = 0 finite
        u, grad, f = exact_laplace(3, [0.0, 0.0, 0.0])
        assert np.isfinite(f) and np.all(np.isfinite(grad))
        assert f == pytest.approx(3.0 * np.pi ** 2 / 4.0, abs=1e-14)

    def test_batched_shapes(self):
        pts = np.zeros((4, 7, 2))
        u, grad, f = exact_laplace(2, pts)
        assert u.shape == (4, 7) and f.shape == (4, 7)
        assert grad.shape == (4, 7, 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            exact_laplace(4, [0.0, 0.0])
        with pytest.raises(ValueError):
            exact_laplace(2, [0.0, 0.0, 0.0])


class TestExactStokes:
    def test_vanishes_on_unit_circle(self):
        for phi in (0.0, 1.1, 2.7):
            u, _, _, _ = exact_stokes([np.cos(phi), np.sin(phi)])
            np.testing.assert_allclose(u, 0.0, atol=1e-14)

    def test_divergence_free(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.uniform(-0.6, 0.6, 2)
            _, grad, _, _ = exact_stokes(x)
            assert abs(grad[0, 0] + grad[1, 1]) < 1e-13

    def test_gradient_consistent(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            x = rng.uniform(-0.6, 0.6, 2)
            _, grad, _, _ = exact_stokes(x)
            for comp in range(2):
                fd = fd_gradient(lambda y: exact_stokes(y)[0][comp], x)
                np.testing.assert_allclose(grad[comp], fd, atol=1e-7)

    def test_momentum_balance(self):
        # f = -Laplace(u) + grad(p), checked by finite differences
        rng = np.random.default_rng(5)
        for _ in range(5):
            x = rng.uniform(-0.6, 0.6, 2)
            _, _, _, f = exact_stokes(x)
            grad_p = fd_gradient(lambda y: exact_stokes(y)[2], x)
            for comp in range(2):
                lap = fd_laplacian(lambda y: exact_stokes(y)[0][comp], x)
                assert f[comp] == pytest.approx(-lap + grad_p[comp],
                                                abs=1e-5)

    def test_pressure_mean_zero_on_disk(self):
        # polar midpoint rule over the unit disk
        n = 400
        r = (np.arange(n) + 0.5) / n
        phi = (np.arange(n) + 0.5) / n * 2 * np.pi
        R, P = np.meshgrid(r, phi, indexing="ij")
        pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1)
        _, _, p, _ = exact_stokes(pts.reshape(-1, 2))
        mean = np.sum(p * R.ravel()) * (1.0 / n) * (2 * np.pi / n) / np.pi
        assert abs(mean) < 1e-4


class TestAnalyticProblem:
    def test_lookup(self):
        for name, dim, ftype in (("laplace2d", 2, "scalar"),
                                 ("laplace3d", 3, "scalar"),
                                 ("stokes2d", 2, "velocity_pressure")):
            prob = analytic_problem(name)
            assert (prob.name, prob.dim, prob.field_type) == (name, dim,
                                                              ftype)
        assert analytic_problem("stokes2d").pressure is not None

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            analytic_problem("heat1d")


class TestErrorNorms:
    def test_zero_coefficients_give_solution_norm(self):
        # against the exact truncated L2 norm of u = cos(pi r / 2)
        mesh = disk_mesh(3, 2)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        report = error_norms(space, np.zeros(space.ndofs), prob,
                             truncation_radius=0.88, quad_order=6)
        # 2 pi int_0^0.88 cos^2(pi r/2) r dr, evaluated in closed form
        R = 0.88
        exact_sq = 2 * np.pi * (R ** 2 / 4.0
                                + R * np.sin(np.pi * R) / (2 * np.pi)
                                + (np.cos(np.pi * R) - 1) / (2 * np.pi ** 2))
        # the pointwise truncation indicator samples the cut circle at
        # quadrature resolution, so agreement is to O(h) of that ring
        assert report.l2_error == pytest.approx(np.sqrt(exact_sq), rel=1e-3)

    def test_interpolant_error_small(self):
        mesh = disk_mesh(3, 2)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        coeffs = interpolate(space, prob.solution)
        report = error_norms(space, coeffs, prob, 0.88, 6)
        assert report.l2_error < 1e-4
        assert report.h1_error < 1e-2
        assert report.h1_error == pytest.approx(
            np.hypot(report.l2_error, report.h1_semi_error), rel=1e-12)

    def test_truncation_radii_comparable(self):
        # truncating at 0.88 versus 1.0 changes the error by < factor 1.5
        mesh = disk_mesh(3, 1)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        coeffs = interpolate(space, prob.solution)
        a = error_norms(space, coeffs, prob, 0.88, 4)
        b = error_norms(space, coeffs, prob, 1.0, 4)
        assert 1.0 / 1.5 < a.l2_error / b.l2_error <= 1.0
        assert 1.0 / 1.5 < a.h1_error / b.h1_error <= 1.0

    def test_quadrature_saturation(self):
        # with the full domain (no indicator boundary moving between the
        # two rules) raising the quadrature order changes nothing visible
        mesh = disk_mesh(2, 2)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        coeffs = interpolate(space, prob.solution)
        a = error_norms(space, coeffs, prob, 1.0, 8)
        b = error_norms(space, coeffs, prob, 1.0, 10)
        assert abs(a.l2_error - b.l2_error) / b.l2_error < 1e-3
        assert abs(a.h1_error - b.h1_error) / b.h1_error < 1e-3

    def test_metadata_passthrough(self):
        mesh = disk_mesh(2, 1, upsilon=0.05)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        report = error_norms(space, np.zeros(space.ndofs), prob, 0.88, 4,
                             upsilon=0.05)
        assert report.level == 2 and report.degree == 1
        assert report.upsilon == 0.05
        assert report.ndofs == space.ndofs
        assert report.h_max == mesh.h_max
        assert report.pressure_l2 is None

    def test_validation(self):
        mesh = disk_mesh(1, 1)
        space = fe_space(mesh)
        prob = analytic_problem("laplace2d")
        with pytest.raises(ValueError):
            error_norms(space, np.zeros(space.ndofs), prob, 1.2, 4)
        with pytest.raises(ValueError):
            error_norms(space, np.zeros(3), prob, 0.88, 4)

    def test_stokes_interpolant(self):
        mesh = disk_mesh(3, 1)
        space = fe_space(mesh, "velocity_pressure")
        prob = analytic_problem("stokes2d")
        coeffs = interpolate(space, prob.solution, pressure=prob.pressure)
        report = error_norms(space, coeffs, prob, 0.88, 4,
                             include_pressure=True)
        assert report.l2_error < 2e-2
        assert report.pressure_l2 < 5e-2
        # the nodal interpolant of the velocity is not divergence free,
        # but its divergence is small on a fine mesh
        assert divergence_norm(space, coeffs, 0.88, 4) < 0.2

    def test_divergence_norm_rejects_scalar(self):
        space = fe_space(disk_mesh(1, 1))
        with pytest.raises(ValueError):
            divergence_norm(space, np.zeros(space.ndofs), 0.88, 4)


def fake_report(level, l2, h1, problem="laplace2d", degree=1, upsilon=0.0):
    return ErrorReport(l2_error=l2, h1_error=h1, h1_semi_error=h1,
                       truncation_radius=0.88, ndofs=10 * level,
                       h_max=2.0 ** -level, level=level, upsilon=upsilon,
                       degree=degree, problem=problem)


class TestConvergenceTable:
    def test_rate_arithmetic(self):
        rows = convergence_table([fake_report(1, 4.0, 2.0),
                                  fake_report(2, 1.0, 1.0),
                                  fake_report(3, 0.25, 0.5)])
        assert rows[0]["rate_l2"] is None and rows[0]["rate_h1"] is None
        assert rows[1]["rate_l2"] == pytest.approx(2.0, abs=1e-14)
        assert rows[1]["rate_h1"] == pytest.approx(1.0, abs=1e-14)
        assert rows[2]["rate_l2"] == pytest.approx(2.0, abs=1e-14)
        assert not any(r["plateau_l2"] or r["plateau_h1"] for r in rows)

    def test_plateau_flags(self):
        rows = convergence_table([fake_report(1, 1.0, 1.0),
                                  fake_report(2, 0.95, 0.4)])
        assert rows[1]["plateau_l2"] is True
        assert rows[1]["plateau_h1"] is False

    def test_rejects_mixed_groups(self):
        with pytest.raises(ValueError):
            convergence_table([fake_report(1, 1.0, 1.0),
                               fake_report(2, 0.5, 0.5, degree=2)])
        with pytest.raises(ValueError):
            convergence_table([fake_report(1, 1.0, 1.0),
                               fake_report(2, 0.5, 0.5, upsilon=0.1)])

    def test_rejects_bad_levels(self):
        with pytest.raises(ValueError):
            convergence_table([fake_report(2, 1.0, 1.0),
                               fake_report(2, 0.5, 0.5)])
        with pytest.raises(ValueError):
            convergence_table([])


class TestUpsilonScaling:
    def test_linear_family(self):
        ups = [0.0125, 0.025, 0.05, 0.1]
        slope = upsilon_scaling([(u, 3.7 * u) for u in ups])
        assert slope == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_family(self):
        ups = [0.0125, 0.025, 0.05, 0.1]
        slope = upsilon_scaling([(u, 0.2 * u * u) for u in ups])
        assert slope == pytest.approx(2.0, abs=1e-12)

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            upsilon_scaling([(0.0125, 1.0), (0.025, 2.0)])

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            upsilon_scaling([(0.0, 1.0), (0.025, 2.0), (0.05, 3.0)])
        with pytest.raises(ValueError):
            upsilon_scaling([(0.0125, -1.0), (0.025, 2.0), (0.05, 3.0)])
