"""Stability functions, critical steps, Jacobians, classification.

Frozen expected values (40-digit offline evaluation, see
scripts/gen_oracle_values.py):

    (5 - sqrt(3))/11                  = 0.29708629022101115513
    critical dt, geco2 on the 5x5    = 0.35714708771109939771
    certificate of the 5x5: M        = 0.29708629022101115513, product = 5.9417258
    geco2 value at (-2.404688, 7.144) = -1.000295602965406927
    region endpoint z*                = -3.92235950274307894119
    w(a=b=c=1, y=(2,1), dt=1)         = (0.27067056647322538379, -...)
"""

import math

import numpy as np
import numpy.testing as npt
import pytest

from posinv import stability
from posinv.errors import NumericsError
from posinv.integrators import make_scheme, phi, step_map
from posinv.pds import LinearPds, resolve_builtin, steady_state_for

from test_linalg import FIVE, two_by_two

BBKS_DT = 0.29708629022101115513
GECO2_DT = 0.35714708771109939771
Z_STAR = -3.92235950274307894119
W_21 = 0.27067056647322538379

MODEL_5X5 = LinearPds.from_matrix(FIVE)
UNIT_2X2 = LinearPds.from_matrix(two_by_two(1, 1, 1))
NONSTANDARD = ("geco1", "geco2", "gbbks1", "gbbks2")


class TestStabilityValue:
    def test_first_order_boundary(self):
        assert stability.stability_value("gbbks1", -2.0) == pytest.approx(-1.0)
        assert stability.stability_value("euler", -2.0) == pytest.approx(-1.0)

    def test_second_order_boundary(self):
        assert stability.stability_value("gbbks2", -2.0) == pytest.approx(1.0)
        assert stability.stability_value("heun", -2.0) == pytest.approx(1.0)

    def test_geco2_near_critical(self):
        got = stability.stability_value("geco2", -2.404688, 7.144)
        npt.assert_allclose(got.real, -1.000295602965406927, rtol=1e-13)
        assert got.imag == 0.0

    def test_geco1_uses_damped_argument(self):
        z = complex(-1.0, 0.5)
        want = 1.0 + z * phi(3.0)
        assert stability.stability_value("geco1", z, 3.0) == want

    def test_accepts_scheme_spec(self):
        spec = make_scheme("gbbks2")
        assert stability.stability_value(spec, -1.0) == pytest.approx(0.5)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            stability.stability_value("rk4", -1.0)


class TestCriticalStep:
    @pytest.mark.parametrize("name", ["gbbks1", "gbbks2"])
    def test_product_term_schemes_on_5x5(self, name):
        crit = stability.critical_step(MODEL_5X5, make_scheme(name))
        assert not crit.unconditional
        assert crit.dt_star == pytest.approx(BBKS_DT, abs=1e-8)
        assert crit.binding_eigenvalue.real == pytest.approx(-5.0 - math.sqrt(3.0), abs=1e-8)

    def test_geco2_on_5x5(self):
        crit = stability.critical_step(MODEL_5X5, make_scheme("geco2"))
        assert crit.dt_star == pytest.approx(GECO2_DT, abs=1e-8)

    def test_geco1_unconditional(self):
        crit = stability.critical_step(MODEL_5X5, make_scheme("geco1"))
        assert crit.unconditional
        assert str(crit) == "unconditional"

    def test_boundary_consistency(self):
        """|stability value| at dt* and the binding eigenvalue equals 1 to 1e-8."""
        for name in ("gbbks1", "gbbks2", "geco2", "euler", "heun"):
            crit = stability.critical_step(MODEL_5X5, make_scheme(name))
            value = stability.stability_value(
                name, crit.dt_star * crit.binding_eigenvalue,
                crit.dt_star * MODEL_5X5.trace_s_minus,
            )
            assert abs(value) == pytest.approx(1.0, abs=1e-8)


class TestCertificate:
    def test_five_by_five(self):
        cert = stability.unconditional_certificate(MODEL_5X5)
        # min{2*6.7321/45.3205, 2*3.2679/10.6795, 10/26} = 2/(5+sqrt(3))
        assert cert.m_value == pytest.approx(BBKS_DT, abs=1e-12)
        assert cert.product == pytest.approx(20.0 * BBKS_DT, abs=1e-10)
        assert cert.holds

    def test_two_by_two_unit(self):
        cert = stability.unconditional_certificate(UNIT_2X2)
        assert cert.m_value == pytest.approx(1.0, abs=1e-12)
        assert cert.product == pytest.approx(2.0, abs=1e-12)

    def test_single_decay_mode(self):
        model = LinearPds.from_matrix(np.array([[-3.0, 0.0], [0.0, 0.0]]))
        cert = stability.unconditional_certificate(model)
        assert cert.m_value == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert cert.product == pytest.approx(2.0, abs=1e-12)


class TestJacobians:
    @pytest.mark.parametrize("name", NONSTANDARD)
    @pytest.mark.parametrize("model,y0,dt", [
        (UNIT_2X2, np.array([2.0, 1.0]), 1.0),
        # probe the 5x5 inside the stable range of all four schemes
        (MODEL_5X5, np.array([0.0, 3.0, 3.0, 3.0, 4.0]), 0.25),
    ])
    def test_finite_difference_matches_closed_form(self, name, model, y0, dt):
        """Probe accuracy is O(h) only: the maps are C^1 with Lipschitz slopes."""
        y_star = steady_state_for(model, y0)
        scheme = make_scheme(name)
        closed = stability.closed_form_jacobian(model, scheme, dt)
        probed = stability.numerical_jacobian(step_map(model, scheme, dt), y_star, h=1e-6)
        assert np.max(np.abs(probed - closed)) <= 1e-4

    def test_geco1_closed_form_value(self):
        # I + Phi(1) A with Phi(1) = (1 - exp(-2))/2 on the unit 2x2
        want = np.eye(2) + 0.43233235838169365405 * UNIT_2X2.a
        npt.assert_allclose(
            stability.closed_form_jacobian(UNIT_2X2, "geco1", 1.0), want, rtol=1e-14
        )

    @pytest.mark.parametrize("name", NONSTANDARD + ("euler", "heun"))
    def test_kernel_vectors_are_eigenvectors(self, name):
        """Jacobian times a kernel vector reproduces it to 1e-10."""
        for model in (UNIT_2X2, MODEL_5X5):
            jac = stability.closed_form_jacobian(model, name, 0.7)
            for v in model.kernel_basis:
                npt.assert_allclose(jac @ v, v, atol=1e-10)

    def test_probe_failure_is_explicit(self):
        def broken(y):
            return np.full_like(y, np.nan)

        with pytest.raises(NumericsError):
            stability.numerical_jacobian(broken, np.ones(2))


class TestClassifyFixedPoint:
    Y_STAR_5 = np.array([4.0, 2.0, 2.0, 4.0, 1.0])

    def test_geco1_stable_at_unit_step(self):
        report = stability.classify_fixed_point(MODEL_5X5, make_scheme("geco1"), self.Y_STAR_5, 1.0)
        assert report.verdict == "stable"
        assert report.kernel_count == 1
        assert report.non_kernel_radius < 1.0

    def test_geco2_unstable_past_critical(self):
        report = stability.classify_fixed_point(
            MODEL_5X5, make_scheme("geco2"), self.Y_STAR_5, 0.3576
        )
        assert report.verdict == "unstable"

    def test_gbbks1_stable_below_critical(self):
        report = stability.classify_fixed_point(
            MODEL_5X5, make_scheme("gbbks1"), self.Y_STAR_5, 0.2968
        )
        assert report.verdict == "stable"

    @pytest.mark.parametrize("name", ["geco2", "gbbks1", "gbbks2"])
    def test_verdict_flips_across_critical_step(self, name):
        scheme = make_scheme(name)
        crit = stability.critical_step(MODEL_5X5, scheme)
        below = stability.classify_fixed_point(
            MODEL_5X5, scheme, self.Y_STAR_5, crit.dt_star * (1 - 1e-3)
        )
        above = stability.classify_fixed_point(
            MODEL_5X5, scheme, self.Y_STAR_5, crit.dt_star * (1 + 1e-3)
        )
        assert below.verdict == "stable"
        assert above.verdict == "unstable"

    def test_exactly_critical_step_is_inconclusive(self):
        """On the tolerance band around the unit circle no verdict is guessed."""
        crit = stability.critical_step(MODEL_5X5, make_scheme("gbbks1"))
        report = stability.classify_fixed_point(
            MODEL_5X5, make_scheme("gbbks1"), self.Y_STAR_5, crit.dt_star
        )
        assert report.verdict == "inconclusive"

    def test_rejects_non_steady_state(self):
        with pytest.raises(ValueError):
            stability.classify_fixed_point(MODEL_5X5, "geco1", np.ones(5), 1.0)
        with pytest.raises(ValueError):
            stability.classify_fixed_point(MODEL_5X5, "geco1", -self.Y_STAR_5, 1.0)


class TestRegionEndpoint:
    def test_endpoint_and_residuals(self):
        out = stability.geco2_region_endpoint()
        assert out.z_star == pytest.approx(Z_STAR, abs=1e-9)
        assert out.stability_residual <= 1e-10
        assert abs(out.reduced_equation_residual) <= 1e-8

    def test_reported_bracket_is_flagged(self):
        out = stability.geco2_region_endpoint()
        assert out.reported_bracket == (-3.9924, -3.9923)
        assert not out.agrees_with_reported

    def test_interior_values(self):
        # R(0) = 1 and R(-2) = -exp(-2)/... = -0.13533528 (well inside the region)
        assert stability.stability_value("geco2", 0.0, 0.0) == pytest.approx(1.0)
        r2 = stability.stability_value("geco2", -2.0, 2.0)
        npt.assert_allclose(r2.real, -0.13533528323661269189, rtol=1e-13)


class TestW:
    def test_worked_example(self):
        got = stability.geco2_w(1, 1, 1, np.array([2.0, 1.0]), 1.0)
        npt.assert_allclose(got, [W_21, -W_21], rtol=1e-13)

    def test_kernel_gives_zero(self):
        got = stability.geco2_w(2, 1, 0.5, np.array([1.0, 2.0]), 0.7)
        npt.assert_allclose(got, [0.0, 0.0], atol=1e-14)

    def test_antisymmetry_and_sign_sample(self):
        """w is proportional to (1, -1/c): w_1 + c*w_2 = 0, sign from the kernel gap."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            a, b, c = rng.uniform(0.1, 10.0, 3)
            dt = rng.uniform(0.01, 10.0)
            y = rng.uniform(0.01, 10.0, 2)
            w = stability.geco2_w(a, b, c, y, dt)
            # near the kernel the components cancel, so compare against the
            # evaluation scale as well as the component scale
            norm_a = max(a * c + b * c, a + b)
            eval_scale = (2.0 + dt * phi(dt * (a * c + b)) * norm_a) * norm_a * max(y)
            assert abs(w[0] + c * w[1]) <= 1e-12 * max(abs(w[0]), abs(c * w[1]), eval_scale)
            gap = y[0] - (b / a) * y[1]
            if abs(gap) > 1e-12 * max(y[0], 1.0):
                assert np.sign(w[0]) == np.sign(gap)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            stability.geco2_w(0, 1, 1, np.ones(2), 1.0)
        with pytest.raises(ValueError):
            stability.geco2_w(1, 1, 1, np.ones(2), 0.0)


class TestRandomSystems:
    def test_deterministic_per_seed(self):
        a = stability.random_conservative_system(7, 5).a
        b = stability.random_conservative_system(7, 5).a
        npt.assert_array_equal(a, b)

    def test_structural_flags(self):
        from posinv.linalg import validate_system

        for seed in range(10):
            model = stability.random_conservative_system(seed, 2 + seed % 7)
            npt.assert_allclose(model.a.sum(axis=0), 0.0, atol=1e-12)
            assert validate_system(model.a).admissible

    def test_rejects_small_dimension(self):
        with pytest.raises(ValueError):
            stability.random_conservative_system(0, 1)
