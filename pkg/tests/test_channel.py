import numpy as np
import pytest
from scipy.integrate import quad

from rotantenna.channel import (Scenario, ScenarioTemplate, clamped_power, even_azimuths,
                                friis_gain, gain_pattern, isotropic_channel,
                                path_coefficients, peak_gain, sample_scenario,
                                synthesize_channel)
from rotantenna.geometry import make_upa, pointing_matrix, random_angles, zero_angles
from rotantenna.oracle import literal_channel


class TestGainPattern:
    @pytest.mark.parametrize("p", [0, 1, 2, 4, 8])
    def test_power_conservation(self, p):
        # integral of the pattern over the sphere equals 4 pi
        val, _ = quad(lambda e: float(gain_pattern(e, p)) * np.sin(e), 0.0, np.pi / 2)
        assert 2 * np.pi * val == pytest.approx(4 * np.pi, rel=1e-10)

    def test_peak(self):
        assert gain_pattern(0.0, 4) == peak_gain(4) == 18.0

    def test_rear_hemisphere_zero(self):
        assert gain_pattern(np.pi / 2, 2) == 0.0
        assert gain_pattern(2.0, 0) == 0.0

    def test_rejects_negative_angle(self):
        with pytest.raises(ValueError):
            gain_pattern(-0.1, 1)

    def test_friis(self):
        assert friis_gain(0.125, 10.0, 0.0, 0) == pytest.approx(2 * (0.125 / (40 * np.pi)) ** 2)

    def test_clamped_power(self):
        np.testing.assert_array_equal(clamped_power([-0.5, 0.0, 0.5], 0), [0.0, 0.0, 1.0])
        np.testing.assert_allclose(clamped_power([-0.5, 0.5], 3), [0.0, 0.125])


class TestScenario:
    def test_even_azimuths(self):
        np.testing.assert_allclose(even_azimuths(2), [-np.pi / 4, np.pi / 4])
        np.testing.assert_allclose(even_azimuths(1), [0.0])

    def test_sample_shapes(self):
        s = sample_scenario(ScenarioTemplate(4, 3, 50.0, 60.0), 7)
        assert s.user_positions.shape == (4, 3)
        assert s.scatterer_positions.shape == (3, 3)
        np.testing.assert_allclose(np.linalg.norm(s.user_positions, axis=1), 50.0)
        assert np.all(np.linalg.norm(s.scatterer_positions, axis=1) <= 50.0)
        assert np.all(s.scatterer_positions[:, 0] >= 0)
        assert np.all((s.phases >= -np.pi) & (s.phases < np.pi))
        np.testing.assert_allclose(s.transmit_snr, 1e6)

    def test_seed_reproducible(self):
        t = ScenarioTemplate(2, 3)
        a, b = sample_scenario(t, 5), sample_scenario(t, 5)
        np.testing.assert_array_equal(a.scatterer_positions, b.scatterer_positions)
        c = sample_scenario(t, 6)
        assert not np.array_equal(a.scatterer_positions, c.scatterer_positions)

    def test_scatterers_independent_of_user_count(self):
        a = sample_scenario(ScenarioTemplate(2, 3), 1)
        b = sample_scenario(ScenarioTemplate(6, 3), 1)
        np.testing.assert_array_equal(a.scatterer_positions, b.scatterer_positions)

    def test_rejects_nonpositive_snr(self):
        with pytest.raises(ValueError):
            Scenario([[10.0, 0, 0]], 0.0)

    def test_rejects_bad_template(self):
        with pytest.raises(ValueError):
            ScenarioTemplate(2, user_azimuths=(0.1,))


class TestSynthesis:
    def test_matches_literal_with_scatterers(self, rng):
        g = make_upa(3, 3)
        s = sample_scenario(ScenarioTemplate(3, 3), 2)
        ang = random_angles(9, g.theta_max, rng)
        H = synthesize_channel(path_coefficients(g, s), pointing_matrix(ang))
        np.testing.assert_allclose(H, literal_channel(g, s, ang), rtol=1e-12)

    def test_single_element_los_value(self):
        g = make_upa(1, 1)
        s = Scenario([[50.0, 0, 0]], 1.0)
        H = synthesize_channel(path_coefficients(g, s), pointing_matrix(zero_angles(1)))
        expected = 0.125 * np.sqrt(18.0) / (4 * np.pi * 50) * np.exp(-2j * np.pi * 50 / 0.125)
        assert H[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_rear_path_is_zero(self):
        g = make_upa(1, 1)
        s = Scenario([[-20.0, 0, 0]], 1.0)
        H = synthesize_channel(path_coefficients(g, s), pointing_matrix(zero_angles(1)))
        assert H[0, 0] == 0

    def test_rejects_non_unit_rows(self):
        g = make_upa(1, 1)
        coef = path_coefficients(g, Scenario([[50.0, 0, 0]], 1.0))
        with pytest.raises(ValueError):
            synthesize_channel(coef, [[2.0, 0, 0]])

    def test_isotropic_magnitude(self):
        g = make_upa(1, 1)
        s = Scenario([[0.0, 30.0, 40.0]], 1.0)
        H = isotropic_channel(path_coefficients(g, s))
        assert abs(H[0, 0]) == pytest.approx(0.125 / (4 * np.pi * 50))
