import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdmimo.array import (ArrayConfig, ElementPattern, array_factor, array_response, build_array,
                          first_null, steering_vector, upa_weight)
from oracles import ula_gain


def iso(m, n, p=1, dv=0.5, dh=0.5):
    return build_array(ArrayConfig(m, n, p, dv, dh, element=ElementPattern("isotropic")))


class TestBuildArray:
    def test_benchmark_panel_size(self):
        g = build_array(ArrayConfig(8, 8, 2, 0.8, 0.5, 2e9))
        assert g.n_elements == 128
        h, w = g.bounding_box
        lam = 299_792_458.0 / 2e9
        assert h == pytest.approx(7 * 0.8 * lam)
        assert w == pytest.approx(7 * 0.5 * lam)
        assert h == pytest.approx(0.84, abs=0.01) and w == pytest.approx(0.52, abs=0.01)

    def test_single_element(self):
        g = build_array(ArrayConfig(1, 1, 1))
        assert g.n_elements == 1
        assert g.bounding_box == (0.0, 0.0)
        assert np.allclose(g.positions[0], 0.0)

    def test_default_count(self):
        assert build_array(ArrayConfig(8, 4, 2)).n_elements == 64

    def test_dual_pol_colocated(self):
        g = build_array(ArrayConfig(2, 3, 2))
        half = g.n_elements // 2
        assert np.allclose(g.positions[:half], g.positions[half:])
        assert set(g.slants_deg[:half]) == {45.0} and set(g.slants_deg[half:]) == {-45.0}
        assert g.polarization_mask(1).sum() == half

    @pytest.mark.parametrize("kw", [dict(m_vertical=0), dict(n_horizontal=0), dict(polarization=3),
                                    dict(dv=0.0), dict(dh=-1.0), dict(carrier_freq=0.0)])
    def test_rejects_bad_config(self, kw):
        with pytest.raises(ValueError):
            ArrayConfig(**kw)

    def test_dict_round_trip(self):
        cfg = ArrayConfig(4, 2, 2, 0.7, 0.6, 3.5e9)
        again = ArrayConfig.from_dict(cfg.to_dict())
        assert again == cfg

    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 2),
           st.floats(0.1, 2.0), st.floats(0.1, 2.0))
    def test_count_and_box(self, m, n, p, dv, dh):
        g = build_array(ArrayConfig(m, n, p, dv, dh))
        assert g.n_elements == m * n * p == len(g.elements)
        lam = g.config.wavelength
        assert g.bounding_box == pytest.approx(((m - 1) * dv * lam, (n - 1) * dh * lam))


class TestSteeringVector:
    def test_broadside_all_ones(self):
        assert np.allclose(steering_vector(0.0, 0.37, 4).entries, 1.0)

    def test_half_wavelength_endfire(self):
        assert np.allclose(steering_vector(1.0, 0.5, 2).entries, [1.0, -1.0])

    def test_dft_grid_orthogonal(self):
        n, gamma = 8, 0.5
        a = steering_vector(1 / (n * gamma), gamma, n).entries
        b = steering_vector(3 / (n * gamma), gamma, n).entries
        assert abs(np.vdot(a, b)) < 1e-12

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            steering_vector(0.1, 0.5, 0)

    @given(st.floats(-1, 1), st.floats(0.05, 4.0), st.integers(1, 32))
    def test_unit_modulus_and_formula(self, phi, gamma, n):
        sv = steering_vector(phi, gamma, n)
        assert np.allclose(np.abs(sv.entries), 1.0)
        assert np.vdot(sv.entries, sv.entries).real == pytest.approx(n)
        k = np.arange(n)
        assert np.allclose(sv.entries, np.exp(-2j * np.pi * k * gamma * phi))
        assert len(sv) == n and np.asarray(sv).shape == (n,)


class TestArrayFactor:
    def test_uniform_broadside_is_count(self):
        g = iso(2, 3, 2)
        assert abs(array_factor(g, np.ones(12), (0.0, 0.0))) == pytest.approx(12)
        assert abs(array_factor(g, np.ones(6), (0.0, 0.0))) == pytest.approx(6)

    def test_horizontal_null_at_30_deg(self):
        g = iso(1, 4)
        assert abs(array_factor(g, np.ones(4), (30.0, 0.0))) < 1e-9 * 4

    def test_matches_loop_oracle(self):
        g = iso(1, 5, dh=0.7)
        w = np.exp(1j * np.linspace(0, 2, 5))
        for a in (-70.0, -12.5, 0.0, 33.3, 81.0):
            assert array_factor(g, w, (a, 0.0)) == pytest.approx(ula_gain(5, 0.7, w, a), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            array_factor(iso(2, 2), np.ones(3), (0.0, 0.0))

    def test_parabolic_element_scales(self):
        cfg = ArrayConfig(1, 2, 1, element=ElementPattern("parabolic"))
        g = build_array(cfg)
        gain = 10 ** (cfg.element.gain_db(0.0, 0.0) / 20)
        assert abs(array_factor(g, np.ones(2), (0.0, 0.0))) == pytest.approx(2 * gain)

    @given(st.integers(1, 4), st.integers(1, 4), st.floats(-60, 60), st.floats(-60, 60))
    def test_matched_weight_peak(self, m, n, az, el):
        g = iso(m, n, 1, 0.8, 0.5)
        w = np.conj(array_response(g, az, el, single_pol=True))
        assert abs(array_factor(g, w, (az, el))) == pytest.approx(m * n, rel=1e-9)

    @given(st.integers(1, 4), st.integers(1, 4), st.floats(-80, 80), st.floats(-80, 80),
           st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                    min_size=16, max_size=16))
    def test_conjugate_symmetry(self, m, n, az, el, wl):
        g = iso(m, n)
        w = np.array(wl[: m * n])
        a = array_factor(g, w, (az, el))
        b = array_factor(g, np.conj(w), (-az, -el))
        assert b == pytest.approx(np.conj(a), abs=1e-9 * (1 + abs(a)))

    def test_upa_weight_peaks_at_target(self):
        g = iso(4, 4, 1, 0.8, 0.5)
        w = np.conj(upa_weight(4, 4, 0.8, 0.5, 20.0, -10.0))
        assert abs(array_factor(g, w, (20.0, -10.0))) == pytest.approx(16 / 4)


class TestFirstNull:
    def test_known_values(self):
        assert first_null(4, 0.5) == pytest.approx(30.0)
        assert first_null(8, 0.8) == pytest.approx(8.99, abs=0.005)
        assert first_null(2, 0.5) == pytest.approx(90.0)

    def test_no_null(self):
        with pytest.raises(ValueError):
            first_null(2, 0.49)

    @given(st.integers(2, 32), st.floats(0.3, 3.0))
    def test_null_is_zero(self, n, d):
        if n * d < 1.0:
            return
        ang = first_null(n, d)
        g = iso(1, n, dh=d)
        assert abs(array_factor(g, np.ones(n), (ang, 0.0))) < 1e-9 * n
        assert math.degrees(math.asin(1 / (n * d))) == pytest.approx(ang)
