import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdmimo.feedback import (CO_PHASES, BeamSet, Codebook, LongTermReport, adaptive_feedback_step,
                             build_dft_codebook, compute_cqi, cqi_efficiency, cqi_index, cqi_table,
                             dual_pol_codebook, feedback_bits, kronecker_codebook, long_term_pmi,
                             make_report, pilot_budget, pilot_overhead_fraction, select_beam,
                             select_co_phase, select_pmi, steering_codebook, vertical_beam_set,
                             write_feedback_csv)
from oracles import brute_co_phase, brute_pmi, exhaustive_kron


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestCodebooks:
    def test_trivial(self):
        cb = build_dft_codebook(1)
        assert len(cb) == 1 and np.allclose(cb.codewords, [[1.0]]) and cb.bits == 0

    def test_two_point(self):
        cb = build_dft_codebook(2)
        assert np.allclose(cb.codewords, np.array([[1, 1], [1, -1]]) / np.sqrt(2))

    def test_oversampled_adjacent_overlap(self):
        cb = build_dft_codebook(4, 2)
        assert len(cb) == 8
        adj = abs(np.vdot(cb.codewords[0], cb.codewords[1]))
        ortho = abs(np.vdot(cb.codewords[0], cb.codewords[2]))
        assert adj > ortho
        assert ortho == pytest.approx(0.0, abs=1e-12)

    def test_kronecker_size(self):
        cb = kronecker_codebook(build_dft_codebook(4), build_dft_codebook(8, 2))
        assert len(cb) == 64 and cb.bits == 6
        assert np.allclose(np.linalg.norm(cb.codewords, axis=1), 1.0)
        assert cb.split_index(13) == (0, 13) and cb.split_index(17) == (1, 1)

    def test_kronecker_structure(self):
        v, h = build_dft_codebook(2), build_dft_codebook(3)
        cb = kronecker_codebook(v, h)
        assert np.allclose(cb.codewords[1 * 3 + 2], np.kron(v.codewords[1], h.codewords[2]))

    def test_flat_has_no_split(self):
        with pytest.raises(ValueError):
            build_dft_codebook(2).split_index(0)

    def test_reject_non_unit(self):
        with pytest.raises(ValueError):
            Codebook(np.ones((2, 2)))
        with pytest.raises(ValueError):
            Codebook(np.zeros((0, 2)))

    def test_dual_pol_index_layout(self):
        cb = dual_pol_codebook(build_dft_codebook(2))
        assert len(cb) == 8
        assert np.allclose(cb.codewords[5], np.concatenate([cb.codewords[4][:2], 1j * cb.codewords[4][:2]]))

    def test_steering_codebook_unit(self):
        cb = steering_codebook(4, 0.8, [0.0, 0.1, -0.2])
        assert np.allclose(np.linalg.norm(cb.codewords, axis=1), 1)


class TestSelection:
    def test_self_selection(self):
        cb = build_dft_codebook(8, 2)
        i, g = select_pmi(cb.codewords[3], cb)
        assert i == 3 and g == pytest.approx(1.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            select_pmi(np.zeros(4), build_dft_codebook(4))

    @given(st.integers(0, 2**31), st.integers(1, 2))
    def test_matches_oracle(self, seed, n_rx):
        rng = np.random.default_rng(seed)
        cb = build_dft_codebook(8, 2)
        h = rand_c(rng, 8, n_rx).squeeze()
        assert select_pmi(h, cb)[0] == brute_pmi(h, cb.codewords)

    @given(st.integers(0, 2**31), st.floats(1e-3, 1e3), st.floats(0, 2 * math.pi))
    def test_scale_phase_invariant(self, seed, a, phase):
        rng = np.random.default_rng(seed)
        cb = kronecker_codebook(build_dft_codebook(2), build_dft_codebook(4, 2))
        h = rand_c(rng, 8)
        assert select_pmi(a * np.exp(1j * phase) * h, cb)[0] == select_pmi(h, cb)[0]
        bs = BeamSet(cb.codewords[:5])
        assert select_beam(a * np.exp(1j * phase) * h, bs)[0] == select_beam(h, bs)[0]

    @given(st.integers(0, 3), st.integers(0, 7), st.integers(0, 2**31))
    def test_kronecker_joint_search(self, iv, ih, seed):
        v, h = build_dft_codebook(4), build_dft_codebook(4, 2)
        cb = kronecker_codebook(v, h)
        ch = np.kron(v.codewords[iv], h.codewords[ih]) * np.exp(1j * (seed % 7))
        i, _ = select_pmi(ch, cb)
        assert cb.split_index(i) == (iv, ih)
        assert exhaustive_kron(ch, v.codewords, h.codewords) == (iv, ih)

    def test_single_path_beam(self):
        bs = BeamSet(build_dft_codebook(8).codewords)
        # column direction h_bar = (row channel)^H; a row e_t^* gives h_bar = e_t
        h = bs.beams[2]
        assert select_beam(h, bs)[0] == 2

    def test_single_beam(self):
        bs = BeamSet(np.ones((1, 4)))
        assert select_beam(rand_c(np.random.default_rng(0), 4), bs)[0] == 0
        assert bs.bits == 0

    @given(st.integers(0, 2**31))
    def test_beam_oracle(self, seed):
        rng = np.random.default_rng(seed)
        bs = BeamSet(rand_c(rng, 4, 6))
        h = rand_c(rng, 6)
        assert select_beam(h, bs)[0] == brute_pmi(h, bs.beams)

    def test_ties_lowest(self):
        cb = Codebook(np.array([[1, 0], [1, 0], [0, 1]], dtype=complex))
        assert select_pmi(np.array([1, 0]), cb)[0] == 0


class TestCoPhase:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.h1 = rand_c(rng, 4)
        self.v = rand_c(rng, 4)

    def test_quadrature(self):
        assert select_co_phase(np.concatenate([self.h1, 1j * self.h1]), self.v) == 1j

    def test_identical(self):
        assert select_co_phase(np.concatenate([self.h1, self.h1]), self.v) == 1

    def test_opposite(self):
        assert select_co_phase(np.concatenate([self.h1, -self.h1]), self.v) == -1

    def test_zero(self):
        with pytest.raises(ValueError):
            select_co_phase(np.zeros(8), self.v)

    @given(st.integers(0, 2**31))
    def test_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, v = rand_c(rng, 8), rand_c(rng, 4)
        assert select_co_phase(h, v) == brute_co_phase(h[:4], h[4:], v)
        assert select_co_phase(h, v) in CO_PHASES


class TestCqi:
    def test_zero(self):
        r = compute_cqi(-np.inf)
        assert r.efficiency == 0.0 and r.index == 0

    def test_ten_db(self):
        r = compute_cqi(10.0)
        assert r.efficiency == pytest.approx(math.log2(11), abs=1e-12)
        assert r.efficiency == pytest.approx(3.459, abs=1e-3)
        assert r.quantized_efficiency <= r.efficiency

    def test_cap(self):
        r = compute_cqi(80.0)
        assert r.efficiency == 6.0 and r.index == 15 and r.quantized_efficiency == 6.0

    def test_table(self):
        t = cqi_table()
        assert len(t) == 16 and t[0] == 0 and t[-1] == 6.0
        assert np.all(np.diff(t) > 0)

    @given(st.floats(0.0, 10.0))
    def test_quantizer_floor(self, eff):
        i = cqi_index(eff)
        q = cqi_efficiency(i)
        assert 0 <= i <= 15
        assert q <= min(eff, 6.0) + 1e-12
        if i < 15:
            assert cqi_table()[i + 1] > min(eff, 6.0)


class TestOverhead:
    def test_class_b(self):
        assert feedback_bits("B", 64, n_b=4) == 2
        assert feedback_bits("B", 64, n_b=4, rank=2) == 4

    def test_class_a(self):
        assert feedback_bits("A", 16, snr_db=10.0) == 50
        assert feedback_bits("A", 1) == 0

    @given(st.integers(1, 256), st.floats(0.5, 30.0))
    def test_class_a_formula(self, nt, snr):
        from fractions import Fraction
        assert feedback_bits("A", nt, snr_db=snr) == math.ceil(Fraction(nt - 1) * Fraction(snr) / 3)

    def test_bad_class(self):
        with pytest.raises(ValueError):
            feedback_bits("C", 4)
        with pytest.raises(ValueError):
            feedback_bits("A", 0)

    def test_pilot_fraction(self):
        assert pilot_overhead_fraction("NonPrecoded", 64) == pytest.approx(0.476, abs=0.0005)
        assert pilot_overhead_fraction("Beamformed", 12) == pytest.approx(28 / 168)
        assert pilot_overhead_fraction("NonPrecoded", 0) == pytest.approx(16 / 168)
        assert pilot_overhead_fraction("NonPrecoded", 1000) < 1.0
        with pytest.raises(ValueError):
            pilot_overhead_fraction("Other", 4)

    @given(st.integers(0, 70), st.integers(0, 70))
    def test_affine(self, a, b):
        f = lambda n: pilot_overhead_fraction("NonPrecoded", n)  # noqa: E731
        assert f(a) + f(b) == pytest.approx(f(a + b) + f(0))

    def test_pilot_budget(self):
        b = pilot_budget("NonPrecoded", 32, 4, total_power=2.0)
        assert b.resources == 32 and b.per_pilot_power == pytest.approx(2 / 32)
        b = pilot_budget("Beamformed", 32, 4, total_power=2.0)
        assert b.resources == 4 and b.per_pilot_power == pytest.approx(0.5)


class TestReports:
    def test_bit_cost(self):
        r = make_report("B", 2, 3, [7, 9], index_bits=2, co_phase=1j)
        assert r.bit_cost == sum(r.component_bits.values()) == 1 + 2 + 2 + 8
        r = make_report("A", 1, 3, [7], index_bits=6)
        assert r.component_bits == {"ri": 1, "pmi": 6, "co_phase": 0, "cqi": 4}

    def test_negative_age(self):
        with pytest.raises(ValueError):
            make_report("A", 1, 0, [1], 2, age=-1)

    def test_trace_csv(self, tmp_path):
        p = tmp_path / "fb.csv"
        write_feedback_csv(p, [(5, 0, 3, make_report("B", 1, 2, [11], 2))])
        lines = open(p).read().splitlines()
        assert lines[0] == "subframe,cell,ue,class,rank,index,co_phase,cqi,bits"
        assert lines[1].split(",")[-1] == "7"


class TestAdaptive:
    DEFAULT = [-26.25, -18.75, -11.25, -3.75]

    def test_fallback(self):
        bs, rep = adaptive_feedback_step(None, None, np.ones(8), 8, 0.8, self.DEFAULT)
        ref = vertical_beam_set(8, 0.8, self.DEFAULT)
        assert np.allclose(bs.beams, ref.beams)
        assert rep.kind == "B" and rep.bit_cost == 1 + 2 + 4

    def test_recentre(self):
        lt = LongTermReport(0, -9.0, 0.0)
        bs, _ = adaptive_feedback_step(lt, None, np.ones(8), 8, 0.8, self.DEFAULT, span_deg=8.0)
        els = [d[1] for d in bs.directions]
        assert np.mean(els) == pytest.approx(-9.0)
        assert np.allclose(np.diff(els), 2.0)

    def test_fixed_point(self):
        # static channel: LT PMI from the channel, then repeated steps
        m, dv = 8, 0.8
        target = vertical_beam_set(m, dv, [-12.0]).beams[0]
        h = np.conj(target)
        els = np.arange(-45.0, 10.01, 1.0)
        state, history = None, []
        for _ in range(4):
            lt = long_term_pmi(h[None, :], m, 1, dv, 0.5, els, [0.0])
            state, rep = adaptive_feedback_step(lt, state, h, m, dv, self.DEFAULT)
            history.append(state)
        assert lt.elevation_deg == pytest.approx(-12.0)
        assert history[1] is history[2] is history[3]

    def test_long_term_pmi_finds_direction(self):
        m, n = 4, 2
        rows = vertical_beam_set(m, 0.8, [-7.0], n=n, dh=0.5, azimuth_deg=15.0).beams.conj()
        lt = long_term_pmi(rows, m, n, 0.8, 0.5, np.arange(-20.0, 1.0, 1.0), np.arange(-30.0, 31.0, 5.0))
        assert (lt.elevation_deg, lt.azimuth_deg) == (-7.0, 15.0)
