import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdmimo.array import ArrayConfig, ElementPattern, build_array, direction_cosines
from fdmimo.txru import (PrecoderStack, TxruGrid, build_connected, build_partitioned, compose_precoder,
                         normalize_power, tilt_weight)


def geom(m=8, n=4, p=2, dv=0.8, dh=0.5):
    return build_array(ArrayConfig(m, n, p, dv, dh, element=ElementPattern("isotropic")))


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestPartitioned:
    def test_sixteen_txru_shape_and_support(self):
        v = np.exp(2j * np.pi * np.arange(4) / 4)
        arch = build_partitioned(geom(), TxruGrid(2, 8), v)
        assert arch.w_t.shape == (64, 16)
        nz = np.abs(arch.w_t) > 0
        assert np.all(nz.sum(axis=0) == 4)
        assert np.all(nz.sum(axis=1) == 1)
        assert arch.nc == 4

    def test_per_element_is_identity(self):
        g = geom(2, 2, 1)
        arch = build_partitioned(g, TxruGrid(2, 2), [1.0])
        assert np.allclose(arch.w_t, np.eye(4))

    def test_nc_arithmetic(self):
        arch = build_partitioned(geom(4, 4, 2), TxruGrid(2, 4))
        assert arch.n_t == 32 and arch.l_txru == 8 and arch.nc == 4

    def test_indivisible(self):
        with pytest.raises(ValueError):
            build_partitioned(geom(8, 4, 2), TxruGrid(3, 8))
        with pytest.raises(ValueError):
            build_partitioned(geom(8, 4, 2), TxruGrid(2, 5))

    def test_wrong_weight_length(self):
        with pytest.raises(ValueError):
            build_partitioned(geom(), TxruGrid(2, 8), np.ones(3))

    @given(st.sampled_from([(1, 2), (2, 2), (4, 4), (2, 8), (8, 8), (4, 2)]))
    def test_gram_diagonal(self, grid):
        arch = build_partitioned(geom(), TxruGrid(*grid))
        gram = arch.w_t.conj().T @ arch.w_t
        assert np.allclose(gram, np.diag(np.diag(gram)))
        assert np.allclose(np.diag(gram).real, arch.nc)

    def test_tilt_weight_unit_modulus(self):
        w = tilt_weight(4, 0.8, 6.0)
        assert np.allclose(np.abs(w), 1)
        _, c = direction_cosines(0.0, -6.0)
        assert np.allclose(w, np.exp(-2j * np.pi * np.arange(4) * 0.8 * c))


class TestConnected:
    def test_nc_eight(self):
        g = geom(4, 4, 2)
        arch = build_connected(g, 8, 2, [(0.0, -5.0 * j) for j in range(8)])
        assert arch.nc == 8
        assert np.all((np.abs(arch.w_t) > 0).sum(axis=1) == 2)

    def test_single_beam(self):
        g = geom(2, 2, 1)
        arch = build_connected(g, 1, 1, [(10.0, -3.0)])
        u, w = direction_cosines(10.0, -3.0)
        ref = np.exp(-2j * np.pi * (g.cols * 0.5 * u + g.rows * 0.8 * w))
        assert np.allclose(arch.w_t[:, 0], ref)

    def test_lprime_exceeds_l(self):
        with pytest.raises(ValueError):
            build_connected(geom(), 2, 4, [(0, 0)] * 2)

    def test_direction_count(self):
        with pytest.raises(ValueError):
            build_connected(geom(), 4, 2, [(0, 0)] * 3)

    def test_matched_pilot_amplitude(self):
        # y = h v x + n with h the conjugate steering of the beam direction
        g = geom(4, 4, 2)
        dirs = [(15.0, -8.0), (-20.0, -2.0)] * 2
        arch = build_connected(g, 4, 2, dirs)
        for j in range(4):
            col = arch.w_t[:, j]
            idx = np.flatnonzero(col)
            h = np.conj(col[idx])
            assert abs(h @ col[idx]) == pytest.approx(arch.nc)

    @given(st.sampled_from([(2, 1), (4, 2), (8, 2), (8, 4), (4, 4)]))
    def test_row_fan_in(self, lp):
        l, lp_ = lp
        arch = build_connected(geom(), l, lp_, [(0.0, -float(j)) for j in range(l)])
        assert np.all((np.abs(arch.w_t) > 0).sum(axis=1) == lp_)
        assert arch.nc == 64 * lp_ // l


class TestCompose:
    def test_identity_port_map(self):
        rng = np.random.default_rng(0)
        wt = rand_c(rng, 16, 4)
        wu = rand_c(rng, 4, 2)
        wu /= np.linalg.norm(wu, axis=0)
        st_ = PrecoderStack(wt, np.eye(4), wu)
        assert np.allclose(compose_precoder(st_), wt @ wu)

    def test_rank_one_beam_sum(self):
        rng = np.random.default_rng(1)
        wt = rand_c(rng, 8, 3)
        st_ = PrecoderStack(wt, np.ones((3, 1)), np.ones((1, 1)))
        assert np.allclose(compose_precoder(st_)[:, 0], wt.sum(axis=1))
        assert st_.rank == 1 and st_.n_ports == 1

    def test_identity_chain_basis_column(self):
        e = np.zeros((5, 1))
        e[2] = 1
        assert np.allclose(compose_precoder(PrecoderStack(np.eye(5), np.eye(5), e)), e)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            PrecoderStack(np.eye(4), np.eye(3), np.ones((3, 1)) / np.sqrt(3))

    def test_non_unit_codeword(self):
        with pytest.raises(ValueError):
            PrecoderStack(np.eye(2), np.eye(2), np.ones((2, 1)))

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31))
    def test_associative(self, l, n_p, r, seed):
        rng = np.random.default_rng(seed)
        wt, wp, wu = rand_c(rng, 8, l), rand_c(rng, l, n_p), rand_c(rng, n_p, r)
        wu /= np.linalg.norm(wu, axis=0)
        st_ = PrecoderStack(wt, wp, wu)
        assert np.allclose((wt @ wp) @ wu, compose_precoder(st_), rtol=1e-12, atol=1e-10)
        assert np.allclose(st_.w_rs, wp @ wu)


class TestNormalize:
    @given(st.integers(1, 4), st.floats(0.1, 10.0), st.integers(0, 2**31))
    def test_total_power(self, r, p, seed):
        w = normalize_power(rand_c(np.random.default_rng(seed), 8, r), p)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(p, rel=1e-9)

    @given(st.integers(1, 4), st.integers(0, 2**31))
    def test_per_pa_limit(self, r, seed):
        w = normalize_power(rand_c(np.random.default_rng(seed), 8, r), 1.0, per_pa_limit=1.0 / 8)
        assert np.max(np.sum(np.abs(w) ** 2, axis=1)) <= 1.0 / 8 * (1 + 1e-9)

    def test_zero(self):
        with pytest.raises(ValueError):
            normalize_power(np.zeros((4, 1)))
