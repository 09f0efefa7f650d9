import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effdyn.hilbert import (DensityMatrixSmall, SectorBasis, SparseKet, collective_lower,
                            collective_raise, dot_radii, hermitian_eig, make_profile,
                            sector_dim)


def random_profile(N, seed=0):
    rng = np.random.default_rng(seed)
    return make_profile("explicit", N, {"values": rng.uniform(0.1, 2.0, N)})


def random_ket(N, m, seed=0):
    rng = np.random.default_rng(seed)
    sec = SectorBasis(N, m)
    return SparseKet.from_dense(sec, rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim))


class TestProfiles:
    def test_sine_profile_values(self):
        p = make_profile("sine_cavity", 6, {"g": 2.0})
        np.testing.assert_allclose(p.values, 2.0 * np.sin(np.arange(1, 7) * np.pi / 7))

    def test_sine_sum_of_squares(self):
        p = make_profile("sine_cavity", 6, {"g": 1.0})
        assert np.sum(p.values ** 2) == pytest.approx(3.5, rel=1e-14)
        np.testing.assert_allclose(p.matched_homogeneous().values, np.sqrt(3.5 / 6), rtol=1e-14)
        assert np.sqrt(3.5 / 6) == pytest.approx(0.76376, abs=5e-6)

    def test_single_nucleus_gets_everything(self):
        for r0 in (0.3, 1.0, 4.0):
            p = make_profile("gaussian_dot", 1, {"A": 2.5, "r0": r0})
            assert p.values[0] == pytest.approx(2.5)

    def test_gaussian_dot_sums_to_A(self):
        p = make_profile("gaussian_dot", 500, {"A": 3.0, "r0": 1.0})
        assert p.values.sum() == pytest.approx(3.0, rel=1e-12)
        assert p.mean == pytest.approx(3.0 / 500)

    def test_gaussian_dot_decreases_outward(self):
        p = make_profile("gaussian_dot", 50, {"A": 1.0, "r0": 1.0})
        assert np.all(np.diff(p.values) < 0)

    def test_dot_radii_fill_equal_volumes(self):
        # each nucleus sits at the volume midpoint of its own equal-volume shell
        r = dot_radii(8, 2.0)
        np.testing.assert_allclose(r ** 3, 8.0 * (np.arange(1, 9) - 0.5) / 8)

    def test_matched_homogeneous_keeps_norm(self):
        p = make_profile("sine_cavity", 8, {"g": 1.0})
        h = p.matched_homogeneous()
        assert h.norm == pytest.approx(p.norm)
        assert np.ptp(h.values) == 0

    @pytest.mark.parametrize("kind,params", [("sine_cavity", {}), ("gaussian_dot", {"A": 1.0}),
                                             ("nonsense", {"g": 1})])
    def test_bad_parameters(self, kind, params):
        with pytest.raises(ValueError):
            make_profile(kind, 4, params)

    def test_explicit_length_checked(self):
        with pytest.raises(ValueError):
            make_profile("explicit", 3, {"values": [1.0, 2.0]})


class TestSectorBasis:
    @given(st.integers(1, 14), st.data())
    @settings(max_examples=60, deadline=None)
    def test_rank_unrank_roundtrip(self, N, data):
        m = data.draw(st.integers(0, N))
        sec = SectorBasis(N, m)
        idx = np.arange(sec.dim)
        subs = sec.unrank(idx)
        np.testing.assert_array_equal(sec.rank(subs), idx)

    def test_dimension_is_binomial(self):
        assert SectorBasis(10, 3).dim == 120 == sector_dim(10, 3)
        assert SectorBasis(1000, 2).dim == 499500
        assert (sector_dim(6, 0), sector_dim(6, 2)) == (1, 15)
        with pytest.raises(ValueError):
            sector_dim(3, 4)

    def test_exhaustive_roundtrip_small_sectors(self):
        for N in range(1, 17):
            for m in range(min(N, 3) + 1):
                sec = SectorBasis(N, m)
                idx = np.arange(sec.dim)
                np.testing.assert_array_equal(sec.rank(sec.unrank(idx)), idx)

    def test_bitstrings_have_m_bits(self):
        sec = SectorBasis(7, 3)
        bits = sec.bitstrings()
        assert len(set(bits.tolist())) == sec.dim
        assert all(bin(int(b)).count("1") == 3 for b in bits)

    def test_index_of_and_subset_of(self):
        sec = SectorBasis(6, 2)
        for k in range(sec.dim):
            assert sec.index_of(sec.subset_of(k)) == k


class TestSparseKet:
    def test_vdot_matches_dense(self):
        a, b = random_ket(9, 3, 1), random_ket(9, 3, 2)
        assert a.vdot(b) == pytest.approx(np.vdot(a.to_dense(), b.to_dense()))

    def test_vdot_with_partial_overlap(self):
        sec = SectorBasis(5, 2)
        a = SparseKet(sec, [0, 3, 7], [1.0, 2.0j, 3.0])
        b = SparseKet(sec, [3, 4, 7, 9], [1.0, 1.0, -1.0, 5.0])
        assert a.vdot(b) == pytest.approx(np.vdot(a.to_dense(), b.to_dense()))
        assert b.vdot(a) == pytest.approx(np.conj(a.vdot(b)))

    def test_tiny_amplitudes_pruned(self):
        k = SparseKet.from_dense(SectorBasis(3, 1), np.array([1.0, 1e-17, 0.5]))
        assert k.nnz == 2

    def test_duplicates_are_summed(self):
        sec = SectorBasis(4, 1)
        k = SparseKet(sec, [2, 0, 2], [1.0, 1.0, 0.5])
        np.testing.assert_array_equal(k.indices, [0, 2])
        np.testing.assert_allclose(k.values, [1.0, 1.5])

    def test_arithmetic(self):
        a, b = random_ket(6, 2, 3), random_ket(6, 2, 4)
        np.testing.assert_allclose((a + 2 * b - a).to_dense(), 2 * b.to_dense())

    def test_sector_mismatch(self):
        with pytest.raises(ValueError):
            random_ket(6, 2).vdot(random_ket(6, 3))


class TestCollectiveOperators:
    @given(st.integers(2, 9), st.data())
    @settings(max_examples=40, deadline=None)
    def test_raise_and_lower_are_adjoint(self, N, data):
        m = data.draw(st.integers(0, N - 1))
        seed = data.draw(st.integers(0, 1000))
        prof = random_profile(N, seed)
        v, w = random_ket(N, m, seed + 1), random_ket(N, m + 1, seed + 2)
        lhs = w.vdot(collective_raise(prof, v))
        rhs = collective_lower(prof, w).vdot(v)
        assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))

    def test_raise_from_ground(self):
        prof = random_profile(5)
        out = collective_raise(prof, SparseKet.basis_state(SectorBasis(5, 0), ()))
        np.testing.assert_allclose(out.to_dense(), prof.values)

    def test_raise_twice_two_sites(self):
        prof = make_profile("explicit", 2, {"values": [1.0, 2.0]})
        ground = SparseKet.basis_state(SectorBasis(2, 0), ())
        two = collective_raise(prof, collective_raise(prof, ground))
        np.testing.assert_allclose(two.to_dense(), [4.0])

    def test_homogeneous_dicke_norm(self):
        # |J+ |m>|^2 for a symmetric Dicke state equals (m+1)(N-m) with unit couplings
        N, m = 8, 3
        prof = make_profile("explicit", N, {"values": np.ones(N)})
        sec = SectorBasis(N, m)
        dicke = SparseKet.from_dense(sec, np.ones(sec.dim) / np.sqrt(sec.dim))
        assert collective_raise(prof, dicke).norm() ** 2 == pytest.approx((m + 1) * (N - m))

    def test_edges(self):
        prof = random_profile(3)
        with pytest.raises(ValueError):
            collective_raise(prof, random_ket(3, 3))
        with pytest.raises(ValueError):
            collective_lower(prof, random_ket(3, 0))


class TestHermitianEig:
    def test_diagonal(self):
        lam, V = hermitian_eig(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(lam, [1, 2, 3])
        np.testing.assert_allclose(np.abs(V), np.eye(3))

    def test_pauli_x(self):
        np.testing.assert_allclose(hermitian_eig(np.array([[0, 1], [1, 0]]))[0], [-1, 1])

    @pytest.mark.parametrize("dim", [8, 33, 64])
    def test_reconstruction(self, dim):
        rng = np.random.default_rng(dim)
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        H = A + A.conj().T
        lam, V = hermitian_eig(H)
        assert np.all(np.diff(lam) >= 0)
        err = np.linalg.norm(V @ np.diag(lam) @ V.conj().T - H) / np.linalg.norm(H)
        assert err < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.array([[0, 1], [0, 0]]))


class TestDensityMatrixSmall:
    def test_pure_state(self):
        rho = DensityMatrixSmall.pure([1, 1j] / np.sqrt(2))
        assert rho.purity() == pytest.approx(1.0)

    @pytest.mark.parametrize("bad", [[[1, 1], [0, 0]], [[0.5, 0], [0, 0.4]], [[1.5, 0], [0, -0.5]]])
    def test_rejects_non_states(self, bad):
        with pytest.raises(ValueError):
            DensityMatrixSmall(bad)
