import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_density
from sepstruct.qmath import (DensityMatrix, PureState, bell_state, classically_correlated_state,
                             depolarize, fidelity, ginibre_random_state, make_physical,
                             partial_trace, partial_transpose, smolin_state, tensor_product,
                             trace_distance, w_state)


def dm(entries, labels=None):
    entries = np.asarray(entries, dtype=complex)
    n = int(np.log2(entries.shape[0]))
    return DensityMatrix(tuple(labels or range(1, n + 1)), entries)


def ket_dm(bits, labels=None):
    amp = np.zeros(2 ** len(bits), dtype=complex)
    idx = int("".join(map(str, bits)), 2)
    amp[idx] = 1
    return dm(np.outer(amp, amp.conj()), labels)


class TestDensityMatrixInvariants:
    def test_rejects_non_hermitian(self):
        bad = np.eye(2, dtype=complex) / 2
        bad[0, 1] = 0.1
        with pytest.raises(ValueError, match="Hermitian"):
            dm(bad)

    def test_rejects_wrong_trace(self):
        with pytest.raises(ValueError, match="trace"):
            dm(np.eye(2) * 0.7)

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            dm(np.diag([1.5, -0.5]))

    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError, match="duplicate"):
            DensityMatrix((1, 1), np.eye(4) / 4)

    def test_entries_are_immutable(self):
        rho = dm(np.eye(2) / 2)
        with pytest.raises(ValueError):
            rho.entries[0, 0] = 1.0

    def test_make_physical_clips_roundoff(self):
        entries = np.diag([1.0 + 5e-10, -5e-10]).astype(complex)
        rho = make_physical(entries, (1,))
        assert np.linalg.eigvalsh(rho.entries).min() >= 0
        assert_allclose(np.trace(rho.entries).real, 1.0, atol=1e-14)

    def test_make_physical_rejects_real_violations(self):
        with pytest.raises(ValueError):
            make_physical(np.diag([1.1, -0.1]), (1,))


class TestTensorProduct:
    def test_identity_case(self):
        half = dm(np.eye(2) / 2, labels=(1,))
        other = dm(np.eye(2) / 2, labels=(2,))
        out = tensor_product(half, other)
        assert_allclose(out.entries, np.eye(4) / 4, atol=1e-15)
        assert out.labels == (1, 2)

    def test_basis_case(self):
        out = tensor_product(ket_dm([0], labels=(1,)), ket_dm([1], labels=(2,)))
        assert out == ket_dm([0, 1], labels=(1, 2))

    def test_trace_multiplicativity(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = random_density(rng, 1)
            b = DensityMatrix((5, 6), random_density(rng, 2).entries)
            out = tensor_product(a, b)
            assert_allclose(np.trace(out.entries).real, 1.0, atol=1e-12)

    def test_label_collision(self):
        a = dm(np.eye(2) / 2, labels=(1,))
        with pytest.raises(ValueError, match="collision"):
            tensor_product(a, a)


class TestPartialTrace:
    def test_bell_marginal_is_maximally_mixed(self):
        rho = bell_state(0).density_matrix((1, 2))
        assert_allclose(partial_trace(rho, (1,)).entries, np.eye(2) / 2, atol=1e-12)

    def test_product_marginal(self):
        rho = ket_dm([0, 1])
        assert partial_trace(rho, (2,)) == ket_dm([1], labels=(2,))

    def test_smolin_three_qubit_marginal_matches_contraction_oracle(self):
        # Independent oracle: explicit index contraction over the 16x16 entries.
        rho = smolin_state()
        keep = (1, 3, 4)  # trace out qubit 2
        oracle = np.zeros((8, 8), dtype=complex)
        for i in range(16):
            for j in range(16):
                bi = [(i >> s) & 1 for s in (3, 2, 1, 0)]
                bj = [(j >> s) & 1 for s in (3, 2, 1, 0)]
                if bi[1] != bj[1]:
                    continue
                r = (bi[0] << 2) | (bi[2] << 1) | bi[3]
                c = (bj[0] << 2) | (bj[2] << 1) | bj[3]
                oracle[r, c] += rho.entries[i, j]
        reduced = partial_trace(rho, keep)
        assert reduced.labels == (1, 3, 4)
        assert_allclose(reduced.entries, oracle, atol=1e-12)

    def test_composition(self):
        rng = np.random.default_rng(11)
        rho = random_density(rng, 4)
        two_step = partial_trace(partial_trace(rho, (1, 2, 4)), (1, 4))
        one_step = partial_trace(rho, (1, 4))
        assert_allclose(two_step.entries, one_step.entries, atol=1e-10)

    def test_trace_preserved(self):
        rng = np.random.default_rng(3)
        rho = random_density(rng, 3)
        assert_allclose(np.trace(partial_trace(rho, (2,)).entries).real, 1.0, atol=1e-12)

    def test_errors(self):
        rho = ket_dm([0, 0])
        with pytest.raises(ValueError, match="unknown party"):
            partial_trace(rho, (9,))
        with pytest.raises(ValueError, match="empty"):
            partial_trace(rho, ())


class TestPartialTranspose:
    def test_product_state_stays_psd(self):
        rng = np.random.default_rng(5)
        a, b = random_density(rng, 1), random_density(rng, 1)
        rho = DensityMatrix((1, 2), np.kron(a.entries, b.entries))
        assert np.linalg.eigvalsh(partial_transpose(rho, (1,))).min() >= -1e-9

    def test_involution_is_exact(self):
        rng = np.random.default_rng(9)
        rho = random_density(rng, 3)
        once = partial_transpose(rho, (1, 3))
        # applying the same axis swap twice must give back the entries bit for bit
        t = once.reshape((2,) * 6)
        for q in (0, 2):
            t = np.swapaxes(t, q, 3 + q)
        assert np.array_equal(t.reshape(8, 8), rho.entries)

    def test_bell_eigenvalues(self):
        rho = bell_state(0).density_matrix((1, 2))
        lam = np.linalg.eigvalsh(partial_transpose(rho, (1,)))
        assert_allclose(np.sort(lam), [-0.5, 0.5, 0.5, 0.5], atol=1e-12)

    def test_preserves_trace_and_hermiticity(self):
        rng = np.random.default_rng(13)
        rho = random_density(rng, 2)
        pt = partial_transpose(rho, (2,))
        assert_allclose(np.trace(pt).real, 1.0, atol=1e-12)
        assert_allclose(pt, pt.conj().T, atol=1e-12)

    def test_degenerate_bipartition_rejected(self):
        rho = ket_dm([0, 0])
        with pytest.raises(ValueError):
            partial_transpose(rho, ())
        with pytest.raises(ValueError):
            partial_transpose(rho, (1, 2))


class TestFidelity:
    def test_self_fidelity(self):
        rng = np.random.default_rng(2)
        rho = random_density(rng, 2)
        assert_allclose(fidelity(rho, rho), 1.0, atol=1e-10)

    def test_orthogonal_states(self):
        assert fidelity(ket_dm([0]), ket_dm([1])) == pytest.approx(0.0, abs=1e-12)

    def test_commuting_closed_form(self):
        # sqrt(I/2) |0><0| sqrt(I/2) has eigenvalues {1/2, 0}.
        assert fidelity(dm(np.eye(2) / 2), ket_dm([0])) == pytest.approx(0.5, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(21)
        a, b = random_density(rng, 2), random_density(rng, 2)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-8)

    def test_label_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(ket_dm([0], labels=(1,)), ket_dm([0], labels=(2,)))


class TestNamedStates:
    def test_smolin_is_ppt_across_22_and_npt_across_13(self):
        rho = smolin_state()
        for block in [(1, 2), (1, 3), (1, 4)]:
            lam = np.linalg.eigvalsh(partial_transpose(rho, block))
            assert lam.min() >= -1e-12
        for block in [(1,), (2,), (3,), (4,)]:
            lam = np.linalg.eigvalsh(partial_transpose(rho, block))
            neg = -lam[lam < 0].sum()
            assert neg == pytest.approx(0.5, abs=1e-10)  # 4 eigenvalues at -1/8

    def test_smolin_rank_four(self):
        lam = np.linalg.eigvalsh(smolin_state().entries)
        assert np.sum(lam > 1e-12) == 4
        assert_allclose(lam[lam > 1e-12], 0.25, atol=1e-12)

    def test_smolin_three_qubit_marginals_all_ppt(self):
        rho = smolin_state()
        for keep in [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]:
            reduced = partial_trace(rho, keep)
            for block in [(keep[0],), (keep[1],), (keep[2],)]:
                assert np.linalg.eigvalsh(partial_transpose(reduced, block)).min() >= -1e-9

    def test_w2_is_psi_plus(self):
        amp = w_state(2).amplitudes
        assert_allclose(amp, [0, 1 / np.sqrt(2), 1 / np.sqrt(2), 0], atol=1e-15)

    @pytest.mark.parametrize("n", range(2, 11))
    def test_w_state_normalized(self, n):
        assert np.vdot(w_state(n).amplitudes, w_state(n).amplitudes).real == pytest.approx(1.0, abs=1e-12)

    def test_w_state_support(self):
        amp = w_state(5).amplitudes
        support = np.flatnonzero(np.abs(amp) > 0)
        assert sorted(support) == [1, 2, 4, 8, 16]

    def test_w_state_rejects_small_n(self):
        with pytest.raises(ValueError):
            w_state(1)

    def test_classically_correlated_states(self):
        rho1 = classically_correlated_state("rho1")
        assert_allclose(np.diag(rho1.entries).real, [0.5, 0, 0, 0.5], atol=1e-15)
        rho2 = classically_correlated_state("rho2")
        assert rho2.n_parties == 3
        lam2 = np.linalg.eigvalsh(partial_transpose(rho2, (1,)))
        assert lam2.min() >= -1e-12  # diagonal separable: zero negativity
        rho3 = classically_correlated_state("rho3")
        assert np.trace(rho3.entries).real == pytest.approx(1.0)
        assert np.sum(np.linalg.eigvalsh(rho3.entries) > 1e-12) == 4
        with pytest.raises(ValueError):
            classically_correlated_state("rho4")

    def test_rho3_is_product_across_13_24(self):
        rho3 = classically_correlated_state("rho3")
        left = partial_trace(rho3, (1, 3))
        right = partial_trace(rho3, (2, 4))
        rebuilt = np.kron(left.entries, right.entries)
        # qubit order of kron is (1,3,2,4); permute back to (1,2,3,4)
        t = rebuilt.reshape((2,) * 8)
        t = np.moveaxis(t, (0, 1, 2, 3, 4, 5, 6, 7), (0, 2, 1, 3, 4, 6, 5, 7))
        assert_allclose(t.reshape(16, 16), rho3.entries, atol=1e-12)


class TestGinibre:
    def test_scalar_case(self):
        rho = ginibre_random_state(1, 1, seed=0)
        assert rho.entries.shape == (1, 1)
        assert rho.entries[0, 0] == pytest.approx(1.0)

    def test_invariants_hold_for_many_seeds(self):
        # the constructor re-validates Hermiticity, trace and positivity
        for seed in range(1000):
            ginibre_random_state(16, 1 + seed % 16, seed=seed)

    def test_deterministic(self):
        a = ginibre_random_state(16, 4, seed=123)
        b = ginibre_random_state(16, 4, seed=123)
        assert np.array_equal(a.entries, b.entries)

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            ginibre_random_state(4, 0, seed=0)
        with pytest.raises(ValueError):
            ginibre_random_state(4, 5, seed=0)


class TestDepolarize:
    def test_endpoints(self):
        rho = smolin_state()
        assert depolarize(rho, 0.0) == rho
        assert_allclose(depolarize(rho, 1.0).entries, np.eye(16) / 16, atol=1e-15)

    def test_fidelity_monotone_in_p(self):
        rho = smolin_state()
        fids = [fidelity(depolarize(rho, p), rho) for p in np.linspace(0, 1, 11)]
        assert all(a >= b - 1e-12 for a, b in zip(fids, fids[1:]))

    def test_range_check(self):
        with pytest.raises(ValueError):
            depolarize(smolin_state(), 1.5)


class TestSpectralPrimitive:
    def test_eigh_reconstruction(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
            h = (g + g.conj().T) / 2
            lam, v = np.linalg.eigh(h)
            assert_allclose((v * lam) @ v.conj().T, h, atol=1e-9)

    def test_trace_distance(self):
        assert trace_distance(ket_dm([0]), ket_dm([1])) == pytest.approx(1.0, abs=1e-12)
        rng = np.random.default_rng(4)
        rho = random_density(rng, 2)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)


class TestPureState:
    def test_norm_validation(self):
        with pytest.raises(ValueError, match="norm"):
            PureState(np.array([1.0, 1.0]))

    def test_density_matrix_labels(self):
        rho = w_state(3).density_matrix()
        assert rho.labels == (1, 2, 3)
