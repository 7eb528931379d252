import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import basis3, match_multisets
from lepkit.errors import DefectiveSpectrumError, DegenerateStationaryError, DimensionError, EPAmbiguityError
from lepkit.liouville import (LindbladModel, build_superoperator, detect_ep, eigenvalues, evolve_spectral,
                              lindblad_action, liouvillian_gap, mode_decomposition, sort_order, spectral_gap,
                              spectrum, split_mode, stationary_state, steady_state, three_level_model,
                              three_level_reference, three_level_space, unvec, vec)
from lepkit.qops import Operator, make_space, random_density_matrix

RATIOS = [0.2, 0.5, 1, 1.99, 2, 2.01, 3, 10]


def random_model(rng, dim=2, n_jumps=2):
    space = make_space([("s", dim)])
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    jumps = [Operator(space, rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
             for _ in range(n_jumps)]
    return LindbladModel(space, Operator(space, h + h.conj().T), jumps)


def trivial_model(dim=3):
    space = make_space([("s", dim)])
    return LindbladModel(space, Operator(space, np.zeros((dim, dim))))


class TestAction:
    def test_trivial(self, rng):
        rho = random_density_matrix(make_space([("s", 3)]), rng).matrix
        np.testing.assert_array_equal(lindblad_action(trivial_model(), rho), 0)

    def test_ground_stationary(self):
        np.testing.assert_allclose(lindblad_action(three_level_model(1.3, 0.7), basis3(0)), 0, atol=1e-15)

    def test_excited_state_by_hand(self):
        g, w = 1.0, 0.3
        out = lindblad_action(three_level_model(g, w), basis3(2))
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 0], expected[2, 2] = g, -g
        expected[1, 2], expected[2, 1] = -0.5j * w, 0.5j * w
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lindblad_action(three_level_model(1, 1), np.eye(2))

    def test_non_hermitian_hamiltonian(self):
        space = make_space([("s", 2)])
        with pytest.raises(ValueError):
            LindbladModel(space, Operator(space, np.array([[0, 1], [0, 0]])))

    @settings(max_examples=30)
    @given(st.integers(0, 10_000), st.integers(2, 4))
    def test_trace_and_hermiticity_preserved(self, seed, dim):
        rng = np.random.default_rng(seed)
        model = random_model(rng, dim)
        rho = random_density_matrix(model.space, rng).matrix
        out = lindblad_action(model, rho)
        assert abs(np.trace(out)) <= 1e-12 * max(1, np.abs(out).max())
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)


class TestSuperoperator:
    def test_zero_model(self):
        np.testing.assert_array_equal(build_superoperator(trivial_model()).matrix, 0)

    def test_three_level_entries(self):
        g, w = 1.0, 0.3
        m = build_superoperator(three_level_model(g, w)).matrix
        assert m[0, 8] == g
        assert m[1, 2] == pytest.approx(0.5j * w, abs=1e-15)
        assert m[2, 2] == pytest.approx(-g / 2, abs=1e-15)
        assert m[8, 8] == pytest.approx(-g, abs=1e-15)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_matches_action(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, 2)
        rho = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sup = build_superoperator(model)
        np.testing.assert_allclose(sup.matrix @ vec(rho), vec(lindblad_action(model, rho)), atol=1e-12)
        np.testing.assert_allclose(sup.apply(rho), lindblad_action(model, rho), atol=1e-12)

    def test_vec_roundtrip(self, rng):
        r = rng.normal(size=(4, 4))
        np.testing.assert_array_equal(unvec(vec(r)), r)

    def test_read_only(self):
        sup = build_superoperator(three_level_model(1, 1))
        with pytest.raises(ValueError):
            sup.matrix[0, 0] = 1


class TestSpectrum:
    def test_overdamped_values(self):
        ev = spectrum(build_superoperator(three_level_model(1.0, 0.3))).eigenvalues
        expected = [0, -0.05, -0.05, -0.1, -0.45, -0.45, -0.5, -0.5, -0.9]
        np.testing.assert_allclose(ev, expected, atol=1e-9)

    def test_ep_values(self):
        spec = spectrum(build_superoperator(three_level_model(2.0, 1.0)))
        np.testing.assert_allclose(spec.eigenvalues, [0] + [-0.5] * 4 + [-1.0] * 4, atol=1e-9)
        assert spec.is_defective

    def test_underdamped_values(self):
        ev = spectrum(build_superoperator(three_level_model(1.0, 1.0))).eigenvalues
        s3 = np.sqrt(3)
        expected = [0, -0.25 + s3 / 4 * 1j, -0.25 - s3 / 4 * 1j, -0.25 + s3 / 4 * 1j, -0.25 - s3 / 4 * 1j,
                    -0.5, -0.5, -0.5 + s3 / 2 * 1j, -0.5 - s3 / 2 * 1j]
        assert match_multisets(ev, expected) < 1e-9
        assert ev[1].imag > 0 and ev[3] == pytest.approx(np.conj(ev[1]))

    @pytest.mark.parametrize("ratio", RATIOS)
    def test_oracle_grid(self, ratio):
        g, w = ratio, 1.0
        ev = spectrum(build_superoperator(three_level_model(g, w))).eigenvalues
        assert match_multisets(ev, three_level_reference(g, w).eigenvalues) < 1e-9
        assert match_multisets(ev, np.conj(ev)) < 1e-9
        assert liouvillian_gap(spectrum(build_superoperator(three_level_model(g, w)))) == pytest.approx(
            np.real((g - three_level_reference(g, w).kappa) / 4), abs=1e-9)

    @pytest.mark.parametrize("ratio", [0.2, 0.5, 1, 1.99, 2.01, 3, 10])
    def test_biorthonormal(self, ratio):
        spec = spectrum(build_superoperator(three_level_model(ratio, 1.0)))
        gram = np.einsum("aij,bji->ab", spec.left_modes, spec.right_modes)
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-8)

    def test_residuals(self, rng):
        sup = build_superoperator(random_model(rng, 3))
        spec = spectrum(sup)
        for lam, r, l in zip(spec.eigenvalues, spec.right_modes, spec.left_modes):
            np.testing.assert_allclose(sup.apply(r), lam * r, atol=1e-8 * np.linalg.norm(sup.matrix, 2))
            # left modes: Tr[L L(X)] = lam Tr[L X] for every X
            adj = np.array([np.trace(l @ unvec(col, 3)) for col in sup.matrix.T])
            np.testing.assert_allclose(adj, lam * vec(l.T), atol=1e-7)

    def test_dimension_limit(self):
        sup = build_superoperator(three_level_model(1, 1))
        with pytest.raises(DimensionError):
            spectrum(sup, max_dim=4)
        with pytest.raises(DimensionError):
            eigenvalues(sup, max_dim=4)

    def test_sort_order_ties(self):
        ev = np.array([-1 - 1j, -1 + 1j, -1, 0, -0.5 + 2j])
        np.testing.assert_array_equal(ev[sort_order(ev)], [0, -0.5 + 2j, -1, -1 + 1j, -1 - 1j])


class TestGap:
    def test_values(self):
        for g, expected in [(1.0, 0.05), (2.0, 0.5), (10.0, 0.0505103)]:
            spec = spectrum(build_superoperator(three_level_model(g, 1.0 if g != 1.0 else 0.3)))
            assert liouvillian_gap(spec) == pytest.approx(expected, abs=1e-7)

    def test_spectral_gap_skips_zero(self):
        assert spectral_gap([0, -0.3 + 1j, -0.3 - 1j, -2]) == pytest.approx(0.3)
        with pytest.raises(ValueError):
            spectral_gap([0])


class TestStationary:
    @pytest.mark.parametrize("g,w", [(0.1, 1), (2, 1), (5, 0.3)])
    def test_ground_state(self, g, w):
        spec = spectrum(build_superoperator(three_level_model(g, w)))
        np.testing.assert_allclose(stationary_state(spec).matrix, basis3(0).matrix, atol=1e-9)
        np.testing.assert_allclose(steady_state(build_superoperator(three_level_model(g, w))).matrix,
                                   basis3(0).matrix, atol=1e-12)

    def test_no_jumps_degenerate(self):
        model = three_level_model(1, 1).without_dissipation()
        with pytest.raises(DegenerateStationaryError):
            stationary_state(spectrum(build_superoperator(model)))
        with pytest.raises(DegenerateStationaryError):
            steady_state(build_superoperator(model))

    def test_random_model(self, rng):
        sup = build_superoperator(random_model(rng, 3, 3))
        a = stationary_state(spectrum(sup)).matrix
        b = steady_state(sup).matrix
        np.testing.assert_allclose(a, b, atol=1e-9)
        np.testing.assert_allclose(sup.apply(b), 0, atol=1e-10)


class TestModes:
    def test_stationary_input(self):
        spec = spectrum(build_superoperator(three_level_model(3, 1)))
        np.testing.assert_allclose(mode_decomposition(spec, basis3(0)).coefficients, 0, atol=1e-12)

    def test_subspace_vanishing(self, rng):
        spec = spectrum(build_superoperator(three_level_model(3, 1)))
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        rho = np.zeros((3, 3), dtype=complex)
        rho[1:, 1:] = np.outer(psi, psi.conj())
        kappa = np.sqrt(5.0)
        lam = spec.eigenvalues[1:]
        quarter = (np.abs(lam + (3 - kappa) / 4) < 1e-9) | (np.abs(lam + (3 + kappa) / 4) < 1e-9)
        assert quarter.sum() == 4
        for state in (basis3(1), rho):
            a = mode_decomposition(spec, state).coefficients
            assert np.max(np.abs(a[quarter])) <= 1e-10
            assert np.max(np.abs(a[~quarter])) > 1e-3

    def test_coherence_excites_slowest(self):
        spec = spectrum(build_superoperator(three_level_model(3, 1)))
        psi = np.array([1, 1, 0]) / np.sqrt(2)
        assert abs(mode_decomposition(spec, np.outer(psi, psi)).coefficients[0]) > 1e-3

    def test_reconstruction(self, rng):
        spec = spectrum(build_superoperator(three_level_model(1.0, 1.0)))
        rho = random_density_matrix(three_level_space(), rng)
        dec = mode_decomposition(spec, rho)
        np.testing.assert_allclose(dec.reconstruct(spec), rho.matrix, atol=1e-10)

    def test_defective_rejected(self):
        spec = spectrum(build_superoperator(three_level_model(2, 1)))
        with pytest.raises(DefectiveSpectrumError, match="-0.5|-1"):
            mode_decomposition(spec, basis3(1))

    def test_evolve_spectral_limits(self, rng):
        g, w = 3.0, 1.0
        spec = spectrum(build_superoperator(three_level_model(g, w)))
        rho = random_density_matrix(three_level_space(), rng).matrix
        dec = mode_decomposition(spec, rho)
        gap = liouvillian_gap(spec)
        traj = evolve_spectral(dec, spec, [0.0, 40 / gap])
        np.testing.assert_allclose(traj.states[0], rho, atol=1e-8)
        assert np.linalg.norm(traj.states[1] - basis3(0).matrix) <= 1e-8

    def test_evolve_spectral_vs_closed_form(self):
        from lepkit.dynamics import analytic_three_level
        spec = spectrum(build_superoperator(three_level_model(1.0, 1.0)))
        times = np.linspace(0, 10, 41)
        traj = evolve_spectral(mode_decomposition(spec, basis3(1)), spec, times)
        x, _, _ = analytic_three_level(1.0, 1.0, times)
        np.testing.assert_allclose(traj.states[:, 1, 1].real, x, atol=1e-9)


class TestSplitMode:
    def test_coherence_mode(self):
        r8 = np.zeros((3, 3))
        r8[1, 2] = r8[2, 1] = 1
        plus, minus = split_mode(r8, -0.5)
        vp = np.array([0, 1, 1]) / np.sqrt(2)
        vm = np.array([0, 1, -1]) / np.sqrt(2)
        np.testing.assert_allclose(plus, np.outer(vp, vp), atol=1e-12)
        np.testing.assert_allclose(minus, np.outer(vm, vm), atol=1e-12)

    def test_psd_mode(self):
        _, minus = split_mode(1j * np.diag([0.2, 0.3, 0.0]), -1.0)
        np.testing.assert_allclose(minus, 0, atol=1e-15)

    def test_complex_branch(self):
        spec = spectrum(build_superoperator(three_level_model(1.0, 1.0)))
        p, q = split_mode(spec.right_modes[1], spec.eigenvalues[1])
        np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
        np.testing.assert_allclose(q, q.conj().T, atol=1e-12)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            split_mode(np.array([[0, 1], [0, 0]]), -1.0)

    def test_real_modes_split(self):
        spec = spectrum(build_superoperator(three_level_model(3.0, 1.0)))
        for i, (lam, r) in enumerate(zip(spec.eigenvalues, spec.right_modes)):
            if abs(lam.imag) < 1e-9 and len(spec.clusters[spec.cluster_of(i)]) == 1:
                p, m = split_mode(r, lam)
                x = p - m
                assert np.linalg.matrix_rank(np.stack([vec(x), vec(r)]), tol=1e-8) == 1
                assert np.linalg.eigvalsh(p).min() > -1e-12 and np.linalg.eigvalsh(m).min() > -1e-12


class TestEP:
    def test_three_level_ep(self):
        rep = detect_ep(build_superoperator(three_level_model(2.0, 1.0)))
        q = rep.near(-0.5)
        assert (q.algebraic, q.geometric, q.blocks) == (4, 2, (2, 2))
        h = rep.near(-1.0)
        assert (h.algebraic, h.geometric, h.blocks) == (4, 2, (3, 1))
        assert rep.near(0).blocks == (1,)
        assert sorted(rep.ep_orders) == [1, 2, 3]

    def test_no_ep_away(self):
        rep = detect_ep(build_superoperator(three_level_model(3.0, 1.0)))
        assert not rep.exceptional()
        assert all(c.algebraic == c.geometric for c in rep.clusters)

    def test_trivial_diagonalizable(self):
        rep = detect_ep(build_superoperator(trivial_model()))
        assert [c.blocks for c in rep.clusters] == [(1,) * 9]

    def test_ambiguous_tolerance(self):
        # clusters 7e-4 apart with radius 5e-4 cannot be told apart
        a = np.diag([0.0, -1.0, -1.0 - 7e-4, -5.0]).astype(complex)
        with pytest.raises(EPAmbiguityError):
            detect_ep(a, cluster_tol=1e-4)
        # one cluster whose spread exceeds the rank tolerance
        b = np.diag([0.0, -1.0, -1.0 - 3e-4, -5.0]).astype(complex)
        with pytest.raises(EPAmbiguityError):
            detect_ep(b, cluster_tol=1e-4)

    def test_near_missing(self):
        rep = detect_ep(build_superoperator(three_level_model(3.0, 1.0)))
        with pytest.raises(KeyError):
            rep.near(7.0)


class TestReference:
    def test_ep_values_and_modes(self):
        ref = three_level_reference(2.0, 1.0)
        assert ref.kappa == 0
        np.testing.assert_allclose(ref.eigenvalues, [0, -0.5, -0.5, -0.5, -0.5, -1, -1, -1, -1])
        np.testing.assert_allclose(ref.right_modes[1], ref.right_modes[3])
        np.testing.assert_allclose(ref.right_modes[5], ref.right_modes[6])
        np.testing.assert_allclose(ref.right_modes[5], ref.right_modes[7])
        assert not np.allclose(ref.right_modes[7], ref.right_modes[8])

    def test_closed_system(self):
        ref = three_level_reference(0.0, 1.0)
        assert ref.kappa == pytest.approx(2j)
        np.testing.assert_allclose(ref.eigenvalues.real, 0, atol=1e-15)

    def test_biorthonormal(self):
        ref = three_level_reference(1.0, 0.3)
        gram = np.einsum("aij,bji->ab", ref.left_normalized, ref.right_normalized)
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)

    def test_modes_are_eigenmatrices(self):
        g, w = 1.0, 0.3
        sup = build_superoperator(three_level_model(g, w))
        ref = three_level_reference(g, w)
        for lam, r in zip(ref.eigenvalues, ref.right_modes):
            np.testing.assert_allclose(sup.apply(r), lam * r, atol=1e-12)

    def test_rejects(self):
        with pytest.raises(ValueError):
            three_level_reference(1.0, 0.0)
