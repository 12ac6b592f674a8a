import numpy as np
import pytest

from blindsr2d.model import (
    Dimensions,
    MatrixTuple,
    ShiftPair,
    build_lifted_dictionary,
    forward_operator,
    generate_random_instance,
    lifted_tuple,
)
from blindsr2d.sdp import assemble_dual_sdp, embed_hermitian, extract_hermitian
from blindsr2d.solver import (
    SolverConfig,
    _consensus_admm,
    project_psd,
    soft_threshold_singular,
    solve_nuclear_ls,
    solve_sdp,
)


class TestProjectPsd:
    def test_clips_negative_eigenvalue(self):
        P = project_psd(np.diag([2.0, -1.0]).astype(complex))
        np.testing.assert_allclose(P, np.diag([2.0, 0.0]), atol=1e-12)

    def test_psd_fixed_point(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        H = A @ A.conj().T
        np.testing.assert_allclose(project_psd(H), H, atol=1e-12)

    def test_distance_matches_clipped_spectrum(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        H = (A + A.conj().T) / 2
        w = np.linalg.eigvalsh(H)
        expected = np.sqrt((np.minimum(w, 0.0) ** 2).sum())
        got = np.linalg.norm(project_psd(H) - H)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_output_hermitian_psd(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
        H = (A + A.conj().T) / 2
        P = project_psd(H)
        np.testing.assert_allclose(P, P.conj().T, atol=1e-13)
        assert np.linalg.eigvalsh(P).min() >= -1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            project_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestSoftThresholdSingular:
    def test_scalar_shrinkage(self):
        A = np.diag([3.0, 1.0]).astype(complex)
        np.testing.assert_allclose(soft_threshold_singular(A, 2.0),
                                   np.diag([1.0, 0.0]), atol=1e-12)

    def test_nonexpansive(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            A = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
            B = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
            level = rng.uniform(0.1, 2.0)
            dist = np.linalg.norm(soft_threshold_singular(A, level)
                                  - soft_threshold_singular(B, level))
            assert dist <= np.linalg.norm(A - B) + 1e-12


def _hand_sdp_complex(config):
    """max Re M[0,1] s.t. M Hermitian PSD with unit diagonal; optimum 1."""

    def prox_affine(V, rho):
        X = V[0].copy()
        x = X[0, 1] + 1.0 / (2.0 * rho)
        X[0, 0] = X[1, 1] = 1.0
        X[0, 1] = x
        X[1, 0] = np.conj(x)
        return [X]

    def prox_cone(W, rho):
        return [project_psd(W[0])]

    z0 = [np.eye(2, dtype=complex)]
    x, z, u, rho, iters, r, s, status = _consensus_admm(
        prox_affine, prox_cone, z0, config, lambda blocks: blocks[0][0, 1].real)
    return x[0], status


def _hand_sdp_embedded(config):
    """The same program run on the real symmetric embedding."""

    def prox_affine(V, rho):
        H = extract_hermitian(V[0])
        x = H[0, 1] + 1.0 / (2.0 * rho)
        H[0, 0] = H[1, 1] = 1.0
        H[0, 1] = x
        H[1, 0] = np.conj(x)
        return [embed_hermitian(H)]

    def prox_cone(W, rho):
        return [project_psd(W[0])]

    z0 = [embed_hermitian(np.eye(2, dtype=complex))]
    x, z, u, rho, iters, r, s, status = _consensus_admm(
        prox_affine, prox_cone, z0, config,
        lambda blocks: extract_hermitian(blocks[0])[0, 1].real)
    return extract_hermitian(x[0]), status


class TestHandSdp:
    def test_complex_two_by_two(self):
        config = SolverConfig(max_iters=5000, eps_primal=1e-10, eps_dual=1e-10)
        M, status = _hand_sdp_complex(config)
        assert status == "optimal"
        assert M[0, 1].real == pytest.approx(1.0, abs=1e-7)

    def test_embedded_matches_complex(self):
        config = SolverConfig(max_iters=5000, eps_primal=1e-10, eps_dual=1e-10)
        M_c, _ = _hand_sdp_complex(config)
        M_r, status = _hand_sdp_embedded(config)
        assert status == "optimal"
        assert abs(M_r[0, 1].real - M_c[0, 1].real) <= 1e-8


def small_problem(seed=0, n_half=2, num_inputs=1, subspace_dims=(1,)):
    dims = Dimensions(n_half=n_half, num_inputs=num_inputs,
                      subspace_dims=subspace_dims, num_shifts=1)
    inst = generate_random_instance(dims, seed=seed, shifts=[ShiftPair(0.3, 0.7)])
    return dims, inst


class TestSolveSdp:
    def test_zero_observation(self):
        dims, inst = small_problem(seed=4)
        inst.y = np.zeros(dims.num_samples, dtype=complex)
        sdp = assemble_dual_sdp(inst)
        report = solve_sdp(sdp, SolverConfig(max_iters=2000, eps_primal=1e-9,
                                             eps_dual=1e-9))
        assert report.objective == pytest.approx(0.0, abs=1e-8)
        np.testing.assert_allclose(report.q, 0, atol=1e-7)

    def test_small_instance_reaches_atomic_optimum(self):
        dims, inst = small_problem(seed=5)
        sdp = assemble_dual_sdp(inst)
        report = solve_sdp(sdp, SolverConfig(max_iters=8000, eps_primal=1e-9,
                                             eps_dual=1e-9))
        target = dims.num_inputs * np.abs(inst.amplitudes).sum()
        assert report.status == "optimal"
        assert abs(report.objective - target) <= 1e-5 * target
        # weak duality: scaled-down dual vectors stay feasible and suboptimal
        assert sdp.objective(0.9 * report.q) < report.objective

    def test_returned_point_nearly_feasible(self):
        dims, inst = small_problem(seed=6, subspace_dims=(2,))
        sdp = assemble_dual_sdp(inst)
        report = solve_sdp(sdp, SolverConfig(max_iters=8000, eps_primal=1e-9,
                                             eps_dual=1e-9))
        L2 = dims.num_samples ** 2
        for j, Q in enumerate(report.psd_blocks):
            assert np.linalg.eigvalsh(Q).min() >= -1e-12
            sums = sdp.diag.diagonal_sums(Q)
            assert np.abs(sums - sdp.diag.targets).max() < 1e-6

    def test_determinism(self):
        dims, inst = small_problem(seed=7)
        sdp = assemble_dual_sdp(inst)
        config = SolverConfig(max_iters=500, eps_primal=1e-12, eps_dual=1e-12)
        a = solve_sdp(sdp, config)
        b = solve_sdp(sdp, config)
        assert a.iterations == b.iterations
        assert a.objective == b.objective
        np.testing.assert_array_equal(a.q, b.q)

    def test_iteration_log(self, tmp_path):
        dims, inst = small_problem(seed=8)
        sdp = assemble_dual_sdp(inst)
        log = tmp_path / "iters.csv"
        solve_sdp(sdp, SolverConfig(max_iters=200, eps_primal=1e-12,
                                    eps_dual=1e-12, log_path=str(log)))
        lines = log.read_text().strip().splitlines()
        assert lines[0] == "iteration,objective,primal_residual,dual_residual"
        assert len(lines) == 1 + 200 // 25


class TestSolveNuclear:
    def test_zero_observation(self):
        dims, inst = small_problem(seed=9, num_inputs=2, subspace_dims=(1, 2))
        dictionary = build_lifted_dictionary(inst.bases, dims)
        report = solve_nuclear_ls(dictionary, np.zeros(dims.num_samples),
                                  SolverConfig(max_iters=100))
        assert report.status == "optimal"
        for part in report.parts.parts:
            np.testing.assert_allclose(part, 0, atol=1e-12)

    def test_constraint_satisfied_and_norm_not_above_truth(self):
        dims, inst = small_problem(seed=10, num_inputs=2, subspace_dims=(1, 1))
        dictionary = build_lifted_dictionary(inst.bases, dims)
        report = solve_nuclear_ls(dictionary, inst.y,
                                  SolverConfig(max_iters=20000, eps_primal=1e-8,
                                               eps_dual=1e-8))
        assert report.status == "optimal"
        fit = forward_operator(report.parts, dictionary)
        assert np.linalg.norm(fit - inst.y) <= 1e-7 * np.linalg.norm(inst.y)
        truth_norm = sum(np.linalg.svd(p, compute_uv=False).sum()
                         for p in lifted_tuple(inst).parts)
        assert report.objective <= truth_norm + 1e-5

    def test_determinism(self):
        dims, inst = small_problem(seed=11)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        config = SolverConfig(max_iters=300, eps_primal=1e-10, eps_dual=1e-10)
        a = solve_nuclear_ls(dictionary, inst.y, config)
        b = solve_nuclear_ls(dictionary, inst.y, config)
        assert a.iterations == b.iterations
        assert a.objective == b.objective


class TestConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(eps_primal=0.0)
        with pytest.raises(ValueError):
            SolverConfig(rho=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(over_relax=2.5)
