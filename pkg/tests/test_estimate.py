import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindsr2d.model import (
    Dimensions,
    ShiftPair,
    build_lifted_dictionary,
    generate_random_instance,
)
from blindsr2d.estimate import (
    least_squares_lifted,
    match_shifts,
    normalized_orientation,
    recover,
    reconstruct_inputs,
    shift_error,
    split_magnitudes,
)


class TestLeastSquares:
    def test_single_shift_round_trip(self):
        dims = Dimensions(n_half=3, num_inputs=1, subspace_dims=(1,), num_shifts=1)
        inst = generate_random_instance(dims, seed=0)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        fit = least_squares_lifted(inst.shifts, dictionary, inst.y)
        truth = inst.amplitudes[0] * inst.orientations[0]
        np.testing.assert_allclose(fit.products[0][0], truth, rtol=1e-8)
        assert fit.residual <= 1e-8 * np.linalg.norm(inst.y)
        assert not fit.rank_deficient

    def test_zero_observation(self):
        dims = Dimensions(n_half=3, num_inputs=2, subspace_dims=(1, 2), num_shifts=1)
        inst = generate_random_instance(dims, seed=1)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        fit = least_squares_lifted(inst.shifts, dictionary, np.zeros(7))
        for row in fit.products:
            for prod in row:
                np.testing.assert_allclose(prod, 0, atol=1e-12)
        assert fit.residual == pytest.approx(0.0, abs=1e-14)

    def test_multi_input_multi_shift_round_trip(self):
        dims = Dimensions(n_half=5, num_inputs=2, subspace_dims=(2, 1), num_shifts=2)
        inst = generate_random_instance(dims, seed=2, min_separation=0.25)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        fit = least_squares_lifted(inst.shifts, dictionary, inst.y)
        for k in range(2):
            for j in range(2):
                truth = inst.amplitudes[k] * inst.orientations[j]
                np.testing.assert_allclose(fit.products[k][j], truth, atol=1e-7)

    def test_rank_deficiency_flagged(self):
        dims = Dimensions(n_half=3, num_inputs=1, subspace_dims=(1,), num_shifts=2)
        shift = ShiftPair(0.3, 0.6)
        inst = generate_random_instance(dims, seed=3, shifts=[shift, shift])
        dictionary = build_lifted_dictionary(inst.bases, dims)
        fit = least_squares_lifted(inst.shifts, dictionary, inst.y)
        assert fit.rank_deficient

    def test_requires_shifts(self):
        dims = Dimensions(n_half=2, num_inputs=1, subspace_dims=(1,), num_shifts=1)
        inst = generate_random_instance(dims, seed=4)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        with pytest.raises(ValueError):
            least_squares_lifted([], dictionary, inst.y)


class TestSplitMagnitudes:
    def test_modulus_arithmetic(self):
        products = [[np.array([3j, 4j])]]
        split = split_magnitudes(products, h_norms=[1.0])
        assert split.amplitude_magnitudes[0] == pytest.approx(5.0, abs=1e-12)

    def test_inconsistent_inputs_reported(self):
        base = np.array([1.0 + 0j])
        products = [[base, 1.1 * base]]
        split = split_magnitudes(products, h_norms=[1.0, 1.0])
        assert split.discrepancy == pytest.approx(0.1, abs=1e-12)

    def test_zero_vector_flagged(self):
        products = [[np.zeros(2, dtype=complex), np.array([1.0 + 0j])]]
        split = split_magnitudes(products)
        assert (0, 0) in split.degenerate
        assert split.amplitude_magnitudes[0] == pytest.approx(1.0)

    def test_phase_exchange_invariance(self):
        rng = np.random.default_rng(5)
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        h /= np.linalg.norm(h)
        b = np.exp(1j * 0.7)
        for phi in (0.0, 0.9, -2.1):
            products = [[(b * np.exp(1j * phi)) * (np.exp(-1j * phi) * h)]]
            split = split_magnitudes(products)
            assert split.amplitude_magnitudes[0] == pytest.approx(1.0, abs=1e-12)


class TestReconstructInputs:
    def test_rank_one_exact(self):
        dims = Dimensions(n_half=3, num_inputs=1, subspace_dims=(1,), num_shifts=1)
        inst = generate_random_instance(dims, seed=6)
        mags, split = reconstruct_inputs(inst.bases,
                                         [[inst.amplitudes[0] * inst.orientations[0]]])
        np.testing.assert_allclose(mags[0], np.abs(inst.input_signals()[0]), atol=1e-12)
        assert split.amplitude_magnitudes[0] == pytest.approx(1.0, abs=1e-12)

    def test_oracle_shifts_round_trip(self):
        dims = Dimensions(n_half=5, num_inputs=2, subspace_dims=(2, 1), num_shifts=2)
        inst = generate_random_instance(dims, seed=7, min_separation=0.25)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        fit = least_squares_lifted(inst.shifts, dictionary, inst.y)
        mags, _ = reconstruct_inputs(inst.bases, fit.products)
        for x_true, x_hat in zip(inst.input_signals(), mags):
            err = np.linalg.norm(np.abs(x_true) - x_hat) / np.linalg.norm(x_true)
            assert err <= 1e-8

    def test_orientation_phase_convention(self):
        vec = np.array([0.0, -1j * 2.0, 1.0])
        normalized = normalized_orientation(vec)
        assert abs(np.linalg.norm(normalized) - 1.0) < 1e-12
        first_nz = normalized[1]
        assert first_nz.imag == pytest.approx(0.0, abs=1e-12)
        assert first_nz.real > 0


class TestShiftError:
    def small_dims(self, L=13, S=1):
        return Dimensions(n_half=(L - 1) // 2, num_inputs=1, subspace_dims=(1,),
                          num_shifts=S)

    def test_perfect_recovery(self):
        dims = self.small_dims()
        shifts = [ShiftPair(0.2, 0.9)]
        assert shift_error(shifts, shifts, dims) == pytest.approx(0.0, abs=1e-14)

    def test_formula_arithmetic(self):
        dims = self.small_dims(L=13, S=1)
        truth = [ShiftPair(0.40, 0.70)]
        est = [ShiftPair(0.41, 0.70)]
        assert shift_error(truth, est, dims) == pytest.approx(0.13, abs=1e-10)

    def test_matching_invariance(self):
        dims = self.small_dims(L=13, S=2)
        truth = [ShiftPair(0.1, 0.2), ShiftPair(0.6, 0.8)]
        est = [ShiftPair(0.62, 0.81), ShiftPair(0.11, 0.19)]
        swapped = list(reversed(est))
        a = shift_error(truth, est, dims)
        b = shift_error(truth, swapped, dims)
        assert a == pytest.approx(b, abs=1e-12)
        # brute-force both assignments: the reported value is the minimum
        def total(assignment):
            return sum(np.hypot(min(abs(t.tau - e.tau), 1 - abs(t.tau - e.tau)),
                                min(abs(t.nu - e.nu), 1 - abs(t.nu - e.nu)))
                       for t, e in assignment)
        direct = min(total(zip(truth, est)), total(zip(truth, swapped)))
        assert a == pytest.approx(13 / 2 * direct, abs=1e-12)

    def test_wrap_around_equivalence(self):
        dims = self.small_dims()
        truth = [ShiftPair(0.0, 0.5)]
        est = [ShiftPair(1.0, 0.5)]  # same point on the torus
        assert shift_error(truth, est, dims) == pytest.approx(0.0, abs=1e-12)

    def test_missing_peak_penalty(self):
        dims = self.small_dims(L=13, S=2)
        truth = [ShiftPair(0.1, 0.2), ShiftPair(0.6, 0.8)]
        est = [ShiftPair(0.1, 0.2)]
        expected = 13 / 2 * (0.0 + 0.5 * np.sqrt(2))
        assert shift_error(truth, est, dims) == pytest.approx(expected, abs=1e-12)

    @given(st.lists(st.tuples(st.floats(0, 0.999), st.floats(0, 0.999)),
                    min_size=1, max_size=3))
    @settings(max_examples=40, deadline=None)
    def test_permutation_invariance_property(self, pairs):
        import itertools

        dims = Dimensions(n_half=6, num_inputs=1, subspace_dims=(1,),
                          num_shifts=len(pairs))
        truth = [ShiftPair(t, n) for t, n in pairs]
        est = [ShiftPair((t + 0.01) % 1, n) for t, n in pairs]
        base = shift_error(truth, est, dims)
        for perm in itertools.permutations(est):
            assert shift_error(truth, list(perm), dims) == pytest.approx(base, abs=1e-9)


class TestRecoverPipeline:
    def test_full_estimation_stage(self):
        dims = Dimensions(n_half=5, num_inputs=2, subspace_dims=(1, 2), num_shifts=1)
        inst = generate_random_instance(dims, seed=8)
        dictionary = build_lifted_dictionary(inst.bases, dims)
        result = recover(inst, dictionary, inst.shifts)
        assert result.s_hat == 1
        assert result.metrics["shift_error"] == pytest.approx(0.0, abs=1e-12)
        assert max(result.metrics["input_relative_errors"]) <= 1e-8
        data = result.to_dict()
        assert data["s_hat"] == 1
        assert len(data["input_magnitudes"]) == 2
