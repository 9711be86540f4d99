import math

import numpy as np
import pytest

from tuckerkit.linalg import orth_complement, random_orthonormal, truncated_schatten
from tuckerkit.perturbation import (
    complement_noise,
    complement_noise_grid_rank1,
    complement_upper_bound,
    evaluate_bounds_d3,
    evaluate_bounds_general,
    evaluate_bounds_partial,
    low_rank_capture,
    lower_bound_instance,
    noise_projection_bound,
    projected_noise,
    signal_strength,
    PerturbationReport,
)
from tuckerkit.simulate import gen_low_rank_instance
from tuckerkit.tensor import (
    hs_norm,
    matricize,
    mode_product,
    multi_mode_product,
    partial_groups,
)


class TestSignalStrength:
    def test_gapped_diagonal_core(self):
        rng = np.random.default_rng(0)
        T, _, _ = gen_low_rank_instance((8, 9, 10), 3, 2.5, rng)
        assert signal_strength(T, (3, 3, 3)) == pytest.approx(2.5, abs=1e-9)

    def test_zero_tensor(self):
        assert signal_strength(np.zeros((4, 4, 4)), (1, 1, 1)) == 0.0

    def test_matrix_full_rank(self):
        M = np.random.default_rng(1).standard_normal((5, 7))
        direct = np.linalg.svd(M, compute_uv=False)[-1]
        assert signal_strength(M, (5, 5)) == pytest.approx(direct, abs=1e-12)


class TestProjectedNoise:
    def test_zero_noise(self):
        factors = [np.eye(4)[:, :2]] * 3
        level, per_group = projected_noise(np.zeros((4, 4, 4)), factors, (2, 2, 2))
        assert level == 0.0 and per_group == (0.0, 0.0, 0.0)

    def test_collapses_to_core_unfolding(self):
        # noise built from the same factors at full rank reduces to the core
        rng = np.random.default_rng(2)
        S = rng.standard_normal((3, 3, 3))
        factors = [random_orthonormal(7, 3, rng) for _ in range(3)]
        Z = multi_mode_product(S, factors)
        _, per_group = projected_noise(Z, factors, (3, 3, 3), q=math.inf)
        for k in range(3):
            expected = truncated_schatten(matricize(S, k), 3, math.inf)
            assert per_group[k] == pytest.approx(expected, abs=1e-10)

    def test_gaussian_magnitude_band(self):
        p, r = 60, 3
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            Z = rng.standard_normal((p, p, p))
            factors = [random_orthonormal(p, r, rng) for _ in range(3)]
            _, per_group = projected_noise(Z, factors, (r, r, r))
            for value in per_group:
                assert 0.5 <= value / (math.sqrt(p) + r) <= 2.0

    def test_max_over_groups(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((5, 6, 7))
        factors = [random_orthonormal(p, 2, rng) for p in (5, 6, 7)]
        level, per_group = projected_noise(Z, factors, (2, 2, 2))
        assert level == max(per_group)


class TestComplementNoise:
    def test_zero_noise(self):
        rng = np.random.default_rng(4)
        factors = [random_orthonormal(4, 1, rng) for _ in range(3)]
        est = complement_noise(np.zeros((4, 4, 4)), factors, (1, 1, 1), 2, rng=rng)
        assert est.value == 0.0

    def test_full_rank_empty_complement(self):
        rng = np.random.default_rng(5)
        Z = rng.standard_normal((3, 3, 3))
        factors = [random_orthonormal(3, 3, rng) for _ in range(3)]
        est = complement_noise(Z, factors, (3, 3, 3), 2, rng=rng)
        assert est.value == 0.0
        assert est.modes is None

    @pytest.mark.parametrize("order", [2, 3])
    def test_matches_angle_grid_oracle(self, order):
        for seed in range(6):
            rng = np.random.default_rng(200 + seed)
            Z = rng.standard_normal((3, 3, 3))
            factors = [random_orthonormal(3, 1, rng) for _ in range(3)]
            est = complement_noise(Z, factors, (1, 1, 1), order, budget=6, rng=rng)
            oracle = complement_noise_grid_rank1(Z, factors, order)
            assert est.value == pytest.approx(oracle, rel=0.02)

    def test_value_certified_at_maximizer(self):
        # re-evaluate the objective at the stored directions, independently
        rng = np.random.default_rng(6)
        Z = rng.standard_normal((5, 6, 7))
        factors = [random_orthonormal(p, 2, rng) for p in (5, 6, 7)]
        est = complement_noise(Z, factors, (2, 2, 2), 2, budget=3, rng=rng)
        k, (mode,) = est.group_index, est.modes
        V = est.directions[0]
        direction = orth_complement(factors[mode]) @ V
        out = Z
        for m in range(3):
            if m == k:
                continue
            B = direction.T if m == mode else factors[m].T
            out = mode_product(out, m, B)
        objective = truncated_schatten(matricize(out, k), 2, math.inf)
        assert est.value == pytest.approx(objective, abs=1e-10)
        assert est.value <= est.upper_bound + 1e-10

    def test_order_out_of_range(self):
        rng = np.random.default_rng(7)
        factors = [random_orthonormal(4, 1, rng) for _ in range(3)]
        with pytest.raises(ValueError):
            complement_noise(np.zeros((4, 4, 4)), factors, (1, 1, 1), 1, rng=rng)
        with pytest.raises(ValueError):
            complement_noise(np.zeros((4, 4, 4)), factors, (1, 1, 1), 4, rng=rng)

    def test_partial_groups_skip_dense_modes(self):
        rng = np.random.default_rng(8)
        Z = rng.standard_normal((5, 6, 7))
        groups = partial_groups(Z.shape, (1, 2), (2, 2))
        factors = [random_orthonormal(6, 2, rng), random_orthonormal(7, 2, rng)]
        est = complement_noise(Z, factors, groups, 2, budget=2, rng=rng)
        # with only two grouped modes, S is always the other grouped mode
        assert est.modes in ((1,), (2,))

    def test_upper_bound_dominates(self):
        rng = np.random.default_rng(9)
        Z = rng.standard_normal((3, 3, 3))
        factors = [random_orthonormal(3, 1, rng) for _ in range(3)]
        upper = complement_upper_bound(Z, (1, 1, 1))
        for order in (2, 3):
            grid = complement_noise_grid_rank1(Z, factors, order)
            assert grid <= upper + 1e-10


class TestLowRankCapture:
    def test_exactly_low_rank_input(self):
        rng = np.random.default_rng(10)
        T, _, _ = gen_low_rank_instance((7, 7, 7), 2, 1.0, rng)
        est = low_rank_capture(T, (2, 2, 2), restarts=4, rng=rng)
        assert est.value == pytest.approx(hs_norm(T), abs=1e-8)

    def test_single_entry(self):
        Z = np.zeros((4, 5, 6))
        Z[1, 2, 3] = -7.0
        est = low_rank_capture(Z, (1, 1, 1), restarts=3, rng=0)
        assert est.value == pytest.approx(7.0, abs=1e-9)

    def test_orthogonally_decomposable(self):
        rng = np.random.default_rng(11)
        U = [random_orthonormal(6, 2, rng) for _ in range(3)]
        Z = 3.0 * np.einsum("i,j,k->ijk", U[0][:, 0], U[1][:, 0], U[2][:, 0])
        Z += 1.0 * np.einsum("i,j,k->ijk", U[0][:, 1], U[1][:, 1], U[2][:, 1])
        est = low_rank_capture(Z, (1, 1, 1), restarts=12, rng=rng)
        assert est.value == pytest.approx(3.0, abs=1e-6)

    def test_capture_residual_split(self):
        # captured^2 + residual^2 == total^2 at every restart's fit; the
        # best-capture candidate is exactly the least-residual candidate
        rng = np.random.default_rng(12)
        Z = rng.standard_normal((5, 5, 5))
        from tuckerkit.decomposition import hooi

        seeds = np.random.default_rng(13).integers(0, 2**31, size=6)
        captured, residual = [], []
        for seed in seeds:
            fit = hooi(Z, (2, 2, 2), init="random", random_state=int(seed))
            captured.append(fit.captured_norm)
            residual.append(hs_norm(Z - fit.reconstruction))
            assert captured[-1] ** 2 + residual[-1] ** 2 == pytest.approx(
                hs_norm(Z) ** 2, rel=1e-9
            )
        assert int(np.argmax(captured)) == int(np.argmin(residual))

    def test_monotone_in_rank(self):
        Z = np.random.default_rng(14).standard_normal((6, 6, 6))
        values = [
            low_rank_capture(Z, (r, r, r), restarts=6, rng=np.random.default_rng(99)).value
            for r in (1, 2, 3)
        ]
        assert values[0] <= values[1] + 1e-9 <= values[2] + 2e-9

    def test_reports_trivial_upper_bound(self):
        Z = np.random.default_rng(15).standard_normal((4, 4, 4))
        est = low_rank_capture(Z, (1, 1, 1), restarts=2, rng=1)
        assert est.upper_bound == pytest.approx(hs_norm(Z))
        assert est.value <= est.upper_bound


def test_level_below_capture_q2_small_instances():
    # order >= 1 levels at q=2 stay below the capture value; log any
    # counterexample instance rather than failing silently
    violations = []
    for seed in range(50):
        rng = np.random.default_rng(500 + seed)
        Z = rng.standard_normal((3, 3, 3))
        factors = [random_orthonormal(3, 1, rng) for _ in range(3)]
        capture = low_rank_capture(Z, (1, 1, 1), restarts=20, rng=rng).value
        level1, _ = projected_noise(Z, factors, (1, 1, 1), q=2)
        levels = [level1]
        for order in (2, 3):
            levels.append(complement_noise_grid_rank1(Z, factors, order, q=2))
        for order, level in enumerate(levels, start=1):
            if level > capture + 1e-8:
                violations.append((seed, order, level, capture))
    assert not violations, f"levels exceeded capture on: {violations}"


class TestNoiseProjectionBound:
    def test_equal_bases_reduce_to_full_term(self):
        rng = np.random.default_rng(16)
        Z = rng.standard_normal((5, 6, 7))
        factors = [random_orthonormal(p, 2, rng) for p in (5, 6, 7)]
        split = noise_projection_bound(Z, factors, factors)
        assert split.rhs == pytest.approx(split.lhs, rel=1e-9)
        assert split.terms[(0, 1, 2)] == pytest.approx(split.lhs, rel=1e-9)

    def test_zero_noise(self):
        rng = np.random.default_rng(17)
        factors = [random_orthonormal(4, 2, rng) for _ in range(3)]
        split = noise_projection_bound(np.zeros((4, 4, 4)), factors, factors)
        assert split.lhs == 0.0 and split.rhs == 0.0

    def test_inequality_audit(self):
        for seed in range(100):
            rng = np.random.default_rng(700 + seed)
            Z = rng.standard_normal((4, 5, 6))
            true = [random_orthonormal(p, 2, rng) for p in (4, 5, 6)]
            fitted = [random_orthonormal(p, 2, rng) for p in (4, 5, 6)]
            split = noise_projection_bound(Z, true, fitted)
            assert split.lhs <= split.rhs + 1e-9 * max(1.0, split.rhs)

    def test_term_count(self):
        rng = np.random.default_rng(18)
        Z = rng.standard_normal((3, 3, 3))
        factors = [random_orthonormal(3, 1, rng) for _ in range(3)]
        split = noise_projection_bound(Z, factors, factors)
        assert len(split.terms) == 8


class TestBoundEvaluators:
    def test_d3_arithmetic(self):
        values = evaluate_bounds_d3(1.0, (1.0, 1.0, 1.0), 0.0, 0.0, 0.0, 100.0, 0.5, 10)
        assert values["subspace_iterate"] == pytest.approx(0.08 + 0.5 / 1024)

    def test_d3_reconstruction_constant(self):
        values = evaluate_bounds_d3(0.0, (0.0,) * 3, 0.0, 0.0, 1.0, 10.0, 0.0, 1)
        assert values["reconstruction_final"] == pytest.approx(13.0)

    def test_d3_all_zero(self):
        values = evaluate_bounds_d3(0.0, (0.0,) * 3, 0.0, 0.0, 0.0, 1.0, 0.0, 0)
        assert values["subspace_iterate"] == 0.0

    def test_d3_conditions(self):
        values = evaluate_bounds_d3(1.0, (1.0,) * 3, 1.0, 1.0, 1.0, 40.0, 0.5, 5)
        assert values["conditions"]["init_error"] is True
        assert values["conditions"]["signal_strength"] == (40.0 >= 16 + 12 * math.sqrt(2))

    def test_general_matches_d3_constant(self):
        general = evaluate_bounds_general(3, [1.0, 0.0, 0.0], (1.0,) * 3, 0.0, 100.0, 0.5, 10)
        d3 = evaluate_bounds_d3(1.0, (1.0,) * 3, 0.0, 0.0, 0.0, 100.0, 0.5, 10)
        # amplification constant is 2^((3+3)/2) == 8 in both forms
        assert general["subspace_iterate"] == pytest.approx(d3["subspace_iterate"])

    def test_general_half_contraction(self):
        # choose the level so the contraction factor is exactly 1/2
        d = 3
        amp = 2 ** ((d + 3) / 2)
        signal = 10.0
        tau1 = signal * math.sqrt(0.5) / (amp + 2)
        values = evaluate_bounds_general(
            d, [tau1, 0.0, 0.0], (tau1,) * 3, 1.0, signal, 0.0, 1
        )
        assert values["contraction_factor"] == pytest.approx(0.5)
        assert values["reconstruction_final"] == pytest.approx(1 + 2 * d * 2 ** ((d - 1) / 2))

    def test_general_noiseless(self):
        values = evaluate_bounds_general(4, [0.0] * 4, (0.0,) * 4, 0.0, 1.0, 0.0, 1)
        assert values["reconstruction_final"] == 0.0

    def test_partial_arithmetic(self):
        values = evaluate_bounds_partial(1.0, (1.0, 1.0), 0.0, 0.0, 16.0, 0.0, 60)
        assert values["subspace_iterate"] == pytest.approx(4 * math.sqrt(2) / 16)
        values = evaluate_bounds_partial(0.0, (0.0, 0.0), 0.0, 1.0, 16.0, 0.0, 1)
        assert values["reconstruction_final"] == pytest.approx(4 * math.sqrt(2) + 1)
        values = evaluate_bounds_partial(0.0, (0.0, 0.0), 0.0, 0.0, 1.0, math.sqrt(2) / 2, 1)
        assert values["subspace_iterate"] == pytest.approx(math.sqrt(2) / 4)


class TestLowerBoundInstance:
    def test_rank_one_placement(self):
        T1, Z1, T2, Z2 = lower_bound_instance((3, 3, 3), 1, 1.0)
        assert T1[0, 0, 0] == 1.0 and np.count_nonzero(T1) == 1
        assert Z1[1, 1, 1] == 1.0 and np.count_nonzero(Z1) == 1
        assert np.array_equal(T2, Z1) and np.array_equal(Z2, T1)

    def test_separation(self):
        T1, _, T2, _ = lower_bound_instance((6, 6, 6), 2, 1.5)
        assert hs_norm(T1 - T2) == pytest.approx(math.sqrt(2) * 1.5, abs=1e-12)

    def test_zero_energy(self):
        for block in lower_bound_instance((4, 4, 4), 2, 0.0):
            assert not block.any()

    def test_shared_observation_bit_exact(self):
        T1, Z1, T2, Z2 = lower_bound_instance((5, 6, 7), 2, 0.7)
        assert np.array_equal(T1 + Z1, T2 + Z2)

    def test_rank_guard(self):
        with pytest.raises(ValueError):
            lower_bound_instance((3, 3, 3), 2, 1.0)


def test_report_serialization_round_trip():
    report = PerturbationReport(
        schatten_q=math.inf,
        signal_strength=5.0,
        init_error=0.5,
        aligned_level=2.0,
        aligned_per_group=(2.0, 1.0, 1.5),
        complement_estimates={},
        complement_upper_bound=3.0,
        capture_estimate={"value": 1.0},
        bound_values={"subspace_final": 0.1, "vacuous": math.inf},
        empirical_values={"rmse": 0.05},
    )
    import json

    data = json.loads(report.to_json())
    assert data["schatten_q"] == "inf"
    assert data["bound_values"]["vacuous"] == "inf"
    assert data["aligned_per_group"] == [2.0, 1.0, 1.5]
    with pytest.raises(ValueError):
        PerturbationReport(
            schatten_q=2,
            signal_strength=1.0,
            init_error=0.0,
            aligned_level=0.5,
            aligned_per_group=(2.0,),
            complement_estimates={},
            complement_upper_bound=1.0,
            capture_estimate={},
            bound_values={},
            empirical_values={},
        )
