import math

import numpy as np
import pytest

from dase.graph import BlockModel, CommunityAssignment, CorePeripheryParams, expected_matrices
from dase.theory import (
    ChernoffInputs,
    ase_block_moments,
    ase_chernoff,
    block_sizes,
    bound_constants_from_model,
    bound_core,
    bound_general_dase,
    chernoff_information,
    chernoff_objective,
    chernoff_pair,
    concentration_check,
    core_gram_bound,
    dase_block_moments,
    dase_chernoff,
    doubled_covariance,
    general_gram_bound,
    t_constants,
)
from oracles import brute_block_moments, chernoff_grid, enumerate_doubled_covariance, t_constants_sum

DENSE = np.array([[0.8, 0.48], [0.48, 0.24]])
CORE = (0.08, 0.048, 0.048, 0.024)

# grid-oracle values (200k-point grid, no refinement) for DENSE, pi=(.5,.5), N=1000
CI_ASE_ORACLE = 0.04801409235215354
CI_DASE_ORACLE = 16.492116297141994


class TestBlockMoments:
    def test_ase_half(self):
        c = ase_block_moments(np.full((2, 2), 0.5), [0.5, 0.5])
        assert np.all(c.C == 0.25)

    def test_ase_dense(self):
        c = ase_block_moments(DENSE, [0.5, 0.5])
        assert np.allclose(c.C, [[0.16, 0.2496], [0.2496, 0.1824]], rtol=1e-12)
        assert np.array_equal(c.M, DENSE)

    def test_ase_rejects_degenerate(self):
        with pytest.raises(ValueError):
            ase_block_moments([[1.0, 0.5], [0.5, 0.2]], [0.5, 0.5])

    def test_dase_single_block(self):
        p, n = 0.3, 17
        c = dase_block_moments(BlockModel([[p]], [1.0]), [n])
        assert c.M[0, 0] == pytest.approx(n * p**2)
        assert c.C[0, 0] == pytest.approx(n * p**2 * (1 - p**2))

    def test_dase_core_periphery_display(self):
        p, q, r, s = 0.08, 0.05, 0.04, 0.024
        n1, n2 = 300, 700
        c = dase_block_moments(BlockModel([[p, q], [r, s]], [0.3, 0.7]), [n1, n2])
        expect = [[n1 * p * p + n2 * q * r, n1 * p * q + n2 * q * s],
                  [n1 * p * r + n2 * r * s, n1 * q * r + n2 * s * s]]
        assert np.allclose(c.M, expect, rtol=1e-12)

    def test_dase_matches_brute_force(self):
        rng = np.random.default_rng(0)
        B = rng.uniform(0.05, 0.95, (3, 3))
        labels = np.repeat([0, 1, 2], [12, 10, 18])
        c = dase_block_moments(BlockModel(B, [0.3, 0.25, 0.45]), [12, 10, 18])
        M, C = brute_block_moments(B, labels)
        assert np.allclose(c.M, M, rtol=1e-9, atol=0)
        assert np.allclose(c.C, C, rtol=1e-9, atol=0)


class TestChernoff:
    def test_identical_rows_give_zero(self):
        M = np.array([[0.3, 0.3], [0.3, 0.3]])
        inputs = ChernoffInputs(M, M * (1 - M), np.diag([0.5, 0.5]))
        assert chernoff_information(inputs, require_full_rank=False) == 0.0
        with pytest.raises(ValueError):
            chernoff_information(inputs)

    def test_equal_variances_symmetric(self):
        M = np.array([[0.6, 0.2], [0.2, 0.4]])
        C = np.full((2, 2), 0.2)
        inputs = ChernoffInputs(M, C, np.diag([0.4, 0.6]))
        _, t_star = chernoff_pair(inputs, 0, 1)
        assert abs(t_star - 0.5) < 1e-7
        t = np.linspace(0.01, 0.99, 51)
        assert np.allclose(chernoff_objective(inputs, 0, 1, t), chernoff_objective(inputs, 0, 1, 1 - t))

    def test_matches_grid_oracle(self):
        assert ase_chernoff(BlockModel(DENSE, [0.5, 0.5])) == pytest.approx(CI_ASE_ORACLE, rel=1e-9)
        assert dase_chernoff(BlockModel(DENSE, [0.5, 0.5]), 1000) == pytest.approx(CI_DASE_ORACLE, rel=1e-9)

    def test_random_models_against_grid(self):
        rng = np.random.default_rng(1)
        for i in range(4):
            B = rng.uniform(0.1, 0.9, (3, 3))
            B = (B + B.T) / 2 if i % 2 else B
            pi = np.array([0.2, 0.3, 0.5])
            ours = chernoff_information(ase_block_moments(B, pi))
            ref = max(chernoff_grid(B, B * (1 - B), pi), 0.0)
            assert ours >= ref - 1e-12
            assert ours == pytest.approx(ref, rel=1e-7, abs=1e-12)

    @pytest.mark.parametrize("N", range(200, 2001, 200))
    def test_dase_exceeds_ase(self, N):
        m = BlockModel(DENSE, [0.5, 0.5])
        assert dase_chernoff(m, N) > ase_chernoff(m)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        B = rng.uniform(0.1, 0.9, (3, 3))
        inputs = ase_block_moments(B, [0.2, 0.3, 0.5])
        base = chernoff_information(inputs)
        for order in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
            assert chernoff_information(inputs.permuted(order)) == pytest.approx(base, rel=1e-12)

    def test_needs_two_blocks(self):
        with pytest.raises(ValueError):
            chernoff_information(ase_block_moments([[0.3]], [1.0]))

    def test_block_sizes(self):
        assert block_sizes([0.5, 0.5], 1001).tolist() == [501, 500]
        assert block_sizes([0.1, 0.9], 1000).sum() == 1000


def oracle_constants(B, sizes):
    """Bound constants from scratch: dense SVD and explicit pairwise loops."""
    B = np.asarray(B, dtype=float)
    N = float(sum(sizes))
    Bt = np.zeros_like(B)
    K = B.shape[0]
    for a in range(K):
        for b in range(K):
            Bt[a, b] = sum(B[a, c] * sizes[c] * B[c, b] for c in range(K))
    L, lam, Rt = np.linalg.svd(Bt)
    nu = L * np.sqrt(lam)
    mu = Rt.T * np.sqrt(lam)
    sep = min(max(np.linalg.norm(nu[u] - nu[v]), np.linalg.norm(mu[u] - mu[v]))
              for u in range(K) for v in range(u + 1, K))
    return {"btilde": lam[-1] / N, "beta_hat": sep / N, "pi_min": min(sizes) / N}


class TestBounds:
    def test_unit_constants(self):
        class Unit:
            beta_hat = btilde = pi_min = 1.0

        assert bound_general_dase(Unit, math.e) == pytest.approx(288 / math.e)
        assert bound_general_dase(Unit, math.e, directed=False) == pytest.approx(144 / math.e)

    def test_decreasing_in_N(self):
        c = bound_constants_from_model(BlockModel(0.05 * np.array([[1, 0.6], [0.6, 0.3]]), [0.5, 0.5]), [500, 500])
        vals = [bound_general_dase(c, 3 * 2**k) for k in range(12)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_general_formula_recomputation(self):
        B = 0.05 * np.array([[1, 0.6], [0.6, 0.3]])
        c = bound_constants_from_model(BlockModel(B, [0.5, 0.5]), [500, 500])
        o = oracle_constants(B, [500, 500])
        assert c.btilde == pytest.approx(o["btilde"], rel=1e-10)
        assert c.beta_hat == pytest.approx(o["beta_hat"], rel=1e-10)
        N = 1000
        expect = 288 * math.log(N) / (o["beta_hat"] ** 2 * (o["btilde"] * o["pi_min"]) ** 5 * N)
        assert bound_general_dase(c, N) == pytest.approx(expect, rel=1e-9)

    def test_nonpositive_constants(self):
        class Bad:
            beta_hat = 0.0
            btilde = pi_min = 1.0

        with pytest.raises(ValueError):
            bound_general_dase(Bad, 100)

    def test_core_ratio_is_inverse_N(self):
        c = bound_constants_from_model(BlockModel(np.array([[CORE[0], CORE[1]], [CORE[2], CORE[3]]]), [0.5, 0.5]),
                                       [500, 500])
        Ns = np.array([1e3, 1e4, 1e5, 1e6])
        ratio = np.array([bound_core(c, n, "DASE") / bound_core(c, n, "ASE") for n in Ns])
        scaled = ratio * Ns
        assert np.allclose(scaled, scaled[0], rtol=1e-12)
        factor = (144 * c.Ttilde * c.beta**2 * (c.b * c.pi_min) ** 5) / (216 * c.T * c.beta_hat**2 * (c.btilde * c.pi_min) ** 5)
        assert scaled[0] == pytest.approx(factor, rel=1e-12)
        dase = [bound_core(c, n, "DASE") for n in Ns]
        ase = [bound_core(c, n, "ASE") for n in Ns]
        assert all(b < a for a, b in zip(dase, dase[1:]))
        assert np.allclose(np.array(ase) / np.log(Ns), ase[0] / np.log(Ns[0]), rtol=1e-12)

    def test_core_bad_method(self):
        c = bound_constants_from_model(BlockModel(np.array([[0.08, 0.048], [0.048, 0.024]]), [0.5, 0.5]), [5, 5])
        with pytest.raises(ValueError):
            bound_core(c, 10, "SC")


class TestTConstants:
    def test_summation_oracle(self):
        got = t_constants(CorePeripheryParams(*CORE), [0.5, 0.5], 1000)
        ref = t_constants_sum(*CORE, (0.5, 0.5), 1000)
        for key, val in ref.items():
            assert got[key] == pytest.approx(val, rel=1e-12)
        assert got["Ttilde"] * 1000**2 == pytest.approx(got["Ttilde1"] ** 2 + got["Ttilde2"] ** 2, rel=1e-9)

    def test_symmetric_parameters(self):
        t = t_constants(CorePeripheryParams(0.1, 0.1, 0.1, 0.1, check_order=False), [0.3, 0.7], 100,
                        check_order=False)
        assert t["T1"] == pytest.approx(t["T2"])
        assert t["Ttilde1"] == pytest.approx(t["Ttilde2"])

    def test_zero_limit(self):
        t = t_constants(CorePeripheryParams(0.0, 0.0, 0.0, 0.0, check_order=False), [0.5, 0.5], 400,
                        check_order=False)
        assert t["Ttilde1"] == 400

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            t_constants(CorePeripheryParams(0.1, 0.2, 0.05, 0.01, check_order=False), [0.5, 0.5], 10)

    def test_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            s = rng.uniform(0.01, 0.3)
            q, r = rng.uniform(s + 0.01, 0.6, 2)
            p = rng.uniform(max(q, r) + 0.01, 1.0)
            pi1 = rng.uniform(0.05, 0.95)
            t = t_constants(CorePeripheryParams(p, q, r, s), [pi1, 1 - pi1], 500)
            assert 0 < t["T"] <= 2 and 0 < t["Ttilde"] <= 2

    def test_constants_from_model(self):
        B = np.array([[CORE[0], CORE[1]], [CORE[2], CORE[3]]])
        c = bound_constants_from_model(BlockModel(B, [0.5, 0.5]), [500, 500])
        ref = t_constants_sum(*CORE, (0.5, 0.5), 1000)
        assert c.Ttilde == pytest.approx(ref["Ttilde"], rel=1e-12)
        assert c.T == pytest.approx(ref["T"], rel=1e-12)
        for name in ("b", "btilde", "beta", "beta_hat", "pi_min", "T", "Ttilde"):
            assert getattr(c, name) > 0


class TestBoundConstants:
    def test_diagonal_closed_form(self):
        p, n = 0.3, 50
        c = bound_constants_from_model(BlockModel(np.diag([p, p]), [0.5, 0.5]), [n, n])
        o = oracle_constants(np.diag([p, p]), [n, n])
        assert c.btilde == pytest.approx(p**2 / 2, rel=1e-12)
        assert c.btilde == pytest.approx(o["btilde"], rel=1e-12)
        assert c.beta_hat == pytest.approx(o["beta_hat"], rel=1e-12)

    def test_scale_behaviour(self):
        m = BlockModel(np.array([[0.08, 0.048], [0.048, 0.024]]), [0.5, 0.5])
        a = bound_constants_from_model(m, [300, 700])
        b = bound_constants_from_model(m, [600, 1400])
        assert b.btilde == pytest.approx(a.btilde, rel=1e-12)
        assert b.pi_min == pytest.approx(a.pi_min, rel=1e-12)
        # the separation of nu = L sqrt(Lambda) grows like sqrt(N), so beta_hat shrinks like 1/sqrt(N)
        assert b.beta_hat * math.sqrt(2000) == pytest.approx(a.beta_hat * math.sqrt(1000), rel=1e-12)

    def test_rank_collapse(self):
        with pytest.raises(ValueError):
            bound_constants_from_model(BlockModel(np.zeros((2, 2)), [0.5, 0.5]), [5, 5])


class TestConcentration:
    def test_deterministic_graph(self):
        m = BlockModel(np.array([[1.0, 0.0], [1.0, 1.0]]), [0.5, 0.5])
        res = concentration_check(m, CommunityAssignment.from_sizes([4, 4]), 3, seed=0, reference_samples=5)
        assert res.max_deviation_left == 0.0 and res.max_deviation_right == 0.0
        assert res.violations_gram_left == 0

    def test_core_bound_tighter(self):
        N = 100
        t = t_constants(CorePeripheryParams(*CORE), [0.5, 0.5], N)
        assert t["Ttilde1"] < N
        assert core_gram_bound(t["Ttilde1"], N) < general_gram_bound(N)

    def test_small_run(self):
        m = BlockModel(np.array([[CORE[0], CORE[1]], [CORE[2], CORE[3]]]), [0.5, 0.5])
        res = concentration_check(m, CommunityAssignment.from_sizes([10, 10]), 5, seed=1, reference_samples=50)
        assert res.violations_gram_left == 0 and res.violations_gram_right == 0
        assert res.core_bound_left is not None
        with pytest.raises(ValueError):
            concentration_check(m, CommunityAssignment.from_sizes([10, 10]), 0)

    @pytest.mark.parametrize("N", [3, 4])
    def test_covariance_matches_enumeration(self, N):
        rng = np.random.default_rng(N)
        Q = rng.uniform(0.1, 0.9, (N, N))
        np.fill_diagonal(Q, 0)
        for u, v, w in [(0, 1, 2), (1, 2, 0), (0, 2, 1)]:
            exact = enumerate_doubled_covariance(Q, u, v, w)
            assert doubled_covariance(Q, u, v, w) == pytest.approx(exact, abs=1e-12)
            assert doubled_covariance(Q, u, v, w) >= 0

    def test_covariance_on_block_model(self):
        m = BlockModel(np.array([[0.3, 0.2], [0.1, 0.05]]), [0.5, 0.5])
        Q = expected_matrices(m, CommunityAssignment.from_sizes([3, 3])).Q
        assert all(doubled_covariance(Q, u, v, w) >= 0 for u in range(6) for v in range(6) for w in range(6))
