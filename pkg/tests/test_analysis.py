import numpy as np
import pytest

from deot.analysis import (ErrorDecomposition, decompose_errors,
                           default_gip_params, kernel_error_propagation,
                           kernel_gap_frobenius, original_optimum,
                           protocol_mismatch_check, surrogate_value,
                           convergence_error_curve)
from deot.measures import CostSpec, uniform_measure
from deot.netsim import (AgentPartition, exact_kernel_blocks,
                         protocol_generator, storage_protocol)
from deot.sinkhorn import sinkhorn_oracle
from deot.solver import SolverConfig


def partition(n=20, m=20, I=2, J=2, seed=40, shift=0.3, scale=0.2):
    rng = np.random.default_rng(seed)
    mu = uniform_measure(rng.normal(size=(n, 2)) * scale)
    gamma = uniform_measure(rng.normal(size=(m, 2)) * scale + shift)
    return AgentPartition.create(mu, gamma, I, J, seed=seed), mu, gamma


SPEC = CostSpec("squared_euclidean", 0.5)


class TestReferenceSolvers:
    def test_original_optimum_equals_pooled_sinkhorn_for_equal_sizes(self):
        part, mu, gamma = partition()
        val, dual = original_optimum(part, SPEC)
        ref = sinkhorn_oracle(mu, gamma, SPEC, tol=1e-12)
        assert val == pytest.approx(ref.value, abs=1e-8)

    def test_surrogate_equals_original_under_storage_protocol(self):
        part, _, _ = partition(seed=41)
        e = storage_protocol(*part.storage_vectors()).values
        kernels = exact_kernel_blocks(part, SPEC)
        w_tilde = surrogate_value(part, kernels, e, SPEC.epsilon)
        w, _ = original_optimum(part, SPEC)
        assert w_tilde == pytest.approx(w, abs=1e-8)


class TestDecomposition:
    def test_triangle_inequality_and_isolation(self):
        part, _, _ = partition(seed=42)
        e = storage_protocol(*part.storage_vectors())
        cfg = SolverConfig(epsilon=0.5, eta0=5.0, T=800, L=1, seed=0,
                           record_every=400)
        dec = decompose_errors(part, e, cfg)
        assert dec.triangle_holds()
        # ideal protocol + exact kernel: model and kernel errors vanish
        assert dec.e_model <= 1e-7
        assert dec.e_kernel == 0.0
        assert dec.e_algorithm > 0.0

    def test_kernel_error_isolated_by_sketch(self):
        part, _, _ = partition(seed=43)
        e = storage_protocol(*part.storage_vectors())
        cfg = SolverConfig(epsilon=0.5, eta0=5.0, T=400, L=1, seed=0,
                           kernel_source="approximated", P=128,
                           record_every=200)
        dec = decompose_errors(part, e, cfg)
        assert dec.e_kernel > 0.0
        assert dec.triangle_holds()

    def test_model_error_isolated_by_mismatched_protocol(self):
        part, _, _ = partition(seed=44)
        E = protocol_generator("sparse", 2, 2, 0.5, seed=2)
        cfg = SolverConfig(epsilon=0.5, eta0=5.0, T=400, L=1, seed=0,
                           record_every=200)
        dec = decompose_errors(part, E, cfg)
        assert dec.e_model > 0.0
        assert dec.triangle_holds()


class TestMismatchBound:
    def test_holds_on_ideal_protocol(self):
        # sigma = 0 and W~ = W: both sides vanish
        part, _, _ = partition(seed=45, shift=1.5)
        E = storage_protocol(*part.storage_vectors())
        chk = protocol_mismatch_check(part, E, CostSpec("squared_euclidean", 0.1))
        assert chk.sigma == pytest.approx(0.0)
        assert chk.lhs <= 1e-6
        assert chk.holds

    def test_holds_on_sparse_protocol(self):
        part, _, _ = partition(seed=46, shift=1.5)
        E = protocol_generator("sparse", 2, 2, 0.25, seed=3)
        chk = protocol_mismatch_check(part, E, CostSpec("squared_euclidean", 0.1))
        assert chk.tau > 0 and chk.sigma > 0
        assert chk.holds

    def test_rejects_negative_pairwise_values(self):
        # identical overlapping clouds at large epsilon give negative
        # pairwise EOT values, outside the bound's hypothesis
        part, _, _ = partition(seed=47, shift=0.0, scale=0.05)
        E = storage_protocol(*part.storage_vectors())
        with pytest.raises(ValueError, match="negative"):
            protocol_mismatch_check(part, E, CostSpec("squared_euclidean", 2.0))


class TestKernelPropagation:
    def test_frobenius_gap_shrinks_with_P(self):
        part, _, _ = partition(seed=48)
        gaps = [kernel_gap_frobenius(part, SPEC, P, seed=0)
                for P in (32, 4096)]
        assert gaps[1] < gaps[0]

    def test_propagation_rows_and_ratio(self):
        part, _, _ = partition(seed=49)
        rows, lip = kernel_error_propagation(part, SPEC, [64, 256], n_seeds=2)
        assert len(rows) == 4
        assert all(r["kernel_gap_fro"] > 0 for r in rows)
        assert lip >= 0

    def test_default_gip_params(self):
        part, _, _ = partition(seed=50)
        params = default_gip_params(part, SPEC)
        assert params.lipschitz_G > 0
        assert params.delta == 0.1


class TestConvergenceCurve:
    def test_rows_have_bound_terms(self):
        part, _, _ = partition(seed=51)
        E = storage_protocol(*part.storage_vectors())
        cfg = SolverConfig(epsilon=0.5, eta0=2.0, T=50, L=1, seed=0,
                           record_every=50)
        rows = convergence_error_curve(part, E, cfg, t_grid=[20, 50],
                                       P_grid=[64], n_seeds=2)
        assert len(rows) == 2
        for r in rows:
            assert {"t", "P", "measured_error", "term_algorithm",
                    "term_kernel", "term_model"} <= set(r)
        # the algorithmic bound term decays with t
        assert rows[0]["term_algorithm"] > rows[1]["term_algorithm"]
