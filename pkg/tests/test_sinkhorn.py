import numpy as np
import pytest

from deot.measures import CostSpec, cost_matrix, uniform_measure
from deot.sinkhorn import entropic_primal_value, sinkhorn_oracle


def atoms(*points):
    return uniform_measure(np.asarray(points, dtype=float))


class TestAnalyticInstances:
    def test_single_atom_value_is_cost_minus_epsilon(self):
        # only one coupling exists: pi = 1 at cost c, entropy term is -eps
        for c, eps in [(1.0, 0.5), (4.0, 0.1), (0.25, 2.0)]:
            mu = atoms([0.0, 0.0])
            gamma = atoms([np.sqrt(c), 0.0])
            res = sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", eps))
            assert res.value == pytest.approx(c - eps, abs=1e-9)

    def test_identical_atoms_value_is_minus_epsilon(self):
        for eps in (0.1, 1.0, 3.0):
            mu = atoms([1.0, 2.0])
            res = sinkhorn_oracle(mu, mu, CostSpec("squared_euclidean", eps))
            assert res.value == pytest.approx(-eps, abs=1e-12)

    def test_two_by_two_against_grid_search(self):
        # uniform marginals: the coupling has one free parameter
        #   pi = [[t, 1/2 - t], [1/2 - t, t]]
        mu = atoms([0.0, 0.0], [1.0, 0.0])
        gamma = atoms([0.0, 0.5], [1.0, 0.5])
        spec = CostSpec("squared_euclidean", 0.4)
        C = cost_matrix(mu.points, gamma.points, spec)
        best = np.inf
        for t in np.linspace(1e-9, 0.5 - 1e-9, 400_001):
            pi = np.array([[t, 0.5 - t], [0.5 - t, t]])
            best = min(best, entropic_primal_value(pi, C, mu.weights,
                                                   gamma.weights, spec.epsilon))
        res = sinkhorn_oracle(mu, gamma, spec, tol=1e-12)
        assert res.value == pytest.approx(best, abs=1e-8)


class TestSolverBehavior:
    def test_marginals_satisfied(self):
        rng = np.random.default_rng(12)
        mu = uniform_measure(rng.normal(size=(7, 3)))
        gamma = uniform_measure(rng.normal(size=(9, 3)))
        res = sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", 0.5),
                              tol=1e-10)
        assert res.converged
        np.testing.assert_allclose(res.coupling.sum(axis=1), mu.weights,
                                   atol=1e-9)
        np.testing.assert_allclose(res.coupling.sum(axis=0), gamma.weights,
                                   atol=1e-9)

    def test_duality_gap_vanishes(self):
        rng = np.random.default_rng(13)
        mu = uniform_measure(rng.normal(size=(8, 2)))
        gamma = uniform_measure(rng.normal(size=(6, 2)))
        res = sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", 0.8),
                              tol=1e-12)
        assert abs(res.value - res.dual_value) <= 1e-8

    def test_nonuniform_weights(self):
        from deot.measures import DiscreteMeasure, SampleSet
        rng = np.random.default_rng(14)
        w = rng.random(5)
        w /= w.sum()
        mu = DiscreteMeasure(SampleSet(rng.normal(size=(5, 2))), w)
        gamma = uniform_measure(rng.normal(size=(4, 2)))
        res = sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", 0.5),
                              tol=1e-10)
        np.testing.assert_allclose(res.coupling.sum(axis=1), w, atol=1e-9)

    def test_value_decreases_with_epsilon_entropy_dominated(self):
        # for a fixed instance, W_eps + eps is the eps-weighted relative
        # entropy-regularized cost, monotone in eps around small values
        mu = atoms([0.0, 0.0], [1.0, 0.0])
        gamma = atoms([0.2, 0.1], [0.9, -0.1])
        vals = [sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", e)).value
                for e in (0.05, 0.1, 0.2)]
        assert vals[0] > vals[1] > vals[2]

    def test_unconverged_flag_when_starved(self):
        rng = np.random.default_rng(15)
        mu = uniform_measure(rng.normal(size=(30, 2)))
        gamma = uniform_measure(rng.normal(size=(30, 2)) + 5.0)
        res = sinkhorn_oracle(mu, gamma, CostSpec("squared_euclidean", 0.01),
                              max_iter=2, tol=1e-14)
        assert not res.converged
        assert res.n_iter == 2


class TestPrimalValue:
    def test_product_coupling_entropy(self):
        # pi = mu (x) gamma makes the relative entropy term equal -eps
        rng = np.random.default_rng(16)
        mu = uniform_measure(rng.normal(size=(4, 2)))
        gamma = uniform_measure(rng.normal(size=(3, 2)))
        spec = CostSpec("squared_euclidean", 0.7)
        C = cost_matrix(mu.points, gamma.points, spec)
        pi = np.outer(mu.weights, gamma.weights)
        val = entropic_primal_value(pi, C, mu.weights, gamma.weights,
                                    spec.epsilon)
        assert val == pytest.approx(float(np.sum(pi * C)) - spec.epsilon,
                                    rel=1e-12)

    def test_zero_entries_contribute_nothing(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        pi = np.array([[0.5, 0.0], [0.0, 0.5]])
        w = np.array([0.5, 0.5])
        val = entropic_primal_value(pi, C, w, w, 1.0)
        # each diagonal entry: 0.5 * (log(0.5/0.25) - 1) = 0.5 (log 2 - 1)
        assert val == pytest.approx(2 * 0.5 * (np.log(2.0) - 1.0), rel=1e-12)
