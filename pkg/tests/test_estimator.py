import numpy as np
import pytest
from sklearn.base import clone

from deot.estimator import BarycentricTransport, DecentralizedEOT
from deot.measures import CostSpec, uniform_measure
from deot.sinkhorn import sinkhorn_oracle


def data(seed=55, n=24, m=24):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2)) * 0.2
    Y = rng.normal(size=(m, 2)) * 0.2 + 0.3
    return X, Y


class TestDecentralizedEOT:
    def test_get_params_round_trip(self):
        est = DecentralizedEOT(epsilon=0.7, n_iter=12)
        params = est.get_params()
        assert params["epsilon"] == 0.7
        est2 = DecentralizedEOT(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = DecentralizedEOT(eta0=3.0, batch_agents=2)
        c = clone(est)
        assert c.get_params() == est.get_params()

    def test_fit_sets_attributes(self):
        X, Y = data()
        est = DecentralizedEOT(epsilon=0.5, eta0=2.0, n_iter=100,
                               record_every=50).fit(X, Y)
        assert np.isfinite(est.distance_)
        u, v = est.dual_potentials_
        assert u.shape == (24,) and v.shape == (24,)
        assert est.ledger_.total_scalars() > 0
        assert len(est.trace_.records) >= 1

    def test_fit_approaches_oracle(self):
        X, Y = data(seed=56)
        est = DecentralizedEOT(epsilon=0.5, eta0=5.0, n_iter=3000,
                               record_every=1000, batch_agents=2).fit(X, Y)
        ref = sinkhorn_oracle(uniform_measure(X), uniform_measure(Y),
                              CostSpec("squared_euclidean", 0.5)).value
        assert abs(est.distance_ - ref) <= 0.02 * max(abs(ref), 0.1)
        assert est.score() >= -0.02 * max(abs(ref), 0.1)

    def test_deterministic_in_random_state(self):
        X, Y = data(seed=57)
        a = DecentralizedEOT(n_iter=50, random_state=3).fit(X, Y)
        b = DecentralizedEOT(n_iter=50, random_state=3).fit(X, Y)
        assert a.distance_ == b.distance_

    def test_non_iid_requires_labels(self):
        X, Y = data(seed=58)
        est = DecentralizedEOT(n_iter=10, storage_mode="non_iid")
        with pytest.raises(ValueError, match="labels"):
            est.fit(X, Y)


class TestBarycentricTransport:
    def test_transform_maps_into_target_hull(self):
        X, Y = data(seed=59)
        est = BarycentricTransport(epsilon=0.5, eta0=5.0, n_iter=2000,
                                   record_every=1000, batch_agents=2)
        mapped = est.fit_transform(X, Y)
        assert mapped.shape == X.shape
        assert np.all(mapped >= Y.min(axis=0) - 0.05)
        assert np.all(mapped <= Y.max(axis=0) + 0.05)

    def test_transform_rejects_new_data(self):
        X, Y = data(seed=60)
        est = BarycentricTransport(n_iter=50).fit(X, Y)
        with pytest.raises(ValueError, match="fitted"):
            est.transform(X + 1.0)

    def test_coupling_marginals_close_after_fit(self):
        X, Y = data(seed=61)
        est = BarycentricTransport(epsilon=0.5, eta0=5.0, n_iter=3000,
                                   record_every=1000, batch_agents=2).fit(X, Y)
        np.testing.assert_allclose(est.coupling_.sum(axis=1), 1 / 24,
                                   atol=5e-3)
