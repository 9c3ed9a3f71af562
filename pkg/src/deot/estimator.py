"""scikit-learn style front ends for the decentralized solver.

``DecentralizedEOT`` estimates the entropic OT distance between two sample
sets scattered over a simulated agent network; ``BarycentricTransport`` adds
a ``transform`` that maps the fitted source samples into the target domain
through the recovered coupling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .adaptation import barycentric_map
from .dual import coupling_from_duals
from .measures import cost_matrix, uniform_measure
from .netsim import AgentPartition, protocol_generator, storage_protocol
from .sinkhorn import sinkhorn_oracle
from .solver import SolverConfig, solve


class DecentralizedEOT(BaseEstimator):
    """Entropic OT distance via decentralized stochastic dual ascent.

    Parameters
    ----------
    epsilon : entropic regularization weight.
    eta0 : initial learning rate (decays as 1/sqrt(t+1)).
    n_iter : iteration budget T.
    batch_agents : number of counterpart agents per update (L).
    n_source_agents, n_target_agents : partition sizes I and J.
    protocol : "ideal", "sparse", or "sparse_asymmetric".
    sparsity : zero fraction for the sparse protocols.
    storage_mode : "iid" or "non_iid" (non_iid requires labels).
    kernel : "exact" or "approximated".
    n_projections : sketch size P for the approximated kernel.
    cost : "squared_euclidean" or "euclidean".
    random_state : seed controlling scattering, sampling, and sketches.

    Attributes
    ----------
    distance_ : estimated entropic OT distance.
    dual_potentials_ : (u, v) averaged dual vectors in global sample order.
    trace_ : per-iteration RunTrace.
    ledger_ : communication ledger.
    partition_ : the agent partition used.
    """

    def __init__(self, epsilon=0.1, eta0=1.0, n_iter=1000, batch_agents=1,
                 n_source_agents=2, n_target_agents=2, protocol="ideal",
                 sparsity=0.5, storage_mode="iid", kernel="exact",
                 n_projections=1000, cost="squared_euclidean",
                 record_every=50, random_state=0):
        self.epsilon = epsilon
        self.eta0 = eta0
        self.n_iter = n_iter
        self.batch_agents = batch_agents
        self.n_source_agents = n_source_agents
        self.n_target_agents = n_target_agents
        self.protocol = protocol
        self.sparsity = sparsity
        self.storage_mode = storage_mode
        self.kernel = kernel
        self.n_projections = n_projections
        self.cost = cost
        self.record_every = record_every
        self.random_state = random_state

    def _config(self) -> SolverConfig:
        return SolverConfig(
            epsilon=self.epsilon, eta0=self.eta0, T=self.n_iter,
            L=self.batch_agents, seed=self.random_state,
            kernel_source=self.kernel, P=self.n_projections,
            record_every=self.record_every, cost_kind=self.cost,
        )

    def fit(self, X, Y, X_labels=None, Y_labels=None):
        """Scatter X and Y over the agents, run the solver, and record the
        distance estimate."""
        X = check_array(X)
        Y = check_array(Y)
        mu = uniform_measure(X, X_labels)
        gamma = uniform_measure(Y, Y_labels)
        partition = AgentPartition.create(
            mu, gamma, self.n_source_agents, self.n_target_agents,
            mode=self.storage_mode, seed=self.random_state)
        if self.protocol == "ideal":
            E = storage_protocol(*partition.storage_vectors())
        else:
            E = protocol_generator(self.protocol, self.n_source_agents,
                                   self.n_target_agents, self.sparsity,
                                   self.random_state)
        result = solve(partition, E, self._config())

        u = np.empty(mu.n)
        v = np.empty(gamma.n)
        u_avg, v_avg = result.state.averaged()
        for ix, block in zip(partition.source_index_maps, u_avg):
            u[ix] = block
        for jx, block in zip(partition.target_index_maps, v_avg):
            v[jx] = block

        self.distance_ = result.distance
        self.dual_potentials_ = (u, v)
        self.trace_ = result.trace
        self.ledger_ = result.ledger
        self.partition_ = partition
        self.protocol_matrix_ = E
        self.X_ = X
        self.Y_ = Y
        return self

    def score(self, X=None, Y=None):
        """Negative absolute gap to the centralized solver on the fitted
        data (higher is better)."""
        from .measures import CostSpec

        ref = sinkhorn_oracle(uniform_measure(self.X_),
                              uniform_measure(self.Y_),
                              CostSpec(self.cost, self.epsilon))
        return -abs(self.distance_ - ref.value)


class BarycentricTransport(DecentralizedEOT, TransformerMixin):
    """Decentralized EOT fit plus barycentric mapping of the fitted source
    samples into the target domain."""

    def fit(self, X, Y, X_labels=None, Y_labels=None):
        super().fit(X, Y, X_labels, Y_labels)
        u, v = self.dual_potentials_
        C = cost_matrix(self.X_, self.Y_, self._config().cost_spec)
        self.coupling_ = coupling_from_duals(
            u, v, C, np.full(len(self.X_), 1.0 / len(self.X_)),
            np.full(len(self.Y_), 1.0 / len(self.Y_)), self.epsilon)
        return self

    def transform(self, X):
        """Map the fitted source samples; X must be the training source (the
        coupling is defined sample-by-sample)."""
        X = check_array(X)
        if X.shape != self.X_.shape or not np.allclose(X, self.X_):
            raise ValueError("transform is defined only for the fitted "
                             "source samples")
        return barycentric_map(self.coupling_, self.Y_, len(self.X_))

    def fit_transform(self, X, Y=None, **fit_params):
        self.fit(X, Y, **fit_params)
        return self.transform(X)
