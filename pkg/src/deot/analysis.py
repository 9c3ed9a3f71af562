"""Empirical checks of the error structure of the decentralized solver.

Three error sources separate the solver output from the true entropic OT
distance: the storage/communication protocol mismatch (model error), the
sketched kernel (kernel error), and finite iteration count (algorithm
error).  This module measures each against high-accuracy reference solves
and evaluates the corresponding analytic bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dual import dual_objective_at, surrogate_optimum
from .measures import CostSpec, DiscreteMeasure, SampleSet
from .netsim import (AgentPartition, ProtocolMatrix, exact_kernel_blocks,
                     protocol_mismatch, storage_protocol)
from .sinkhorn import sinkhorn_oracle
from .sketch import (GipParams, draw_shared_randomness, estimate_lipschitz,
                     run_sketch_exchange, sketch_error_bound)
from . import solver as solver_mod


@dataclass
class ErrorDecomposition:
    e_model: float
    e_kernel: float
    e_algorithm: float
    e_all: float
    original_value: float        # F at the optimum of the original problem
    surrogate_value: float       # F~ at its optimum, exact kernel
    approx_value: float          # F~ at its optimum, sketched kernel
    run_value: float             # F~ at the run's averaged iterates

    def triangle_holds(self, slack: float = 1e-9) -> bool:
        return self.e_all <= self.e_model + self.e_kernel + self.e_algorithm + slack


@dataclass
class TheoryParams:
    """Empirically estimated constants appearing in the bounds; all are
    estimates, never exact."""

    tau: float
    sigma: float
    gip: GipParams
    R: float | None = None
    R0: float | None = None
    L_F: float | None = None
    L_kernel: float | None = None


def _weighted_global_measure(agents, index_maps, p) -> DiscreteMeasure:
    """Reassemble the global measure with per-sample weights p_i / N_i, the
    weighting implied by the storage protocol."""
    n = sum(a.n for a in agents)
    dim = agents[0].dim
    pts = np.empty((n, dim))
    w = np.empty(n)
    for a, ix, pi in zip(agents, index_maps, p):
        pts[ix] = a.points
        w[ix] = pi / a.n
    return DiscreteMeasure(SampleSet(pts), w / w.sum())


def original_optimum(partition: AgentPartition, spec: CostSpec,
                     max_iter: int = 10_000, tol: float = 1e-10):
    """F at the optimum of the unscattered problem, via the centralized
    solver with the storage-implied weights.  Returns (value, result)."""
    p, q = partition.storage_vectors()
    mu = _weighted_global_measure(partition.source_agents,
                                  partition.source_index_maps, p)
    gamma = _weighted_global_measure(partition.target_agents,
                                     partition.target_index_maps, q)
    res = sinkhorn_oracle(mu, gamma, spec, max_iter=max_iter, tol=tol)
    if not res.converged:
        raise RuntimeError(f"reference centralized solve did not converge "
                           f"(violation {res.marginal_violation:.3g})")
    return res.dual_value, res


def surrogate_value(partition: AgentPartition, kernels, E, epsilon: float,
                    max_iter: int = 5000, tol: float = 1e-10) -> float:
    """sup of the weighted dual objective for the given protocol/kernel."""
    _, _, value, n_iter, gnorm = surrogate_optimum(
        kernels, E, epsilon, partition.source_sizes, partition.target_sizes,
        max_iter=max_iter, tol=tol)
    if gnorm > max(tol * 100, 1e-7):
        raise RuntimeError(f"reference surrogate solve did not converge "
                           f"(grad {gnorm:.3g} after {n_iter} iterations)")
    return value


def decompose_errors(partition: AgentPartition, E, config,
                     reference_tol: float = 1e-10) -> ErrorDecomposition:
    """Measure the three error components plus the total for one solver run.

    Reference optima come from exact alternating maximization of the
    surrogate objective; the original problem is solved centrally.
    """
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    spec = config.cost_spec

    exact = exact_kernel_blocks(partition, spec)
    run = solver_mod.solve(partition, e, config)
    kernels = run.kernels

    f_original, _ = original_optimum(partition, spec, tol=reference_tol)
    f_surrogate = surrogate_value(partition, exact, e, config.epsilon,
                                  tol=reference_tol)
    f_approx = (f_surrogate if config.kernel_source == "exact"
                else surrogate_value(partition, kernels, e, config.epsilon,
                                     tol=reference_tol))
    u_avg, v_avg = run.state.averaged()
    f_run = dual_objective_at(u_avg, v_avg, kernels, e, config.epsilon,
                              guard=None)

    return ErrorDecomposition(
        e_model=abs(f_surrogate - f_original),
        e_kernel=abs(f_approx - f_surrogate),
        e_algorithm=abs(f_run - f_approx),
        e_all=abs(f_run - f_original),
        original_value=f_original,
        surrogate_value=f_surrogate,
        approx_value=f_approx,
        run_value=f_run,
    )


@dataclass
class MismatchBoundCheck:
    lhs: float
    tau: float
    sigma: float
    holds: bool


def protocol_mismatch_check(partition: AgentPartition, E, spec: CostSpec,
                            slack: float = 1e-6,
                            reference_tol: float = 1e-10) -> MismatchBoundCheck:
    """Check |W~ - W| <= tau * sigma with both sides solved to high accuracy.

    tau is the max pairwise EOT value over agent pairs; the check requires
    every pairwise value to be nonnegative (costs large relative to eps),
    otherwise the instance is rejected.
    """
    p, q = partition.storage_vectors()
    tau = -np.inf
    for mu_i in partition.source_agents:
        for gamma_j in partition.target_agents:
            w_ij = sinkhorn_oracle(mu_i, gamma_j, spec, tol=reference_tol).value
            if w_ij < 0:
                raise ValueError(
                    f"instance rejected: pairwise EOT value {w_ij:.6g} is "
                    f"negative; use costs large relative to epsilon")
            tau = max(tau, w_ij)
    sigma = protocol_mismatch(E, p, q)

    exact = exact_kernel_blocks(partition, spec)
    w_tilde = surrogate_value(partition, exact, E, spec.epsilon,
                              tol=reference_tol)
    w_true, _ = original_optimum(partition, spec, tol=reference_tol)
    lhs = abs(w_tilde - w_true)
    return MismatchBoundCheck(lhs, tau, sigma, bool(lhs <= tau * sigma + slack))


def convergence_error_curve(partition: AgentPartition, E, base_config,
                            t_grid, P_grid, n_seeds: int = 5,
                            delta: float = 0.1):
    """Measured |F(u_hat, v_hat) - W| alongside the three bound terms for a
    (t, P) sweep; shape validation only, no constant matching.

    Returns a list of row dicts.
    """
    from dataclasses import replace

    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    I, J = e.shape
    p, q = partition.storage_vectors()
    sigma = protocol_mismatch(e, p, q)
    w_true, _ = original_optimum(partition, base_config.cost_spec)
    N, M = partition.n_total, partition.m_total
    rows = []
    for P in P_grid:
        for t in t_grid:
            errs = []
            for s in range(n_seeds):
                cfg = replace(base_config, T=int(t), P=int(P),
                              seed=base_config.seed + s)
                run = solver_mod.solve(partition, e, cfg)
                u_avg, v_avg = run.state.averaged()
                f_avg = dual_objective_at(u_avg, v_avg, run.kernels, e,
                                          cfg.epsilon, guard=None)
                errs.append(abs(f_avg - w_true))
            log_term = math.log(2.0 * (N + M) / delta)
            rows.append({
                "t": int(t), "P": int(P),
                "measured_error": float(np.mean(errs)),
                "term_algorithm": I * J / math.sqrt(t),
                "term_kernel": (N + M) * math.sqrt(log_term / P),
                "term_model": sigma,
            })
    return rows


def kernel_error_propagation(partition: AgentPartition, spec: CostSpec,
                             P_values, n_seeds: int = 3, base_seed: int = 0,
                             reference_tol: float = 1e-10):
    """For each sketch size P: measured kernel error, measured Frobenius
    kernel gap, and their ratio.  The max ratio is the empirical Lipschitz
    estimate of the optimal value in the kernel.

    Returns (rows, lipschitz_estimate).
    """
    e = storage_protocol(*partition.storage_vectors()).values
    exact = exact_kernel_blocks(partition, spec)
    f_surrogate = surrogate_value(partition, exact, e, spec.epsilon,
                                  tol=reference_tol)
    K = _stack_blocks(exact, partition)
    D = partition.source_agents[0].dim
    rows = []
    max_ratio = 0.0
    for P in P_values:
        for s in range(n_seeds):
            rand = draw_shared_randomness(base_seed + 1000 * s, int(P), D)
            approx, _ = run_sketch_exchange(partition, rand, spec)
            K_hat = _stack_blocks(approx, partition)
            gap = float(np.linalg.norm(K - K_hat))
            f_hat = surrogate_value(partition, approx, e, spec.epsilon,
                                    tol=reference_tol)
            err = abs(f_hat - f_surrogate)
            ratio = err / gap if gap > 0 else 0.0
            max_ratio = max(max_ratio, ratio)
            rows.append({"P": int(P), "seed": base_seed + 1000 * s,
                         "e_kernel": err, "kernel_gap_fro": gap,
                         "ratio": ratio})
    return rows, max_ratio


def kernel_gap_frobenius(partition: AgentPartition, spec: CostSpec,
                         P: int, seed: int) -> float:
    """||K - K_hat||_F for one sketch draw."""
    exact = _stack_blocks(exact_kernel_blocks(partition, spec), partition)
    D = partition.source_agents[0].dim
    rand = draw_shared_randomness(seed, P, D)
    approx, _ = run_sketch_exchange(partition, rand, spec)
    return float(np.linalg.norm(exact - _stack_blocks(approx, partition)))


def default_gip_params(partition: AgentPartition, spec: CostSpec,
                       delta: float = 0.1) -> GipParams:
    src = np.vstack([a.points for a in partition.source_agents])
    tgt = np.vstack([a.points for a in partition.target_agents])
    return GipParams(estimate_lipschitz(src, tgt, spec), 1.0, delta)


def _stack_blocks(kernels, partition: AgentPartition) -> np.ndarray:
    """Assemble blocks into the global N x M matrix in global sample order."""
    N, M = partition.n_total, partition.m_total
    K = np.empty((N, M))
    for i, ix in enumerate(partition.source_index_maps):
        for j, jx in enumerate(partition.target_index_maps):
            vals = getattr(kernels[i][j], "values", kernels[i][j])
            K[np.ix_(ix, jx)] = vals
    return K
