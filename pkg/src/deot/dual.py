"""Dual machinery for entropic OT over an agent partition.

The objective maximized here is a weighted sum of per-agent-pair terms

    F(u, v) = sum_ij  e_ij / (N_i * M_j) * f_ij(u_i, v_j)

with f_ij the local dual term built from a Gibbs kernel block.  All
exponentials are evaluated as exp((u_n + v_m)/eps + log k_nm), which keeps
the arithmetic stable whenever the product of the two factors is moderate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .measures import KernelBlock

DEFAULT_OVERFLOW_GUARD = 30.0


class OverflowGuardError(FloatingPointError):
    """Raised when a dual exponent (u_n + v_m)/eps exceeds the guard."""

    def __init__(self, max_exponent: float, guard: float, context: str = ""):
        self.max_exponent = max_exponent
        self.guard = guard
        msg = f"dual exponent {max_exponent:.6g} exceeds overflow guard {guard:.6g}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


def _values(block) -> np.ndarray:
    if isinstance(block, KernelBlock):
        return block.values
    return np.asarray(block, dtype=np.float64)


def _protocol_values(E) -> np.ndarray:
    return np.asarray(getattr(E, "values", E), dtype=np.float64)


def _check_guard(S: np.ndarray, epsilon: float, guard, context: str) -> None:
    if guard is None:
        return
    max_exp = float(np.max(S)) / epsilon
    if max_exp > guard:
        raise OverflowGuardError(max_exp, guard, context)


@dataclass
class DualState:
    """Block-partitioned dual potentials with running iterate averages."""

    u_blocks: list
    v_blocks: list
    u_avg: list = None
    v_avg: list = None
    iteration: int = 0

    def __post_init__(self):
        self.u_blocks = [np.asarray(b, dtype=np.float64).copy() for b in self.u_blocks]
        self.v_blocks = [np.asarray(b, dtype=np.float64).copy() for b in self.v_blocks]
        if self.u_avg is None:
            self.u_avg = [b.copy() for b in self.u_blocks]
        if self.v_avg is None:
            self.v_avg = [b.copy() for b in self.v_blocks]

    @classmethod
    def zeros(cls, source_sizes, target_sizes) -> "DualState":
        return cls(
            [np.zeros(n) for n in source_sizes],
            [np.zeros(m) for m in target_sizes],
        )

    def full_u(self) -> np.ndarray:
        return np.concatenate(self.u_blocks)

    def full_v(self) -> np.ndarray:
        return np.concatenate(self.v_blocks)

    def averaged(self):
        """Running means over past iterates (copies)."""
        return [b.copy() for b in self.u_avg], [b.copy() for b in self.v_avg]

    def update_averages(self) -> None:
        """Fold the current iterate into the running means; call after each
        block update, once iteration has been incremented."""
        t = self.iteration
        for avg, cur in zip(self.u_avg, self.u_blocks):
            avg += (cur - avg) / t
        for avg, cur in zip(self.v_avg, self.v_blocks):
            avg += (cur - avg) / t

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(b)) for b in self.u_blocks + self.v_blocks)


@dataclass
class PairObjectiveTable:
    """I x J table of local dual terms f_ij at a fixed dual state."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("pair objective table has non-finite entries")


def pair_objective(u_i, v_j, K_ij, epsilon: float,
                   guard: float | None = DEFAULT_OVERFLOW_GUARD) -> float:
    """Local dual term  sum_nm [u_n + v_m - eps * exp((u_n+v_m)/eps) * k_nm]."""
    u = np.asarray(u_i, dtype=np.float64)
    v = np.asarray(v_j, dtype=np.float64)
    K = _values(K_ij)
    if K.shape != (u.size, v.size):
        raise ValueError(f"kernel block shape {K.shape} does not match duals "
                         f"({u.size}, {v.size})")
    S = u[:, None] + v[None, :]
    _check_guard(S, epsilon, guard, "pair_objective")
    expo = np.exp(S / epsilon + np.log(K))
    return float(v.size * u.sum() + u.size * v.sum() - epsilon * expo.sum())


def pair_objective_table(u_blocks, v_blocks, kernels, epsilon: float,
                         guard: float | None = DEFAULT_OVERFLOW_GUARD
                         ) -> PairObjectiveTable:
    I, J = len(u_blocks), len(v_blocks)
    table = np.empty((I, J))
    for i in range(I):
        for j in range(J):
            table[i, j] = pair_objective(u_blocks[i], v_blocks[j],
                                         kernels[i][j], epsilon, guard)
    return PairObjectiveTable(table)


def assemble_distance(table: PairObjectiveTable, E, source_sizes, target_sizes) -> float:
    """Weighted contraction  sum_ij e_ij/(N_i M_j) * f_ij."""
    e = _protocol_values(E)
    w = e / (np.asarray(source_sizes, dtype=float)[:, None]
             * np.asarray(target_sizes, dtype=float)[None, :])
    return float(np.sum(w * table.values))


def dual_objective(state: DualState, kernels, E, epsilon: float,
                   guard: float | None = DEFAULT_OVERFLOW_GUARD) -> float:
    """Full weighted dual objective at the current iterates."""
    table = pair_objective_table(state.u_blocks, state.v_blocks, kernels,
                                 epsilon, guard)
    sizes_u = [b.size for b in state.u_blocks]
    sizes_v = [b.size for b in state.v_blocks]
    return assemble_distance(table, E, sizes_u, sizes_v)


def dual_objective_at(u_blocks, v_blocks, kernels, E, epsilon: float,
                      guard: float | None = DEFAULT_OVERFLOW_GUARD) -> float:
    table = pair_objective_table(u_blocks, v_blocks, kernels, epsilon, guard)
    return assemble_distance(table, E,
                             [b.size for b in u_blocks],
                             [b.size for b in v_blocks])


def _pair_grad_u(u, v, K, epsilon, guard) -> np.ndarray:
    S = u[:, None] + v[None, :]
    _check_guard(S, epsilon, guard, "block gradient")
    return v.size - np.exp(S / epsilon + np.log(K)).sum(axis=1)


def block_gradient_u(i: int, state: DualState, kernels, E, epsilon: float,
                     j_subset=None, weighted: bool = True,
                     guard: float | None = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """Gradient of the dual objective w.r.t. the source block u_i, restricted
    to target blocks in j_subset (all blocks when None)."""
    e = _protocol_values(E)
    j_subset = list(range(len(state.v_blocks))) if j_subset is None else list(j_subset)
    if not j_subset:
        raise ValueError("j_subset must be nonempty")
    u = state.u_blocks[i]
    grad = np.zeros_like(u)
    for j in j_subset:
        v = state.v_blocks[j]
        g = _pair_grad_u(u, v, _values(kernels[i][j]), epsilon, guard)
        grad += (e[i, j] / (u.size * v.size)) * g if weighted else g
    return grad


def block_gradient_v(j: int, state: DualState, kernels, E, epsilon: float,
                     i_subset=None, weighted: bool = True,
                     guard: float | None = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """Gradient w.r.t. the target block v_j, restricted to source blocks in
    i_subset."""
    e = _protocol_values(E)
    i_subset = list(range(len(state.u_blocks))) if i_subset is None else list(i_subset)
    if not i_subset:
        raise ValueError("i_subset must be nonempty")
    v = state.v_blocks[j]
    grad = np.zeros_like(v)
    for i in i_subset:
        u = state.u_blocks[i]
        g = _pair_grad_u(v, u, _values(kernels[i][j]).T, epsilon, guard)
        grad += (e[i, j] / (u.size * v.size)) * g if weighted else g
    return grad


def coupling_from_duals(u, v, C, mu_weights, gamma_weights, epsilon: float,
                        guard: float | None = DEFAULT_OVERFLOW_GUARD) -> np.ndarray:
    """Primal coupling  pi_nm = exp((u_n + v_m - c_nm)/eps) mu_n gamma_m."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    S = u[:, None] + v[None, :] - C
    _check_guard(S, epsilon, guard, "coupling_from_duals")
    return np.exp(S / epsilon) * np.outer(mu_weights, gamma_weights)


def surrogate_optimum(kernels, E, epsilon: float, source_sizes, target_sizes,
                      max_iter: int = 5000, tol: float = 1e-12):
    """High-accuracy maximizer of the weighted dual objective.

    Alternates exact block maximization in the log domain: with v fixed, the
    stationarity condition for u_n has the closed form

        u_n = eps * [log(r_i / N_i) - LSE_{j,m}(log w_ij + v_m/eps + log k_nm)]

    where r_i is the i-th row sum of E and w_ij = e_ij/(N_i M_j).  Blocks
    whose row (column) of E is entirely zero do not enter the objective and
    are pinned at zero.

    Returns (u_blocks, v_blocks, value, n_iter, grad_inf).
    """
    e = _protocol_values(E)
    I, J = e.shape
    Ns = np.asarray(source_sizes, dtype=int)
    Ms = np.asarray(target_sizes, dtype=int)
    with np.errstate(divide="ignore"):
        logw = np.log(e) - np.log(Ns.astype(float))[:, None] - np.log(Ms.astype(float))[None, :]
    logK = [[np.log(_values(kernels[i][j])) for j in range(J)] for i in range(I)]
    row = e.sum(axis=1)
    col = e.sum(axis=0)

    u = [np.zeros(n) for n in Ns]
    v = [np.zeros(m) for m in Ms]
    state = DualState(u, v)

    def grad_inf_norm():
        g = 0.0
        for i in range(I):
            if row[i] > 0:
                g = max(g, float(np.max(np.abs(
                    block_gradient_u(i, state, kernels, e, epsilon, guard=None)))))
        for j in range(J):
            if col[j] > 0:
                g = max(g, float(np.max(np.abs(
                    block_gradient_v(j, state, kernels, e, epsilon, guard=None)))))
        return g

    n_iter = 0
    gnorm = np.inf
    for n_iter in range(1, max_iter + 1):
        for i in range(I):
            if row[i] <= 0:
                continue
            # terms stacked over active target blocks, then LSE over (j, m)
            parts = [logw[i, j] + state.v_blocks[j][None, :] / epsilon + logK[i][j]
                     for j in range(J) if e[i, j] > 0]
            lse = logsumexp(np.concatenate(parts, axis=1), axis=1)
            state.u_blocks[i] = epsilon * (np.log(row[i] / Ns[i]) - lse)
        for j in range(J):
            if col[j] <= 0:
                continue
            parts = [logw[i, j] + state.u_blocks[i][:, None] / epsilon + logK[i][j]
                     for i in range(I) if e[i, j] > 0]
            lse = logsumexp(np.concatenate(parts, axis=0), axis=0)
            state.v_blocks[j] = epsilon * (np.log(col[j] / Ms[j]) - lse)
        gnorm = grad_inf_norm()
        if gnorm <= tol:
            break
    value = dual_objective_at(state.u_blocks, state.v_blocks, kernels, e,
                              epsilon, guard=None)
    return state.u_blocks, state.v_blocks, value, n_iter, gnorm
