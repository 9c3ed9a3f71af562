"""Mini-batch randomized block-coordinate dual ascent over the agent network.

Per iteration, one agent pair (i, j) is drawn from the communication
protocol; block u_i is updated with gradients from L sampled target agents
and block v_j with gradients from L sampled source agents, both evaluated at
the pre-update iterate.  Dual-variable transfers are charged to the ledger
one scalar per vector entry.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import dual
from .dual import (DualState, DEFAULT_OVERFLOW_GUARD, OverflowGuardError,
                   assemble_distance, block_gradient_u, block_gradient_v,
                   dual_objective, pair_objective_table)
from .netsim import (AgentPartition, CommLedger, ProtocolMatrix,
                     exact_kernel_blocks, sample_pair,
                     sample_sources_for_target, sample_targets_for_source)
from .measures import CostSpec
from .sketch import draw_shared_randomness, run_sketch_exchange


@dataclass
class SolverConfig:
    epsilon: float = 0.1
    eta0: float = 1.0
    T: int = 1000
    L: int = 1
    seed: int = 0
    kernel_source: str = "exact"  # or "approximated"
    P: int = 1000
    record_every: int = 50
    cost_kind: str = "squared_euclidean"
    weighted_updates: bool = True
    overflow_guard: float | None = DEFAULT_OVERFLOW_GUARD

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.kernel_source not in ("exact", "approximated"):
            raise ValueError(f"unknown kernel source {self.kernel_source!r}")

    @property
    def cost_spec(self) -> CostSpec:
        return CostSpec(self.cost_kind, self.epsilon)


@dataclass
class TraceRecord:
    t: int
    objective: float
    averaged_objective: float
    gap: float | None
    comm_scalars_cumulative: int
    wall_time: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("trace iterations must be strictly increasing")
        self.records.append(rec)

    def to_csv(self, path) -> None:
        # wall time stays in memory only: emitted files must be byte-for-byte
        # reproducible from (config, seed)
        with open(path, "w") as fh:
            fh.write("t,F,F_avg,gap,comm_scalars\n")
            for r in self.records:
                gap = "" if r.gap is None else repr(r.gap)
                fh.write(f"{r.t},{r.objective!r},{r.averaged_objective!r},"
                         f"{gap},{r.comm_scalars_cumulative}\n")


@dataclass
class SolveResult:
    distance: float
    state: DualState
    trace: RunTrace
    ledger: CommLedger
    kernels: list
    max_gradient_norm: float


def averaged_iterates(state: DualState):
    """Running means of all past iterates, (u_hat, v_hat)."""
    if state.iteration < 1:
        raise ValueError("no iterates to average yet")
    return state.averaged()


def learning_rate(t: int, eta0: float) -> float:
    """Step size eta0 / sqrt(t + 1)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return eta0 / np.sqrt(t + 1.0)


def mrbcd_step(state: DualState, partition: AgentPartition, kernels, E,
               config: SolverConfig, rng: np.random.Generator,
               ledger: CommLedger) -> DualState:
    """One stochastic block update; mutates and returns state."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    t = state.iteration
    eta = learning_rate(t, config.eta0)
    i, j = sample_pair(e, rng)

    targets = sorted(sample_targets_for_source(i, e, config.L, rng))
    for j2 in targets:
        ledger.record(phase="dual_update", sender=f"target:{j2}",
                      receivers=f"source:{i}",
                      scalar_count=len(state.v_blocks[j2]),
                      iteration=t, payload_kind="dual_block_v")
    sources = sorted(sample_sources_for_target(j, e, config.L, rng))
    for i2 in sources:
        ledger.record(phase="dual_update", sender=f"source:{i2}",
                      receivers=f"target:{j}",
                      scalar_count=len(state.u_blocks[i2]),
                      iteration=t, payload_kind="dual_block_u")

    try:
        grad_u = block_gradient_u(i, state, kernels, e, config.epsilon,
                                  j_subset=targets,
                                  weighted=config.weighted_updates,
                                  guard=config.overflow_guard)
        # v uses the pre-update snapshot of u, so the two block updates
        # within one iteration commute
        grad_v = block_gradient_v(j, state, kernels, e, config.epsilon,
                                  i_subset=sources,
                                  weighted=config.weighted_updates,
                                  guard=config.overflow_guard)
    except OverflowGuardError as err:
        raise OverflowGuardError(err.max_exponent, err.guard,
                                 f"iteration {t}") from err
    state.u_blocks[i] += eta * grad_u
    state.v_blocks[j] += eta * grad_v
    state.iteration = t + 1
    state.update_averages()
    return state


def build_kernels(partition: AgentPartition, config: SolverConfig,
                  ledger: CommLedger):
    """Kernel blocks per config: exact (centralized reference) or sketched."""
    spec = config.cost_spec
    if config.kernel_source == "exact":
        return exact_kernel_blocks(partition, spec)
    D = partition.source_agents[0].dim
    rand = draw_shared_randomness(config.seed, config.P, D)
    kernels, _ = run_sketch_exchange(partition, rand, spec, ledger=ledger)
    return kernels


def solve(partition: AgentPartition, E, config: SolverConfig,
          kernels=None, oracle_value: float | None = None) -> SolveResult:
    """Run T iterations of the stochastic dual ascent and assemble the
    distance from the pair-objective table at the averaged iterates."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    row_support = (e > 0).sum(axis=1)
    col_support = (e > 0).sum(axis=0)
    min_support = min(int(row_support[row_support > 0].min(initial=e.shape[1])),
                      int(col_support[col_support > 0].min(initial=e.shape[0])))
    if config.L > min_support:
        raise ValueError(
            f"L={config.L} exceeds the smallest positive protocol support "
            f"({min_support}); sampling without replacement is impossible")
    ledger = CommLedger()
    if kernels is None:
        kernels = build_kernels(partition, config, ledger)
    rng = np.random.default_rng(config.seed)
    state = DualState.zeros(partition.source_sizes, partition.target_sizes)
    trace = RunTrace()
    start = time.perf_counter()
    max_grad_norm = 0.0

    def record(t):
        obj = dual_objective(state, kernels, e, config.epsilon,
                             guard=config.overflow_guard)
        u_avg, v_avg = state.averaged()
        obj_avg = dual.dual_objective_at(u_avg, v_avg, kernels, e,
                                         config.epsilon,
                                         guard=config.overflow_guard)
        gap = None if oracle_value is None else abs(obj_avg - oracle_value)
        trace.append(TraceRecord(t, obj, obj_avg, gap,
                                 ledger.total_scalars(),
                                 time.perf_counter() - start))

    for t in range(config.T):
        mrbcd_step(state, partition, kernels, e, config, rng, ledger)
        if not state.is_finite():
            raise OverflowGuardError(np.inf, config.overflow_guard or np.inf,
                                     f"non-finite state at iteration {t}")
        if (t + 1) % config.record_every == 0 or t + 1 == config.T:
            gnorm = np.sqrt(sum(
                float(np.sum(block_gradient_u(i, state, kernels, e,
                                              config.epsilon, guard=None) ** 2))
                for i in range(len(state.u_blocks))) + sum(
                float(np.sum(block_gradient_v(j, state, kernels, e,
                                              config.epsilon, guard=None) ** 2))
                for j in range(len(state.v_blocks))))
            max_grad_norm = max(max_grad_norm, gnorm)
            record(t + 1)

    u_avg, v_avg = state.averaged()
    table = pair_objective_table(u_avg, v_avg, kernels, config.epsilon,
                                 guard=config.overflow_guard)
    distance = assemble_distance(table, e, partition.source_sizes,
                                 partition.target_sizes)
    I, J = e.shape
    ledger.record(phase="assembly", sender="sources", receivers="source:0",
                  scalar_count=I * J, payload_kind="pair_objectives")
    ledger.record(phase="assembly", sender="source:0", receivers="all",
                  scalar_count=I * J, payload_kind="distance_broadcast")
    return SolveResult(distance, state, trace, ledger, kernels, max_grad_norm)
