"""Simulated distributed system: agent partitions, storage/communication
protocols, agent sampling, and exact communication accounting.

All "communication" is in-process; the ledger is the observable for every
communication-cost claim.  Ledger entries carry only counts and identifiers,
never payload values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .measures import DiscreteMeasure, SampleSet


@dataclass
class ProtocolMatrix:
    """Nonnegative I x J matrix summing to one (storage or communication)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("protocol matrix must be 2-D")
        if np.any(self.values < 0):
            raise ValueError("protocol entries must be nonnegative")
        total = self.values.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"protocol entries must sum to 1, got {total!r}")

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "ProtocolMatrix":
        return cls(np.atleast_2d(np.loadtxt(path, delimiter=",")))


@dataclass
class LedgerEntry:
    phase: str
    sender: str
    receivers: str
    scalar_count: int = 0
    bit_count: int = 0
    iteration: int | None = None
    payload_kind: str = ""


@dataclass
class CommLedger:
    """Exact message accounting, grouped by phase."""

    entries: list = field(default_factory=list)

    def record(self, phase: str, sender: str, receivers: str,
               scalar_count: int = 0, bit_count: int = 0,
               iteration: int | None = None, payload_kind: str = "") -> LedgerEntry:
        entry = LedgerEntry(phase, sender, receivers, int(scalar_count),
                            int(bit_count), iteration, payload_kind)
        self.entries.append(entry)
        return entry

    def total_scalars(self, phase: str | None = None) -> int:
        return sum(e.scalar_count for e in self.entries
                   if phase is None or e.phase == phase)

    def total_bits(self, phase: str | None = None) -> int:
        return sum(e.bit_count for e in self.entries
                   if phase is None or e.phase == phase)

    def to_json(self, path=None) -> str:
        payload = {
            "entries": [asdict(e) for e in self.entries],
            "totals": {
                "scalars": self.total_scalars(),
                "bits": self.total_bits(),
            },
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def record_transfer(ledger: CommLedger, phase: str, sender: str, receivers: str,
                    scalar_count: int = 0, bit_count: int = 0,
                    iteration: int | None = None, payload_kind: str = "") -> CommLedger:
    """Append one exact-count entry and return the ledger."""
    ledger.record(phase, sender, receivers, scalar_count, bit_count,
                  iteration, payload_kind)
    return ledger


def scatter(data: DiscreteMeasure, I: int, mode: str = "iid", seed: int = 0):
    """Partition a measure across I agents.

    iid: a uniformly random partition into near-equal parts (sizes differ by
    at most 1).  non_iid: partition by label, components assigned to agents
    round-robin in sorted label order; requires labels and I <= #labels.

    Returns (agent_measures, index_maps) where index_maps[i] holds the global
    sample indices owned by agent i.
    """
    n = data.n
    if I < 1 or I > n:
        raise ValueError(f"need 1 <= I <= N, got I={I}, N={n}")
    if mode == "iid":
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        sizes = np.full(I, n // I)
        sizes[: n % I] += 1
        index_maps = np.split(perm, np.cumsum(sizes)[:-1])
    elif mode == "non_iid":
        labels = data.samples.labels
        if labels is None:
            raise ValueError("non_iid scattering requires labels")
        components = np.unique(labels)
        if I > components.size:
            raise ValueError(f"more agents ({I}) than components ({components.size})")
        index_maps = [np.concatenate([np.flatnonzero(labels == c)
                                      for c in components[k::I]])
                      for k in range(I)]
    else:
        raise ValueError(f"unknown scatter mode {mode!r}")

    agents = []
    for idx in index_maps:
        labels = None if data.samples.labels is None else data.samples.labels[idx]
        w = data.weights[idx]
        agents.append(DiscreteMeasure(SampleSet(data.points[idx], labels), w / w.sum()))
    return agents, [np.asarray(ix) for ix in index_maps]


@dataclass
class AgentPartition:
    """Source and target measures split across agents, with index maps back
    to the global sample ordering."""

    source_agents: list
    target_agents: list
    source_index_maps: list
    target_index_maps: list

    def __post_init__(self):
        if not self.source_agents or not self.target_agents:
            raise ValueError("both sides of the partition must have >= 1 agent")
        for maps, agents in ((self.source_index_maps, self.source_agents),
                             (self.target_index_maps, self.target_agents)):
            total = np.concatenate(maps)
            if np.unique(total).size != total.size:
                raise ValueError("agents must hold disjoint samples")
            if sorted(total) != list(range(total.size)):
                raise ValueError("agent samples must cover the global set")
            for ix, a in zip(maps, agents):
                if len(ix) != a.n:
                    raise ValueError("index map length does not match agent size")

    @classmethod
    def create(cls, mu: DiscreteMeasure, gamma: DiscreteMeasure, I: int, J: int,
               mode: str = "iid", seed: int = 0) -> "AgentPartition":
        src, src_ix = scatter(mu, I, mode, seed)
        tgt, tgt_ix = scatter(gamma, J, mode, seed + 1)
        return cls(src, tgt, src_ix, tgt_ix)

    @property
    def source_sizes(self):
        return [a.n for a in self.source_agents]

    @property
    def target_sizes(self):
        return [a.n for a in self.target_agents]

    @property
    def n_total(self) -> int:
        return sum(self.source_sizes)

    @property
    def m_total(self) -> int:
        return sum(self.target_sizes)

    def storage_vectors(self):
        """Empirical storage distributions (p, q) induced by agent sizes."""
        p = np.asarray(self.source_sizes, dtype=float)
        q = np.asarray(self.target_sizes, dtype=float)
        return p / p.sum(), q / q.sum()


def _check_simplex(w, name):
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must be a probability vector")
    return w


def storage_protocol(p, q) -> ProtocolMatrix:
    """Outer product p (x) q of the two agent-selection distributions."""
    p = _check_simplex(p, "p")
    q = _check_simplex(q, "q")
    return ProtocolMatrix(np.outer(p, q))


def protocol_generator(kind: str, I: int, J: int, sparsity: float = 0.5,
                       seed: int = 0) -> ProtocolMatrix:
    """Build a communication protocol.

    ideal: uniform p (x) q.  sparse: zero out round(sparsity * I * J) entries
    uniformly at random, renormalize.  sparse_asymmetric: additionally zero
    the strict upper triangle, renormalize.
    """
    if not 0 <= sparsity < 1:
        raise ValueError("sparsity must be in [0, 1)")
    e = np.full((I, J), 1.0 / (I * J))
    if kind == "ideal":
        return ProtocolMatrix(e)
    if kind not in ("sparse", "sparse_asymmetric"):
        raise ValueError(f"unknown protocol kind {kind!r}")
    rng = np.random.default_rng(seed)
    n_zero = int(round(sparsity * I * J))
    flat = rng.choice(I * J, size=n_zero, replace=False)
    e.flat[flat] = 0.0
    if kind == "sparse_asymmetric":
        e[np.triu_indices_from(e, k=1)] = 0.0
    total = e.sum()
    if total <= 0:
        raise ValueError("protocol degenerated to all zeros")
    return ProtocolMatrix(e / total)


def protocol_mismatch(E: ProtocolMatrix, p, q) -> float:
    """sum_ij |e_ij - p_i q_j|, in [0, 2]."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    ref = np.outer(p, q)
    if e.shape != ref.shape:
        raise ValueError(f"shape mismatch: E is {e.shape}, p (x) q is {ref.shape}")
    return float(np.sum(np.abs(e - ref)))


def sample_pair(E: ProtocolMatrix, rng: np.random.Generator):
    """One agent pair drawn from E as a categorical distribution."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    flat = rng.choice(e.size, p=e.ravel() / e.sum())
    return np.unravel_index(flat, e.shape)


def _sample_without_replacement(weights, L, rng, what):
    weights = np.asarray(weights, dtype=np.float64)
    support = int(np.count_nonzero(weights))
    if weights.sum() <= 0:
        raise ValueError(f"{what} has no positive mass")
    if not 1 <= L <= support:
        raise ValueError(f"L={L} exceeds the positive support ({support}) of {what}")
    picks = rng.choice(weights.size, size=L, replace=False, p=weights / weights.sum())
    return set(int(k) for k in picks)

def sample_targets_for_source(i: int, E: ProtocolMatrix, L: int,
                              rng: np.random.Generator) -> set:
    """L distinct target agents drawn from the normalized i-th row of E."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    return _sample_without_replacement(e[i, :], L, rng, f"row {i} of E")


def sample_sources_for_target(j: int, E: ProtocolMatrix, L: int,
                              rng: np.random.Generator) -> set:
    """L distinct source agents drawn from the normalized j-th column of E."""
    e = np.asarray(getattr(E, "values", E), dtype=np.float64)
    return _sample_without_replacement(e[:, j], L, rng, f"column {j} of E")


def exact_kernel_blocks(partition: AgentPartition, spec) -> list:
    """Gibbs kernel blocks computed directly from the raw samples (the
    centralized reference; never used by the privacy-preserving path)."""
    from .measures import kernel_block

    return [[kernel_block(src, tgt, spec, i, j)
             for j, tgt in enumerate(partition.target_agents)]
            for i, src in enumerate(partition.source_agents)]
