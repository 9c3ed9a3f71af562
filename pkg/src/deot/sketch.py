"""Privacy-preserving kernel approximation from binary hyperplane sketches.

Each agent projects its samples onto P shared random directions and keeps
only the signs.  The angle between two samples is then estimated from the
agreement of their sign columns, and the Gibbs kernel is reconstructed from
the estimated angle plus the sample norms.  Only bits, norms, and the shared
seed ever cross agent boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import CostSpec, KernelBlock, SampleSet


@dataclass
class SharedRandomness:
    """Shared random directions, reproducible from the seed alone."""

    seed: int
    directions: np.ndarray  # (P, D)

    @property
    def p(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]


@dataclass
class SignMatrix:
    """P x N binary sketch of one agent's samples, plus optional norms."""

    bits: np.ndarray
    norms: np.ndarray | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if not np.all((self.bits == 0) | (self.bits == 1)):
            raise ValueError("sign matrix entries must be 0/1")
        if self.norms is not None:
            self.norms = np.asarray(self.norms, dtype=np.float64)
            if self.norms.shape != (self.bits.shape[1],):
                raise ValueError("norms length must match the number of samples")
            if np.any(self.norms < 0):
                raise ValueError("norms must be nonnegative")

    @property
    def p(self) -> int:
        return self.bits.shape[0]

    @property
    def n(self) -> int:
        return self.bits.shape[1]


@dataclass
class GipParams:
    """Constants entering the sketch error bound."""

    lipschitz_G: float
    bound_b: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if not self.lipschitz_G > 0:
            raise ValueError("lipschitz_G must be positive")
        if not self.bound_b >= 1:
            raise ValueError("bound_b must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")


def draw_shared_randomness(seed: int, P: int, D: int) -> SharedRandomness:
    """P standard-normal directions in R^D, deterministic in the seed."""
    if P < 1 or D < 1:
        raise ValueError(f"need P >= 1 and D >= 1, got P={P}, D={D}")
    rng = np.random.default_rng(seed)
    return SharedRandomness(seed, rng.standard_normal((P, D)))


def sign_matrix(samples: SampleSet, rand: SharedRandomness,
                normalized: bool = False) -> SignMatrix:
    """Binary sketch: bit (l, n) = 1 iff <omega_l, x_n> >= 0.

    Ties (including the zero vector) map to 1.  Norms are attached unless
    the data is declared pre-normalized.
    """
    if samples.dim != rand.dim:
        raise ValueError(f"dimension mismatch: samples have dim {samples.dim}, "
                         f"directions have dim {rand.dim}")
    bits = (rand.directions @ samples.points.T >= 0).astype(np.uint8)
    norms = None if normalized else np.linalg.norm(samples.points, axis=1)
    return SignMatrix(bits, norms)


def angle_estimate(a_n, a_m, P: int) -> float:
    """Estimated angle  pi * |1 - (2/P) <a_n, a_m>|, in [0, pi]."""
    a_n = np.asarray(a_n, dtype=np.float64)
    a_m = np.asarray(a_m, dtype=np.float64)
    if a_n.shape != a_m.shape:
        raise ValueError("sketch columns must have equal length")
    return float(math.pi * abs(1.0 - (2.0 / P) * float(a_n @ a_m)))


def _reconstructed_cost(angles, src_norms, tgt_norms, kind: str) -> np.ndarray:
    sq = (src_norms[:, None] ** 2 + tgt_norms[None, :] ** 2
          - 2.0 * np.outer(src_norms, tgt_norms) * np.cos(angles))
    np.maximum(sq, 0.0, out=sq)
    return sq if kind == "squared_euclidean" else np.sqrt(sq)


def approx_kernel_block(A_src: SignMatrix, A_tgt: SignMatrix, spec: CostSpec,
                        source_agent: int = 0, target_agent: int = 0) -> KernelBlock:
    """Approximated Gibbs kernel block from two sketches.

    Reconstructs the cost from estimated angles and norms; the reconstructed
    cost is >= (|x| - |y|)^2 >= 0, so every entry stays in (0, 1].
    """
    if A_src.p != A_tgt.p:
        raise ValueError(f"sketch depth mismatch: {A_src.p} vs {A_tgt.p}")
    # absent norms mean the data was declared pre-normalized
    src_norms = np.ones(A_src.n) if A_src.norms is None else A_src.norms
    tgt_norms = np.ones(A_tgt.n) if A_tgt.norms is None else A_tgt.norms
    P = A_src.p
    inner = A_src.bits.astype(np.float64).T @ A_tgt.bits.astype(np.float64)
    angles = math.pi * np.abs(1.0 - (2.0 / P) * inner)
    costs = _reconstructed_cost(angles, src_norms, tgt_norms, spec.kind)
    return KernelBlock(np.exp(-costs / spec.epsilon), source_agent, target_agent)


def run_sketch_exchange(partition, rand: SharedRandomness, spec: CostSpec,
                        normalized: bool = False, ledger=None):
    """Full sketch-and-broadcast round over an agent partition.

    Every source agent broadcasts its sketch (and norms, unless normalized)
    to all target agents and vice versa; each side then reconstructs all of
    its kernel blocks locally.  Returns (kernels, ledger) where kernels is a
    nested list indexed [i][j].
    """
    from .netsim import CommLedger

    if ledger is None:
        ledger = CommLedger()
    I = len(partition.source_agents)
    J = len(partition.target_agents)
    if I == 0 or J == 0:
        raise ValueError("both sides of the partition must be nonempty")

    ledger.record(phase="sketch", sender="coordinator", receivers="all",
                  scalar_count=1, payload_kind="shared_seed")

    src_sketches = []
    for i, m in enumerate(partition.source_agents):
        A = sign_matrix(m.samples, rand, normalized=normalized)
        src_sketches.append(A)
        ledger.record(phase="sketch", sender=f"source:{i}", receivers="targets",
                      bit_count=J * A.n * A.p, payload_kind="sign_bits")
        if not normalized:
            ledger.record(phase="sketch", sender=f"source:{i}", receivers="targets",
                          scalar_count=J * A.n, payload_kind="norms")
    tgt_sketches = []
    for j, m in enumerate(partition.target_agents):
        A = sign_matrix(m.samples, rand, normalized=normalized)
        tgt_sketches.append(A)
        ledger.record(phase="sketch", sender=f"target:{j}", receivers="sources",
                      bit_count=I * A.n * A.p, payload_kind="sign_bits")
        if not normalized:
            ledger.record(phase="sketch", sender=f"target:{j}", receivers="sources",
                          scalar_count=I * A.n, payload_kind="norms")

    kernels = [[approx_kernel_block(src_sketches[i], tgt_sketches[j], spec, i, j)
                for j in range(J)] for i in range(I)]
    return kernels, ledger


def sketch_error_bound(N: int, M: int, P: int, params: GipParams) -> float:
    """High-probability bound on ||K - K_hat|| for the sketch approximation:

        G (N + M) ( sqrt(32 pi^2 / P * log(2(N+M)/delta))
                    + (8 pi / (3 P)) * log(2(N+M)/delta) )

    Strictly decreasing in P.
    """
    if min(N, M, P) < 1:
        raise ValueError("N, M, P must be positive")
    log_term = math.log(2.0 * (N + M) / params.delta)
    return params.lipschitz_G * (N + M) * (
        math.sqrt(32.0 * math.pi**2 / P * log_term)
        + (8.0 * math.pi / (3.0 * P)) * log_term
    )


def estimate_lipschitz(src_points, tgt_points, spec: CostSpec) -> float:
    """Conservative angle-Lipschitz constant for the squared-Euclidean Gibbs
    kernel: |d kernel / d angle| <= 2 max|x| max|y| / eps."""
    max_x = float(np.max(np.linalg.norm(np.asarray(src_points), axis=1)))
    max_y = float(np.max(np.linalg.norm(np.asarray(tgt_points), axis=1)))
    return max(2.0 * max_x * max_y / spec.epsilon, 1e-12)
