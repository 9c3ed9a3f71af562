"""Transport-based label transfer: barycentric mapping plus 1-NN."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dual import coupling_from_duals
from .measures import CostSpec, DiscreteMeasure, cost_matrix
from .netsim import AgentPartition, storage_protocol
from . import solver as solver_mod


def barycentric_map(coupling, target_points, N: int,
                    source_weights=None) -> np.ndarray:
    """Mapped source samples  X_hat = N * Pi * Y.

    Valid only for uniform source weights; each mapped point is then a convex
    combination of target points (up to marginal convergence error).
    """
    pi = np.asarray(coupling, dtype=np.float64)
    Y = np.asarray(target_points, dtype=np.float64)
    if pi.shape[0] != N:
        raise ValueError(f"coupling has {pi.shape[0]} rows, expected N={N}")
    if pi.shape[1] != Y.shape[0]:
        raise ValueError(f"coupling has {pi.shape[1]} columns but "
                         f"{Y.shape[0]} target points were given")
    if source_weights is not None:
        w = np.asarray(source_weights, dtype=np.float64)
        if np.max(np.abs(w - 1.0 / N)) > 1e-9:
            raise ValueError("barycentric mapping assumes uniform source "
                             "weights; renormalize the measure first")
    return N * (pi @ Y)


def nn1_predict(train_points, train_labels, test_points) -> np.ndarray:
    """1-nearest-neighbor under Euclidean distance; ties break to the lowest
    training index."""
    d = cdist(np.asarray(test_points), np.asarray(train_points))
    return np.asarray(train_labels)[np.argmin(d, axis=1)]


@dataclass
class AdaptationResult:
    accuracy: float
    per_class_accuracy: dict
    baseline_accuracy: float
    config_hash: str


def _accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    acc = float(np.mean(pred == truth))
    per_class = {}
    for c in np.unique(truth):
        mask = truth == c
        per_class[int(c)] = float(np.mean(pred[mask] == truth[mask]))
    return acc, per_class


def domain_adapt(source: DiscreteMeasure, target: DiscreteMeasure,
                 config: solver_mod.SolverConfig, I: int = 2, J: int = 2,
                 storage_mode: str = "iid") -> AdaptationResult:
    """Decentralized EOT, coupling recovery from averaged duals, barycentric
    mapping, then 1-NN transfer.  Target labels are used for evaluation only;
    the reported baseline trains the same 1-NN directly on the raw source.
    """
    if source.samples.labels is None:
        raise ValueError("source labels are required for adaptation")
    if target.samples.labels is None:
        raise ValueError("target labels are required for evaluation")
    src_classes = set(np.unique(source.samples.labels).tolist())
    tgt_classes = set(np.unique(target.samples.labels).tolist())
    if not tgt_classes <= src_classes:
        raise ValueError(f"target classes {sorted(tgt_classes - src_classes)} "
                         f"never appear in the source")
    if not (source.is_uniform() and target.is_uniform()):
        raise ValueError("adaptation assumes uniform measures")

    partition = AgentPartition.create(source, target, I, J,
                                      mode=storage_mode, seed=config.seed)
    E = storage_protocol(*partition.storage_vectors())
    run = solver_mod.solve(partition, E, config)

    # stitch block duals back into global sample order
    u = np.empty(source.n)
    v = np.empty(target.n)
    u_avg, v_avg = run.state.averaged()
    for ix, block in zip(partition.source_index_maps, u_avg):
        u[ix] = block
    for jx, block in zip(partition.target_index_maps, v_avg):
        v[jx] = block
    C = cost_matrix(source.points, target.points, config.cost_spec)
    pi = coupling_from_duals(u, v, C, source.weights, target.weights,
                             config.epsilon, guard=config.overflow_guard)
    mapped = barycentric_map(pi, target.points, source.n, source.weights)

    pred = nn1_predict(mapped, source.samples.labels, target.points)
    acc, per_class = _accuracy(pred, target.samples.labels)
    base_pred = nn1_predict(source.points, source.samples.labels, target.points)
    base_acc, _ = _accuracy(base_pred, target.samples.labels)

    digest = hashlib.sha256(json.dumps({
        "epsilon": config.epsilon, "eta0": config.eta0, "T": config.T,
        "L": config.L, "seed": config.seed, "kernel": config.kernel_source,
        "P": config.P, "I": I, "J": J, "mode": storage_mode,
    }, sort_keys=True).encode()).hexdigest()[:16]
    return AdaptationResult(acc, per_class, base_acc, digest)
