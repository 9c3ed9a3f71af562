"""Sample sets, discrete measures, costs, and the exact Gibbs kernel."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

COST_KINDS = ("squared_euclidean", "euclidean")


@dataclass
class SampleSet:
    """A finite set of points in R^D with optional integer class labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError(f"points must be 2-D (N, D), got shape {self.points.shape}")
        n, d = self.points.shape
        if n < 1 or d < 1:
            raise ValueError(f"need N >= 1 and D >= 1, got N={n}, D={d}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match N={n}"
                )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class DiscreteMeasure:
    """Weighted sample set; weights default to uniform 1/N."""

    samples: SampleSet
    weights: np.ndarray = None

    def __post_init__(self):
        n = self.samples.n
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise ValueError(f"weights length {self.weights.shape[0]} != N={n}")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")

    @property
    def points(self) -> np.ndarray:
        return self.samples.points

    @property
    def n(self) -> int:
        return self.samples.n

    @property
    def dim(self) -> int:
        return self.samples.dim

    def is_uniform(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.weights - 1.0 / self.n)) <= tol)


def uniform_measure(points, labels=None) -> DiscreteMeasure:
    return DiscreteMeasure(SampleSet(points, labels))


@dataclass
class CostSpec:
    """Ground cost family plus the entropic regularization weight."""

    kind: str = "squared_euclidean"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}; expected one of {COST_KINDS}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class KernelBlock:
    """One (source agent, target agent) block of the Gibbs kernel matrix."""

    values: np.ndarray
    source_agent: int = 0
    target_agent: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("kernel block contains non-finite entries")

    @property
    def shape(self):
        return self.values.shape


def cost(x, y, spec: CostSpec) -> float:
    """Ground cost between two points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: x has dim {x.shape}, y has dim {y.shape}")
    sq = float(np.sum((x - y) ** 2))
    return sq if spec.kind == "squared_euclidean" else float(np.sqrt(sq))


def cost_matrix(X, Y, spec: CostSpec) -> np.ndarray:
    """Pairwise ground costs between rows of X (N, D) and Y (M, D)."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(
            f"dimension mismatch: X has dim {X.shape[1]}, Y has dim {Y.shape[1]}"
        )
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(Y**2, axis=1)[None, :]
        - 2.0 * X @ Y.T
    )
    np.maximum(sq, 0.0, out=sq)
    return sq if spec.kind == "squared_euclidean" else np.sqrt(sq)


def gibbs_kernel(x, y, spec: CostSpec) -> float:
    """exp(-c(x, y) / epsilon), always in (0, 1] for nonnegative costs."""
    return float(np.exp(-cost(x, y, spec) / spec.epsilon))


def kernel_block(
    src: DiscreteMeasure, tgt: DiscreteMeasure, spec: CostSpec,
    source_agent: int = 0, target_agent: int = 0,
) -> KernelBlock:
    """Elementwise Gibbs kernel between two measures."""
    values = np.exp(-cost_matrix(src.points, tgt.points, spec) / spec.epsilon)
    return KernelBlock(values, source_agent, target_agent)


def load_csv(path) -> SampleSet:
    """Read samples from CSV: header row, numeric feature columns, optional
    trailing integer column named 'label'."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"no samples in {path}")
    has_label = header and header[-1].strip().lower() == "label"
    data = np.array([[float(v) for v in row] for row in rows])
    if has_label:
        return SampleSet(data[:, :-1], data[:, -1].astype(np.int64))
    return SampleSet(data)


def save_csv(path, samples: SampleSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = [f"x{k}" for k in range(samples.dim)]
        if samples.labels is not None:
            writer.writerow(cols + ["label"])
            for p, lab in zip(samples.points, samples.labels):
                writer.writerow([repr(float(v)) for v in p] + [int(lab)])
        else:
            writer.writerow(cols)
            for p in samples.points:
                writer.writerow([repr(float(v)) for v in p])
