"""Synthetic data generators for the experiment driver."""

from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure, SampleSet


def gaussian(n: int, mean, cov, seed: int = 0) -> DiscreteMeasure:
    """n samples from a single Gaussian; all labels 0."""
    rng = np.random.default_rng(seed)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:  # isotropic shorthand: scalar variance
        cov = float(cov) * np.eye(mean.size)
    cov = np.atleast_2d(cov)
    _check_cov(cov, mean.size)
    pts = rng.multivariate_normal(mean, cov, size=n, method="cholesky" if
                                  np.all(np.linalg.eigvalsh(cov) > 0) else "svd")
    return DiscreteMeasure(SampleSet(pts, np.zeros(n, dtype=np.int64)))


def gmm(n: int, means, covs, weights=None, seed: int = 0) -> DiscreteMeasure:
    """n samples from a Gaussian mixture; labels record the component id,
    which is what non-i.i.d. scattering groups by."""
    rng = np.random.default_rng(seed)
    means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in means]
    covs = [np.atleast_2d(np.asarray(c, dtype=float)) for c in covs]
    k = len(means)
    if len(covs) != k:
        raise ValueError("means and covariances must have equal length")
    for c, m in zip(covs, means):
        _check_cov(c, m.size)
    if weights is None:
        weights = np.full(k, 1.0 / k)
    weights = np.asarray(weights, dtype=float)
    comps = rng.choice(k, size=n, p=weights / weights.sum())
    pts = np.empty((n, means[0].size))
    for c in range(k):
        idx = np.flatnonzero(comps == c)
        if idx.size:
            pts[idx] = rng.multivariate_normal(means[c], covs[c], size=idx.size)
    return DiscreteMeasure(SampleSet(pts, comps.astype(np.int64)))


def _check_cov(cov, dim):
    if cov.shape != (dim, dim):
        raise ValueError(f"covariance shape {cov.shape} does not match dim {dim}")
    eig = np.linalg.eigvalsh((cov + cov.T) / 2)
    if np.any(eig < -1e-12):
        raise ValueError("covariance must be positive semidefinite")


def generate_synthetic(spec: dict, seed: int = 0) -> DiscreteMeasure:
    """Build a measure from a dataset spec dict.

    kinds: {"kind": "gaussian", "n": ..., "mean": [...], "cov": [[...]]} or
    {"kind": "gmm", "n": ..., "means": [...], "covs": [...], "weights": [...]}.
    """
    kind = spec.get("kind")
    if kind == "gaussian":
        return gaussian(spec["n"], spec["mean"], spec["cov"], seed)
    if kind == "gmm":
        return gmm(spec["n"], spec["means"], spec["covs"],
                   spec.get("weights"), seed)
    raise ValueError(f"unknown dataset kind {kind!r}")


def translated_blobs(n: int, shift, separation: float = 2.0,
                     std: float = 0.15, seed: int = 0):
    """Two-class blob pair plus a translated copy: the classic instance where
    plain nearest-neighbor transfer breaks but transport-based alignment
    recovers it.  Returns (source, target) labeled measures."""
    rng = np.random.default_rng(seed)
    shift = np.asarray(shift, dtype=float)
    half = n // 2
    pts0 = rng.normal(0.0, std, size=(half, 2))
    pts1 = rng.normal(0.0, std, size=(n - half, 2)) + np.array([separation, 0.0])
    src_pts = np.vstack([pts0, pts1])
    labels = np.concatenate([np.zeros(half, dtype=np.int64),
                             np.ones(n - half, dtype=np.int64)])
    tgt0 = rng.normal(0.0, std, size=(half, 2)) + shift
    tgt1 = rng.normal(0.0, std, size=(n - half, 2)) + np.array([separation, 0.0]) + shift
    tgt_pts = np.vstack([tgt0, tgt1])
    source = DiscreteMeasure(SampleSet(src_pts, labels))
    target = DiscreteMeasure(SampleSet(tgt_pts, labels.copy()))
    return source, target
