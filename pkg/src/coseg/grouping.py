"""Sub-group formation: k-means over global feature vectors, silhouette-driven K
selection, and key-image picking (the cluster member nearest its centroid)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .raster import RasterPlane
from ._interp import resize_bilinear

LLOYD_MAX_ITERS = 100
RESTARTS_PER_K = 5


@dataclass(frozen=True)
class FeatureVector:
    image_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("feature vector must be a finite 1-D array")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass
class SubGrouping:
    k: int
    assignment: dict[str, int]  # image_id -> cluster label in 1..k
    centroids: np.ndarray  # (k, D)
    key_images: dict[int, str] = field(default_factory=dict)
    sse: float = 0.0

    def members(self, label: int) -> list[str]:
        return sorted(i for i, l in self.assignment.items() if l == label)


def fallback_features(image: RasterPlane, image_id: str = "") -> FeatureVector:
    """Deterministic stand-in for backbone features: an 8x8 thumbnail per channel,
    channels concatenated (D = 192)."""
    chans = [resize_bilinear(image.data[:, :, c], 8, 8).ravel() for c in range(image.channels)]
    if image.channels == 1:
        chans = chans * 3
    return FeatureVector(image_id, np.concatenate(chans))


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def lloyd_kmeans(x: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm with k-means++ init; returns (labels, centroids, sse).

    Empty clusters are repaired by reseeding from the point farthest from its
    current centroid.
    """
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, k, rng)
    labels = np.full(n, -1)
    for _ in range(LLOYD_MAX_ITERS):
        d2 = cdist(x, centers, "sqeuclidean")
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                point_d2 = d2[np.arange(n), new_labels]
                far = int(np.argmax(point_d2))
                centers[j] = x[far]
                new_labels[far] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if np.any(members):
                centers[j] = x[members].mean(axis=0)
    d2 = cdist(x, centers, "sqeuclidean")
    sse = float(d2[np.arange(n), labels].sum())
    return labels, centers, sse


def _as_matrix(features: list[FeatureVector]) -> np.ndarray:
    dims = {f.values.shape[0] for f in features}
    if len(dims) != 1:
        raise ValueError(f"feature dimensionality differs across the group: {sorted(dims)}")
    return np.stack([f.values for f in features])


def kmeans(features: list[FeatureVector], k: int, seed: int) -> SubGrouping:
    """Cluster a feature list into k sub-groups (key images left unset)."""
    if len(features) < k:
        raise ValueError(f"need at least {k} features for k={k}, got {len(features)}")
    x = _as_matrix(features)
    labels, centers, sse = lloyd_kmeans(x, k, seed)
    assignment = {f.image_id: int(l) + 1 for f, l in zip(features, labels)}
    return SubGrouping(k=k, assignment=assignment, centroids=centers, sse=sse)


def silhouette_score(features: list[FeatureVector], grouping: SubGrouping) -> float:
    """Mean silhouette over all points; singleton clusters contribute 0."""
    if grouping.k < 2:
        raise ValueError("silhouette analysis requires at least 2 clusters")
    x = _as_matrix(features)
    labels = np.array([grouping.assignment[f.image_id] for f in features])
    dist = cdist(x, x)
    uniq = np.unique(labels)
    scores = np.zeros(len(features))
    for i in range(len(features)):
        own = labels[i]
        same = (labels == own) & (np.arange(len(features)) != i)
        if not np.any(same):
            scores[i] = 0.0  # singleton convention
            continue
        a = dist[i, same].mean()
        b = min(dist[i, labels == other].mean() for other in uniq if other != own)
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def pick_key_images(features: list[FeatureVector], grouping: SubGrouping) -> SubGrouping:
    """Complete a grouping by picking, per cluster, the member nearest its centroid.

    Ties break toward the lexicographically smaller image id.
    """
    x = _as_matrix(features)
    ids = [f.image_id for f in features]
    keys: dict[int, str] = {}
    for label in range(1, grouping.k + 1):
        member_idx = [i for i, f in enumerate(features) if grouping.assignment[f.image_id] == label]
        if not member_idx:
            raise ValueError(f"cluster {label} is empty")
        d = np.sqrt(np.sum((x[member_idx] - grouping.centroids[label - 1]) ** 2, axis=1))
        best = min(zip(d, (ids[i] for i in member_idx)), key=lambda t: (t[0], t[1]))
        keys[label] = best[1]
    return SubGrouping(
        k=grouping.k,
        assignment=dict(grouping.assignment),
        centroids=grouping.centroids,
        key_images=keys,
        sse=grouping.sse,
    )


def select_k(
    features: list[FeatureVector],
    k_min: int | None = None,
    k_max: int | None = None,
    seed: int = 0,
) -> SubGrouping:
    """Pick K by silhouette analysis over [k_min, k_max] and return the completed grouping.

    Inputs are canonically ordered by image_id before any seeding so the result
    is invariant to input permutation. Groups with fewer than 4 images skip
    clustering entirely (K=1). Per K: 5 k-means restarts (seeds seed..seed+4),
    best SSE kept; the K with maximal silhouette wins, ties toward smaller K.
    """
    if not features:
        raise ValueError("empty feature list")
    features = sorted(features, key=lambda f: f.image_id)
    m = len(features)
    if m < 4:
        grouping = kmeans(features, 1, seed)
        return pick_key_images(features, grouping)
    if k_min is None:
        k_min = 2
    if k_max is None:
        k_max = min(10, math.ceil(m / 3))
    k_max = min(k_max, m - 1)
    k_max = max(k_max, k_min)
    best: tuple[float, int, SubGrouping] | None = None
    for k in range(k_min, k_max + 1):
        candidate = min(
            (kmeans(features, k, seed + r) for r in range(RESTARTS_PER_K)),
            key=lambda g: g.sse,
        )
        score = silhouette_score(features, candidate)
        # strict > keeps the smallest K on ties (K ascends)
        if best is None or score > best[0]:
            best = (score, k, candidate)
    return pick_key_images(features, best[2])


def load_features(path) -> list[FeatureVector]:
    """Parse the adapter's feature file: `<image_filename> <v1> ... <vD>` per line."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected an id and at least one value")
            out.append(FeatureVector(parts[0], np.array([float(v) for v in parts[1:]])))
    return out


def save_features(features: list[FeatureVector], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for fv in features:
            vals = " ".join(f"{v:.6f}" for v in fv.values)
            f.write(f"{fv.image_id} {vals}\n")
