"""Fused saliency map -> binary object mask.

Otsu thresholding turns the fused map into a four-way trimap seed; an internally
implemented GrabCut (hard-assignment GMM color models + exact s/t min-cut over an
8-connected grid) extracts the object. Hyperparameters follow the original
GrabCut defaults: gamma=50, 5 components, 5 iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fusion import FusedMap
from .grouping import lloyd_kmeans
from .maxflow import FlowNetworkGraph, max_flow
from .raster import BinaryMask, RasterPlane

log = logging.getLogger(__name__)

HARD_BG = 0
HARD_FG = 1
PROB_BG = 2
PROB_FG = 3

OTSU_BINS = 256
HARD_FG_BAND = 0.35  # values at least min(0.9, t + band) above threshold seed HardFG
HARD_FG_CAP = 0.9
COV_REG = 1e-6
DATA_TERM_CAP = 1e5  # guards collapsed-covariance Mahalanobis blowups
GMM_EM_ITERS = 3

_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1)]  # half of 8-connectivity; arcs added both ways


@dataclass(frozen=True)
class TrimapSeed:
    """Per-pixel {HardFG, ProbFG, ProbBG, HardBG} labels."""

    labels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.labels, dtype=np.uint8)
        if a.ndim != 2:
            raise ValueError("trimap must be 2-D")
        if not np.all(np.isin(a, [HARD_BG, HARD_FG, PROB_BG, PROB_FG])):
            raise ValueError("trimap contains labels outside the four seed classes")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "labels", a)


@dataclass
class GmmModel:
    """Full-covariance color mixture with hard-assignment semantics."""

    weights: np.ndarray  # (K,), simplex
    means: np.ndarray  # (K, 3)
    covariances: np.ndarray  # (K, 3, 3), regularized SPD

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")

    @property
    def component_count(self) -> int:
        return len(self.weights)

    def component_neg_log_likelihood(self, pixels: np.ndarray) -> np.ndarray:
        """-log(w_k * N(z; mu_k, Sigma_k)) per (pixel, component); inf for dead components."""
        n = pixels.shape[0]
        out = np.full((n, self.component_count), np.inf)
        for k in range(self.component_count):
            if self.weights[k] <= 0.0:
                continue
            diff = pixels - self.means[k]
            cov = self.covariances[k]
            sign, logdet = np.linalg.slogdet(cov)
            maha = np.einsum("ij,jk,ik->i", diff, np.linalg.inv(cov), diff)
            out[:, k] = (
                -np.log(self.weights[k])
                + 0.5 * (3 * np.log(2.0 * np.pi) + logdet)
                + 0.5 * maha
            )
        return out

    def data_term(self, pixels: np.ndarray) -> np.ndarray:
        """Assigned-component negative log-likelihood, the GrabCut data term."""
        return self.component_neg_log_likelihood(pixels).min(axis=1)


def otsu_threshold(fused: FusedMap) -> float:
    """Between-class-variance-maximizing threshold over 256 bins (smallest tie wins).

    A pixel counts as foreground iff its value is strictly above the returned t.
    Constant maps return their own value, leaving the foreground empty.
    """
    values = fused.values.plane().ravel()
    if values.min() == values.max():
        return float(values[0])
    bins = np.floor(values * (OTSU_BINS - 1) + 0.5).astype(np.intp)
    hist = np.bincount(bins, minlength=OTSU_BINS)
    total = int(hist.sum())
    total_sum = int((hist * np.arange(OTSU_BINS)).sum())
    # sigma_b(t) is proportional to (s0*n1 - s1*n0)^2 / (n0*n1); comparing the
    # ratios by integer cross-multiplication makes ties (and therefore the
    # smallest-tie rule) exact rather than float-rounding-dependent
    best_t, best_num, best_den = 0, -1, 1
    n0 = s0 = 0
    for t in range(OTSU_BINS):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total_sum - s0
        num = (s0 * n1 - s1 * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t / (OTSU_BINS - 1)


def seeds_from_otsu(fused: FusedMap, t: float) -> TrimapSeed:
    """Derive the four-way trimap from the fused map and its Otsu threshold.

    Above-threshold pixels are ProbFG, with a high-confidence band promoted to
    HardFG; at-or-below-threshold pixels are ProbBG, and the one-pixel image
    border among them is pinned HardBG.
    """
    v = fused.values.plane()
    labels = np.where(v > t, PROB_FG, PROB_BG).astype(np.uint8)
    labels[v >= min(HARD_FG_CAP, t + HARD_FG_BAND)] = HARD_FG
    border = np.zeros_like(v, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    labels[border & (v <= t)] = HARD_BG
    return TrimapSeed(labels)


def fit_gmm(
    pixels: np.ndarray,
    component_count: int = 5,
    seed: int = 0,
    init_model: GmmModel | None = None,
) -> GmmModel:
    """Fit a color GMM by k-means++ init (or warm start from a previous model)
    followed by hard-assignment EM rounds.

    An EM round that worsens the realized objective is rolled back, so a
    warm-started refit never increases the data-term sum it inherited.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    n = pixels.shape[0]
    if n == 0:
        raise ValueError("cannot fit a GMM on zero pixels")
    component_count = min(component_count, n)
    if init_model is not None:
        model = init_model
        assign = np.argmin(model.component_neg_log_likelihood(pixels), axis=1)
    else:
        assign, _, _ = lloyd_kmeans(pixels, component_count, seed)
        model = _refit(pixels, assign, component_count)
    k = model.component_count

    def capped_obj(m: GmmModel) -> float:
        return float(np.minimum(m.data_term(pixels), DATA_TERM_CAP).sum())

    best_obj = capped_obj(model)
    best = model
    for _ in range(GMM_EM_ITERS):
        assign = np.argmin(model.component_neg_log_likelihood(pixels), axis=1)
        model = _refit(pixels, assign, k)
        obj = capped_obj(model)
        if obj > best_obj:
            break
        best_obj, best = obj, model
    return best


def _refit(pixels: np.ndarray, assign: np.ndarray, k: int) -> GmmModel:
    n = pixels.shape[0]
    weights = np.zeros(k)
    means = np.zeros((k, 3))
    covs = np.tile(np.eye(3) * COV_REG, (k, 1, 1))
    for j in range(k):
        sel = pixels[assign == j]
        if len(sel) == 0:
            continue
        weights[j] = len(sel) / n
        means[j] = sel.mean(axis=0)
        diff = sel - means[j]
        covs[j] = diff.T @ diff / len(sel) + np.eye(3) * COV_REG
    return GmmModel(weights=weights, means=means, covariances=covs)


def compute_beta(colors: np.ndarray) -> float:
    """Expected-contrast scale: 1 / (2 <||z_u - z_v||^2>) over 8-neighbor pairs."""
    total = 0.0
    count = 0
    for dy, dx in _OFFSETS:
        a, b = _neighbor_slices(colors, dy, dx)
        d2 = np.sum((a - b) ** 2, axis=-1)
        total += d2.sum()
        count += d2.size
    mean = total / count if count else 0.0
    return 1.0 if mean <= 0.0 else 1.0 / (2.0 * mean)


def _neighbor_slices(arr: np.ndarray, dy: int, dx: int):
    """Aligned views (a, b) where b is a's neighbor at offset (dy, dx)."""
    h, w = arr.shape[:2]
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ysn = slice(max(0, dy), min(h, h + dy))
    xsn = slice(max(0, dx), min(w, w + dx))
    return arr[ys, xs], arr[ysn, xsn]


def build_graph(
    image: RasterPlane,
    trimap: TrimapSeed,
    fg_gmm: GmmModel,
    bg_gmm: GmmModel,
    gamma: float = 50.0,
    beta: float | None = None,
) -> FlowNetworkGraph:
    """Assemble the s/t grid graph for one GrabCut cut.

    Terminal arcs carry the (shifted, clamped) data terms: s->p pays when p is
    labeled background, p->t when foreground. HardFG pixels get an uncuttable
    source arc, HardBG an uncuttable sink arc. Neighbor arcs carry the
    contrast-weighted smoothness gamma * exp(-beta ||z_u - z_v||^2) / dist(u, v).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    h, w = image.height, image.width
    colors = image.data if image.channels == 3 else np.repeat(image.data, 3, axis=2)
    if trimap.labels.shape != (h, w):
        raise ValueError("trimap dimensions must match the image")
    if beta is None:
        beta = compute_beta(colors)
    npix = h * w
    ids = np.arange(npix).reshape(h, w)
    source, sink = npix, npix + 1

    flat = colors.reshape(-1, 3)
    d_fg = np.minimum(fg_gmm.data_term(flat), DATA_TERM_CAP)
    d_bg = np.minimum(bg_gmm.data_term(flat), DATA_TERM_CAP)
    shift = np.minimum(np.minimum(d_fg, d_bg), 0.0)  # label-independent, keeps caps >= 0
    d_fg = d_fg - shift
    d_bg = d_bg - shift

    max_data = float(max(d_fg.max(), d_bg.max())) if npix else 0.0
    infinite = 1.0 + max_data * npix

    labels = trimap.labels.ravel()
    src_cap = np.where(labels == HARD_FG, infinite, d_bg)
    snk_cap = np.where(labels == HARD_BG, infinite, d_fg)

    tails = [np.full(npix, source), ids.ravel()]
    heads = [ids.ravel(), np.full(npix, sink)]
    caps = [src_cap, snk_cap]
    for dy, dx in _OFFSETS:
        a, b = _neighbor_slices(colors, dy, dx)
        ia, ib = _neighbor_slices(ids, dy, dx)
        d2 = np.sum((a - b) ** 2, axis=-1)
        wgt = gamma * np.exp(-beta * d2) / np.hypot(dy, dx)
        tails += [ia.ravel(), ib.ravel()]
        heads += [ib.ravel(), ia.ravel()]
        caps += [wgt.ravel(), wgt.ravel()]
    return FlowNetworkGraph(
        n_nodes=npix + 2,
        source=source,
        sink=sink,
        tails=np.concatenate(tails),
        heads=np.concatenate(heads),
        capacities=np.concatenate(caps),
    )


def segmentation_energy(
    image: RasterPlane,
    fg_mask: np.ndarray,
    fg_gmm: GmmModel,
    bg_gmm: GmmModel,
    gamma: float = 50.0,
    beta: float | None = None,
) -> float:
    """GrabCut objective of a labeling: data terms plus cut smoothness."""
    colors = image.data if image.channels == 3 else np.repeat(image.data, 3, axis=2)
    if beta is None:
        beta = compute_beta(colors)
    flat = colors.reshape(-1, 3)
    d_fg = np.minimum(fg_gmm.data_term(flat), DATA_TERM_CAP)
    d_bg = np.minimum(bg_gmm.data_term(flat), DATA_TERM_CAP)
    fg = np.asarray(fg_mask, dtype=bool).ravel()
    energy = float(np.where(fg, d_fg, d_bg).sum())
    fg2d = fg.reshape(image.height, image.width)
    for dy, dx in _OFFSETS:
        a, b = _neighbor_slices(colors, dy, dx)
        la, lb = _neighbor_slices(fg2d, dy, dx)
        d2 = np.sum((a - b) ** 2, axis=-1)
        wgt = gamma * np.exp(-beta * d2) / np.hypot(dy, dx)
        energy += float(wgt[la != lb].sum())
    return energy


class GrabCut:
    """Iterative GMM + min-cut segmentation with fixed hyperparameters.

    Results of the last `segment` call live in trailing-underscore attributes
    (`energy_trace_`, `iterations_run_`).
    """

    def __init__(self, iterations: int = 5, components: int = 5, gamma: float = 50.0, seed: int = 0):
        self.iterations = iterations
        self.components = components
        self.gamma = gamma
        self.seed = seed
        self.energy_trace_: list[tuple[float, float]] = []
        self.iterations_run_ = 0

    def get_params(self) -> dict:
        return {
            "iterations": self.iterations,
            "components": self.components,
            "gamma": self.gamma,
            "seed": self.seed,
        }

    def segment(self, image: RasterPlane, trimap: TrimapSeed) -> BinaryMask:
        h, w = image.height, image.width
        labels = trimap.labels.copy()
        fg_pool = np.isin(labels, [HARD_FG, PROB_FG])
        bg_pool = np.isin(labels, [HARD_BG, PROB_BG])
        if fg_pool.sum() < self.components or bg_pool.sum() < self.components:
            log.warning(
                "degenerate trimap (%d FG / %d BG seed pixels); returning hard-FG mask",
                int(fg_pool.sum()), int(bg_pool.sum()),
            )
            self.energy_trace_ = []
            self.iterations_run_ = 0
            return BinaryMask(labels == HARD_FG)
        colors = image.data if image.channels == 3 else np.repeat(image.data, 3, axis=2)
        beta = compute_beta(colors)
        flat = colors.reshape(-1, 3)
        fg_gmm = bg_gmm = None
        self.energy_trace_ = []
        for it in range(self.iterations):
            fg = np.isin(labels, [HARD_FG, PROB_FG]).ravel()
            fg_gmm = fit_gmm(flat[fg], self.components, self.seed + it, init_model=fg_gmm)
            bg_gmm = fit_gmm(flat[~fg], self.components, self.seed + it, init_model=bg_gmm)
            e_refit = segmentation_energy(
                image, fg.reshape(h, w), fg_gmm, bg_gmm, self.gamma, beta
            )
            graph = build_graph(image, TrimapSeed(labels), fg_gmm, bg_gmm, self.gamma, beta)
            _, source_side = max_flow(graph)
            cut_fg = source_side[: h * w].reshape(h, w)
            new_labels = labels.copy()
            prob = np.isin(labels, [PROB_FG, PROB_BG])
            new_labels[prob & cut_fg] = PROB_FG
            new_labels[prob & ~cut_fg] = PROB_BG
            e_cut = segmentation_energy(
                image,
                np.isin(new_labels, [HARD_FG, PROB_FG]),
                fg_gmm, bg_gmm, self.gamma, beta,
            )
            self.energy_trace_.append((e_refit, e_cut))
            self.iterations_run_ = it + 1
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        return BinaryMask(np.isin(labels, [HARD_FG, PROB_FG]))


def grabcut(
    image: RasterPlane,
    trimap: TrimapSeed,
    iterations: int = 5,
    components: int = 5,
    gamma: float = 50.0,
    seed: int = 0,
) -> BinaryMask:
    """One-shot convenience wrapper over the GrabCut class."""
    return GrabCut(iterations, components, gamma, seed).segment(image, trimap)
