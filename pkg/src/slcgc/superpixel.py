"""Homogeneous region generation and the pixel/superpixel graph.

SLIC implementation notes:

* cluster centers start on a regular grid with spacing ``s = sqrt(HW/K)``
  and are refined for a fixed number of iterations, each pixel competing
  only with centers whose 2s x 2s window covers it;
* the combined distance is ``sqrt(d_feat^2 + (d_spatial/s)^2 * m^2)`` with
  compactness ``m`` expressed in feature units (features are expected to
  be roughly unit scale);
* ties go to the lowest segment index, which keeps the result
  deterministic;
* afterwards 4-connectivity is enforced: every label keeps its largest
  connected component and each orphan component is relabeled to the
  spatially adjacent segment with the nearest mean feature.

The node feature projection multiplies the column-normalized membership
matrix against the flattened image, i.e. row i of the output is the mean
spectrum of segment i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .hsi_io import ClusterMap, HsiCube
from .preprocess import ReducedImage


@dataclass
class Segmentation:
    """Per-pixel superpixel assignment with ids compacted to [0, N)."""

    assignments: np.ndarray  # (height, width), int32
    n_segments: int
    counts: np.ndarray  # (n_segments,)

    @property
    def height(self) -> int:
        return self.assignments.shape[0]

    @property
    def width(self) -> int:
        return self.assignments.shape[1]


@dataclass
class Graph:
    """Superpixel graph: 0/1 adjacency (sparse) plus node feature matrix."""

    adjacency: scipy.sparse.csr_matrix  # (N, N)
    features: np.ndarray  # (N, bands)


def slic(img: ReducedImage, n_segments: int, compactness: float = 0.1,
         iters: int = 10) -> Segmentation:
    """Segment a reduced image into roughly ``n_segments`` superpixels."""
    h, w, r = img.height, img.width, img.components
    n_pixels = h * w
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    if n_segments > n_pixels:
        raise ValueError(f"n_segments={n_segments} exceeds pixel count {n_pixels}")
    if compactness <= 0:
        raise ValueError("compactness must be > 0")

    feats = np.ascontiguousarray(img.values, dtype=np.float64)
    s = np.sqrt(n_pixels / n_segments)
    ny = max(1, round(h / s))
    nx = max(1, round(w / s))
    cy = (np.arange(ny) + 0.5) * h / ny
    cx = (np.arange(nx) + 0.5) * w / nx
    centers_y, centers_x = (a.ravel() for a in np.meshgrid(cy, cx, indexing="ij"))
    centers_y = centers_y.copy()
    centers_x = centers_x.copy()
    k = centers_y.size
    iy = np.clip(np.round(centers_y - 0.5).astype(int), 0, h - 1)
    ix = np.clip(np.round(centers_x - 0.5).astype(int), 0, w - 1)
    centers_f = feats[iy, ix].copy()

    # Pixel (i, j) is the unit cell centered at (i+0.5, j+0.5); keeping the
    # spatial terms in that convention avoids systematic ties between
    # symmetric centers on perfectly regular inputs.
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
    spatial_scale = compactness * compactness / (s * s)
    labels = np.full((h, w), -1, dtype=np.int32)

    for _ in range(max(1, iters)):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for c in range(k):
            y0 = max(0, int(np.floor(centers_y[c] - s)))
            y1 = min(h, int(np.ceil(centers_y[c] + s)) + 1)
            x0 = max(0, int(np.floor(centers_x[c] - s)))
            x1 = min(w, int(np.ceil(centers_x[c] + s)) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            df2 = ((feats[y0:y1, x0:x1] - centers_f[c]) ** 2).sum(axis=-1)
            ds2 = (yy[y0:y1, x0:x1] - centers_y[c]) ** 2 + (
                xx[y0:y1, x0:x1] - centers_x[c]
            ) ** 2
            d2 = df2 + ds2 * spatial_scale
            win_best = best[y0:y1, x0:x1]
            better = d2 < win_best  # strict: earlier (lower) index wins ties
            win_best[better] = d2[better]
            labels[y0:y1, x0:x1][better] = c

        if (labels < 0).any():
            _assign_orphan_pixels(labels, feats, yy, xx, centers_f, centers_y,
                                  centers_x, spatial_scale)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        occupied = counts > 0
        sum_y = np.bincount(flat, weights=yy.ravel(), minlength=k)
        sum_x = np.bincount(flat, weights=xx.ravel(), minlength=k)
        centers_y[occupied] = sum_y[occupied] / counts[occupied]
        centers_x[occupied] = sum_x[occupied] / counts[occupied]
        for j in range(r):
            sf = np.bincount(flat, weights=feats[..., j].ravel(), minlength=k)
            centers_f[occupied, j] = sf[occupied] / counts[occupied]

    labels = _enforce_connectivity(labels, feats)
    labels = _compact_labels(labels)
    counts = np.bincount(labels.ravel())
    return Segmentation(assignments=labels, n_segments=counts.size, counts=counts)


def _assign_orphan_pixels(labels, feats, yy, xx, centers_f, centers_y, centers_x,
                          spatial_scale):
    # Pixels not covered by any window (possible on extreme aspect ratios):
    # brute-force against all centers.
    miss = labels < 0
    mf = feats[miss]
    my = yy[miss]
    mx = xx[miss]
    d2 = ((mf[:, None, :] - centers_f[None, :, :]) ** 2).sum(axis=-1)
    d2 += ((my[:, None] - centers_y[None, :]) ** 2 +
           (mx[:, None] - centers_x[None, :]) ** 2) * spatial_scale
    labels[miss] = np.argmin(d2, axis=1)


def _pixel_grid_pairs(h: int, w: int):
    idx = np.arange(h * w).reshape(h, w)
    pairs_a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    pairs_b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return pairs_a, pairs_b


def _enforce_connectivity(labels: np.ndarray, feats: np.ndarray) -> np.ndarray:
    h, w = labels.shape
    flat = labels.ravel()
    pa, pb = _pixel_grid_pairs(h, w)
    same = flat[pa] == flat[pb]
    graph = scipy.sparse.coo_matrix(
        (np.ones(same.sum()), (pa[same], pb[same])), shape=(h * w, h * w)
    )
    n_comps, comp = connected_components(graph, directed=False)
    comp_sizes = np.bincount(comp, minlength=n_comps)
    comp_label = np.full(n_comps, -1, dtype=np.int64)
    comp_label[comp] = flat  # every pixel of a component shares its label

    # Largest component of each label is kept; ties go to the lower comp id.
    keeper: dict[int, int] = {}
    for cid in range(n_comps):
        lab = int(comp_label[cid])
        best = keeper.get(lab)
        if best is None or comp_sizes[cid] > comp_sizes[best]:
            keeper[lab] = cid
    kept = np.zeros(n_comps, dtype=bool)
    kept[list(keeper.values())] = True
    if kept.all():
        return labels

    # Mean reduced feature per component and per (pre-enforcement) label.
    r = feats.shape[-1]
    ff = feats.reshape(-1, r)
    comp_feat = np.empty((n_comps, r))
    for j in range(r):
        comp_feat[:, j] = np.bincount(comp, weights=ff[:, j], minlength=n_comps)
    comp_feat /= comp_sizes[:, None]
    n_labels = int(flat.max()) + 1
    label_feat = np.zeros((n_labels, r))
    label_n = np.bincount(flat, minlength=n_labels).astype(np.float64)
    for j in range(r):
        label_feat[:, j] = np.bincount(flat, weights=ff[:, j], minlength=n_labels)
    label_feat[label_n > 0] /= label_n[label_n > 0, None]

    # Component adjacency from cross-component pixel neighbor pairs.
    diff = ~same
    ca = comp[pa[diff]]
    cb = comp[pb[diff]]
    neighbor_pairs = np.unique(
        np.stack([np.minimum(ca, cb), np.maximum(ca, cb)], axis=1), axis=0
    )
    neighbors: list[list[int]] = [[] for _ in range(n_comps)]
    for a, b in neighbor_pairs:
        neighbors[a].append(int(b))
        neighbors[b].append(int(a))

    final = np.full(n_comps, -1, dtype=np.int64)
    final[kept] = comp_label[kept]
    unresolved = [cid for cid in range(n_comps) if not kept[cid]]
    while unresolved:
        still = []
        progressed = False
        for cid in unresolved:
            cand = sorted({int(final[nc]) for nc in neighbors[cid] if final[nc] >= 0})
            if not cand:
                still.append(cid)
                continue
            dists = ((label_feat[cand] - comp_feat[cid]) ** 2).sum(axis=1)
            final[cid] = cand[int(np.argmin(dists))]
            progressed = True
        if not progressed:
            # Isolated pocket of orphans (no resolved neighbor anywhere):
            # attach the first one to the feature-nearest kept label.
            cid = still[0]
            kept_labels = sorted({int(comp_label[c]) for c in range(n_comps) if kept[c]})
            dists = ((label_feat[kept_labels] - comp_feat[cid]) ** 2).sum(axis=1)
            final[cid] = kept_labels[int(np.argmin(dists))]
            still.remove(cid)
        unresolved = still
    return final[comp].reshape(h, w).astype(np.int32)


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    present = np.unique(labels)
    remap = np.full(int(present.max()) + 1, -1, dtype=np.int32)
    remap[present] = np.arange(present.size, dtype=np.int32)
    return remap[labels]


def pixel_segmentation(height: int, width: int) -> Segmentation:
    """Degenerate segmentation with one node per pixel (region ablation)."""
    assignments = np.arange(height * width, dtype=np.int32).reshape(height, width)
    return Segmentation(
        assignments=assignments,
        n_segments=height * width,
        counts=np.ones(height * width, dtype=np.int64),
    )


def build_adjacency(seg: Segmentation) -> scipy.sparse.csr_matrix:
    """0/1 adjacency: segments sharing a 4-neighbor pixel border are linked."""
    flat = seg.assignments.ravel()
    pa, pb = _pixel_grid_pairs(seg.height, seg.width)
    la, lb = flat[pa], flat[pb]
    diff = la != lb
    la, lb = la[diff], lb[diff]
    n = seg.n_segments
    if la.size == 0:
        return scipy.sparse.csr_matrix((n, n))
    rows = np.concatenate([la, lb])
    cols = np.concatenate([lb, la])
    adj = scipy.sparse.coo_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(n, n)
    ).tocsr()
    adj.data[:] = 1.0  # collapse duplicate border pairs
    return adj


def correlation_matrix(seg: Segmentation, normalized: bool = False):
    """Pixel-to-superpixel membership matrix (hw x N), optionally
    column-normalized so each column sums to one."""
    flat = seg.assignments.ravel()
    n_pix = flat.size
    data = np.ones(n_pix)
    if normalized:
        data = data / seg.counts[flat]
    q = scipy.sparse.coo_matrix(
        (data, (np.arange(n_pix), flat)), shape=(n_pix, seg.n_segments)
    )
    return q.tocsr()


def project(cube: HsiCube, seg: Segmentation) -> np.ndarray:
    """Mean spectrum per segment, i.e. Qhat^T applied to the flattened cube."""
    if seg.height != cube.height or seg.width != cube.width:
        raise ValueError("segmentation dimensions do not match the cube")
    flat = seg.assignments.ravel()
    pixels = cube.values.reshape(-1, cube.bands)
    n = seg.n_segments
    out = np.empty((n, cube.bands))
    for j in range(cube.bands):
        out[:, j] = np.bincount(flat, weights=pixels[:, j], minlength=n)
    out /= seg.counts[:, None]
    return out


def backproject(node_labels: np.ndarray, seg: Segmentation) -> ClusterMap:
    """Expand per-node cluster ids back to a per-pixel map."""
    node_labels = np.asarray(node_labels)
    if node_labels.shape != (seg.n_segments,):
        raise ValueError(
            f"expected {seg.n_segments} node labels, got {node_labels.shape}"
        )
    labels = node_labels[seg.assignments]
    return ClusterMap(height=seg.height, width=seg.width, labels=labels)
