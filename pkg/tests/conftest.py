"""Shared test fixtures: synthetic cubes, random graphs, partition helpers."""

import numpy as np
import pytest
import scipy.sparse

from slcgc import GroundTruth, HsiCube, save_cube, save_ground_truth

# Three flat class spectra on a 30x30x10 cube. The regions touch at the
# image midlines; ground truth labels only each region's core so that the
# scored pixels sit well clear of the spectral boundaries.
CLASS_OFFSETS = (0.15, 0.5, 0.85)
CLASS_SEPARATION = CLASS_OFFSETS[1] - CLASS_OFFSETS[0]


def make_synthetic(seed: int, sigma: float = 0.03, h: int = 30, w: int = 30,
                   b: int = 10) -> tuple[HsiCube, GroundTruth]:
    """Three-region cube: left half, right-top and right-bottom quarters."""
    rng = np.random.default_rng(seed)
    values = np.zeros((h, w, b))
    labels = np.zeros((h, w), dtype=np.int64)
    half_w, half_h = w // 2, h // 2
    regions = [
        (slice(0, h), slice(0, half_w)),
        (slice(0, half_h), slice(half_w, w)),
        (slice(half_h, h), slice(half_w, w)),
    ]
    for c, (rows, cols) in enumerate(regions):
        values[rows, cols, :] = CLASS_OFFSETS[c]
    core = max(1, w // 4 - 1)
    labels[:, 0:core] = 1
    labels[0:core, w - core:w] = 2
    labels[h - core:h, w - core:w] = 3
    values += rng.normal(0.0, sigma, size=values.shape)
    return HsiCube(h, w, b, values), GroundTruth(h, w, labels)


def write_synthetic(directory, seed: int, sigma: float = 0.03):
    """Persist a synthetic pair; returns (cube_path, gt_path)."""
    cube, gt = make_synthetic(seed, sigma)
    cube_path = directory / "cube.json"
    gt_path = directory / "gt.json"
    save_cube(cube, cube_path)
    save_ground_truth(gt, gt_path)
    return cube_path, gt_path


def random_connected_adjacency(rng: np.random.Generator, n: int,
                               extra_edges: int = 0) -> scipy.sparse.csr_matrix:
    """Random spanning tree plus optional extra edges; always connected."""
    rows, cols = [], []

    def add(i, j):
        rows.extend((i, j))
        cols.extend((j, i))

    order = rng.permutation(n)
    for k in range(1, n):
        add(order[k], order[rng.integers(0, k)])
    for _ in range(extra_edges):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            add(i, j)
    a = scipy.sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    ).tocsr()
    a.data[:] = 1.0  # collapse duplicate edges
    a.setdiag(0)
    a.eliminate_zeros()
    return a


def all_partitions(n: int):
    """Every partition of range(n) as a label array, via restricted growth
    strings: label[i] <= 1 + max(label[:i])."""
    labels = np.zeros(n, dtype=np.int64)

    def grow(i, top):
        if i == n:
            yield labels.copy()
            return
        for v in range(top + 2):
            labels[i] = v
            yield from grow(i + 1, max(top, v))

    yield from grow(1, 0) if n > 1 else iter([labels.copy()])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
