"""Band normalization and spectral dimensionality reduction.

The reducers project each pixel's band vector to a handful of components
before superpixel segmentation. The unsupervised reducer is a principal
component projection; the supervised one is classic Fisher discriminant
analysis fit on labeled pixels only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .hsi_io import GroundTruth, HsiCube


@dataclass
class ReducedImage:
    """Per-pixel component scores plus the projection that produced them.

    ``variances`` holds the per-component importance in non-increasing
    order: score variances (= covariance eigenvalues) for the principal
    component reducer, generalized eigenvalues for the discriminant one.
    """

    height: int
    width: int
    components: int
    values: np.ndarray  # (height, width, components)
    basis: np.ndarray  # (bands, components)
    variances: np.ndarray  # (components,)


def normalize_bands(cube: HsiCube) -> HsiCube:
    """Min-max scale every band independently to [0, 1].

    A constant band maps to all zeros.
    """
    values = cube.values
    lo = values.min(axis=(0, 1))
    hi = values.max(axis=(0, 1))
    span = hi - lo
    out = np.zeros_like(values)
    nonconst = span > 0
    out[..., nonconst] = (values[..., nonconst] - lo[nonconst]) / span[nonconst]
    return HsiCube(cube.height, cube.width, cube.bands, out)


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # Reproducible eigenvector orientation: largest-magnitude entry positive.
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def reduce_unsupervised(cube: HsiCube, r: int) -> ReducedImage:
    """Project pixels onto the top-r eigenvectors of the pixel covariance."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > cube.bands:
        raise ValueError(f"r={r} exceeds band count {cube.bands}")
    flat = cube.values.reshape(-1, cube.bands)
    centered = flat - flat.mean(axis=0)
    n = flat.shape[0]
    cov = centered.T @ centered / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:r]
    basis = _fix_signs(eigvecs[:, order])
    variances = np.maximum(eigvals[order], 0.0)
    scores = (centered @ basis).reshape(cube.height, cube.width, r)
    return ReducedImage(cube.height, cube.width, r, scores, basis, variances)


def reduce_supervised(cube: HsiCube, gt: GroundTruth, r: int) -> ReducedImage:
    """Fisher discriminant projection fit on labeled pixels, applied to all.

    Raises if fewer than two classes are labeled, if r exceeds C-1, or if
    the class means coincide (zero between-class scatter). A near-singular
    within-class scatter is regularized by adding 1e-6*trace/dim to the
    diagonal.
    """
    if gt.height != cube.height or gt.width != cube.width:
        raise ValueError("ground-truth dimensions do not match the cube")
    flat = cube.values.reshape(-1, cube.bands)
    labels = gt.labels.reshape(-1)
    mask = labels > 0
    x = flat[mask]
    y = labels[mask]
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("supervised reduction needs at least 2 labeled classes")
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > classes.size - 1:
        raise ValueError(
            f"r={r} exceeds C-1={classes.size - 1} (rank of between-class scatter)"
        )

    b = cube.bands
    overall_mean = x.mean(axis=0)
    s_within = np.zeros((b, b))
    s_between = np.zeros((b, b))
    for c in classes:
        xc = x[y == c]
        mu = xc.mean(axis=0)
        dc = xc - mu
        s_within += dc.T @ dc
        dm = (mu - overall_mean)[:, None]
        s_between += xc.shape[0] * (dm @ dm.T)

    if np.trace(s_between) <= 1e-12 * max(np.trace(s_within), 1.0):
        raise ValueError("between-class scatter is zero (identical class means)")

    # Guard the generalized eigenproblem against a rank-deficient S_w. The
    # ridge scale falls back to the between-class trace so it stays positive
    # even when S_w vanishes entirely.
    eigmin = np.linalg.eigvalsh(s_within)[0]
    if eigmin <= 1e-10 * np.trace(s_within) / b:
        scale = max(np.trace(s_within), np.trace(s_between))
        s_within = s_within + (1e-6 * scale / b) * np.eye(b)

    eigvals, eigvecs = scipy.linalg.eigh(s_between, s_within)
    order = np.argsort(eigvals)[::-1][:r]
    basis = _fix_signs(eigvecs[:, order])
    variances = np.maximum(eigvals[order], 0.0)
    scores = ((flat - overall_mean) @ basis).reshape(cube.height, cube.width, r)
    return ReducedImage(cube.height, cube.width, r, scores, basis, variances)
