"""Low-pass graph denoising via stacked linear Laplacian filters.

The filter is H = I - k*L with L the symmetric normalized Laplacian of the
self-looped adjacency. Its frequency response 1 - k*lambda is nonnegative
and nonincreasing on [0, 2] whenever 0 < k <= 1/2, which is what makes the
filtered signal smoother in the Rayleigh-quotient sense. Filtering is
applied as t successive sparse multiplications; the dense matrix power is
never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse


@dataclass
class FilterConfig:
    """Filter coefficient k and stack depth t."""

    k: float = 0.5
    t: int = 2

    def __post_init__(self):
        if not 0 < self.k <= 0.5:
            raise ValueError(f"k must be in (0, 1/2], got {self.k}")
        if self.t < 0 or int(self.t) != self.t:
            raise ValueError(f"t must be a non-negative integer, got {self.t}")
        self.t = int(self.t)


@dataclass
class LaplacianPair:
    """Self-looped adjacency plus the Laplacian the filter runs on."""

    self_loop_adjacency: scipy.sparse.csr_matrix
    laplacian: scipy.sparse.csr_matrix


def _as_sparse(a) -> scipy.sparse.csr_matrix:
    if scipy.sparse.issparse(a):
        return a.tocsr()
    return scipy.sparse.csr_matrix(np.asarray(a, dtype=np.float64))


def self_loop(adjacency) -> scipy.sparse.csr_matrix:
    """Add unit self-loops: A + I."""
    a = _as_sparse(adjacency)
    if a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if (abs(a - a.T) > 1e-12).nnz > 0:
        raise ValueError("adjacency must be symmetric")
    if np.any(a.diagonal() != 0):
        raise ValueError("adjacency must have a zero diagonal")
    return (a + scipy.sparse.identity(a.shape[0], format="csr")).tocsr()


def sym_norm_laplacian(adjacency) -> scipy.sparse.csr_matrix:
    """I - D^{-1/2} A D^{-1/2} for an adjacency with positive degrees."""
    a = _as_sparse(adjacency)
    degrees = np.asarray(a.sum(axis=1)).ravel()
    if np.any(degrees <= 0):
        raise ValueError("zero-degree node; add self-loops first")
    d_inv_sqrt = scipy.sparse.diags(1.0 / np.sqrt(degrees))
    n = a.shape[0]
    lap = scipy.sparse.identity(n, format="csr") - d_inv_sqrt @ a @ d_inv_sqrt
    return lap.tocsr()


def laplacian_pair(adjacency, mode: str = "selfloop") -> LaplacianPair:
    """Build the filter Laplacian from A.

    ``selfloop`` normalizes A + I (renormalization); ``raw`` normalizes A
    directly and fails on isolated nodes. The self-looped adjacency is
    returned in both modes because the contrastive loss targets it.
    """
    a_hat = self_loop(adjacency)
    if mode == "selfloop":
        lap = sym_norm_laplacian(a_hat)
    elif mode == "raw":
        lap = sym_norm_laplacian(adjacency)
    else:
        raise ValueError(f"unknown laplacian mode '{mode}'")
    return LaplacianPair(self_loop_adjacency=a_hat, laplacian=lap)


def low_pass_filter(x: np.ndarray, laplacian, cfg: FilterConfig) -> np.ndarray:
    """Apply (I - k*L)^t to the columns of x by repeated multiplication."""
    x_t = np.array(x, dtype=np.float64, copy=True)
    if laplacian.shape[0] != x_t.shape[0]:
        raise ValueError(
            f"laplacian is {laplacian.shape[0]}x{laplacian.shape[1]} but x has "
            f"{x_t.shape[0]} rows"
        )
    for _ in range(cfg.t):
        x_t = x_t - cfg.k * (laplacian @ x_t)
    return x_t


def rayleigh(laplacian, x: np.ndarray) -> float:
    """Smoothness measure x^T L x / x^T x (smaller is smoother)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("Rayleigh quotient undefined for the zero vector")
    return float(x @ (laplacian @ x)) / denom
