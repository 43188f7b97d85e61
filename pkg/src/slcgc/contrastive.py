"""Two-branch contrastive MLP encoder trained against the self-looped
adjacency.

Each branch is an independently parameterized two-layer MLP whose output
rows are l2-normalized. Branch 1 is perturbed with fresh Gaussian noise
every iteration; the cosine similarity matrix between the two views is
driven toward the self-looped adjacency by a mean squared loss, optimized
with Adam. All math is dense float64 (node counts are small once pixels
are aggregated into regions).

Gradients are fully analytic; the chain runs loss -> similarity -> noise
addition (identity Jacobian) -> row normalization -> affine/activation
layers. The finite-difference tests hold the noise sample fixed, which is
why ``backward`` takes it as an argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_EPS = 1e-12
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MlpBranch:
    """Parameters of one two-layer MLP branch."""

    w1: np.ndarray  # (d, d1)
    b1: np.ndarray  # (d1,)
    w2: np.ndarray  # (d1, d2)
    b2: np.ndarray  # (d2,)
    activation: str = "relu"  # "relu" | "none"

    def __post_init__(self):
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation '{self.activation}'")

    @classmethod
    def init(cls, rng: np.random.Generator, d: int, d1: int, d2: int,
             activation: str = "relu") -> "MlpBranch":
        # Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) keeps pre-normalization
        # magnitudes O(1).
        s1 = 1.0 / np.sqrt(d)
        s2 = 1.0 / np.sqrt(d1)
        return cls(
            w1=rng.uniform(-s1, s1, size=(d, d1)),
            b1=rng.uniform(-s1, s1, size=d1),
            w2=rng.uniform(-s2, s2, size=(d1, d2)),
            b2=rng.uniform(-s2, s2, size=d2),
            activation=activation,
        )

    def parameters(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class BranchGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class _ForwardCache:
    x: np.ndarray
    pre: np.ndarray  # x @ w1 + b1
    hid: np.ndarray  # activation(pre)
    raw: np.ndarray  # hid @ w2 + b2
    norms: np.ndarray  # row l2 norms of raw
    z: np.ndarray  # normalized rows


def _forward(branch: MlpBranch, x: np.ndarray) -> _ForwardCache:
    pre = x @ branch.w1 + branch.b1
    hid = np.maximum(pre, 0.0) if branch.activation == "relu" else pre
    raw = hid @ branch.w2 + branch.b2
    norms = np.linalg.norm(raw, axis=1)
    z = raw / np.maximum(norms, NORM_EPS)[:, None]
    return _ForwardCache(x=x, pre=pre, hid=hid, raw=raw, norms=norms, z=z)


def encode(branch: MlpBranch, x: np.ndarray) -> np.ndarray:
    """Branch output with l2-normalized rows (zero rows stay zero)."""
    if x.ndim != 2 or x.shape[1] != branch.w1.shape[0]:
        raise ValueError(
            f"input is {x.shape}, branch expects (*, {branch.w1.shape[0]})"
        )
    return _forward(branch, np.asarray(x, dtype=np.float64)).z


def inject_noise(z: np.ndarray, sigma: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Add elementwise N(0, sigma^2) noise; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return z
    return z + rng.normal(0.0, sigma, size=z.shape)


def similarity(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Cross-view similarity matrix Z1 @ Z2^T."""
    return z1 @ z2.T


def loss(s: np.ndarray, a_hat: np.ndarray) -> float:
    """Mean squared difference between the similarity matrix and A + I."""
    n = s.shape[0]
    return float(((s - a_hat) ** 2).sum() / (n * n))


def _normalize_backward(cache: _ForwardCache, g: np.ndarray) -> np.ndarray:
    # d(raw/max(||raw||, eps)) — for ||raw|| > eps the Jacobian is
    # (I - z z^T)/||raw||, below eps the denominator is constant.
    out = np.empty_like(g)
    big = cache.norms > NORM_EPS
    if big.any():
        z = cache.z[big]
        gb = g[big]
        dots = (gb * z).sum(axis=1, keepdims=True)
        out[big] = (gb - dots * z) / cache.norms[big, None]
    if (~big).any():
        out[~big] = g[~big] / NORM_EPS
    return out


def _affine_backward(branch: MlpBranch, cache: _ForwardCache,
                     g_raw: np.ndarray) -> BranchGrads:
    gw2 = cache.hid.T @ g_raw
    gb2 = g_raw.sum(axis=0)
    g_hid = g_raw @ branch.w2.T
    if branch.activation == "relu":
        g_pre = g_hid * (cache.pre > 0.0)
    else:
        g_pre = g_hid
    gw1 = cache.x.T @ g_pre
    gb1 = g_pre.sum(axis=0)
    return BranchGrads(w1=gw1, b1=gb1, w2=gw2, b2=gb2)


@dataclass
class BackwardResult:
    loss: float
    similarity: np.ndarray
    grads1: BranchGrads
    grads2: BranchGrads


def backward(x: np.ndarray, branch1: MlpBranch, branch2: MlpBranch,
             a_hat: np.ndarray, noise: np.ndarray | None = None) -> BackwardResult:
    """Forward pass plus exact analytic gradients of the cross-view loss.

    ``noise`` is the perturbation added to the normalized branch-1
    embedding for this iteration (None means no perturbation).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    c1 = _forward(branch1, x)
    c2 = _forward(branch2, x)
    z1n = c1.z if noise is None else c1.z + noise
    s = z1n @ c2.z.T
    value = float(((s - a_hat) ** 2).sum() / (n * n))

    ds = (2.0 / (n * n)) * (s - a_hat)
    g_z1 = ds @ c2.z  # noise addition has identity Jacobian
    g_z2 = ds.T @ z1n
    grads1 = _affine_backward(branch1, c1, _normalize_backward(c1, g_z1))
    grads2 = _affine_backward(branch2, c2, _normalize_backward(c2, g_z2))
    return BackwardResult(loss=value, similarity=s, grads1=grads1, grads2=grads2)


def fuse(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Linear fusion of the two views: (Z1 + Z2) / 2."""
    return 0.5 * (z1 + z2)


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def init(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray], lr: float) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return state


@dataclass
class TrainConfig:
    """Training hyperparameters and ablation switches."""

    iterations: int = 400
    lr: float = 1e-3
    sigma: float = 0.01
    seed: int = 0
    d1: int = 500
    d2: int = 500
    activation: str = "relu"
    no_noise: bool = False
    noisy_inference: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass
class EncoderState:
    branch1: MlpBranch
    branch2: MlpBranch
    adam: AdamState = field(repr=False, default=None)


@dataclass
class Embeddings:
    """Final view embeddings and their fused clustering features."""

    z1: np.ndarray
    z2: np.ndarray
    fused: np.ndarray


def init_encoders(d: int, cfg: TrainConfig,
                  rng: np.random.Generator) -> EncoderState:
    b1 = MlpBranch.init(rng, d, cfg.d1, cfg.d2, cfg.activation)
    b2 = MlpBranch.init(rng, d, cfg.d1, cfg.d2, cfg.activation)
    state = EncoderState(branch1=b1, branch2=b2)
    state.adam = AdamState.init(b1.parameters() + b2.parameters())
    return state


def train(x_t: np.ndarray, a_hat: np.ndarray,
          cfg: TrainConfig) -> tuple[Embeddings, list[float], EncoderState]:
    """Run the full training loop on smoothed node features.

    Per iteration: encode both branches, perturb branch 1, compute the
    similarity matrix and loss, then take one Adam step. The returned
    embeddings are recomputed noise-free after the loop unless
    ``noisy_inference`` asks for a final perturbed branch-1 view; the loss
    history has one entry per iteration (pre-update values).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    n, d = x_t.shape
    if a_hat.shape != (n, n):
        raise ValueError(f"a_hat is {a_hat.shape}, expected ({n}, {n})")
    a_hat = np.asarray(a_hat, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    state = init_encoders(d, cfg, rng)
    params = state.branch1.parameters() + state.branch2.parameters()
    sigma = 0.0 if cfg.no_noise else cfg.sigma

    losses: list[float] = []
    for it in range(cfg.iterations):
        noise = rng.normal(0.0, sigma, size=(n, cfg.d2)) if sigma > 0 else None
        result = backward(x_t, state.branch1, state.branch2, a_hat, noise)
        if not np.isfinite(result.loss):
            raise RuntimeError(
                f"training diverged: loss became {result.loss} at iteration {it} "
                f"(lr={cfg.lr}, sigma={sigma})"
            )
        losses.append(result.loss)
        adam_step(state.adam, params,
                  result.grads1.as_list() + result.grads2.as_list(), cfg.lr)

    z1 = encode(state.branch1, x_t)
    z2 = encode(state.branch2, x_t)
    if cfg.noisy_inference and sigma > 0:
        z1 = z1 + rng.normal(0.0, sigma, size=(n, cfg.d2))
    return Embeddings(z1=z1, z2=z2, fused=fuse(z1, z2)), losses, state
