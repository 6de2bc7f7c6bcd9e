"""Neural building blocks on top of the autodiff tensors.

Provides the linear layer, layer normalisation, the shared two-layer GELU
MLP used for token embedding, a pre-norm multi-head self-attention encoder
stack, and the Adam optimiser. Parameters live in flat ``dict[str, Tensor]``
containers with dotted names so checkpoints stay trivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, gelu, softmax
from .errors import ConfigError


@dataclass(frozen=True)
class EncoderConfig:
    """Geometry of one self-attention encoder stack."""

    embed_dim: int = 64
    num_heads: int = 4
    num_layers: int = 2
    ffn_hidden: int | None = None  # defaults to 4 * embed_dim
    layernorm_epsilon: float = 1e-5

    def __post_init__(self):
        if self.embed_dim <= 0 or self.num_heads <= 0 or self.num_layers <= 0:
            raise ConfigError("encoder dimensions must be positive")
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if self.ffn_hidden is not None and self.ffn_hidden <= 0:
            raise ConfigError("ffn_hidden must be positive")
        if self.layernorm_epsilon <= 0:
            raise ConfigError("layernorm_epsilon must be positive")

    @property
    def hidden(self) -> int:
        return self.ffn_hidden if self.ffn_hidden is not None else 4 * self.embed_dim

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


def uniform_param(rng: np.random.Generator, fan_in: int, shape) -> Tensor:
    """Trainable tensor drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return x @ w + b


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> Tensor:
    """Row-wise normalisation to zero mean and unit variance, then affine.

    The variance is floored at ``eps`` before the square root, so any row
    whose variance exceeds the floor is normalised exactly while constant
    rows map to zeros instead of dividing by zero.
    """
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / var.clamp_min(eps).sqrt() * gamma + beta


def two_layer_mlp(x: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    """Shared token-embedding MLP: linear -> GELU -> linear."""
    h = gelu(linear(x, params[prefix + "w1"], params[prefix + "b1"]))
    return linear(h, params[prefix + "w2"], params[prefix + "b2"])


def init_mlp_params(rng: np.random.Generator, in_dim: int, hidden: int,
                    out_dim: int, prefix: str) -> dict[str, Tensor]:
    return {
        prefix + "w1": uniform_param(rng, in_dim, (in_dim, hidden)),
        prefix + "b1": uniform_param(rng, in_dim, (hidden,)),
        prefix + "w2": uniform_param(rng, hidden, (hidden, out_dim)),
        prefix + "b2": uniform_param(rng, hidden, (out_dim,)),
    }


def init_encoder_params(rng: np.random.Generator, cfg: EncoderConfig,
                        prefix: str) -> dict[str, Tensor]:
    d, h = cfg.embed_dim, cfg.hidden
    params: dict[str, Tensor] = {}
    for i in range(cfg.num_layers):
        p = f"{prefix}layer{i}."
        for name in ("wq", "wk", "wv", "wo"):
            params[p + name] = uniform_param(rng, d, (d, d))
        for name in ("bq", "bk", "bv", "bo"):
            params[p + name] = uniform_param(rng, d, (d,))
        params[p + "ln1_gamma"] = Tensor(np.ones(d), requires_grad=True)
        params[p + "ln1_beta"] = Tensor(np.zeros(d), requires_grad=True)
        params[p + "ln2_gamma"] = Tensor(np.ones(d), requires_grad=True)
        params[p + "ln2_beta"] = Tensor(np.zeros(d), requires_grad=True)
        params[p + "ffn_w1"] = uniform_param(rng, d, (d, h))
        params[p + "ffn_b1"] = uniform_param(rng, d, (h,))
        params[p + "ffn_w2"] = uniform_param(rng, h, (h, d))
        params[p + "ffn_b2"] = uniform_param(rng, h, (d,))
    return params


def multi_head_attention(x: Tensor, cfg: EncoderConfig,
                         params: dict[str, Tensor], prefix: str) -> Tensor:
    """Scaled dot-product self-attention over token rows, one block."""
    q = linear(x, params[prefix + "wq"], params[prefix + "bq"])
    k = linear(x, params[prefix + "wk"], params[prefix + "bk"])
    v = linear(x, params[prefix + "wv"], params[prefix + "bv"])
    hd = cfg.head_dim
    scale = 1.0 / math.sqrt(hd)
    heads = []
    for h in range(cfg.num_heads):
        lo, hi = h * hd, (h + 1) * hd
        qh, kh, vh = q.narrow(1, lo, hi), k.narrow(1, lo, hi), v.narrow(1, lo, hi)
        att = softmax(qh @ kh.T * scale, axis=-1)
        heads.append(att @ vh)
    merged = heads[0] if len(heads) == 1 else concat(heads, axis=1)
    return linear(merged, params[prefix + "wo"], params[prefix + "bo"])


def encoder_forward(tokens: Tensor, cfg: EncoderConfig,
                    params: dict[str, Tensor], prefix: str = "") -> Tensor:
    """Pre-norm encoder stack: x + MHA(LN(x)), then x + FFN(LN(x)) per layer.

    No positional encoding is applied here, so the stack is permutation
    equivariant over token rows; temporal order, where needed, must be
    injected by the caller before encoding.
    """
    if tokens.data.ndim != 2 or tokens.shape[1] != cfg.embed_dim:
        raise ConfigError(
            f"expected tokens of shape (L, {cfg.embed_dim}), got {tokens.shape}")
    x = tokens
    eps = cfg.layernorm_epsilon
    for i in range(cfg.num_layers):
        p = f"{prefix}layer{i}."
        normed = layer_norm(x, params[p + "ln1_gamma"], params[p + "ln1_beta"], eps)
        x = x + multi_head_attention(normed, cfg, params, p)
        normed = layer_norm(x, params[p + "ln2_gamma"], params[p + "ln2_beta"], eps)
        ffn = linear(gelu(linear(normed, params[p + "ffn_w1"], params[p + "ffn_b1"])),
                     params[p + "ffn_w2"], params[p + "ffn_b2"])
        x = x + ffn
    return x


class Adam:
    """Adaptive moment estimation over a named parameter dict.

    ``step()`` descends on the stored gradients; callers maximising a reward
    minimise its negation. Update order follows dict insertion order, so
    repeated runs with the same seed are bit-identical.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self._m[name] = b1 * self._m[name] + (1.0 - b1) * g
            v = self._v[name] = b2 * self._v[name] + (1.0 - b2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data = p.data - self.lr * update

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
