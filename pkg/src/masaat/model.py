"""The multi-agent attention policy that maps observation windows to weights.

Each agent sees either a DC feature map at its own threshold or the raw
price window, runs a cross-sectional branch (assets as tokens) and a
temporal branch (time points as tokens), fuses the two embeddings through
an attention readout into one score per asset, and the agents' scores are
averaged and pushed through a softmax so the emitted portfolio always sits
on the long-only unit simplex.

Asset symmetry is a structural guarantee: the cross-sectional branch shares
its embedding MLP across asset tokens and the encoders add no positional
information, while the temporal branch ties its first embedding layer
across assets (equivalently: per-asset feature blocks are summed before the
shared MLP). Permuting the assets of the input therefore permutes the
output weights identically.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, no_grad, softmax
from .data import ObservationWindow
from .dc import DcFeatureMap, dc_feature_map, high_order_signal, time_mask
from .errors import ConfigError
from .nn import (Adam, EncoderConfig, encoder_forward, init_encoder_params,
                 init_mlp_params, two_layer_mlp, uniform_param)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AgentSpec:
    """One trading agent: a DC filter at a threshold, or the raw price view."""

    kind: str  # "dc" | "raw_price"
    threshold: float | None = None

    def __post_init__(self):
        if self.kind == "dc":
            if self.threshold is None or not (0.0 < self.threshold < 1.0):
                raise ConfigError(f"dc agent needs a threshold in (0, 1), "
                                  f"got {self.threshold}")
        elif self.kind == "raw_price":
            if self.threshold is not None:
                raise ConfigError("raw_price agent takes no threshold")
        else:
            raise ConfigError(f"unknown agent kind {self.kind!r}")


def build_agents(dc_thresholds: list[float],
                 include_raw_price_agent: bool = True) -> list[AgentSpec]:
    agents = [AgentSpec("dc", th) for th in dc_thresholds]
    if include_raw_price_agent:
        agents.append(AgentSpec("raw_price"))
    if not agents:
        raise ConfigError("at least one agent is required")
    return agents


# ----------------------------------------------------------------------
# token reconstruction (pure reshapes, inverse exists)


def tokenize_csa(x: np.ndarray) -> np.ndarray:
    """N x M x T_w -> N x (M*T_w); row i flattens asset i channel-major."""
    n, m, t = x.shape
    return np.ascontiguousarray(x).reshape(n, m * t)


def tokenize_ta(x: np.ndarray) -> np.ndarray:
    """N x M x T_w -> T_w x (N*M); row t stacks assets (asset-major, then channel)."""
    n, m, t = x.shape
    return np.ascontiguousarray(np.transpose(x, (2, 0, 1))).reshape(t, n * m)


def untokenize_csa(tokens: np.ndarray, n: int, m: int, t: int) -> np.ndarray:
    return tokens.reshape(n, m, t)


def untokenize_ta(tokens: np.ndarray, n: int, m: int, t: int) -> np.ndarray:
    return np.transpose(tokens.reshape(t, n, m), (1, 2, 0))


def _ta_pooled_tokens(x: np.ndarray, high_order: np.ndarray) -> np.ndarray:
    """T_w x 2M temporal tokens with the asset blocks summed out.

    The first embedding layer is shared across assets, so applying it to the
    full T_w x 2NM token matrix and summing per-asset blocks is identical to
    summing the blocks first; pooling here keeps asset order irrelevant by
    construction.
    """
    # (T_w, N, M) each; concat channel features of both signals, sum assets
    xs = np.transpose(x, (2, 0, 1))
    hs = np.transpose(high_order, (2, 0, 1))
    return np.concatenate([xs.sum(axis=1), hs.sum(axis=1)], axis=1)


# ----------------------------------------------------------------------
# forward pieces


def csa_forward(x: np.ndarray, cfg: EncoderConfig, params: dict[str, Tensor],
                prefix: str) -> Tensor:
    """Asset-token branch: shared MLP embedding then the encoder stack."""
    tokens = Tensor(tokenize_csa(x))
    embedded = two_layer_mlp(tokens, params, prefix + "csa_mlp.")
    return encoder_forward(embedded, cfg, params, prefix + "csa_enc.")


def ta_embedding(x: np.ndarray, high_order: np.ndarray, mask: np.ndarray,
                 params: dict[str, Tensor], prefix: str) -> Tensor:
    """Masked pre-encoder temporal tokens: merged signals, MLP, chronology mask."""
    if mask.shape[0] != x.shape[2]:
        raise ConfigError(f"mask length {mask.shape[0]} != window length {x.shape[2]}")
    if high_order.shape != x.shape:
        raise ConfigError("high-order signal must match the window shape")
    tokens = Tensor(_ta_pooled_tokens(x, high_order))
    embedded = two_layer_mlp(tokens, params, prefix + "ta_mlp.")
    return embedded * Tensor(mask[:, None])


def ta_forward(x: np.ndarray, high_order: np.ndarray, mask: np.ndarray,
               cfg: EncoderConfig, params: dict[str, Tensor],
               prefix: str) -> Tensor:
    """Time-token branch: masked embedding followed by the encoder stack."""
    masked = ta_embedding(x, high_order, mask, params, prefix)
    return encoder_forward(masked, cfg, params, prefix + "ta_enc.")


def fuse(o_csa: Tensor, o_ta: Tensor, v: Tensor, b: Tensor,
         scale_factor: float) -> Tensor:
    """Attention of each asset over the time points, read out to one score.

    Rows of the attention matrix are softmax-normalised over the time axis,
    so each asset mixes the temporal embeddings it attends to.
    """
    if o_csa.shape[1] != o_ta.shape[1]:
        raise ConfigError(f"embedding widths differ: {o_csa.shape} vs {o_ta.shape}")
    attention = softmax(o_csa @ o_ta.T * scale_factor, axis=-1)  # N x T_w
    return (attention @ o_ta) @ v + b  # N x 1


def ensemble(scores: list[Tensor]) -> Tensor:
    """Average per-agent score vectors and project onto the simplex via softmax."""
    if not scores:
        raise ConfigError("ensemble needs at least one agent's scores")
    total = scores[0]
    for s in scores[1:]:
        total = total + s
    mean = total * (1.0 / len(scores))
    return softmax(mean.reshape(mean.size), axis=-1)


# ----------------------------------------------------------------------
# the policy


class MasaatPolicy:
    """All agents' parameters plus the end-to-end forward pass.

    The forward pass is read-only over the parameters: concurrent
    evaluations on different windows are safe, updates need exclusive
    access. Agent outputs are reduced in declaration order, so results are
    deterministic regardless of any parallel evaluation of the branches.
    """

    def __init__(self, n_assets: int, n_channels: int, window_len: int,
                 agents: list[AgentSpec], encoder: EncoderConfig | None = None,
                 scale_factor: float | None = None, seed: int = 0):
        if n_assets < 2 or n_channels < 1 or window_len < 2:
            raise ConfigError("need n_assets >= 2, n_channels >= 1, window_len >= 2")
        if not agents:
            raise ConfigError("at least one agent is required")
        self.n_assets = n_assets
        self.n_channels = n_channels
        self.window_len = window_len
        self.agents = list(agents)
        self.encoder = encoder if encoder is not None else EncoderConfig()
        if scale_factor is None:
            scale_factor = 1.0 / math.sqrt(self.encoder.embed_dim)
        if scale_factor <= 0:
            raise ConfigError("scale_factor must be positive")
        self.scale_factor = scale_factor
        self.mask = time_mask(window_len)
        self.params = self._init_params(np.random.default_rng(seed))

    def _init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        d = self.encoder.embed_dim
        csa_in = self.n_channels * self.window_len
        ta_in = 2 * self.n_channels
        params: dict[str, Tensor] = {}
        for idx in range(len(self.agents)):
            p = f"agent{idx}."
            params.update(init_mlp_params(rng, csa_in, 2 * d, d, p + "csa_mlp."))
            params.update(init_encoder_params(rng, self.encoder, p + "csa_enc."))
            params.update(init_mlp_params(rng, ta_in, 2 * d, d, p + "ta_mlp."))
            params.update(init_encoder_params(rng, self.encoder, p + "ta_enc."))
            params[p + "fusion.v"] = uniform_param(rng, d, (d, 1))
            params[p + "fusion.b"] = uniform_param(rng, d, (1, 1))
        return params

    # -- forward -------------------------------------------------------

    def _window_tensor(self, observation) -> np.ndarray:
        x = observation.tensor if isinstance(observation, ObservationWindow) \
            else np.asarray(observation, dtype=np.float64)
        expected = (self.n_assets, self.n_channels, self.window_len)
        if x.shape != expected:
            raise ConfigError(f"observation shape {x.shape} != policy shape {expected}")
        return x

    def agent_inputs(self, observation) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-agent (features, high_order) pair actually fed to the branches."""
        x = self._window_tensor(observation)
        pairs = []
        for spec in self.agents:
            feats = dc_feature_map(x, spec.threshold).tensor \
                if spec.kind == "dc" else x
            pairs.append((feats, high_order_signal(feats)))
        return pairs

    def dc_maps(self, observation) -> list[DcFeatureMap]:
        """DC feature maps per DC agent, in agent order (provenance record)."""
        x = self._window_tensor(observation)
        return [dc_feature_map(x, spec.threshold)
                for spec in self.agents if spec.kind == "dc"]

    def agent_scores(self, observation) -> list[Tensor]:
        scores = []
        for idx, (feats, high) in enumerate(self.agent_inputs(observation)):
            p = f"agent{idx}."
            o_csa = csa_forward(feats, self.encoder, self.params, p)
            o_ta = ta_forward(feats, high, self.mask, self.encoder, self.params, p)
            scores.append(fuse(o_csa, o_ta, self.params[p + "fusion.v"],
                               self.params[p + "fusion.b"], self.scale_factor))
        return scores

    def portfolio_tensor(self, observation) -> Tensor:
        """Differentiable weight vector on the simplex, shape (N,)."""
        return ensemble(self.agent_scores(observation))

    def portfolio(self, observation) -> np.ndarray:
        with no_grad():
            return self.portfolio_tensor(observation).data

    # -- parameter bookkeeping ------------------------------------------

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            p.data = snapshot[k].copy()

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def make_optimizer(self, learning_rate: float) -> Adam:
        return Adam(self.params, lr=learning_rate)

    def param_digest(self) -> str:
        """Short stable hash of all parameter bytes, for logs and run ids."""
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(self.params[name].data.tobytes())
        return h.hexdigest()[:12]


# ----------------------------------------------------------------------
# checkpoints: versioned JSON, bit-exact round trip


def save_checkpoint(policy: MasaatPolicy, path: str | Path) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "n_assets": policy.n_assets,
        "n_channels": policy.n_channels,
        "window_len": policy.window_len,
        "scale_factor": policy.scale_factor.hex(),
        "agents": [{"kind": a.kind, "threshold": a.threshold} for a in policy.agents],
        "encoder": {
            "embed_dim": policy.encoder.embed_dim,
            "num_heads": policy.encoder.num_heads,
            "num_layers": policy.encoder.num_layers,
            "ffn_hidden": policy.encoder.hidden,
            "layernorm_epsilon": policy.encoder.layernorm_epsilon.hex(),
        },
        "params": {
            name: {
                "shape": list(p.data.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(p.data, dtype="<f8").tobytes()).decode(),
            }
            for name, p in policy.params.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> MasaatPolicy:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('format_version')}")
    enc = doc["encoder"]
    policy = MasaatPolicy(
        n_assets=doc["n_assets"],
        n_channels=doc["n_channels"],
        window_len=doc["window_len"],
        agents=[AgentSpec(a["kind"], a["threshold"]) for a in doc["agents"]],
        encoder=EncoderConfig(
            embed_dim=enc["embed_dim"],
            num_heads=enc["num_heads"],
            num_layers=enc["num_layers"],
            ffn_hidden=enc["ffn_hidden"],
            layernorm_epsilon=float.fromhex(enc["layernorm_epsilon"]),
        ),
        scale_factor=float.fromhex(doc["scale_factor"]),
    )
    for name, entry in doc["params"].items():
        if name not in policy.params:
            raise ConfigError(f"checkpoint contains unknown parameter {name}")
        raw = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
        policy.params[name].data = raw.reshape(entry["shape"]).astype(np.float64)
    return policy
