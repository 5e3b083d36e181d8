"""Hybrid classifier: depthwise-separable CNN backbone -> repeated feature
sequence -> GRU -> fully connected head -> softmax."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DomainError, ShapeError
from .numerics import Tensor

LEAKY_SLOPE = 0.01
BN_MOMENTUM = 0.1
BN_EPS = 1e-5
PARAMS_VERSION = "1"

# (out_channels, stride) at width 1.0, after the 32-channel stride-2 stem
_BACKBONE_PLAN = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2),
                  (512, 1), (512, 1), (512, 1), (512, 1), (512, 1),
                  (1024, 2), (1024, 1)]
_STEM_CHANNELS = 32


@dataclass(frozen=True)
class ModelConfig:
    n_classes: int
    feature_dim: int = 1280
    seq_len: int = 49
    gru_units: int = 128
    fc_units: int = 128
    activation: str = "relu"          # "relu" or "leaky_relu"
    dropout_p: float = 0.0
    l2_scopes: dict[str, float] = field(default_factory=dict)
    backbone_width: float = 1.0
    input_size: int = 224
    project_features: bool = True     # linear map from pooled channels to feature_dim

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.seq_len < 1:
            raise ConfigError(f"seq_len must be >= 1, got {self.seq_len}")
        if self.activation not in ("relu", "leaky_relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.backbone_width <= 0:
            raise ConfigError("backbone_width must be positive")
        if not self.project_features and self.feature_dim != backbone_channels(self)[-1]:
            raise ConfigError(
                f"feature_dim {self.feature_dim} does not match final backbone width "
                f"{backbone_channels(self)[-1]} and projection is disabled")

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _divisible(c: float, divisor: int = 8) -> int:
    return max(divisor, int(round(c / divisor)) * divisor)


def backbone_channels(config: ModelConfig) -> list[int]:
    """Channel widths after the width multiplier, stem first."""
    w = config.backbone_width
    return [_divisible(_STEM_CHANNELS * w)] + [_divisible(c * w) for c, _ in _BACKBONE_PLAN]


@dataclass
class ParameterSet:
    """Named, shaped model parameters plus batch-norm running buffers."""
    config: ModelConfig
    tensors: dict[str, Tensor]
    buffers: dict[str, np.ndarray]
    version: str = PARAMS_VERSION

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def n_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            self.config,
            {k: nm.tensor(t.data.copy(), requires_grad=True) for k, t in self.tensors.items()},
            {k: v.copy() for k, v in self.buffers.items()},
            self.version,
        )

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def save(self, path) -> None:
        from .data_io import save_tensors

        arrays = {name: t.data for name, t in self.tensors.items()}
        arrays.update({f"buffer::{k}": v for k, v in self.buffers.items()})
        save_tensors(path, self.fingerprint, arrays)

    @classmethod
    def load(cls, path, config: ModelConfig) -> "ParameterSet":
        from .data_io import load_tensors

        _, arrays = load_tensors(path, expected_fingerprint=config.fingerprint())
        tensors = {}
        buffers = {}
        for name, arr in arrays.items():
            if name.startswith("buffer::"):
                buffers[name[len("buffer::"):]] = arr.astype(np.float32)
            else:
                tensors[name] = nm.tensor(arr, requires_grad=True)
        return cls(config, tensors, buffers)


def build_model(config: ModelConfig, seed: int, dtype=np.float32) -> ParameterSet:
    """Deterministically initialize all parameters for `config`."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    buffers: dict[str, np.ndarray] = {}

    def conv_init(shape, fan_in):
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)

    def add_bn(prefix: str, ch: int):
        tensors[f"{prefix}.gamma"] = nm.tensor(np.ones(ch), requires_grad=True, dtype=dtype)
        tensors[f"{prefix}.beta"] = nm.tensor(np.zeros(ch), requires_grad=True, dtype=dtype)
        buffers[f"{prefix}.running_mean"] = np.zeros(ch, dtype=dtype)
        buffers[f"{prefix}.running_var"] = np.ones(ch, dtype=dtype)

    chans = backbone_channels(config)
    tensors["stem.w"] = nm.tensor(conv_init((3, 3, 3, chans[0]), 27), requires_grad=True, dtype=dtype)
    add_bn("stem.bn", chans[0])
    c_in = chans[0]
    for i, ((_, stride), c_out) in enumerate(zip(_BACKBONE_PLAN, chans[1:])):
        p = f"block{i:02d}"
        tensors[f"{p}.dw.w"] = nm.tensor(conv_init((3, 3, c_in), 9), requires_grad=True, dtype=dtype)
        add_bn(f"{p}.bn1", c_in)
        tensors[f"{p}.pw.w"] = nm.tensor(conv_init((c_in, c_out), c_in), requires_grad=True, dtype=dtype)
        add_bn(f"{p}.bn2", c_out)
        c_in = c_out
    if config.project_features:
        tensors["proj.w"] = nm.tensor(conv_init((c_in, config.feature_dim), c_in),
                                      requires_grad=True, dtype=dtype)
        tensors["proj.b"] = nm.tensor(np.zeros(config.feature_dim), requires_grad=True, dtype=dtype)
    feat = config.feature_dim
    h = config.gru_units
    bound = 1.0 / np.sqrt(h)
    for name, shape in (("gru.wx", (feat, 3 * h)), ("gru.wh", (h, 3 * h)),
                        ("gru.bx", (3 * h,)), ("gru.bh", (3 * h,))):
        tensors[name] = nm.tensor(rng.uniform(-bound, bound, size=shape),
                                  requires_grad=True, dtype=dtype)
    tensors["fc1.w"] = nm.tensor(conv_init((h, config.fc_units), h), requires_grad=True, dtype=dtype)
    tensors["fc1.b"] = nm.tensor(np.zeros(config.fc_units), requires_grad=True, dtype=dtype)
    tensors["fc2.w"] = nm.tensor(
        rng.normal(0.0, np.sqrt(1.0 / config.fc_units), size=(config.fc_units, config.n_classes)),
        requires_grad=True, dtype=dtype)
    tensors["fc2.b"] = nm.tensor(np.zeros(config.n_classes), requires_grad=True, dtype=dtype)
    return ParameterSet(config, tensors, buffers)


def _activation(config: ModelConfig, t: Tensor) -> Tensor:
    if config.activation == "leaky_relu":
        return nm.leaky_relu(t, LEAKY_SLOPE)
    return nm.relu(t)


def forward(params: ParameterSet, batch, mode: str = "eval",
            rng: np.random.Generator | None = None) -> Tensor:
    """Class probabilities for a batch of normalized scalograms.

    Args:
        batch: (B, 3, H, W) array or Tensor, H = W = config.input_size.
        mode: "train" uses batch statistics and dropout; "eval" is frozen.

    Returns:
        Tensor of shape (B, n_classes); every row sums to 1.
    """
    if mode not in ("train", "eval"):
        raise DomainError(f"forward: mode must be 'train' or 'eval', got {mode!r}")
    cfg = params.config
    x = batch if isinstance(batch, Tensor) else nm.tensor(np.asarray(batch))
    if x.ndim != 4 or x.shape[1] != 3:
        raise ShapeError(f"forward: expected (B, 3, H, W) input, got {x.shape}")
    if x.shape[2] != cfg.input_size or x.shape[3] != cfg.input_size:
        raise ShapeError(f"forward: expected spatial dims {cfg.input_size}x"
                         f"{cfg.input_size}, got {x.shape}")
    training = mode == "train"
    t = params.tensors
    b = params.buffers

    def bn(prefix: str, v: Tensor) -> Tensor:
        return nm.batch_norm(v, t[f"{prefix}.gamma"], t[f"{prefix}.beta"],
                             b[f"{prefix}.running_mean"], b[f"{prefix}.running_var"],
                             training=training, momentum=BN_MOMENTUM, eps=BN_EPS)

    v = nm.transpose(x, (0, 2, 3, 1))  # NCHW -> NHWC
    v = nm.relu(bn("stem.bn", nm.conv2d(v, t["stem.w"], None, stride=2, pad=1)))
    for i, (_, stride) in enumerate(_BACKBONE_PLAN):
        p = f"block{i:02d}"
        v = nm.relu(bn(f"{p}.bn1", nm.depthwise_conv2d(v, t[f"{p}.dw.w"], None,
                                                       stride=stride, pad=1)))
        v = nm.relu(bn(f"{p}.bn2", nm.pointwise_conv(v, t[f"{p}.pw.w"])))
    feat = nm.global_avg_pool(v)  # (B, C_backbone)
    if cfg.project_features:
        feat = _activation(cfg, nm.linear(feat, t["proj.w"], t["proj.b"]))
    # the GRU consumes the feature vector repeated seq_len times; the shared
    # input projection makes that exact without materializing the sequence
    hidden = nm.gru_layer(feat, t["gru.wx"], t["gru.wh"], t["gru.bx"], t["gru.bh"],
                          steps=cfg.seq_len)
    hidden = nm.dropout(hidden, cfg.dropout_p, rng, training=training)
    fc1 = _activation(cfg, nm.linear(hidden, t["fc1.w"], t["fc1.b"]))
    logits = nm.linear(fc1, t["fc2.w"], t["fc2.b"])
    return nm.softmax(logits, axis=-1)


def predict_topk(probs: np.ndarray, k: int) -> np.ndarray:
    """Per-row labels of the k highest probabilities, ties to the lower index."""
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise ShapeError(f"predict_topk: expected (B, C) scores, got {probs.shape}")
    C = probs.shape[1]
    if not 1 <= k <= C:
        raise DomainError(f"predict_topk: k must be in [1, {C}], got {k}")
    order = np.argsort(-probs, axis=1, kind="stable")
    return order[:, :k]


def l2_parameter_names(params: ParameterSet, scope: str) -> list[str]:
    """Weight tensors covered by an L2 scope key.

    "backbone" covers the CNN stack and the feature projection; any other
    scope matches tensors by name prefix. Biases and batch-norm parameters
    are never penalized.
    """
    def is_weight(name: str) -> bool:
        return name.endswith(".w") or name in ("gru.wx", "gru.wh")

    if scope == "backbone":
        prefixes = ("stem.", "block", "proj.")
    elif scope == "gru":
        prefixes = ("gru.",)
    else:
        prefixes = (scope,)
    names = [n for n in params.tensors if n.startswith(prefixes) and is_weight(n)]
    if not names:
        raise ConfigError(f"l2 scope {scope!r} matches no parameters")
    return names
