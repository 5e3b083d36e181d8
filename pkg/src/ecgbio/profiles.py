"""Named experiment profiles.

The four dataset profiles mirror the published hyperparameter table;
`synthetic` is a desk-scale profile for the bundled generator, sized so a
full train/eval cycle finishes in minutes on a laptop CPU.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .errors import ConfigError
from .model import ModelConfig
from .scalogram import AugmentationSpec
from .signal_pipeline import PreprocessConfig
from .training import SchedulerConfig, TrainConfig


@dataclass(frozen=True)
class Profile:
    name: str
    target_fs: float
    min_distance_s: float
    min_height: float
    window_ms: float
    snr_db: float
    epochs: int
    lr: float
    dropout_p: float
    activation: str
    l2_scopes: dict[str, float]
    gru_units: int
    batch_size: int
    patience: int
    factor: float
    min_lr: float
    balance: str
    augmentation: bool
    feature_dim: int = 1280
    seq_len: int = 49
    fc_units: int = 128
    backbone_width: float = 1.0
    n_scales: int = 64

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(low_hz=0.5, high_hz=40.0, order=4,
                                target_fs=self.target_fs, snr_db=self.snr_db)

    def model_config(self, n_classes: int) -> ModelConfig:
        return ModelConfig(n_classes=n_classes, feature_dim=self.feature_dim,
                           seq_len=self.seq_len, gru_units=self.gru_units,
                           fc_units=self.fc_units, activation=self.activation,
                           dropout_p=self.dropout_p, l2_scopes=dict(self.l2_scopes),
                           backbone_width=self.backbone_width)

    def train_config(self, seed: int, epochs: int | None = None,
                     batch_size: int | None = None, lr: float | None = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs if epochs is None else epochs,
            batch_size=self.batch_size if batch_size is None else batch_size,
            lr=self.lr if lr is None else lr,
            dropout_p=self.dropout_p,
            l2_scopes=dict(self.l2_scopes),
            scheduler=SchedulerConfig(self.patience, self.factor, self.min_lr),
            balance=self.balance,
            seed=seed,
        )

    def augmentation_spec(self) -> AugmentationSpec:
        return AugmentationSpec(rotation_deg=5.0, translate_frac=0.10,
                                scale_range=(0.9, 1.1), hflip_prob=0.5,
                                enabled=self.augmentation)

    def to_dict(self) -> dict:
        return asdict(self)


PROFILES: dict[str, Profile] = {
    "ecgid": Profile(
        name="ecgid", target_fs=100.0, min_distance_s=0.6, min_height=0.5,
        window_ms=250.0, snr_db=20.0, epochs=100, lr=1e-4, dropout_p=0.35,
        activation="relu",
        l2_scopes={"backbone": 0.01, "fc1": 0.01, "fc2": 0.01},
        gru_units=128, batch_size=64, patience=5, factor=0.1, min_lr=1e-8,
        balance="class_weights", augmentation=True,
    ),
    "mitbih": Profile(
        name="mitbih", target_fs=100.0, min_distance_s=0.6, min_height=0.5,
        window_ms=250.0, snr_db=20.0, epochs=50, lr=1e-4, dropout_p=0.35,
        activation="relu",
        l2_scopes={"gru": 0.01, "backbone": 0.01, "fc1": 0.01, "fc2": 0.01},
        gru_units=128, batch_size=64, patience=5, factor=0.1, min_lr=1e-8,
        balance="pre_balanced", augmentation=True,
    ),
    "cybhi": Profile(
        name="cybhi", target_fs=250.0, min_distance_s=4.0, min_height=0.5,
        window_ms=250.0, snr_db=20.0, epochs=80, lr=1e-4, dropout_p=0.0,
        activation="leaky_relu",
        l2_scopes={"gru": 0.01},
        gru_units=64, batch_size=8, patience=5, factor=0.1, min_lr=1e-6,
        balance="class_weights", augmentation=True,
    ),
    "ptb": Profile(
        name="ptb", target_fs=250.0, min_distance_s=4.0, min_height=0.5,
        window_ms=500.0, snr_db=20.0, epochs=100, lr=1e-3, dropout_p=0.0,
        activation="leaky_relu",
        l2_scopes={},
        gru_units=128, batch_size=16, patience=8, factor=0.1, min_lr=1e-6,
        balance="class_weights", augmentation=True,
    ),
    "synthetic": Profile(
        name="synthetic", target_fs=250.0, min_distance_s=0.6, min_height=0.5,
        window_ms=500.0, snr_db=20.0, epochs=12, lr=1e-3, dropout_p=0.0,
        activation="relu",
        l2_scopes={},
        gru_units=64, batch_size=16, patience=5, factor=0.1, min_lr=1e-6,
        balance="class_weights", augmentation=False,
        feature_dim=128, fc_units=64, backbone_width=0.125,
    ),
}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
