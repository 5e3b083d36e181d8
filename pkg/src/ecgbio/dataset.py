"""Beat collections and the image pipelines that feed the classifier.

A pipeline serves normalized (B, 3, S, S) batches by index. Training fetches
pass each sample through exactly one augmentation draw; evaluation fetches
never touch the augmenter. Both are counted so tests can assert the split
discipline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beats import BeatSegment
from .errors import DomainError
from .scalogram import (AugmentationSpec, IMAGE_SIZE, Scalogram, augment,
                        cwt_morlet, normalize_image, unit_image)

TRAIN, VAL, TEST, EXCLUDED = 0, 1, 2, -1


@dataclass
class BeatDataset:
    """Fixed-length beats with integer class labels."""
    beats: np.ndarray        # (N, L)
    labels: np.ndarray       # (N,) int, indexes into classes
    classes: list[str]       # class index -> subject id
    fs: float
    window_ms: float

    def __post_init__(self):
        self.beats = np.asarray(self.beats, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.beats.ndim != 2 or len(self.beats) != len(self.labels):
            raise DomainError("BeatDataset: beats and labels disagree")

    def __len__(self):
        return len(self.beats)

    @classmethod
    def from_segments(cls, segments: list[BeatSegment]) -> "BeatDataset":
        if not segments:
            raise DomainError("BeatDataset: no segments")
        classes = sorted({s.subject_id for s in segments})
        index = {c: i for i, c in enumerate(classes)}
        beats = np.stack([s.samples for s in segments]).astype(np.float32)
        labels = np.array([index[s.subject_id] for s in segments], dtype=np.int64)
        first = segments[0]
        return cls(beats, labels, classes, first.fs, first.window_ms)


class _BasePipeline:
    """Split bookkeeping and fetch counters shared by the pipelines."""

    labels: np.ndarray
    classes: list[str]
    split: np.ndarray
    input_size: int

    def _init_split(self, n: int, split: np.ndarray | None):
        if split is None:
            split = np.full(n, TRAIN, dtype=np.int8)
        split = np.asarray(split, dtype=np.int8)
        if split.shape != (n,):
            raise DomainError(f"split must have shape ({n},), got {split.shape}")
        self.split = split
        self.augment_draws_train = 0
        self.fetches_eval = 0

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _idx(self, tag: int) -> np.ndarray:
        return np.nonzero(self.split == tag)[0]

    @property
    def train_idx(self) -> np.ndarray:
        return self._idx(TRAIN)

    @property
    def val_idx(self) -> np.ndarray:
        return self._idx(VAL)

    @property
    def test_idx(self) -> np.ndarray:
        return self._idx(TEST)

    def __len__(self):
        return len(self.labels)


class ScalogramPipeline(_BasePipeline):
    """Precomputed unit-scaled scalograms with on-demand augmentation.

    The expensive wavelet transform and resize run once per beat at
    construction; normalization and augmentation are applied per fetch.
    """

    def __init__(self, dataset: BeatDataset, n_scales: int = 64,
                 augment_spec: AugmentationSpec | None = None, seed: int = 0,
                 split: np.ndarray | None = None):
        self.dataset = dataset
        self.labels = dataset.labels
        self.classes = dataset.classes
        self.n_scales = n_scales
        self.augment_spec = augment_spec if augment_spec is not None else AugmentationSpec(enabled=False)
        self.seed = seed
        self.input_size = IMAGE_SIZE
        self._init_split(len(dataset), split)
        self.unit = np.empty((len(dataset), IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
        for i in range(len(dataset)):
            seg = BeatSegment(dataset.beats[i].astype(np.float64),
                              (dataset.beats.shape[1] - 1) // 2,
                              dataset.classes[dataset.labels[i]],
                              dataset.window_ms, dataset.fs)
            self.unit[i] = unit_image(cwt_morlet(seg, n_scales))

    def image(self, idx: int) -> Scalogram:
        return normalize_image(self.unit[idx], self.classes[self.labels[idx]])

    def batch(self, indices, train: bool, epoch: int = 0) -> np.ndarray:
        indices = np.asarray(indices)
        out = np.empty((len(indices), 3, self.input_size, self.input_size), dtype=np.float32)
        for row, idx in enumerate(indices):
            img = self.image(int(idx))
            if train:
                draw_seed = np.random.SeedSequence((self.seed, epoch, int(idx))).generate_state(1)[0]
                img = augment(img, self.augment_spec, int(draw_seed))
                self.augment_draws_train += 1
            else:
                self.fetches_eval += 1
            out[row] = img.pixels
        return out

    def with_split(self, split: np.ndarray) -> "ScalogramPipeline":
        """Shallow view sharing the precomputed images, with fresh counters."""
        view = object.__new__(ScalogramPipeline)
        view.dataset = self.dataset
        view.labels = self.labels
        view.classes = self.classes
        view.n_scales = self.n_scales
        view.augment_spec = self.augment_spec
        view.seed = self.seed
        view.input_size = self.input_size
        view._init_split(len(self.labels), split)
        view.unit = self.unit
        return view


class ArrayImagePipeline(_BasePipeline):
    """Serves already-normalized images of any spatial size (test scale)."""

    def __init__(self, images: np.ndarray, labels: np.ndarray, classes: list[str],
                 split: np.ndarray | None = None):
        images = np.asarray(images, dtype=np.float32)
        if images.ndim != 4 or images.shape[1] != 3 or images.shape[2] != images.shape[3]:
            raise DomainError(f"ArrayImagePipeline: expected (N, 3, S, S), got {images.shape}")
        self.images = images
        self.labels = np.asarray(labels, dtype=np.int64)
        self.classes = list(classes)
        self.input_size = images.shape[2]
        self._init_split(len(images), split)

    def batch(self, indices, train: bool, epoch: int = 0) -> np.ndarray:
        indices = np.asarray(indices)
        if not train:
            self.fetches_eval += len(indices)
        return self.images[indices].copy()

    def with_split(self, split: np.ndarray) -> "ArrayImagePipeline":
        view = object.__new__(ArrayImagePipeline)
        view.images = self.images
        view.labels = self.labels
        view.classes = self.classes
        view.input_size = self.input_size
        view._init_split(len(self.labels), split)
        return view
