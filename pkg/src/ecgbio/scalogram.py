"""Beat -> normalized 224x224 Morlet scalogram, with training augmentation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beats import BeatSegment
from .errors import DomainError

IMAGE_SIZE = 224
MORLET_OMEGA0 = 6.0
DEFAULT_N_SCALES = 64
FREQ_RANGE_HZ = (0.5, 40.0)

# fixed ImageNet channel statistics applied after min-max scaling
IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass(frozen=True)
class Scalogram:
    """3-channel 224x224 image ready for the classifier (CHW layout)."""
    pixels: np.ndarray
    normalized: bool
    source_subject: str

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.shape != (3, IMAGE_SIZE, IMAGE_SIZE):
            raise DomainError(f"Scalogram: pixels must be 3x{IMAGE_SIZE}x{IMAGE_SIZE}, "
                              f"got {px.shape}")
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class AugmentationSpec:
    """Random-transform ranges for training images."""
    rotation_deg: float = 5.0
    translate_frac: float = 0.10
    scale_range: tuple[float, float] = (0.9, 1.1)
    hflip_prob: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        lo, hi = self.scale_range
        if self.rotation_deg < 0:
            raise DomainError("AugmentationSpec: rotation_deg must be >= 0")
        if not 0.0 <= self.translate_frac < 1.0:
            raise DomainError("AugmentationSpec: translate_frac must be in [0, 1)")
        if not 0.0 < lo <= hi:
            raise DomainError("AugmentationSpec: scale_range must satisfy 0 < lo <= hi")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise DomainError("AugmentationSpec: hflip_prob must be in [0, 1]")


def pseudo_frequencies(n_scales: int, fs: float,
                       freq_range: tuple[float, float] = FREQ_RANGE_HZ) -> np.ndarray:
    """Log-spaced pseudo-frequencies in Hz, descending (row 0 = highest)."""
    lo, hi = freq_range
    return np.geomspace(hi, lo, n_scales)


def morlet_scales(n_scales: int, fs: float,
                  freq_range: tuple[float, float] = FREQ_RANGE_HZ) -> np.ndarray:
    """Scales (in samples) whose pseudo-frequency f = fc * fs / a spans the band."""
    fc = MORLET_OMEGA0 / (2.0 * np.pi)
    return fc * fs / pseudo_frequencies(n_scales, fs, freq_range)


def cwt_morlet(segment: BeatSegment, n_scales: int = DEFAULT_N_SCALES) -> np.ndarray:
    """Magnitude continuous wavelet transform with an analytic Morlet.

    Row k holds |<signal, psi_{a_k}>| for scale a_k; scales are log-spaced so
    pseudo-frequencies cover 0.5-40 Hz at the segment's sampling rate.

    Returns:
        (n_scales, len(segment)) array of nonnegative magnitudes.
    """
    if n_scales < 8:
        raise DomainError(f"cwt_morlet: n_scales must be >= 8, got {n_scales}")
    x = np.asarray(segment.samples, dtype=np.float64)
    n = x.size
    if n < 32:
        raise DomainError(f"cwt_morlet: segment too short ({n} samples, need >= 32)")
    scales = morlet_scales(n_scales, segment.fs)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    fx = np.fft.fft(x, nfft)
    omega = 2.0 * np.pi * np.fft.fftfreq(nfft)  # radians per sample
    out = np.empty((n_scales, n), dtype=np.float64)
    norm = np.pi ** -0.25
    for k, a in enumerate(scales):
        # analytic Morlet in the frequency domain, L2-normalized per scale
        psi_hat = norm * np.sqrt(2.0 * np.pi * a) * np.exp(-0.5 * (a * omega - MORLET_OMEGA0) ** 2)
        psi_hat[omega < 0] = 0.0
        out[k] = np.abs(np.fft.ifft(fx * psi_hat)[:n])
    return out


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers (align_corners=False)."""
    in_h, in_w = img.shape
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    a = img[np.ix_(y0, x0)]
    b = img[np.ix_(y0, x1)]
    c = img[np.ix_(y1, x0)]
    d = img[np.ix_(y1, x1)]
    top = a * (1 - wx) + b * wx
    bot = c * (1 - wx) + d * wx
    return top * (1 - wy) + bot * wy


def unit_image(coeffs: np.ndarray) -> np.ndarray:
    """Min-max scale to [0,1] and resize to 224x224 (a degenerate range maps to 0)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.size == 0:
        raise DomainError(f"unit_image: coefficients must be a nonempty matrix, "
                          f"got shape {coeffs.shape}")
    lo = coeffs.min()
    hi = coeffs.max()
    scaled = np.zeros_like(coeffs) if hi == lo else (coeffs - lo) / (hi - lo)
    return resize_bilinear(scaled, IMAGE_SIZE, IMAGE_SIZE).astype(np.float32)


def normalize_image(unit: np.ndarray, source_subject: str = "") -> Scalogram:
    """Replicate one channel to three and apply the fixed channel statistics."""
    if unit.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise DomainError(f"normalize_image: expected {IMAGE_SIZE}x{IMAGE_SIZE}, "
                          f"got {unit.shape}")
    stacked = np.repeat(unit[None, :, :], 3, axis=0).astype(np.float32)
    pixels = (stacked - IMAGENET_MEAN[:, None, None]) / IMAGENET_STD[:, None, None]
    return Scalogram(pixels, normalized=True, source_subject=source_subject)


def scalogram_image(coeffs: np.ndarray, source_subject: str = "") -> Scalogram:
    """Coefficients -> [0,1] min-max scale -> 224x224 -> 3 channels -> normalize."""
    return normalize_image(unit_image(coeffs), source_subject)


def augment(image: Scalogram, spec: AugmentationSpec, seed: int) -> Scalogram:
    """One random draw per transform: rotate, translate, scale, maybe flip.

    Deterministic per (image, spec, seed). Validation and test paths must not
    call this; spec.enabled=False returns the image unchanged.
    """
    if not image.normalized:
        raise DomainError("augment: image must be normalized first")
    if not spec.enabled:
        return image
    rng = np.random.default_rng(seed)
    angle = np.deg2rad(rng.uniform(-spec.rotation_deg, spec.rotation_deg))
    tx = rng.uniform(-spec.translate_frac, spec.translate_frac) * IMAGE_SIZE
    ty = rng.uniform(-spec.translate_frac, spec.translate_frac) * IMAGE_SIZE
    scale = rng.uniform(spec.scale_range[0], spec.scale_range[1])
    flip = rng.random() < spec.hflip_prob

    pixels = image.pixels
    if flip:
        pixels = pixels[:, :, ::-1]
    if angle != 0.0 or tx != 0.0 or ty != 0.0 or scale != 1.0:
        from scipy.ndimage import affine_transform

        c = (IMAGE_SIZE - 1) / 2.0
        cos_a, sin_a = np.cos(angle), np.sin(angle)
        # inverse map (output -> input) around the image center
        inv = np.array([[cos_a, sin_a], [-sin_a, cos_a]]) / scale
        center = np.array([c, c])
        offset = center - inv @ (center + np.array([ty, tx]))
        warped = np.empty_like(pixels)
        # empty corners take each channel's zero-intensity value
        background = (0.0 - IMAGENET_MEAN) / IMAGENET_STD
        for ch in range(3):
            warped[ch] = affine_transform(pixels[ch], inv, offset=offset, order=1,
                                          mode="constant", cval=background[ch],
                                          output=np.float32)
        pixels = warped
    else:
        pixels = np.ascontiguousarray(pixels)
    return Scalogram(pixels, normalized=True, source_subject=image.source_subject)


def export_png(coeffs: np.ndarray, path) -> None:
    """Debug export of raw coefficients as an 8-bit grayscale PNG."""
    from PIL import Image

    u = unit_image(coeffs)
    Image.fromarray((u * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)
