"""Image augmentation - replicate-padded random shift and brightness/contrast/saturation jitter.

Images are float (H, W, 3) arrays in [0, 1]; the pixel work runs on torch tensors.
"""

from typing import NamedTuple, Sequence

import numpy as np
import torch
import torch.nn.functional as F
import torchvision.transforms.functional as TF

from viewdistill.schemas.training import AugmentConfig


class AugmentDraw(NamedTuple):
    """One sampled augmentation, applied identically to every view of an observation."""

    dx: int
    dy: int
    brightness: float
    contrast: float
    saturation: float


def _to_chw(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img)).permute(2, 0, 1)


def _to_hwc(tensor: torch.Tensor, dtype: np.dtype) -> np.ndarray:
    return tensor.permute(1, 2, 0).contiguous().numpy().astype(dtype, copy=False)


def shift_image(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Move content by (dx, dy) pixels (x right, y down), replicating the border."""
    if dx == 0 and dy == 0:
        return img.copy()
    pad = max(abs(dx), abs(dy))
    padded = F.pad(_to_chw(img).unsqueeze(0), (pad, pad, pad, pad), mode="replicate")[0]
    h, w = img.shape[:2]
    oy, ox = pad - dy, pad - dx
    return _to_hwc(padded[:, oy : oy + h, ox : ox + w], img.dtype)


def random_shift(img: np.ndarray, max_shift: int, rng: np.random.Generator) -> np.ndarray:
    """Replicate-pad by `max_shift` and crop at a uniformly chosen integer offset."""
    h, w = img.shape[:2]
    if max_shift < 0 or 2 * max_shift >= min(h, w):
        raise ValueError(f"max_shift {max_shift} too large for a {h}x{w} image")
    if max_shift == 0:
        return img.copy()
    dx, dy = rng.integers(-max_shift, max_shift + 1, size=2)
    return shift_image(img, int(dx), int(dy))


def adjust_colors(
    img: np.ndarray, brightness: float, contrast: float, saturation: float
) -> np.ndarray:
    """Brightness, then contrast about the mean gray level, then saturation about per-pixel gray."""
    out = TF.adjust_brightness(_to_chw(img), brightness)
    out = TF.adjust_contrast(out, contrast)
    out = TF.adjust_saturation(out, saturation)
    return _to_hwc(out, img.dtype)


def color_jitter(img: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    b = rng.uniform(*config.brightness_range)
    c = rng.uniform(*config.contrast_range)
    s = rng.uniform(*config.saturation_range)
    return adjust_colors(img, b, c, s)


def sample_draw(config: AugmentConfig, rng: np.random.Generator) -> AugmentDraw:
    dx, dy = rng.integers(-config.max_shift, config.max_shift + 1, size=2)
    return AugmentDraw(
        dx=int(dx),
        dy=int(dy),
        brightness=float(rng.uniform(*config.brightness_range)),
        contrast=float(rng.uniform(*config.contrast_range)),
        saturation=float(rng.uniform(*config.saturation_range)),
    )


def apply_draw(img: np.ndarray, draw: AugmentDraw) -> np.ndarray:
    shifted = shift_image(img, draw.dx, draw.dy)
    return adjust_colors(shifted, draw.brightness, draw.contrast, draw.saturation)


def augment_views(
    views: Sequence[np.ndarray], config: AugmentConfig, rng: np.random.Generator
) -> list[np.ndarray]:
    """Augment all views of one observation with a single shared draw."""
    if not config.enabled:
        return [v.copy() for v in views]
    draw = sample_draw(config, rng)
    return [apply_draw(v, draw) for v in views]


def augment_batch(batch: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Augment a float batch shaped (B, V, H, W, 3); one draw per sample, shared across views."""
    if not config.enabled:
        return batch
    out = np.empty_like(batch)
    for i in range(batch.shape[0]):
        out[i] = augment_views(batch[i], config, rng)
    return out
