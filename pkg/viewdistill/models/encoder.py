"""Pixel encoder - 12 conv layers, one spatial self-attention layer, projection to features."""

import math
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from viewdistill.core.exceptions import ShapeError
from viewdistill.schemas.training import EncoderSpec


class SelfAttention2d(nn.Module):
    """Single-head self-attention over the spatial grid with 1x1 conv projections.

    Without the positional encoding the layer is equivariant to permutations of the grid cells.
    """

    def __init__(self, channels: int, attention_dim: int, grid_size: int, positional: bool):
        super().__init__()
        self.query = nn.Conv2d(channels, attention_dim, kernel_size=1)
        self.key = nn.Conv2d(channels, attention_dim, kernel_size=1)
        self.value = nn.Conv2d(channels, channels, kernel_size=1)
        self.scale = 1.0 / math.sqrt(attention_dim)
        if positional:
            self.position = nn.Parameter(0.02 * torch.randn(1, channels, grid_size, grid_size))
        else:
            self.register_parameter("position", None)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.position is not None:
            x = x + self.position
        b, c, h, w = x.shape
        q = self.query(x).flatten(2)  # (B, d, N)
        k = self.key(x).flatten(2)
        v = self.value(x).flatten(2)  # (B, C, N)
        weights = torch.softmax(torch.bmm(q.transpose(1, 2), k) * self.scale, dim=-1)
        attended = torch.bmm(v, weights.transpose(1, 2)).view(b, c, h, w)
        return x + attended


class PixelEncoder(nn.Module):
    """Maps channel-concatenated views (B, 3V, H, W) in [0, 1] to tanh-bounded features."""

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        self.spec = spec
        layers: list[nn.Module] = []
        in_channels = spec.in_channels
        for stride in spec.strides:
            layers.append(
                nn.Conv2d(
                    in_channels,
                    spec.conv_channels,
                    kernel_size=spec.kernel_size,
                    stride=stride,
                    padding=spec.kernel_size // 2,
                )
            )
            layers.append(nn.SiLU())
            in_channels = spec.conv_channels
        self.convs = nn.Sequential(*layers)
        self.attention = SelfAttention2d(
            spec.conv_channels, spec.attention_dim, spec.grid_size, spec.positional_encoding
        )
        grid = spec.grid_size
        self.projection = nn.Linear(spec.conv_channels * grid * grid, spec.feature_dim)
        self.norm = nn.LayerNorm(spec.feature_dim)

    @property
    def feature_dim(self) -> int:
        return self.spec.feature_dim

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        expected = (self.spec.in_channels, self.spec.image_size, self.spec.image_size)
        if obs.dim() != 4 or tuple(obs.shape[1:]) != expected:
            raise ShapeError(f"encoder expects (B, {expected}), got {tuple(obs.shape)}")
        x = self.convs(obs - 0.5)
        x = self.attention(x)
        return torch.tanh(self.norm(self.projection(x.flatten(1))))


def views_to_tensor(
    views: Sequence[np.ndarray], views_expected: int, image_size: int
) -> torch.Tensor:
    """Stack a list of (H, W, 3) images into one (3V, H, W) float tensor, in list order."""
    if len(views) != views_expected:
        raise ShapeError(f"expected {views_expected} camera views, got {len(views)}")
    channels = []
    for i, view in enumerate(views):
        if view.shape != (image_size, image_size, 3):
            raise ShapeError(
                f"view {i} has shape {view.shape}, expected ({image_size}, {image_size}, 3)"
            )
        img = view.astype(np.float32) / 255.0 if view.dtype == np.uint8 else view
        tensor = torch.as_tensor(np.ascontiguousarray(img), dtype=torch.float32)
        channels.append(tensor.permute(2, 0, 1))
    return torch.cat(channels, dim=0)


def batch_to_tensor(images: np.ndarray) -> torch.Tensor:
    """(B, V, H, W, 3) uint8 or float batch to a (B, 3V, H, W) float tensor."""
    if images.dtype == np.uint8:
        images = images.astype(np.float32) / 255.0
    b, v, h, w, c = images.shape
    tensor = torch.as_tensor(np.ascontiguousarray(images), dtype=torch.float32)
    return tensor.permute(0, 1, 4, 2, 3).reshape(b, v * c, h, w)
