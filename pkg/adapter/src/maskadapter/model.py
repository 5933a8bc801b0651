"""Compact promptable segmentation network.

The architecture mirrors the three-part split of the large promptable
segmentation models it stands in for: an image encoder, a prompt encoder
for a single point, and a mask decoder that emits several candidate masks
plus a predicted-IoU score per candidate. Fine-tuning freezes the decoder
and trains only the two encoders, so the split is structural, not
cosmetic. Environments with a full-scale model can register it here as
long as it exposes the same three submodules and forward contract.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import torch
from torch import nn

MODEL_TYPE = "compact-v1"


class ImageEncoder(nn.Module):
    def __init__(self, channels: int = 32):
        super().__init__()
        c = channels
        self.net = nn.Sequential(
            nn.Conv2d(1, c // 2, 3, stride=2, padding=1),
            nn.GroupNorm(4, c // 2),
            nn.GELU(),
            nn.Conv2d(c // 2, c, 3, stride=2, padding=1),
            nn.GroupNorm(8, c),
            nn.GELU(),
            nn.Conv2d(c, c, 3, padding=1),
            nn.GroupNorm(8, c),
            nn.GELU(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)   # (B, C, H/4, W/4)


class PromptEncoder(nn.Module):
    """Embeds one (x, y) point, normalized to [0, 1], with Fourier features."""

    def __init__(self, channels: int = 32, bands: int = 8):
        super().__init__()
        self.register_buffer("freqs", 2.0 ** torch.arange(bands).float() * math.pi)
        self.mlp = nn.Sequential(
            nn.Linear(4 * bands, 64),
            nn.GELU(),
            nn.Linear(64, channels),
        )

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        # points: (B, 2) in [0, 1]
        angles = points[:, :, None] * self.freqs   # (B, 2, bands)
        feats = torch.cat([angles.sin(), angles.cos()], dim=2).flatten(1)
        return self.mlp(feats)   # (B, C)


class MaskDecoder(nn.Module):
    def __init__(self, channels: int = 32, num_masks: int = 3):
        super().__init__()
        c = channels
        self.num_masks = num_masks
        self.fuse = nn.Sequential(
            nn.Conv2d(c + 1, c, 3, padding=1),
            nn.GroupNorm(8, c),
            nn.GELU(),
            nn.Conv2d(c, c, 3, padding=1),
            nn.GroupNorm(8, c),
            nn.GELU(),
        )
        final = nn.Conv2d(c // 2, num_masks, 3, padding=1)
        # Start near-empty (sigmoid ~ 0.12): untrained candidates then score
        # uniformly poorly instead of varying with the random init, which
        # keeps early training dynamics comparable across seeds.
        nn.init.constant_(final.bias, -2.0)
        self.mask_head = nn.Sequential(
            nn.ConvTranspose2d(c, c // 2, 2, stride=2),
            nn.GELU(),
            nn.ConvTranspose2d(c // 2, c // 2, 2, stride=2),
            nn.GELU(),
            final,
        )
        self.iou_head = nn.Sequential(
            nn.Linear(c, 64),
            nn.GELU(),
            nn.Linear(64, num_masks),
        )

    def forward(self, feats: torch.Tensor, prompt: torch.Tensor,
                heatmap: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        fused = self.fuse(torch.cat([feats + prompt[:, :, None, None], heatmap], dim=1))
        logits = self.mask_head(fused)                       # (B, N, H, W)
        iou = torch.sigmoid(self.iou_head(fused.mean(dim=(2, 3))))   # (B, N)
        return logits, iou


class PromptSegNet(nn.Module):
    """Point-promptable segmentation with multi-candidate output."""

    def __init__(self, channels: int = 32, num_masks: int = 3):
        super().__init__()
        self.channels = channels
        self.num_masks = num_masks
        self.image_encoder = ImageEncoder(channels)
        self.prompt_encoder = PromptEncoder(channels)
        self.mask_decoder = MaskDecoder(channels, num_masks)

    def forward(self, image: torch.Tensor, point: torch.Tensor
                ) -> tuple[torch.Tensor, torch.Tensor]:
        """image: (B, 1, H, W) in [0, 1]; point: (B, 2) pixel coords.

        Returns (mask_logits (B, N, H, W), predicted_iou (B, N)). H and W
        are padded internally to multiples of 4 and cropped on output.
        """
        b, _, h, w = image.shape
        pad_h = (4 - h % 4) % 4
        pad_w = (4 - w % 4) % 4
        if pad_h or pad_w:
            image = nn.functional.pad(image, (0, pad_w, 0, pad_h), mode="replicate")
        feats = self.image_encoder(image)
        norm = torch.stack([point[:, 0] / max(w - 1, 1),
                            point[:, 1] / max(h - 1, 1)], dim=1).to(image.dtype)
        prompt = self.prompt_encoder(norm)
        heatmap = self._point_heatmap(point, feats.shape[2], feats.shape[3],
                                      image.dtype, image.device)
        logits, iou = self.mask_decoder(feats, prompt, heatmap)
        return logits[:, :, :h, :w], iou

    @staticmethod
    def _point_heatmap(point: torch.Tensor, fh: int, fw: int, dtype, device
                       ) -> torch.Tensor:
        ys = torch.arange(fh, dtype=dtype, device=device)[None, :, None]
        xs = torch.arange(fw, dtype=dtype, device=device)[None, None, :]
        px = (point[:, 0:1, None] / 4.0).to(dtype)
        py = (point[:, 1:2, None] / 4.0).to(dtype)
        d2 = (xs - px) ** 2 + (ys - py) ** 2
        return torch.exp(-d2 / 8.0)[:, None, :, :]


def save_checkpoint(model: PromptSegNet, path: str | Path) -> None:
    torch.save({"model_type": MODEL_TYPE, "channels": model.channels,
                "num_masks": model.num_masks,
                "state_dict": model.state_dict()}, path)


def load_checkpoint(path: str | Path) -> PromptSegNet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not readable: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("model_type") != MODEL_TYPE:
        raise ValueError(f"{path}: unknown model type {blob.get('model_type')!r}")
    model = PromptSegNet(channels=blob["channels"], num_masks=blob["num_masks"])
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model


def module_checksum(module: nn.Module) -> str:
    """SHA-256 over a module's parameters and buffers, bitwise."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
