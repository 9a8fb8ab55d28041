"""AlexNet with the two fully connected layers rewritten as convolutions, so
arbitrary input sizes produce a spatial grid of 4096-d feature vectors.

fc6 (9216 -> 4096) becomes a 6x6 convolution over the 256-channel pool5 map;
fc7 (4096 -> 4096) becomes a 1x1 convolution. Weights are reshaped, not
retrained, so on a 6x6 pool5 grid the converted net reproduces the original
classifier activations exactly.
"""

from dataclasses import dataclass

import torch
from torch import nn
from torchvision.models import alexnet

TAPS = ("conv5", "fc6", "fc7")

# ImageNet preprocessing constants
_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


@dataclass(frozen=True)
class ExtractorConfig:
    tap: str = "fc7"
    weights: str = "pretrained"   # "pretrained", "random", or a state-dict path
    seed: int = 0                 # initialization seed for weights="random"
    min_side: int = 227           # inputs are upscaled to at least this side


class MissingWeightsError(RuntimeError):
    """Pretrained weights are not cached locally and cannot be fetched."""


class FullyConvAlexNet(nn.Module):
    """features -> conv6/ReLU -> conv7/ReLU, tapped at conv5, fc6, or fc7."""

    def __init__(self, base: nn.Module, tap: str):
        super().__init__()
        if tap not in TAPS:
            raise ValueError(f"tap must be one of {TAPS}, got {tap!r}")
        self.tap = tap
        self.features = base.features
        fc6: nn.Linear = base.classifier[1]
        fc7: nn.Linear = base.classifier[4]
        self.conv6 = nn.Conv2d(256, 4096, kernel_size=6)
        self.conv7 = nn.Conv2d(4096, 4096, kernel_size=1)
        with torch.no_grad():
            self.conv6.weight.copy_(fc6.weight.view(4096, 256, 6, 6))
            self.conv6.bias.copy_(fc6.bias)
            self.conv7.weight.copy_(fc7.weight.view(4096, 4096, 1, 1))
            self.conv7.bias.copy_(fc7.bias)

    @property
    def channels(self) -> int:
        return 256 if self.tap == "conv5" else 4096

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        if self.tap == "conv5":
            return x
        x = torch.relu(self.conv6(x))
        if self.tap == "fc6":
            return x
        return torch.relu(self.conv7(x))


def build_network(config: ExtractorConfig) -> FullyConvAlexNet:
    """Load AlexNet per config.weights and convert it; always in eval mode."""
    if config.weights == "pretrained":
        try:
            base = alexnet(weights="IMAGENET1K_V1")
        except Exception as exc:  # urllib errors vary; normalize
            raise MissingWeightsError(
                "pretrained AlexNet weights are not cached locally "
                "(set TORCH_HOME to a cache holding them, or pass a "
                "state-dict path / weights='random')") from exc
    elif config.weights == "random":
        torch.manual_seed(config.seed)
        base = alexnet(weights=None)
    else:
        base = alexnet(weights=None)
        try:
            state = torch.load(config.weights, map_location="cpu",
                               weights_only=True)
        except FileNotFoundError as exc:
            raise MissingWeightsError(
                f"weights file not found: {config.weights}") from exc
        base.load_state_dict(state)
    net = FullyConvAlexNet(base, config.tap)
    net.eval()
    return net


def preprocess(rgb: torch.Tensor, min_side: int) -> torch.Tensor:
    """uint8 (H, W, 3) image to a normalized 1x3xHxW batch, upscaled so the
    shorter side is at least min_side (aspect preserved)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB image")
    x = rgb.permute(2, 0, 1).unsqueeze(0).float() / 255.0
    h, w = x.shape[2], x.shape[3]
    short = min(h, w)
    if short < min_side:
        scale = min_side / short
        new_h = max(min_side, round(h * scale))
        new_w = max(min_side, round(w * scale))
        x = nn.functional.interpolate(x, size=(new_h, new_w), mode="bilinear",
                                      align_corners=False)
    return (x - _MEAN) / _STD
