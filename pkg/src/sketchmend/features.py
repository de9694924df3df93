"""Feature extractors behind the FID / style-loss metrics.

An extractor is a callable mapping an (H, W, 3) image to named (C, H', W')
feature maps, with `layer_names` declaring the order. The stub extractor
keeps contract tests independent of any learned weights; the tiny conv
classifier gives desk-scale deep features after a short fit on the toy
dataset (absolute values are not comparable across extractors).
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .metrics import FeatureStats, feature_stats


class StubFeatureExtractor:
    """Deterministic weight-free extractor: the raw image and a 2× pooled copy."""

    layer_names = ("relu_1", "relu_2")

    def __call__(self, img: np.ndarray) -> dict[str, np.ndarray]:
        chw = np.asarray(img, dtype=np.float64).transpose(2, 0, 1)
        h, w = chw.shape[1] // 2 * 2, chw.shape[2] // 2 * 2
        pooled = chw[:, :h, :w].reshape(chw.shape[0], h // 2, 2, w // 2, 2).mean(axis=(2, 4))
        return {"relu_1": chw, "relu_2": pooled}


class _TinyConvNet(nn.Module):
    def __init__(self, n_classes: int = 8):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 16, 3, 1, 1)
        self.conv2 = nn.Conv2d(16, 32, 3, 2, 1)
        self.fc = nn.Linear(32, n_classes)

    def features(self, x):
        f1 = F.relu(self.conv1(x))
        f2 = F.relu(self.conv2(f1))
        return f1, f2

    def forward(self, x):
        _, f2 = self.features(x)
        return self.fc(f2.mean(dim=(2, 3)))


class TinyConvFeatureExtractor:
    """Two-layer conv features from a small classifier fit on toy images."""

    layer_names = ("relu_1", "relu_2")

    def __init__(self, net: _TinyConvNet | None = None):
        self.net = net or _TinyConvNet()
        self.net.eval()

    def __call__(self, img: np.ndarray) -> dict[str, np.ndarray]:
        x = torch.as_tensor(np.asarray(img, dtype=np.float32)).permute(2, 0, 1)[None]
        with torch.no_grad():
            f1, f2 = self.net.features(x)
        return {"relu_1": f1[0].double().numpy(), "relu_2": f2[0].double().numpy()}

    @classmethod
    def fit(cls, images: np.ndarray, labels, steps: int = 300, seed: int = 0, batch: int = 32):
        """Train the backing classifier on (images, integer labels)."""
        torch.manual_seed(seed)
        labels = np.asarray(labels, dtype=np.int64)
        n_classes = int(labels.max()) + 1
        net = _TinyConvNet(n_classes)
        opt = torch.optim.Adam(net.parameters(), lr=1e-3)
        rng = np.random.default_rng(seed)
        data = torch.as_tensor(np.asarray(images, dtype=np.float32)).permute(0, 3, 1, 2)
        target = torch.as_tensor(labels)
        net.train()
        for _ in range(steps):
            idx = rng.integers(0, len(images), size=batch)
            logits = net(data[idx])
            loss = F.cross_entropy(logits, target[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        net.eval()
        return cls(net)

    def save(self, path) -> None:
        arrays = {k: v.detach().numpy() for k, v in self.net.state_dict().items()}
        np.savez(path, n_classes=self.net.fc.out_features, **arrays)

    @classmethod
    def load(cls, path):
        npz = np.load(path)
        net = _TinyConvNet(int(npz["n_classes"]))
        state = {k: torch.from_numpy(npz[k]) for k in npz.files if k != "n_classes"}
        net.load_state_dict(state)
        return cls(net)


def image_feature_vectors(images, extractor, layer: str | None = None) -> np.ndarray:
    """Spatially averaged features of each image: (N, C) vectors."""
    layer = layer or extractor.layer_names[-1]
    return np.stack([extractor(img)[layer].mean(axis=(1, 2)) for img in images])


def image_set_stats(images, extractor, layer: str | None = None) -> FeatureStats:
    """FeatureStats of a whole image set under `extractor` (FID input)."""
    return feature_stats(image_feature_vectors(images, extractor, layer))
