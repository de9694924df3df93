"""Networks: mask estimator, structure-agnostic style encoder, two-stage
gated-convolution generator, and a spectral-normalized patch discriminator.

All forwards are deterministic given (parameters, inputs). Tensors follow
torch NCHW layout; images in [0, 1], masks in (0, 1) via sigmoid, generator
outputs squashed to [0, 1] with a scaled tanh.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import NetConfig


def squash01(z: torch.Tensor) -> torch.Tensor:
    """Map unbounded activations to [0, 1] via scaled tanh."""
    return 0.5 * (torch.tanh(z) + 1.0)


def global_max_pool(feat: torch.Tensor) -> torch.Tensor:
    """Max over all spatial positions: (B, C, H, W) -> (B, C).

    Invariant under any spatial permutation of `feat`, which is what makes
    the pooled style code structure agnostic.
    """
    return feat.amax(dim=(2, 3))


def tile_style(v: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Repeat a (B, d) style vector into a spatially constant (B, d, h, w) map."""
    if h < 1 or w < 1:
        raise ValueError("tile size must be >= 1")
    return v[:, :, None, None].expand(-1, -1, h, w)


class GatedConv2d(nn.Module):
    """Convolution whose output is feature ⊙ sigmoid(gate).

    Both branches come from one conv with doubled channels. With the gate
    bias pushed to +inf the unit degenerates to a plain conv + activation.
    """

    def __init__(self, in_ch, out_ch, kernel=3, stride=1, dilation=1):
        super().__init__()
        padding = dilation * (kernel // 2)
        self.conv = nn.Conv2d(in_ch, out_ch * 2, kernel, stride, padding, dilation)
        self.out_ch = out_ch

    def forward(self, x):
        feat, gate = self.conv(x).chunk(2, dim=1)
        return F.elu(feat) * torch.sigmoid(gate)


class GatedUp(nn.Module):
    """Nearest ×2 upsampling followed by a gated conv."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.conv = GatedConv2d(in_ch, out_ch, kernel=3)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


def _conv(in_ch, out_ch, kernel=3, stride=1, dilation=1):
    return nn.Conv2d(in_ch, out_ch, kernel, stride, dilation * (kernel // 2), dilation)


class MaskEstimator(nn.Module):
    """Encoder-decoder over (image, sketch) with a sigmoid mask head and an
    auxiliary image-reconstruction head used only during training."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.e1 = _conv(4, w, kernel=5)
        self.e2 = _conv(w, 2 * w, stride=2)
        self.e3 = _conv(2 * w, 2 * w)
        self.e4 = _conv(2 * w, 4 * w, stride=2)
        self.e5 = _conv(4 * w, 4 * w, dilation=2)
        self.m_up1 = _conv(4 * w + 2 * w, 2 * w)
        self.m_up2 = _conv(2 * w + w, w)
        self.m_head = _conv(w, 1)
        self.a_up1 = _conv(4 * w + 2 * w, 2 * w)
        self.a_up2 = _conv(2 * w + w, w)
        self.a_head = _conv(w, 3)
        # Start masks open (~0.73): reconstruction pressure then shrinks them
        # where content already matches. A near-zero start saturates the
        # sigmoid and the estimator never escapes the all-zero shortcut.
        nn.init.constant_(self.m_head.bias, 1.0)

    def _decode(self, f1, f3, f5, up1, up2, head):
        h = F.interpolate(f5, scale_factor=2, mode="nearest")
        h = F.elu(up1(torch.cat([h, f3], dim=1)))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = F.elu(up2(torch.cat([h, f1], dim=1)))
        return head(h)

    def forward(self, x, c, with_aux: bool = False):
        if x.shape[2:] != c.shape[2:]:
            raise ValueError(f"image {tuple(x.shape[2:])} vs sketch {tuple(c.shape[2:])}")
        f1 = F.elu(self.e1(torch.cat([x, c], dim=1)))
        f2 = F.elu(self.e2(f1))
        f3 = F.elu(self.e3(f2))
        f4 = F.elu(self.e4(f3))
        f5 = F.elu(self.e5(f4))
        m = torch.sigmoid(self._decode(f1, f3, f5, self.m_up1, self.m_up2, self.m_head))
        if not with_aux:
            return m, None
        x_bar = squash01(self._decode(f1, f3, f5, self.a_up1, self.a_up2, self.a_head))
        return m, x_bar


class StyleEncoder(nn.Module):
    """Conv trunk over (style partial image, mask) followed by global max
    pooling into a d-dimensional structure-agnostic style vector."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.trunk = nn.Sequential(
            _conv(4, w, kernel=5), nn.ELU(),
            _conv(w, 2 * w, stride=2), nn.ELU(),
            _conv(2 * w, 2 * w), nn.ELU(),
            _conv(2 * w, 4 * w, stride=2), nn.ELU(),
            _conv(4 * w, cfg.style_dim), nn.ELU(),
        )

    def forward(self, x_sty, m):
        if x_sty.shape[2:] != m.shape[2:]:
            raise ValueError("style image and mask sizes differ")
        return global_max_pool(self.trunk(torch.cat([x_sty, m], dim=1)))


class CoarseStage(nn.Module):
    """Gated encoder-decoder; the tiled style feature joins at the bottleneck."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w, d = cfg.base_width, cfg.style_dim
        self.enc = nn.Sequential(
            GatedConv2d(5, w, kernel=5),
            GatedConv2d(w, 2 * w, stride=2),
            GatedConv2d(2 * w, 2 * w),
            GatedConv2d(2 * w, 4 * w, stride=2),
            GatedConv2d(4 * w, 4 * w),
            GatedConv2d(4 * w, 4 * w, stride=2),
        )
        self.dilated = nn.Sequential(
            *[GatedConv2d(4 * w, 4 * w, dilation=2 ** (i + 1)) for i in range(cfg.coarse_depth)]
        )
        self.merge = GatedConv2d(4 * w + d, 4 * w)
        self.dec = nn.Sequential(
            GatedUp(4 * w, 2 * w),
            GatedUp(2 * w, w),
            GatedUp(w, max(w // 2, 4)),
        )
        self.head = _conv(max(w // 2, 4), 3)

    def forward(self, x_sta, m, c, v_hat):
        feat = self.enc(torch.cat([x_sta, m, c], dim=1))
        if v_hat.shape[2:] != feat.shape[2:]:
            raise ValueError(
                f"style feature {tuple(v_hat.shape[2:])} does not match bottleneck {tuple(feat.shape[2:])}"
            )
        feat = self.dilated(feat)
        feat = self.merge(torch.cat([feat, v_hat], dim=1))
        return squash01(self.head(self.dec(feat)))


class RefineStage(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.net = nn.Sequential(
            GatedConv2d(3, w, kernel=5),
            GatedConv2d(w, 2 * w, stride=2),
            GatedConv2d(2 * w, 2 * w),
            GatedConv2d(2 * w, 4 * w, stride=2),
            *[GatedConv2d(4 * w, 4 * w, dilation=2 ** (i + 1)) for i in range(cfg.refine_depth)],
            GatedUp(4 * w, 2 * w),
            GatedUp(2 * w, w),
        )
        self.head = _conv(w, 3)

    def forward(self, y0):
        return squash01(self.head(self.net(y0)))


class Generator(nn.Module):
    """Two-stage generator: coarse synthesis then refinement."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.coarse = CoarseStage(cfg)
        self.refine = RefineStage(cfg)

    def forward(self, x_sta, m, c, v_hat):
        y0 = self.coarse(x_sta, m, c, v_hat)
        y1 = self.refine(y0)
        return y0, y1


class SNConv2d(nn.Module):
    """Conv2d whose weight is divided by its estimated top singular value.

    One power-iteration step per training forward over persistent (u, v)
    buffers; sigma is clamped away from zero so an all-zero weight maps to
    an all-zero (not NaN) output.
    """

    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, eps=1e-12):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride, padding)
        self.eps = eps
        flat = in_ch * kernel * kernel
        self.register_buffer("u", F.normalize(torch.randn(out_ch), dim=0, eps=eps))
        self.register_buffer("v", F.normalize(torch.randn(flat), dim=0, eps=eps))

    def normalized_weight(self) -> torch.Tensor:
        w = self.conv.weight
        mat = w.reshape(w.shape[0], -1)
        if self.training:
            with torch.no_grad():
                self.v = F.normalize(mat.T @ self.u, dim=0, eps=self.eps)
                self.u = F.normalize(mat @ self.v, dim=0, eps=self.eps)
        sigma = self.u @ mat @ self.v  # u, v held constant in the graph
        return w / sigma.clamp(min=self.eps)

    def forward(self, x):
        return F.conv2d(
            x, self.normalized_weight(), self.conv.bias,
            stride=self.conv.stride, padding=self.conv.padding,
        )


class Discriminator(nn.Module):
    """Spectral-normalized patch discriminator over (image, sketch)."""

    N_STAGES = 4

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.base_width
        self.net = nn.Sequential(
            SNConv2d(4, w, 5, 2, 2), nn.LeakyReLU(0.2),
            SNConv2d(w, 2 * w, 5, 2, 2), nn.LeakyReLU(0.2),
            SNConv2d(2 * w, 4 * w, 5, 2, 2), nn.LeakyReLU(0.2),
            SNConv2d(4 * w, 4 * w, 5, 2, 2), nn.LeakyReLU(0.2),
            SNConv2d(4 * w, 1, 3, 1, 1),
        )

    def forward(self, y, c):
        if y.shape[2:] != c.shape[2:]:
            raise ValueError("image and sketch sizes differ")
        return self.net(torch.cat([y, c], dim=1))


class EditorModel(nn.Module):
    """Bundle of the trainable pieces, honoring ablation switches.

    ablation "no_mask" drops the mask estimator (mask fixed to ones and the
    generator sees the full input); "rule_mask" replaces it with the sketch
    bounding box; "no_style" zeroes the style vector.
    """

    def __init__(self, cfg: NetConfig, ablation: str = "none"):
        super().__init__()
        self.cfg = cfg
        self.ablation = ablation
        self.mask_estimator = MaskEstimator(cfg) if ablation in ("none", "no_style") else None
        self.style_encoder = StyleEncoder(cfg) if ablation != "no_style" else None
        self.generator = Generator(cfg)

    @property
    def uses_mask_estimator(self) -> bool:
        return self.mask_estimator is not None

    def style_vector(self, x_sty, m):
        if self.style_encoder is None:
            b = x_sty.shape[0]
            return x_sty.new_zeros((b, self.cfg.style_dim))
        return self.style_encoder(x_sty, m)

    def style_feature(self, v):
        return tile_style(v, self.cfg.bottleneck, self.cfg.bottleneck)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
