"""Self-supervised training: losses, one-iteration step, loop, checkpointing.

Each iteration warps a random local region of every batch image, keeps the
original image's contours inside that region as the sketch, and trains the
mask estimator / style encoder / generator to reconstruct the original
image, with a hinge-adversarial discriminator on the blended output and a
bi-directional regularization that also feeds the *unwarped* image (with
the warped sketch) through the mask estimator so it cannot succeed by
detecting warping artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import ckpt
from .config import NetConfig, RunConfig
from .imaging import sketch_bbox_mask
from .networks import Discriminator, EditorModel, tile_style
from .sketchgen import PairConfig, extract_edges, make_training_pair
from .warp import apply_warp, sample_dropout_rects


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; the offending batch is dumped for inspection."""


@dataclass(frozen=True)
class LossReport:
    """Per-batch mean losses; l_total is exactly l_r + l_g + l_bmr."""

    step: int
    l_r: float
    l_g: float
    l_bmr: float
    l_d: float
    l_total: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))


def loss_reconstruction(y0, y1, y, x) -> torch.Tensor:
    """Mean absolute error of the coarse, refined, and blended outputs."""
    if not (y0.shape == y1.shape == y.shape == x.shape):
        raise ValueError("reconstruction inputs must share one shape")
    return (y0 - x).abs().mean() + (y1 - x).abs().mean() + (y - x).abs().mean()


def loss_adversarial_g(scores: torch.Tensor) -> torch.Tensor:
    """Generator hinge: mean ReLU(1 - D(fake))."""
    return F.relu(1.0 - scores).mean()


def loss_discriminator(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Discriminator hinge: mean ReLU(1 - real) + mean ReLU(1 + fake)."""
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def loss_bmr_terms(x, fx, m_fwd, xbar_fwd, m_rev, xbar_rev) -> torch.Tensor:
    """Four-term bi-directional mask regularization.

    Forward direction maps (warped image, original sketch) to the original
    image; reverse maps (original image, warped sketch) to the warped one.
    Each direction penalizes both the raw auxiliary reconstruction and the
    mask-blended composite.
    """
    blend_fwd = xbar_fwd * m_fwd + fx * (1.0 - m_fwd)
    blend_rev = xbar_rev * m_rev + x * (1.0 - m_rev)
    return (
        (xbar_fwd - x).abs().mean()
        + (xbar_rev - fx).abs().mean()
        + (blend_fwd - x).abs().mean()
        + (blend_rev - fx).abs().mean()
    )


def loss_bmr(mask_estimator, x: np.ndarray, field: np.ndarray, c: np.ndarray) -> torch.Tensor:
    """Bi-directional mask regularization from raw rasters and a warp field.

    `mask_estimator` is any callable (image, sketch, with_aux=True) ->
    (mask, reconstruction) over NCHW tensors.
    """
    fx = apply_warp(field, x, mode="bilinear")
    fc = apply_warp(field, c, mode="nearest")
    x_t = _to_chw(x)[None]
    fx_t = _to_chw(fx)[None]
    c_t = torch.as_tensor(np.asarray(c, dtype=np.float64))[None, None]
    fc_t = torch.as_tensor(np.asarray(fc, dtype=np.float64))[None, None]
    m_fwd, xbar_fwd = mask_estimator(fx_t, c_t, with_aux=True)
    m_rev, xbar_rev = mask_estimator(x_t, fc_t, with_aux=True)
    return loss_bmr_terms(x_t, fx_t, m_fwd, xbar_fwd, m_rev, xbar_rev)


def _to_chw(img: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(img, dtype=np.float64)).permute(2, 0, 1)


@dataclass
class Batch:
    """Tensorized training inputs, all NCHW float32."""

    x: torch.Tensor
    fx: torch.Tensor
    c: torch.Tensor
    fc: torch.Tensor
    drop_keep: torch.Tensor
    rule_mask: torch.Tensor
    region: torch.Tensor


class Trainer:
    """Owns the model pair, optimizers, RNG streams, and the step counter."""

    def __init__(self, cfg: RunConfig, images: np.ndarray, out_dir=None, dtype=torch.float32):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir else None
        torch.manual_seed(cfg.train.seed)
        self.model = EditorModel(cfg.net, cfg.train.ablation).to(dtype)
        self.disc = Discriminator(cfg.net).to(dtype)
        betas = (cfg.optim.beta1, cfg.optim.beta2)
        self.opt_g = torch.optim.Adam(self.model.parameters(), lr=cfg.optim.lr_g, betas=betas)
        self.opt_d = torch.optim.Adam(self.disc.parameters(), lr=cfg.optim.lr_d, betas=betas)
        self.rng = np.random.default_rng(cfg.train.seed)
        self.step = 0
        self.dtype = dtype
        self.images = np.asarray(images, dtype=np.float32)
        if self.images.ndim != 4 or self.images.shape[1:3] != (cfg.net.resolution, cfg.net.resolution):
            raise ValueError(
                f"training images must be (N, {cfg.net.resolution}, {cfg.net.resolution}, 3), got {self.images.shape}"
            )
        self.pair_cfg = PairConfig(warp=cfg.warp, edge=cfg.edge, min_sketch_px=cfg.train.min_sketch_px)
        self._edges: dict[int, np.ndarray] = {}

    # -- data ---------------------------------------------------------------

    def _edges_for(self, idx: int) -> np.ndarray:
        if idx not in self._edges:
            self._edges[idx] = extract_edges(self.images[idx], self.cfg.edge)
        return self._edges[idx]

    def prepare_batch(self) -> Batch:
        b = self.cfg.optim.batch_size
        idx = self.rng.integers(0, len(self.images), size=b)
        xs, fxs, cs, fcs, keeps, rules, regions = [], [], [], [], [], [], []
        for i in idx:
            x = self.images[i]
            pair = make_training_pair(x, self.rng, self.pair_cfg, edges=self._edges_for(int(i)))
            keep = np.ones(x.shape[:2], dtype=np.float32)
            for rx0, ry0, rx1, ry1 in sample_dropout_rects(
                x.shape[:2], self.rng, self.cfg.dropout, bbox=pair.region.bbox
            ):
                keep[max(ry0, 0) : ry1, max(rx0, 0) : rx1] = 0.0
            xs.append(x)
            fxs.append(pair.x_warped)
            cs.append(pair.sketch)
            fcs.append(pair.sketch_warped)
            keeps.append(keep)
            rules.append(sketch_bbox_mask(pair.sketch))
            regions.append(pair.region.raster_mask())
        return Batch(
            x=self._stack_images(xs),
            fx=self._stack_images(fxs),
            c=self._stack_maps(cs),
            fc=self._stack_maps(fcs),
            drop_keep=self._stack_maps(keeps),
            rule_mask=self._stack_maps(rules),
            region=self._stack_maps(regions),
        )

    def _stack_images(self, arrs) -> torch.Tensor:
        return torch.as_tensor(np.stack(arrs)).to(self.dtype).permute(0, 3, 1, 2).contiguous()

    def _stack_maps(self, arrs) -> torch.Tensor:
        return torch.as_tensor(np.stack(arrs)).to(self.dtype)[:, None]

    # -- pipeline -----------------------------------------------------------

    def _mix_mask(self, m: torch.Tensor, region: torch.Tensor, region_mix: float) -> torch.Tensor:
        if region_mix >= 1.0:
            return region
        if region_mix <= 0.0:
            return m
        return region_mix * region + (1.0 - region_mix) * m

    def _forward_generator(self, batch: Batch, with_bmr: bool, region_mix: float = 0.0):
        """Run the editing pipeline on the warped inputs; returns outputs for
        the losses plus the reverse-direction mask outputs when training BMR.

        `region_mix` blends the known warp region into every downstream use
        of the predicted mask (1 = pure region during warmup, ramping to 0);
        the prediction itself is always computed for the regularization."""
        model = self.model
        ab = model.ablation
        xbar_fwd = m_rev = xbar_rev = None
        if ab == "no_mask":
            m = torch.ones_like(batch.c)
        elif ab == "rule_mask":
            m = batch.rule_mask
        else:
            m, xbar_fwd = model.mask_estimator(batch.fx, batch.c, with_aux=with_bmr)
            if with_bmr:
                m_rev, xbar_rev = model.mask_estimator(batch.x, batch.fc, with_aux=True)
        used = self._mix_mask(m, batch.region, region_mix) if ab in ("none", "no_style") else m
        x_sty = (used * batch.fx) * batch.drop_keep
        v = model.style_vector(x_sty, used)
        v_hat = model.style_feature(v)
        x_sta = batch.fx if ab == "no_mask" else (1.0 - used) * batch.fx
        y0, y1 = model.generator(x_sta, used, batch.c, v_hat)
        y = y1 if ab == "no_mask" else y1 * used + batch.fx * (1.0 - used)
        return m, y0, y1, y, xbar_fwd, m_rev, xbar_rev

    def train_step(self, batch: Batch | None = None) -> LossReport:
        """One full iteration: discriminator update then joint update of the
        mask estimator, style encoder, and generator."""
        if batch is None:
            batch = self.prepare_batch()
        cfg = self.cfg
        with_bmr = cfg.weights.w_bmr > 0 and self.model.uses_mask_estimator
        if not self.model.uses_mask_estimator:
            region_mix = 0.0
        elif self.step < cfg.train.mask_warmup:
            region_mix = 1.0
        elif cfg.train.mask_ramp > 0:
            region_mix = max(0.0, 1.0 - (self.step - cfg.train.mask_warmup + 1) / cfg.train.mask_ramp)
        else:
            region_mix = 0.0
        warming = region_mix >= 1.0
        self.model.train()
        self.disc.train()

        m, y0, y1, y, xbar_fwd, m_rev, xbar_rev = self._forward_generator(
            batch, with_bmr, region_mix=region_mix
        )

        # discriminator step on (original, blended-output) with shared sketch
        self.opt_d.zero_grad(set_to_none=True)
        d_loss = loss_discriminator(self.disc(batch.x, batch.c), self.disc(y.detach(), batch.c))
        d_loss.backward()
        self.opt_d.step()

        l_r = cfg.weights.w_r * loss_reconstruction(y0, y1, y, batch.x)
        if cfg.train.warmup_gan:
            w_g = cfg.weights.w_g
        else:  # adversarial term fades back in as the region mix fades out
            w_g = cfg.weights.w_g * (1.0 - region_mix)
        l_g = w_g * loss_adversarial_g(self.disc(y, batch.c))
        if with_bmr and warming:
            # warmup: only the auxiliary-reconstruction half of the
            # regularization; the mask-blended terms join once the blend
            # starts handing over from the known region to the prediction
            l_bmr = cfg.weights.w_bmr * (
                (xbar_fwd - batch.x).abs().mean() + (xbar_rev - batch.fx).abs().mean()
            )
        elif with_bmr:
            used_fwd = self._mix_mask(m, batch.region, region_mix)
            used_rev = self._mix_mask(m_rev, batch.region, region_mix)
            l_bmr = cfg.weights.w_bmr * loss_bmr_terms(
                batch.x, batch.fx, used_fwd, xbar_fwd, used_rev, xbar_rev
            )
        else:
            l_bmr = y.new_zeros(())
        total = l_r + l_g + l_bmr
        self.opt_g.zero_grad(set_to_none=True)
        total.backward()
        self.opt_g.step()

        self.step += 1
        values = [float(v.detach()) for v in (l_r, l_g, l_bmr, d_loss)]
        if not all(np.isfinite(values)):
            self._dump_divergence(batch, values)
            raise TrainingDiverged(f"non-finite loss at step {self.step}: {values}")
        report = LossReport(
            step=self.step,
            l_r=values[0],
            l_g=values[1],
            l_bmr=values[2],
            l_d=values[3],
            l_total=values[0] + values[1] + values[2],
        )
        return report

    def _dump_divergence(self, batch: Batch, values) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        np.savez(
            self.out_dir / f"diverged_step{self.step}.npz",
            x=batch.x.numpy(),
            fx=batch.fx.numpy(),
            c=batch.c.numpy(),
            fc=batch.fc.numpy(),
            losses=np.asarray(values),
        )

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        ckpt.save_checkpoint(
            path,
            model=self.model,
            discriminator=self.disc,
            opt_g=self.opt_g,
            opt_d=self.opt_d,
            step=self.step,
            net_config=self.cfg.net,
            ablation=self.cfg.train.ablation,
            numpy_rng=self.rng,
        )

    def load(self, path) -> None:
        manifest, arrays = ckpt.read_checkpoint(path)
        if manifest["ablation"] != self.cfg.train.ablation:
            raise ckpt.CheckpointError(
                f"checkpoint ablation {manifest['ablation']!r} != config {self.cfg.train.ablation!r}"
            )
        ckpt.load_model_state(self.model, arrays, "model")
        ckpt.load_model_state(self.disc, arrays, "disc")
        ckpt.restore_optimizers(manifest, arrays, self.opt_g, self.opt_d)
        rng = ckpt.restore_rng(manifest, arrays)
        if rng is not None:
            self.rng = rng
        self.step = manifest["step"]


def run_training(
    cfg: RunConfig,
    images: np.ndarray,
    out_dir,
    resume: str | None = None,
    log_stream=None,
) -> Trainer:
    """Train for cfg.train.steps, writing JSONL loss logs and checkpoints."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(cfg, images, out_dir=out)
    if resume:
        trainer.load(resume)
    log_path = out / "train_log.jsonl"
    started = time.time()
    with log_path.open("a") as log:
        while trainer.step < cfg.train.steps:
            report = trainer.train_step()
            log.write(report.to_json() + "\n")
            if trainer.step % cfg.train.ckpt_every == 0 or trainer.step == cfg.train.steps:
                trainer.save(out / "ckpt_latest.zip")
            if log_stream is not None and trainer.step % cfg.train.log_every == 0:
                elapsed = time.time() - started
                print(
                    f"step {trainer.step}/{cfg.train.steps} "
                    f"l_r={report.l_r:.4f} l_g={report.l_g:.4f} l_bmr={report.l_bmr:.4f} "
                    f"l_d={report.l_d:.4f} ({elapsed:.0f}s)",
                    file=log_stream,
                    flush=True,
                )
    trainer.save(out / "ckpt_latest.zip")
    return trainer
