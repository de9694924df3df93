import numpy as np
import torch

from sketchmend.config import apply_overrides
from sketchmend.toydata import generate_image
from sketchmend.training import Trainer


def _trainer(tiny_run_config, images, *extra):
    return Trainer(apply_overrides(tiny_run_config, list(extra)), images)


def _images():
    rng = np.random.default_rng(4)
    return np.stack([generate_image(rng, 16)[0] for _ in range(8)])


class TestMaskWarmup:
    def test_mask_head_frozen_then_released(self, tiny_run_config):
        images = _images()
        tr = _trainer(tiny_run_config, images, "train.mask_warmup=2")
        head_before = tr.model.mask_estimator.m_head.weight.detach().clone()
        tr.train_step()
        tr.train_step()
        # during warmup the blend ignores the mask, so its head gets no gradient
        assert torch.equal(tr.model.mask_estimator.m_head.weight, head_before)
        tr.train_step()
        assert not torch.equal(tr.model.mask_estimator.m_head.weight, head_before)

    def test_warmup_reports_finite(self, tiny_run_config):
        tr = _trainer(tiny_run_config, _images(), "train.mask_warmup=1")
        rep = tr.train_step()
        assert np.isfinite(rep.l_total) and rep.l_bmr >= 0
        assert rep.l_total == rep.l_r + rep.l_g + rep.l_bmr

    def test_default_has_no_warmup(self, tiny_run_config):
        tr = _trainer(tiny_run_config, _images())
        head_before = tr.model.mask_estimator.m_head.weight.detach().clone()
        tr.train_step()
        assert not torch.equal(tr.model.mask_estimator.m_head.weight, head_before)
