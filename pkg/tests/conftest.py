import numpy as np
import pytest
import torch

from sketchmend.config import NetConfig, RunConfig, apply_overrides


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_net_config():
    return NetConfig(resolution=16, base_width=8, style_dim=16)


@pytest.fixture
def tiny_run_config():
    return apply_overrides(
        RunConfig(),
        [
            "net.resolution=16",
            "net.base_width=8",
            "net.style_dim=16",
            "optim.batch_size=2",
            "train.seed=0",
            "train.min_sketch_px=1",
            "warp.area_frac=0.08, 0.2",
            "warp.n_interior=1, 2",
        ],
    )


@pytest.fixture
def toy_image(rng):
    from sketchmend.toydata import generate_image

    return generate_image(rng, 64)[0]


def random_image(rng, h=16, w=16):
    return rng.random((h, w, 3)).astype(np.float32)


def random_mask(rng, h=16, w=16):
    return rng.random((h, w)).astype(np.float32)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
