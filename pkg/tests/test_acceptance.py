"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with -s to see them live).

The toy-experiment criteria train real models; results are cached under
SKETCHMEND_ACCEPTANCE_DIR (default .cache/acceptance) so reruns are cheap.
SKETCHMEND_ACCEPTANCE_STEPS / _ABLATION_STEPS / _COUNTS override the run
size (defaults match the calibrated desk-scale recipe).
"""

import base64
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch

REPO_ROOT = Path(__file__).resolve().parent.parent


def _criterion(name: str, ok: bool, detail: str) -> None:
    print(f"[ACCEPT] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# exact-identity suite (budget: < 10 s)


class TestExactIdentity:
    def test_identity_suite(self, rng):
        from sketchmend.imaging import blend, static_partial, style_partial
        from sketchmend.networks import tile_style
        from sketchmend.warp import apply_warp

        started = time.perf_counter()
        x = rng.random((64, 64, 3)).astype(np.float32)
        y1 = rng.random((64, 64, 3)).astype(np.float32)
        m = rng.random((64, 64)).astype(np.float32)

        blend_zero = np.array_equal(blend(y1, x, np.zeros((64, 64))), x)
        blend_one = np.array_equal(blend(y1, x, np.ones((64, 64))), y1)
        partial_sum = np.abs(style_partial(x, m) + static_partial(x, m) - x).max() <= 1e-6
        warp_id = np.array_equal(apply_warp(np.zeros((64, 64, 2)), x), x)
        tiled = tile_style(torch.from_numpy(rng.random((2, 16)).astype(np.float32)), 8, 8)
        tile_var = float(tiled.var(dim=(2, 3), unbiased=False).max()) == 0.0
        elapsed = time.perf_counter() - started

        _criterion("exact-identity/blend-zero-mask", blend_zero, "blend(y1,x,0) == x bit-exact")
        _criterion("exact-identity/blend-ones-mask", blend_one, "blend(y1,x,1) == y1 bit-exact")
        _criterion("exact-identity/partial-sum", partial_sum, "style+static == x within 1e-6")
        _criterion("exact-identity/zero-warp", warp_id, "apply_warp(0, x) == x bit-exact")
        _criterion("exact-identity/tile-variance", tile_var, "tile_style spatial variance == 0")
        _criterion("exact-identity/runtime", elapsed < 10.0, f"{elapsed:.2f}s < 10s")


# ---------------------------------------------------------------------------
# closed-form metric oracles


class TestMetricOracles:
    def test_psnr_uniform_cases(self):
        from sketchmend.metrics import psnr

        a = np.full((32, 32, 3), 0.5)
        err01 = abs(psnr(a, a + 0.1) - 20.0)
        b = np.full((32, 32, 3), 0.25)
        err05 = abs(psnr(b, b + 0.5) - 20.0 * np.log10(2.0))
        _criterion("metrics/psnr-uniform-0.1", err01 <= 1e-6, f"|err| = {err01:.2e} dB")
        _criterion("metrics/psnr-uniform-0.5", err05 <= 1e-6, f"|err| = {err05:.2e} dB")

    def test_fid_identity_covariance(self, rng):
        from sketchmend.metrics import FeatureStats, fid

        k = 8
        mu = rng.normal(size=k)
        s1 = FeatureStats(mean=np.zeros(k), cov=np.eye(k), count=16)
        s2 = FeatureStats(mean=mu, cov=np.eye(k), count=16)
        err = abs(fid(s1, s2) - mu @ mu)
        _criterion("metrics/fid-identity-cov", err <= 1e-4, f"|fid - ||mu||^2| = {err:.2e}")

    def test_ssim_self(self, rng):
        from sketchmend.metrics import ssim

        x = rng.random((32, 32, 3))
        err = abs(ssim(x, x) - 1.0)
        _criterion("metrics/ssim-self", err <= 1e-6, f"|ssim(a,a)-1| = {err:.2e}")

    def test_gram_psd(self, rng):
        from sketchmend.metrics import gram

        worst = 0.0
        for _ in range(5):
            g = gram(rng.normal(size=(12, 6, 6)))
            worst = min(worst, float(np.linalg.eigvalsh(g).min()))
        _criterion("metrics/gram-psd", worst >= -1e-8, f"min eigenvalue = {worst:.2e}")


# ---------------------------------------------------------------------------
# loss formula oracles


class TestLossOracles:
    def test_reconstruction(self):
        from sketchmend.training import loss_reconstruction

        x = torch.full((1, 3, 8, 8), 0.5, dtype=torch.float64)
        zero = loss_reconstruction(x, x, x, x).item()
        off = loss_reconstruction(x + 0.1, x + 0.1, x + 0.1, x).item()
        _criterion("loss/recon-zero", abs(zero) <= 1e-6, f"{zero:.2e}")
        _criterion("loss/recon-offset", abs(off - 0.3) <= 1e-6, f"|err| = {abs(off - 0.3):.2e}")

    def test_adversarial(self):
        from sketchmend.training import loss_adversarial_g, loss_discriminator

        ok_g = (
            abs(loss_adversarial_g(torch.full((4,), 2.0)).item()) <= 1e-6
            and abs(loss_adversarial_g(torch.zeros(4)).item() - 1.0) <= 1e-6
            and abs(loss_adversarial_g(torch.full((4,), -1.0)).item() - 2.0) <= 1e-6
        )
        ok_d = (
            abs(loss_discriminator(torch.ones(4), -torch.ones(4)).item()) <= 1e-6
            and abs(loss_discriminator(torch.zeros(4), torch.zeros(4)).item() - 2.0) <= 1e-6
            and abs(loss_discriminator(-torch.ones(4), torch.ones(4)).item() - 4.0) <= 1e-6
        )
        _criterion("loss/hinge-generator", ok_g, "scores {>=1, 0, -1} -> {0, 1, 2}")
        _criterion("loss/hinge-discriminator", ok_d, "margins {met, zero, flipped} -> {0, 2, 4}")

    def test_bmr(self, rng):
        from sketchmend.training import loss_bmr, loss_bmr_terms

        class Stub:
            def __init__(self, mask, mode):
                self.mask, self.mode = mask, mode

            def __call__(self, img, sk, with_aux=True):
                m = torch.full_like(img[:, :1], self.mask)
                xbar = img.clone() if self.mode == "input" else torch.zeros_like(img)
                return m, xbar

        x = rng.random((16, 16, 3))
        c = (rng.random((16, 16)) > 0.9).astype(np.float32)
        ident = loss_bmr(Stub(0.3, "input"), x, np.zeros((16, 16, 2)), c).item()
        _criterion("loss/bmr-identity", abs(ident) <= 1e-6, f"{ident:.2e}")

        uniform = loss_bmr(Stub(1.0, "zero"), np.full((16, 16, 3), 0.5), np.zeros((16, 16, 2)), c).item()
        _criterion("loss/bmr-uniform-stub", abs(uniform - 2.0) <= 1e-6, f"|err| = {abs(uniform - 2.0):.2e}")

        t = lambda *s: torch.rand(*s, dtype=torch.float64)
        xx, fx = t(1, 3, 8, 8), t(1, 3, 8, 8)
        mf, mr = t(1, 1, 8, 8), t(1, 1, 8, 8)
        bf, br = t(1, 3, 8, 8), t(1, 3, 8, 8)
        got = loss_bmr_terms(xx, fx, mf, bf, mr, br).item()
        want = (
            (bf - xx).abs().mean() + (br - fx).abs().mean()
            + (bf * mf + fx * (1 - mf) - xx).abs().mean()
            + (br * mr + xx * (1 - mr) - fx).abs().mean()
        ).item()
        _criterion("loss/bmr-term-oracle", abs(got - want) <= 1e-6, f"|err| = {abs(got - want):.2e}")


# ---------------------------------------------------------------------------
# warping oracle


class TestWarpOracle:
    def test_single_vertex_barycentric(self, rng):
        from sketchmend.warp import RegionSpec, build_mesh, make_warp_field
        from test_warp import barycentric_oracle

        region = RegionSpec(6.0, 6.0, 26.0, 26.0, 32, 32)
        mesh = build_mesh(region, 1, rng)
        disp = np.array([[3.0, 0.0]])
        fieldarr = make_warp_field(mesh, disp)
        err = np.abs(fieldarr - barycentric_oracle(mesh, disp)).max()
        outside = region.raster_mask() < 0.5
        clean = not fieldarr[outside].any()
        _criterion("warp/barycentric-oracle", err <= 1e-5, f"max |err| = {err:.2e}")
        _criterion("warp/outside-unmoved", clean, "field exactly zero outside region")


# ---------------------------------------------------------------------------
# gradient check on the full training objective


class TestGradientCheck:
    def test_l_total_matches_finite_differences(self):
        from sketchmend.config import RunConfig, apply_overrides
        from sketchmend.toydata import generate_image
        from sketchmend.training import (
            Trainer,
            loss_adversarial_g,
            loss_bmr_terms,
            loss_reconstruction,
        )

        started = time.perf_counter()
        cfg = apply_overrides(
            RunConfig(),
            [
                "net.resolution=16", "net.base_width=8", "net.style_dim=16",
                "optim.batch_size=2", "train.min_sketch_px=1", "train.seed=3",
                "warp.area_frac=0.08, 0.2", "warp.n_interior=1, 2",
            ],
        )
        rng = np.random.default_rng(5)
        images = np.stack([generate_image(rng, 16)[0] for _ in range(8)])
        trainer = Trainer(cfg, images, dtype=torch.float64)
        with torch.no_grad():  # settle spectral-norm power iteration, then freeze
            probe = trainer.prepare_batch()
            for _ in range(4):
                trainer.disc(probe.x, probe.c)
        trainer.disc.eval()
        batch = trainer.prepare_batch()

        def l_total():
            m, y0, y1, y, xbar_fwd, m_rev, xbar_rev = trainer._forward_generator(batch, with_bmr=True)
            l_r = loss_reconstruction(y0, y1, y, batch.x)
            l_g = loss_adversarial_g(trainer.disc(y, batch.c))
            l_bmr = loss_bmr_terms(batch.x, batch.fx, m, xbar_fwd, m_rev, xbar_rev)
            return l_r + l_g + l_bmr

        loss = l_total()
        loss.backward()
        params = [p for p in list(trainer.model.parameters()) + list(trainer.disc.parameters()) if p.grad is not None]
        g = torch.Generator().manual_seed(0)
        h = 1e-4
        n_checked, worst = 0, 0.0
        while n_checked < 64:
            p = params[int(torch.randint(len(params), (1,), generator=g))]
            idx = int(torch.randint(p.numel(), (1,), generator=g))
            with torch.no_grad():
                flat = p.reshape(-1)
                orig = flat[idx].item()
                flat[idx] = orig + h
                up = l_total().item()
                flat[idx] = orig - h
                down = l_total().item()
                flat[idx] = orig
            fd = (up - down) / (2 * h)
            an = p.grad.reshape(-1)[idx].item()
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-5)
            worst = max(worst, rel)
            assert rel <= 1e-3, f"param grad mismatch: analytic {an:.6e} vs fd {fd:.6e} (rel {rel:.2e})"
            n_checked += 1
        elapsed = time.perf_counter() - started
        _criterion(
            "gradients/l-total-vs-fd",
            n_checked >= 64 and worst <= 1e-3 and elapsed < 300,
            f"{n_checked} params, worst rel err {worst:.2e}, {elapsed:.0f}s < 300s",
        )


# ---------------------------------------------------------------------------
# toy training experiment (slow; cached across runs)


def _experiment_spec():
    from sketchmend.experiment import ExperimentSpec

    out = os.environ.get("SKETCHMEND_ACCEPTANCE_DIR", str(REPO_ROOT / ".cache" / "acceptance"))
    return ExperimentSpec(
        out_dir=out,
        steps_main=int(os.environ.get("SKETCHMEND_ACCEPTANCE_STEPS", "3000")),
        steps_ablation=int(os.environ.get("SKETCHMEND_ACCEPTANCE_ABLATION_STEPS", "1200")),
        train_count=int(os.environ.get("SKETCHMEND_ACCEPTANCE_TRAIN_COUNT", "2000")),
        eval_count=int(os.environ.get("SKETCHMEND_ACCEPTANCE_EVAL_COUNT", "200")),
        seed=0,
    )


@pytest.fixture(scope="session")
def toy_reports():
    import sys

    from sketchmend.experiment import run_experiment

    spec = _experiment_spec()
    return run_experiment(spec, log_stream=sys.stderr), spec


class TestToyTraining:
    def test_reconstruction_quality(self, toy_reports):
        reports, _ = toy_reports
        full = reports["full"]
        _criterion("toy/l1", full["l1"] < 0.08, f"L1 = {full['l1']:.4f} < 0.08")
        _criterion("toy/psnr", full["psnr"] > 22.0, f"PSNR = {full['psnr']:.2f} dB > 22")

    def test_empty_sketch_identity(self, toy_reports):
        reports, _ = toy_reports
        es = reports["full"]["empty_sketch"]
        _criterion("toy/empty-sketch-mask", es["mean_mask"] <= 0.05, f"mean(m) = {es['mean_mask']:.4f}")
        _criterion("toy/empty-sketch-identity", es["mean_abs_diff"] <= 0.01, f"mean|y-x| = {es['mean_abs_diff']:.5f}")

    def test_mask_locality(self, toy_reports):
        reports, _ = toy_reports
        off = reports["full"]["mask_off_sketch"]
        _criterion("toy/mask-locality", off <= 0.15, f"off-sketch activation = {off:.4f} <= 0.15")

    def test_bmr_improves_mask_generalization(self, toy_reports):
        reports, _ = toy_reports
        with_bmr = reports["full"]["mask_iou_unwarped"]
        without = reports["no_bmr"]["mask_iou_unwarped"]
        gap = with_bmr - without
        _criterion(
            "toy/bmr-iou-gap",
            gap >= 0.1,
            f"IoU with BMR {with_bmr:.3f} vs without {without:.3f} (gap {gap:.3f} >= 0.1)",
        )

    def test_within_time_budget(self, toy_reports):
        reports, _ = toy_reports
        worst = max(r.get("train_wall_seconds") or 0.0 for r in reports.values())
        _criterion("toy/time-budget", worst <= 7200, f"longest run {worst:.0f}s <= 7200s")


class TestAblationToggles:
    def test_ablations_train_and_report(self, toy_reports):
        reports, _ = toy_reports
        for name in ("no_mask", "rule_mask", "no_style"):
            rep = reports.get(name)
            ok = rep is not None and all(k in rep for k in ("l1", "psnr", "ssim", "fid", "sl1", "sl2"))
            _criterion(f"ablation/{name}-report", ok, "trained and emitted the eval report")

    def test_full_beats_rule_based_mask(self, toy_reports):
        reports, _ = toy_reports
        full, rule = reports["full"]["l1"], reports["rule_mask"]["l1"]
        _criterion("ablation/full-vs-rule-l1", full <= rule, f"L1 full {full:.4f} <= rule-based {rule:.4f}")


class TestServiceContract:
    @pytest.fixture(scope="class")
    def client(self, toy_reports):
        from fastapi.testclient import TestClient

        from sketchmend.engine import load_model
        from sketchmend.service import create_app

        _, spec = toy_reports
        handle = load_model(Path(spec.out_dir) / "runs" / "full" / "ckpt_latest.zip")
        return TestClient(create_app(handle))

    def test_golden_fixture_round_trip(self, client, toy_reports):
        from sketchmend.imaging import decode_gray_bytes, decode_image_bytes, encode_png
        from sketchmend.toydata import load_dataset

        _, spec = toy_reports
        img = load_dataset(Path(spec.out_dir) / "data" / "heldout")[0]
        fixture = json.loads((REPO_ROOT / "fixtures" / "strokes" / "polyline_w3.json").read_text())
        payload = {
            "image_b64": base64.b64encode(encode_png(img)).decode(),
            "strokes": fixture["strokeset"],
            "options": {"return_mask": True, "return_intermediate": True},
        }
        r1 = client.post("/v1/edit", json=payload)
        r2 = client.post("/v1/edit", json=payload)
        ok = r1.status_code == 200 and r1.json()["result_b64"] == r2.json()["result_b64"]
        _criterion("service/golden-round-trip", ok, "POST /v1/edit deterministic 200")
        body = r1.json()
        out = decode_image_bytes(base64.b64decode(body["result_b64"]))
        mask = decode_gray_bytes(base64.b64decode(body["mask_b64"]))
        _criterion(
            "service/response-dimensions",
            out.shape == img.shape and mask.shape == img.shape[:2] and "y1_b64" in body,
            f"result {out.shape} == input {img.shape}",
        )

    def test_dual_input_rejected(self, client, toy_reports):
        from sketchmend.imaging import encode_png
        from sketchmend.toydata import load_dataset

        _, spec = toy_reports
        img = load_dataset(Path(spec.out_dir) / "data" / "heldout")[0]
        payload = {
            "image_b64": base64.b64encode(encode_png(img)).decode(),
            "strokes": {"strokes": []},
            "sketch_b64": base64.b64encode(encode_png(np.zeros(img.shape[:2]))).decode(),
        }
        code = client.post("/v1/edit", json=payload).status_code
        _criterion("service/dual-input-400", code == 400, f"status {code}")

    def test_blend_locality_on_trained_model(self, client, toy_reports):
        from sketchmend.imaging import decode_gray_bytes, decode_image_bytes, encode_png
        from sketchmend.toydata import load_dataset

        _, spec = toy_reports
        images = load_dataset(Path(spec.out_dir) / "data" / "heldout")[:5]
        worst = 0.0
        n_quiet = 0
        for img in images:
            payload = {
                "image_b64": base64.b64encode(encode_png(img)).decode(),
                "strokes": {"strokes": [{"points": [[18, 20], [44, 26], [38, 44]], "width": 2}]},
                "options": {"return_mask": True},
            }
            body = client.post("/v1/edit", json=payload).json()
            out = decode_image_bytes(base64.b64decode(body["result_b64"]))
            mask = decode_gray_bytes(base64.b64decode(body["mask_b64"]))
            quiet = mask < 0.02
            n_quiet += int(quiet.sum())
            if quiet.any():
                worst = max(worst, float(np.abs(out - img).max(axis=2)[quiet].max()))
        # PNG quantization adds at most ~1/255 on top of the blend bound
        _criterion(
            "service/blend-locality",
            n_quiet > 0 and worst < 0.02 + 2.0 / 255.0,
            f"max change on mask<0.02 pixels = {worst:.4f} over {n_quiet} px",
        )
