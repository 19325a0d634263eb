import json

import numpy as np
import pytest

from vocsmooth import cli
from vocsmooth.contrastive import save_features
from vocsmooth.dataset import BlendPair, build_manifest
from vocsmooth.errors import NumericalError
from vocsmooth.imaging import load_image, save_image
from vocsmooth.smoothing import OPERATORS
from vocsmooth.synthetic import piecewise_smooth, texture


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def image(tmp_path):
    path = tmp_path / "in.png"
    save_image(piecewise_smooth(3, 32), path)
    return path


@pytest.fixture
def manifest(tmp_path):
    gts = [piecewise_smooth(s, 32) for s in range(3)]
    pairs = [BlendPair(g, g, "none") for g in gts]
    return build_manifest(pairs, tmp_path / "same")


def test_smooth_l0_lambda_zero(capsys, tmp_path, image):
    out = tmp_path / "out.png"
    code, _, _ = run(capsys, "smooth", "--op", "l0", "--param", "lambda=0", image, out)
    assert code == 0
    assert np.array_equal(load_image(out), load_image(image))


def test_smooth_preset_and_batch(capsys, tmp_path, image, manifest):
    code, _, _ = run(capsys, "smooth", "--preset", "fig1-rtv", image, tmp_path / "r.png")
    assert code == 0 and (tmp_path / "r.png").exists()
    code, _, _ = run(capsys, "smooth", "--preset", "fig1-gf", manifest, tmp_path / "batch")
    assert code == 0 and len(list((tmp_path / "batch").glob("*.png"))) == 3
    code, _, _ = run(capsys, "smooth", "--preset", "fig1-gf", tmp_path, tmp_path / "dir")
    assert code == 0 and sorted(p.name for p in (tmp_path / "dir").iterdir()) == ["in.png", "r.png"]


def test_unknown_operator_lists_names(capsys, tmp_path, image):
    code, _, err = run(capsys, "smooth", "--op", "median", image, tmp_path / "o.png")
    assert code == 2
    for name in OPERATORS:
        assert name in err


def test_bad_arguments_exit_2(capsys, tmp_path, image):
    assert run(capsys, "smooth", "--op", "l0", "--param", "lambda", image, tmp_path / "o.png")[0] == 2
    assert run(capsys, "smooth", "--op", "l0", "--param", "lambda=-1", image, tmp_path / "o.png")[0] == 2
    assert run(capsys, "smooth", "--op", "l0", "--param", "lambda=x", image, tmp_path / "o.png")[0] == 2
    assert run(capsys, "smooth", "--op", "l0", image, tmp_path / "o.tiff")[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["smooth"])
    assert info.value.code == 2


def test_io_failures_exit_3_and_name_file(capsys, tmp_path):
    code, _, err = run(capsys, "smooth", "--op", "l0", tmp_path / "missing.png", tmp_path / "o.png")
    assert code == 3 and "missing.png" in err
    bad = tmp_path / "bad.fmap"
    bad.write_bytes(b"XXXX" + bytes(16))
    code, _, err = run(capsys, "gram", bad)
    assert code == 3 and "bad.fmap" in err and "offset 0" in err


def test_numerical_failure_exit_4(capsys, tmp_path, image, monkeypatch):
    def diverge(img, **kwargs):
        raise NumericalError("no convergence", residual=0.5, iterations=10)

    monkeypatch.setitem(OPERATORS, "rtv", (diverge, OPERATORS["rtv"][1]))
    code, _, err = run(capsys, "smooth", "--op", "rtv", image, tmp_path / "o.png")
    assert code == 4 and "no convergence" in err


def test_blend(capsys, tmp_path):
    save_image(np.full((8, 8, 3), 0.5), tmp_path / "gt.png")
    save_image(texture("checker", 1, 4), tmp_path / "tex.png")
    code, out, _ = run(capsys, "blend", "--gt", tmp_path / "gt.png", "--texture", tmp_path / "tex.png",
                       "-o", tmp_path / "b.png")
    assert code == 0 and json.loads(out)["clamp_fraction"] == 0.0
    assert load_image(tmp_path / "b.png").shape == (8, 8, 3)


def test_screen_with_figure(capsys, tmp_path):
    xx = np.mgrid[0:48, 0:48][1]
    save_image(np.where(xx < 24, 0.3, 0.7)[:, :, None] * np.ones(3), tmp_path / "s.png")
    code, out, _ = run(capsys, "screen", tmp_path / "s.png", "--preset", "fig1-l0", "--preset", "fig1-rtv",
                       "--op", "bilateral:sigma_s=2,sigma_r=0.1", "--figure", tmp_path / "s_fig.png",
                       "--save-gt", tmp_path / "gt.png")
    assert code == 0
    report = json.loads(out)
    assert report["schema"] == 1 and len(report["candidates"]) == 3
    assert report["candidates"][2]["operator"] == {"name": "bilateral", "params": {"sigma_r": 0.1, "sigma_s": 2.0}}
    assert (tmp_path / "s_fig.png").read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "gt.png").exists()


def test_config_precedence(capsys, tmp_path):
    xx = np.mgrid[0:48, 0:48][1]
    save_image(np.where(xx < 24, 0.3, 0.7)[:, :, None] * np.ones(3), tmp_path / "s.png")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"threshold": 0.01, "preset": ["fig1-l0"]}))
    _, out, _ = run(capsys, "--config", cfg, "screen", tmp_path / "s.png")
    report = json.loads(out)
    assert report["threshold"] == 0.01 and len(report["candidates"]) == 1
    _, out, _ = run(capsys, "--config", cfg, "screen", tmp_path / "s.png", "--threshold", "0.2")
    assert json.loads(out)["threshold"] == 0.2
    _, out, _ = run(capsys, "screen", tmp_path / "s.png")
    assert json.loads(out)["threshold"] == 0.05
    (tmp_path / "bad.json").write_text("[1, 2]")
    assert run(capsys, "--config", tmp_path / "bad.json", "screen", tmp_path / "s.png")[0] == 2


def test_metric_pair_and_manifest(capsys, tmp_path, image, manifest):
    code, out, _ = run(capsys, "metric", image, image)
    d = json.loads(out)
    assert code == 0 and d["schema"] == 1
    assert d["psnr"] == "inf" and d["ssim"] == pytest.approx(1.0) and d["ms_ssim"] == pytest.approx(4.0)
    assert {"smooth_score", "smooth_std", "smooth_laplacian", "smooth_passed"} <= set(d)
    code, out, _ = run(capsys, "metric", "--manifest", manifest)
    d = json.loads(out)
    assert code == 0 and d["pairs"] == 3 and d["mean_ssim"] == pytest.approx(1.0)
    assert run(capsys, "metric", image)[0] == 2


def test_loss_breakdown(capsys, tmp_path, image):
    gt = load_image(image)
    save_image(np.clip(gt + 0.05, 0, 1), tmp_path / "s.png")
    save_image(np.full(gt.shape[:2] + (1,), 0.5), tmp_path / "edge.png")
    np.save(tmp_path / "probs.npy", np.full((32, 32, 21), 1 / 21))
    np.save(tmp_path / "labels.npy", np.zeros((32, 32), int))
    save_image(np.clip(gt + 0.2, 0, 1), tmp_path / "neg.png")
    code, out, _ = run(capsys, "loss", "--gt", image, "--s0", tmp_path / "s.png", "--s1", tmp_path / "s.png",
                       "--edge-pred", tmp_path / "edge.png", "--negative", tmp_path / "neg.png",
                       "--seg-probs", tmp_path / "probs.npy", "--seg-labels", tmp_path / "labels.npy")
    d = json.loads(out)
    assert code == 0 and d["schema"] == 1 and d["absent"] == []
    assert set(d["parts"]) == {"edge", "re_s0", "re_s1", "dtv_s0", "dtv_s1", "contrastive", "seg"}
    assert d["parts"]["seg"] == pytest.approx(np.log(21), abs=1e-4)
    assert d["weighted"]["edge"] == pytest.approx(0.001 * d["parts"]["edge"])
    assert d["total"] == pytest.approx(sum(d["weighted"].values()))
    code, out, _ = run(capsys, "loss", "--gt", image, "--lambda-e", "0.5")
    d = json.loads(out)
    assert d["total"] == 0.0 and d["weights"]["lambda_e"] == 0.5 and "edge" in d["absent"]


def test_features_gram_closs(capsys, tmp_path, image):
    fmap = tmp_path / "f.fmap"
    code, out, _ = run(capsys, "features", "extract", image, "-o", fmap)
    assert code == 0 and json.loads(out)["shape"] == [13, 32, 32]
    code, out, _ = run(capsys, "gram", fmap, "--layer", "relu3_1")
    d = json.loads(out)
    assert d["layer"] == "relu3_1" and d["channels"] == 13 and len(d["gram"]) == 13
    f = np.ones((2, 4, 4), np.float32)
    save_features(f, tmp_path / "a.fmap")
    save_features(f * 0, tmp_path / "n.fmap")
    code, out, _ = run(capsys, "closs", "--anchor", tmp_path / "a.fmap", "--positive", tmp_path / "a.fmap",
                       "--negative", tmp_path / "n.fmap", "--mode", "min")
    d = json.loads(out)
    assert code == 0 and d["mode"] == "min" and d["loss"] == 0.0
    save_features(np.ones((3, 4, 4), np.float32), tmp_path / "c3.fmap")
    assert run(capsys, "closs", "--anchor", tmp_path / "a.fmap", "--positive", tmp_path / "c3.fmap",
               "--negative", tmp_path / "n.fmap")[0] == 2


def test_benchmark_identity_manifest(capsys, tmp_path, manifest):
    out = tmp_path / "bench"
    code, text, _ = run(capsys, "benchmark", manifest, "--out", out, "--preset", "fig1-gf")
    assert code == 0
    d = json.loads((out / "benchmark.json").read_text())
    rows = {r["label"]: r for r in d["rows"]}
    assert d["schema"] == 1
    assert rows["Original"]["mean_ssim"] == 1.0 and rows["Original"]["mean_psnr"] == "inf"
    assert all(r["mean_ssim"] <= 1.0 for r in d["rows"])
    assert (out / "benchmark.txt").read_text() == text
    assert (out / "benchmark.png").read_bytes()[:4] == b"\x89PNG"


def test_benchmark_missing_pairs(capsys, caplog, tmp_path, manifest):
    (manifest.parent / "input" / "00001.png").unlink()
    code, _, _ = run(capsys, "benchmark", manifest, "--out", tmp_path / "b", "--preset", "fig1-gf", "--no-figure")
    assert code == 0 and "00001" in caplog.text
    assert json.loads((tmp_path / "b" / "benchmark.json").read_text())["pairs"] == 2
    for i in (0, 2):
        (manifest.parent / "input" / f"0000{i}.png").unlink()
    assert run(capsys, "benchmark", manifest, "--out", tmp_path / "c")[0] == 3


def test_dataset_build_exit_codes(capsys, tmp_path):
    src, tex = tmp_path / "src", tmp_path / "tex"
    src.mkdir()
    tex.mkdir()
    save_image(np.random.Generator(np.random.Philox(1)).uniform(size=(32, 32, 3)), src / "n.png")
    save_image(texture("grain", 1, 32), tex / "t.png")
    code, out, _ = run(capsys, "dataset", "build", "--sources", src, "--textures", tex, "--out", tmp_path / "o",
                       "--threshold", "1e-6")
    assert code == 1 and json.loads(out)["pairs"] == 0
    assert (tmp_path / "o" / "reports" / "n.json").exists()
    assert run(capsys, "dataset", "build", "--sources", src)[0] == 2


def test_synth(capsys, tmp_path):
    code, out, _ = run(capsys, "synth", "--out", tmp_path / "m", "--count", "2", "--textures", "2", "--size", "32")
    assert code == 0 and json.loads(out)["pairs"] == 4
    assert len((tmp_path / "m" / "pairs" / "manifest.jsonl").read_text().splitlines()) == 4
