import json

import numpy as np
import pytest
from PIL import Image

from recolor import colorspace
from recolor.service import build_parser, main, run_colorize
from recolor.trainer import TrainConfig, fit, save_config

from conftest import write_corpus


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """A tiny checkpoint shared by the CLI tests."""
    root = tmp_path_factory.mktemp("trained")
    write_corpus(root / "corpus", 4, side=32)
    config = TrainConfig.desk(side=32, m=4, batch_size=2, epochs=1, seed=0)
    _, checkpoint, _ = fit(config, root / "corpus", root / "run")
    return root, checkpoint


def test_run_colorize_grayscale_input(tmp_path, trained):
    _, checkpoint = trained
    gray = np.tile(np.linspace(60, 200, 40, dtype=np.uint8), (30, 1))
    src = tmp_path / "gray.png"
    Image.fromarray(gray, mode="L").save(src)
    out_path = run_colorize(checkpoint, src, tmp_path / "color.png")
    with Image.open(out_path) as im:
        assert im.mode == "RGB"
        assert im.size == (40, 30)
        out = np.asarray(im)
    # luminance passes through within one 8-bit gray level
    lab_in = colorspace.rgb_to_lab(np.stack([gray] * 3, axis=-1))
    lab_out = colorspace.rgb_to_lab(out)
    assert np.abs(lab_out.L - lab_in.L).max() <= 100.0 / 255.0


def test_run_colorize_depends_only_on_luminance(tmp_path, trained):
    _, checkpoint = trained
    rng = np.random.default_rng(8)
    color = rng.integers(60, 200, (32, 32, 3), dtype=np.uint8)
    src_color = tmp_path / "color_in.png"
    Image.fromarray(color).save(src_color)
    # grayscale twin: same luminance plane, chroma zeroed
    lab = colorspace.rgb_to_lab(color)
    twin = colorspace.lab_to_rgb(
        colorspace.LabImage(L=lab.L, a=np.zeros_like(lab.a), b=np.zeros_like(lab.b))
    )
    src_twin = tmp_path / "twin_in.png"
    Image.fromarray(twin).save(src_twin)

    out_a = run_colorize(checkpoint, src_color, tmp_path / "a.png")
    out_b = run_colorize(checkpoint, src_twin, tmp_path / "b.png")
    a = np.asarray(Image.open(out_a), dtype=np.int32)
    b = np.asarray(Image.open(out_b), dtype=np.int32)
    # identical up to 8-bit quantization of the twin's luminance
    assert np.abs(a - b).max() <= 2


def test_cli_train_writes_artifacts(tmp_path):
    write_corpus(tmp_path / "corpus", 4, side=32)
    config = TrainConfig.desk(side=32, m=4, batch_size=2, epochs=1, seed=1)
    save_config(config, tmp_path / "config.json")
    code = main([
        "train",
        "--config", str(tmp_path / "config.json"),
        "--corpus", str(tmp_path / "corpus"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 0
    assert (tmp_path / "out" / "checkpoint.pt").exists()
    assert (tmp_path / "out" / "metrics.tsv").exists()
    assert (tmp_path / "out" / "loss_curves.png").stat().st_size > 0


def test_cli_colorize_round_trip(tmp_path, trained):
    _, checkpoint = trained
    src = tmp_path / "in.png"
    Image.fromarray(np.full((24, 24), 128, dtype=np.uint8), mode="L").save(src)
    code = main([
        "colorize",
        "--checkpoint", str(checkpoint),
        "--in", str(src),
        "--out", str(tmp_path / "out.png"),
    ])
    assert code == 0
    assert (tmp_path / "out.png").exists()


def test_cli_evaluate_writes_report_and_figure(tmp_path, trained):
    root, checkpoint = trained
    code = main([
        "evaluate",
        "--checkpoint", str(checkpoint),
        "--corpus", str(root / "corpus"),
        "--report", str(tmp_path / "report.tsv"),
    ])
    assert code == 0
    report = (tmp_path / "report.tsv").read_text()
    assert report.startswith("image_id\tpsnr_db\tbaseline_psnr_db")
    assert (tmp_path / "report.png").stat().st_size > 0


def test_cli_study_report(tmp_path):
    pool_dir = tmp_path / "pool"
    pool_dir.mkdir()
    img = pool_dir / "x.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(img)
    manifest = tmp_path / "pool.tsv"
    manifest.write_text(f"i1\tmodel_a\t{img}\ni2\treal\t{img}\n")
    store = tmp_path / "judgments.jsonl"
    store.write_text(
        json.dumps({"v": 1, "session_id": "s", "image_id": "i1", "realistic": True})
        + "\n"
        + json.dumps({"v": 1, "session_id": "s", "image_id": "i2", "realistic": False})
        + "\n"
    )
    code = main([
        "study-report",
        "--store", str(store),
        "--pool", str(manifest),
        "--out", str(tmp_path / "naturalness.tsv"),
    ])
    assert code == 0
    text = (tmp_path / "naturalness.tsv").read_text()
    assert "model_a\t1\t100.0000\t0" in text
    assert (tmp_path / "naturalness.png").stat().st_size > 0


def test_cli_evaluate_writes_json_record(tmp_path, trained):
    root, checkpoint = trained
    main([
        "evaluate",
        "--checkpoint", str(checkpoint),
        "--corpus", str(root / "corpus"),
        "--report", str(tmp_path / "r.tsv"),
    ])
    record = json.loads((tmp_path / "r.json").read_text())
    assert record["v"] == 1
    assert record["image_count"] == 4
    assert len(record["scores"]) == 4
    assert record["mean_psnr_db"] == pytest.approx(
        sum(s["psnr_db"] for s in record["scores"]) / 4, abs=1e-9
    )


def test_cli_train_bad_config_fails_cleanly(tmp_path, capsys):
    (tmp_path / "config.json").write_text("{not json")
    code = main([
        "train",
        "--config", str(tmp_path / "config.json"),
        "--corpus", str(tmp_path),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_cli_failure_is_one_line_nonzero(tmp_path, capsys):
    code = main([
        "colorize",
        "--checkpoint", str(tmp_path / "missing.pt"),
        "--in", str(tmp_path / "missing.png"),
        "--out", str(tmp_path / "out.png"),
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert len(err.strip().splitlines()) == 1


def test_parser_knows_all_subcommands():
    parser = build_parser()
    text = parser.format_help()
    for command in ("train", "colorize", "evaluate", "study-serve", "study-report"):
        assert command in text
