import json
import math

import numpy as np
import pytest

from conftest import smooth_image
from greening_forge.Dataset import (
    MANIFEST_NAME,
    DatasetManifest,
    aggregate_path,
    derive_mask,
    evaluate_dirs,
    generate_dataset,
    write_report,
)
from greening_forge.DefectSynth import derive_image_seed
from greening_forge.Errors import DomainError, UsageError
from greening_forge.ForgeCli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from greening_forge.Raster import GrayField, load_image, load_mask, save_image, save_mask
from greening_forge.SynthConfig import SynthConfig

pytestmark = pytest.mark.cli


@pytest.fixture
def dataset(clean_dir, tmp_path):
    out = tmp_path / "dataset"
    manifest = generate_dataset(clean_dir, out, SynthConfig(), seed=5)
    return out, manifest


########## generate ##########

def test_generate_writes_consistent_manifest(dataset):
    out, manifest = dataset
    assert manifest.version == "1.0"
    assert manifest.config_digest == SynthConfig().digest()
    assert [e.name for e in manifest.entries] == ["a", "b", "c"]
    for index, entry in enumerate(manifest.entries):
        assert entry.image_seed == derive_image_seed(5, index)
        assert entry.split is None
        for rel in (entry.clean_path, entry.defected_path, entry.mask_path):
            assert not rel.startswith("/")
            assert (out / rel).is_file()

    on_disk = json.loads((out / MANIFEST_NAME).read_text())
    assert on_disk["version"] == "1.0"
    assert list(on_disk) == sorted(on_disk)
    assert DatasetManifest.load(out / MANIFEST_NAME) == manifest


def test_generated_masks_bound_the_changes(dataset):
    out, manifest = dataset
    for entry in manifest.entries:
        clean = load_image(out / entry.clean_path)
        defected = load_image(out / entry.defected_path)
        outside = load_mask(out / entry.mask_path).values == 0
        assert np.array_equal(clean.planes[:, outside], defected.planes[:, outside])


def test_generation_is_deterministic(clean_dir, tmp_path, dataset):
    out, _ = dataset
    other = tmp_path / "again"
    generate_dataset(clean_dir, other, SynthConfig(), seed=5, jobs=2)
    for sub in ("defected", "masks"):
        for path in sorted((out / sub).iterdir()):
            assert (other / sub / path.name).read_bytes() == path.read_bytes()
    assert (other / MANIFEST_NAME).read_bytes() == (out / MANIFEST_NAME).read_bytes()


def test_generate_split(clean_dir, tmp_path):
    manifest = generate_dataset(clean_dir, tmp_path / "split", seed=1, split=0.5)
    splits = [e.split for e in manifest.entries]
    assert sorted(splits) == ["test", "train", "train"]
    again = generate_dataset(clean_dir, tmp_path / "split2", seed=1, split=0.5)
    assert [e.split for e in again.entries] == splits


def test_generate_rejects_empty_input(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(UsageError):
        generate_dataset(empty, tmp_path / "out")
    (empty / "junk.png").write_bytes(b"nope")
    with pytest.raises(UsageError):
        generate_dataset(empty, tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_failed_write_removes_partial_output(clean_dir, tmp_path):
    out = tmp_path / "broken"
    (out / "defected" / "b.png").mkdir(parents=True)
    with pytest.raises(OSError):
        generate_dataset(clean_dir, out, seed=2)
    assert not (out / MANIFEST_NAME).exists()
    assert not any(p.is_file() for p in out.rglob("*"))


def test_undersized_input_removes_partial_output(tmp_path):
    src = tmp_path / "mixed"
    src.mkdir()
    save_image(smooth_image(40, 96, 80), src / "a.png")
    save_image(smooth_image(41, 40, 40), src / "b.png")
    out = tmp_path / "undersized"
    with pytest.raises(DomainError):
        generate_dataset(src, out, seed=3)
    assert not out.exists()


def test_derived_masks_agree_with_stored_masks(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for i in range(8):
        save_image(smooth_image(300 + i, 128, 96), src / f"img{i}.png")
    # 16-bit output and a threshold derive-mask can see after quantization
    config = SynthConfig(mask_threshold=0.01, output_depth=16)
    out = tmp_path / "iou"
    manifest = generate_dataset(src, out, config, seed=9)

    intersection = union = 0
    for entry in manifest.entries:
        stored = load_mask(out / entry.mask_path).values > 0
        derived = derive_mask(out / entry.defected_path, out / entry.clean_path,
                              tmp_path / f"{entry.name}_derived.png", t=0.01).values > 0
        intersection += int((stored & derived).sum())
        union += int((stored | derived).sum())
    assert union > 0
    assert intersection / union >= 0.9


@pytest.mark.slow
def test_default_masks_round_trip_through_derive_mask(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for i in range(20):
        save_image(smooth_image(500 + i, 256, 192), src / f"plate{i:02d}.png")
    out = tmp_path / "default"
    manifest = generate_dataset(src, out, SynthConfig(), seed=11)
    assert len(manifest.entries) == 20

    intersection = union = 0
    for entry in manifest.entries:
        stored = load_mask(out / entry.mask_path).values > 0
        derived = derive_mask(out / entry.defected_path, out / entry.clean_path,
                              tmp_path / f"{entry.name}_derived.png", t=0.004).values > 0
        intersection += int((stored & derived).sum())
        union += int((stored | derived).sum())
    assert union > 0
    assert intersection / union >= 0.9


########## evaluate ##########

def test_evaluate_defected_against_clean(dataset, tmp_path):
    out, _ = dataset
    report = evaluate_dirs(out / "defected", out / "clean", out / "masks", out / "defected",
                           scales=2)
    assert [r.pair_id for r in report.rows] == ["a", "b", "c"]
    assert report.skipped == []
    for row in report.rows:
        assert row.cropout_ssim is not None
        assert row.loss is not None and row.loss.combined > 0
        assert row.outside_change == 0.0

    aggregate = report.aggregate()
    assert aggregate["count"] == 3
    assert aggregate["psnr_db"] == pytest.approx(math.fsum(r.psnr_db for r in report.rows) / 3)
    assert aggregate["loss"] == pytest.approx(math.fsum(r.loss.combined for r in report.rows) / 3)

    target = write_report(report, tmp_path / "scores.jsonl")
    assert target == aggregate_path(tmp_path / "scores.jsonl")
    lines = (tmp_path / "scores.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["pair_id"] == "a"
    assert json.loads(target.read_text())["aggregate"]["count"] == 3


def test_evaluate_skips_unpaired_and_reports_inf(dataset, tmp_path):
    out, _ = dataset
    restored = tmp_path / "restored"
    restored.mkdir()
    for name in ("a", "b"):
        (restored / f"{name}.png").write_bytes((out / "clean" / f"{name}.png").read_bytes())
    save_image(smooth_image(1, 96, 80), restored / "orphan.png")

    report = evaluate_dirs(restored, out / "clean", scales=2)
    assert [r.pair_id for r in report.rows] == ["a", "b"]
    assert {p for p, _ in report.skipped} == {"orphan", "c"}
    assert all(r.cropout_ssim is None and r.loss is None for r in report.rows)
    aggregate = report.aggregate()
    assert aggregate["psnr_db"] == "inf"
    assert aggregate["cropout_ssim"] is None


def test_evaluate_skips_pairs_that_fail(dataset, tmp_path):
    out, _ = dataset
    # Default five scales need 176 px; these images are smaller
    report = evaluate_dirs(out / "defected", out / "clean")
    assert report.rows == []
    assert len(report.skipped) == 3


########## command line ##########

def test_cli_generate_and_evaluate(clean_dir, tmp_path, capsys):
    out = tmp_path / "cli_ds"
    assert main(["generate", str(clean_dir), "--out", str(out), "--seed", "3"]) == EXIT_OK
    assert (out / MANIFEST_NAME).is_file()

    report = tmp_path / "eval.jsonl"
    code = main(["evaluate", str(out / "defected"), str(out / "clean"),
                 "--masks", str(out / "masks"), "--inputs", str(out / "defected"),
                 "--scales", "2", "--out", str(report)])
    assert code == EXIT_OK
    assert aggregate_path(report).is_file()
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(printed)["count"] == 3


def test_cli_evaluate_with_every_pair_skipped(dataset, tmp_path):
    out, _ = dataset
    code = main(["evaluate", str(out / "defected"), str(out / "clean"),
                 "--out", str(tmp_path / "r.jsonl")])
    assert code == EXIT_DATA


def test_cli_loss(dataset, capsys):
    out, manifest = dataset
    entry = manifest.entries[0]
    args = [str(out / entry.defected_path), str(out / entry.clean_path),
            str(out / entry.defected_path)]
    assert main(["loss"] + args + ["--w", "0.5"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["combined"] == pytest.approx(report["spatial"] + 0.1 * report["frequency"])
    assert main(["loss"] + args + ["--w", "0.3"]) == EXIT_USAGE


def test_cli_derive_mask_and_baseline(dataset, tmp_path):
    out, manifest = dataset
    entry = manifest.entries[0]
    mask_path = tmp_path / "derived.png"
    assert main(["derive-mask", str(out / entry.defected_path), str(out / entry.clean_path),
                 "--out", str(mask_path), "--t", "0.02"]) == EXIT_OK
    assert mask_path.is_file()

    restored = tmp_path / "restored.png"
    assert main(["baseline", str(out / entry.defected_path), str(out / entry.mask_path),
                 "--out", str(restored), "--annulus", "8"]) == EXIT_OK
    assert load_image(restored).shape == load_image(out / entry.defected_path).shape


def test_cli_baseline_with_empty_mask_is_a_data_error(dataset, tmp_path):
    out, manifest = dataset
    entry = manifest.entries[0]
    empty = tmp_path / "empty_mask.png"
    save_mask(GrayField.zeros(96, 80), empty)
    assert main(["baseline", str(out / entry.defected_path), str(empty),
                 "--out", str(tmp_path / "x.png")]) == EXIT_DATA


def test_cli_preview(clean_dir, tmp_path):
    out = tmp_path / "preview.png"
    assert main(["preview", str(clean_dir / "a.png"), "--out", str(out), "--seed", "4"]) == EXIT_OK
    assert out.stat().st_size > 0


def test_cli_exit_codes(clean_dir, tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["derive-mask", str(tmp_path / "a.png"), str(tmp_path / "b.png"),
                 "--out", str(tmp_path / "m.png")]) == EXIT_IO

    bad_config = tmp_path / "bad.yaml"
    bad_config.write_text("spot_size: 3\n")
    assert main(["generate", str(clean_dir), "--out", str(tmp_path / "o"),
                 "--config", str(bad_config)]) == EXIT_USAGE

    empty = tmp_path / "nothing"
    empty.mkdir()
    assert main(["generate", str(empty), "--out", str(tmp_path / "o2")]) == EXIT_USAGE
