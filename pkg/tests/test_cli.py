import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from ghostkit import codec, forge, synth
from ghostkit.cli import main
from .conftest import make_composite


@pytest.fixture(scope="module")
def composite_file(tmp_path_factory):
    root = tmp_path_factory.mktemp("inputs")
    image = synth.textured_image(256, 192, seed=42)
    spec = forge.ForgerySpec(kind="ghost_insert", cover_q=60, ghost_q=80,
                             region=(64, 40, 48, 48))
    data, _ = forge.ghost_insert(image, spec)
    path = root / "suspect.jpg"
    path.write_bytes(data)
    return path


SWEEP = ["--sweep-min", "40", "--sweep-max", "90", "--sweep-step", "2"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestAnalyze:
    def test_composite_analysis(self, composite_file, tmp_path, capsys):
        code, out, err = run(capsys, "analyze", composite_file, "--out", tmp_path, *SWEEP)
        assert code == 0
        summary = json.loads(out)
        assert summary["q_final"] == 60
        assert summary["schema"] == 1
        assert (tmp_path / "suspect_mask.png").exists()
        assert (tmp_path / "suspect_curve.csv").exists()
        assert (tmp_path / "suspect_summary.json").exists()
        assert json.loads((tmp_path / "suspect_summary.json").read_text())["q_final"] == 60
        csv_lines = (tmp_path / "suspect_curve.csv").read_text().splitlines()
        assert csv_lines[0] == "quality,ssim,energy"
        assert len(csv_lines) == 1 + len(range(40, 91, 2))

    def test_format_subset(self, composite_file, tmp_path, capsys):
        code, out, _ = run(capsys, "analyze", composite_file, "--out", tmp_path,
                           "--format", "csv", *SWEEP)
        assert code == 0
        assert (tmp_path / "suspect_curve.csv").exists()
        assert not (tmp_path / "suspect_mask.png").exists()

    def test_text_file_fails_with_offset(self, tmp_path, capsys):
        bogus = tmp_path / "notes.txt"
        bogus.write_text("just some text")
        code, out, err = run(capsys, "analyze", bogus, "--out", tmp_path)
        assert code == 1
        assert "offset" in err
        assert out == ""

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "analyze", tmp_path / "nope.jpg", "--out", tmp_path)
        assert code == 1
        assert "cannot read" in err

    def test_pristine_image_exits_two(self, tmp_path, capsys):
        pristine = tmp_path / "pristine.jpg"
        pristine.write_bytes(codec.encode(synth.textured_image(192, 144, seed=60), 100))
        code, out, _ = run(capsys, "analyze", pristine, "--out", tmp_path,
                           "--sweep-min", "40", "--sweep-max", "90", "--sweep-step", "2")
        assert code == 2
        summary = json.loads(out)
        assert summary["q_ssim"] is None and summary["q_energy"] is None
        assert (tmp_path / "pristine_mask.png").exists()  # mask still written

    def test_untampered_image_mask_below_one_percent(self, tmp_path, capsys):
        img = codec.resave(synth.textured_image(192, 144, seed=61), 70)
        source = tmp_path / "plain.jpg"
        source.write_bytes(codec.encode(img, 100))
        code, out, _ = run(capsys, "analyze", source, "--out", tmp_path, *SWEEP)
        assert code == 0
        assert json.loads(out)["mask_fraction"] < 0.01

    def test_env_fallback_for_out_dir(self, composite_file, tmp_path, capsys, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("GHOSTKIT_OUT", str(target))
        monkeypatch.chdir(tmp_path)
        code, _, _ = run(capsys, "analyze", composite_file, *SWEEP)
        assert code == 0
        assert (target / "suspect_mask.png").exists()

    def test_jobs_do_not_change_outputs(self, composite_file, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        code1, out1, _ = run(capsys, "analyze", composite_file, "--out", a, "--jobs", "1", *SWEEP)
        code2, out2, _ = run(capsys, "analyze", composite_file, "--out", b, "--jobs", "8", *SWEEP)
        assert (code1, code2) == (0, 0)
        for name in ("suspect_mask.png", "suspect_curve.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        s1 = json.loads((a / "suspect_summary.json").read_text())
        s2 = json.loads((b / "suspect_summary.json").read_text())
        s1["outputs"] = s2["outputs"] = None
        assert s1 == s2

    def test_unknown_format_rejected(self, composite_file, tmp_path, capsys):
        code, _, err = run(capsys, "analyze", composite_file, "--out", tmp_path,
                           "--format", "bmp")
        assert code == 1
        assert "format" in err


class TestForge:
    def test_spec_file_round_trip(self, tmp_path, capsys):
        image_path = tmp_path / "source.png"
        Image.fromarray(synth.textured_image(200, 150, seed=77), "RGB").save(image_path)
        spec = {"image": "source.png", "kind": "ghost_insert", "cover_q": 65,
                "ghost_q": 85, "region": [64, 40, 64, 64]}
        spec_path = tmp_path / "attack.json"
        spec_path.write_text(json.dumps(spec))
        code, out, _ = run(capsys, "forge", spec_path, "--out", tmp_path / "forged")
        assert code == 0
        record = json.loads(out)
        assert codec.decode(Path(record["jpeg"]).read_bytes()).shape == (150, 200, 3)
        mask = np.array(Image.open(record["mask"]))
        assert (mask == 255).sum() == 64 * 64

    def test_malformed_spec(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "forge", bad, "--out", tmp_path)
        assert code == 1 and "JSON" in err

    def test_missing_image_field(self, tmp_path, capsys):
        bad = tmp_path / "noimg.json"
        bad.write_text(json.dumps({"kind": "copy_move", "cover_q": 50,
                                   "region": [0, 0, 8, 8]}))
        code, _, err = run(capsys, "forge", bad, "--out", tmp_path)
        assert code == 1 and "image" in err

    def test_unknown_spec_field(self, tmp_path, capsys):
        image_path = tmp_path / "src.png"
        Image.fromarray(synth.textured_image(64, 64, seed=1), "RGB").save(image_path)
        bad = tmp_path / "weird.json"
        bad.write_text(json.dumps({"image": "src.png", "kind": "copy_move",
                                   "cover_q": 50, "region": [0, 0, 8, 8],
                                   "mystery": True}))
        code, _, err = run(capsys, "forge", bad, "--out", tmp_path)
        assert code == 1 and "mystery" in err


class TestDataset:
    @pytest.fixture()
    def corpus(self, tmp_path):
        root = tmp_path / "corpus"
        root.mkdir()
        for i in range(4):
            Image.fromarray(synth.textured_image(160, 120, seed=900 + i), "RGB").save(
                root / f"{i:02d}.png"
            )
        return root

    def test_desk_build(self, corpus, tmp_path, capsys):
        code, out, _ = run(capsys, "dataset", corpus, "--out", tmp_path / "ds",
                           "--cover-grid", "50,70", "--ghost-grid", "60,80",
                           "--ghost-rect", "40,30,32,32")
        assert code == 0
        record = json.loads(out)
        assert record["entries"] == 4 * 2 * 2
        manifest = forge.DatasetManifest.load(record["manifest"])
        assert len(manifest.entries) == 16

    def test_dry_run_full_protocol_count(self, tmp_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        code, out, _ = run(capsys, "dataset", empty, "--dry-run",
                           "--assume-images", "886")
        assert code == 0
        record = json.loads(out)
        assert record["planned"] == 116952
        assert len(record["cover_grid"]) == 11
        assert len(record["ghost_grid"]) == 12

    def test_dry_run_counts_corpus(self, corpus, capsys):
        code, out, _ = run(capsys, "dataset", corpus, "--dry-run",
                           "--cover-grid", "40,50,60", "--ghost-grid", "40,50,60")
        assert code == 0
        assert json.loads(out)["planned"] == 36

    def test_empty_corpus_fails(self, tmp_path, capsys):
        empty = tmp_path / "img"
        empty.mkdir()
        code, _, err = run(capsys, "dataset", empty, "--out", tmp_path / "out",
                           "--cover-grid", "50", "--ghost-grid", "60")
        assert code == 1


class TestEvaluate:
    def test_end_to_end(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        for i in range(2):
            Image.fromarray(synth.textured_image(160, 120, seed=950 + i), "RGB").save(
                corpus / f"{i}.png"
            )
        ds = tmp_path / "ds"
        code, out, _ = run(capsys, "dataset", corpus, "--out", ds,
                           "--cover-grid", "60", "--ghost-grid", "80",
                           "--ghost-rect", "40,30,32,32")
        assert code == 0
        manifest_path = json.loads(out)["manifest"]
        code, out, _ = run(capsys, "evaluate", manifest_path, "--out", tmp_path / "rep",
                           *SWEEP)
        assert code == 0
        record = json.loads(out)
        assert record["n_scored"] == 2
        assert record["mean_iou"] >= 0.5
        assert Path(record["report"]).exists()
        assert Path(record["csv"]).exists()

    def test_bad_manifest(self, tmp_path, capsys):
        missing = tmp_path / "manifest.json"
        code, _, err = run(capsys, "evaluate", missing, "--out", tmp_path)
        assert code == 1 and "manifest" in err
