import json

import pytest
import yaml

from fermix.cli import main
from fermix.manifest import load_manifest

from conftest import full_frame_cache


def write_yaml(path, body):
    path.write_text(yaml.safe_dump(body, sort_keys=False))
    return path


@pytest.fixture(scope="module")
def ingested(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_yaml(root / "ingest.yaml", {
        "seed": 3,
        "sources": [{"type": "synth", "n_per_class": 8}],
        "split": {"train": 0.8, "val": 0.1, "test": 0.1},
    })
    rc = main(["ingest", "--config", str(cfg), "--out", str(root / "data")])
    assert rc == 0
    return root


@pytest.fixture(scope="module")
def preprocessed(ingested):
    manifest = load_manifest(ingested / "data" / "manifest.csv")
    cache = full_frame_cache(manifest, reject_keys={"angry-0001"})
    sidecar = ingested / "golden.csv"
    cache.save(sidecar)
    rc = main([
        "preprocess",
        "--manifest", str(ingested / "data" / "manifest.csv"),
        "--detector", f"fixture:{sidecar}",
        "--out", str(ingested / "pre"),
    ])
    assert rc == 0
    return ingested


class TestIngest:
    def test_writes_split_manifest(self, ingested):
        m = load_manifest(ingested / "data" / "manifest.csv")
        assert len(m) == 56
        splits = {s.split for s in m}
        assert splits == {"train", "val", "test"}

    def test_missing_config_exits_1(self, tmp_path, capsys):
        rc = main(["ingest", "--config", str(tmp_path / "no.yaml"), "--out", str(tmp_path)])
        assert rc == 1
        assert "config error" in capsys.readouterr().err

    def test_ferplus_source(self, tmp_path):
        from conftest import ferplus_row, write_ferplus_csv

        write_ferplus_csv(tmp_path / "fer.csv",
                          [ferplus_row(f"r{i}", 10 * i, {"fear": 2}) for i in range(5)])
        cfg = write_yaml(tmp_path / "i.yaml", {
            "seed": 0,
            "sources": [{"type": "ferplus", "csv": str(tmp_path / "fer.csv")}],
        })
        rc = main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert len(load_manifest(tmp_path / "out" / "manifest.csv")) == 5


class TestPreprocess:
    def test_outputs(self, preprocessed):
        aligned = load_manifest(preprocessed / "pre" / "aligned" / "manifest.csv")
        cropped = load_manifest(preprocessed / "pre" / "cropped" / "manifest.csv")
        assert len(aligned) == 55  # one rejected sample
        assert len(cropped) == 55
        assert (preprocessed / "pre" / "detections.csv").is_file()

    def test_external_detector_spec(self, ingested, tmp_path):
        script = tmp_path / "det.py"
        script.write_text('print("none")\n')
        rc = main([
            "preprocess",
            "--manifest", str(ingested / "data" / "manifest.csv"),
            "--detector", f"external:python3 {script}",
            "--out", str(tmp_path / "pre"),
        ])
        assert rc == 0
        aligned = load_manifest(tmp_path / "pre" / "aligned" / "manifest.csv")
        assert len(aligned) == 0

    def test_bad_detector_spec_exits_1(self, ingested, capsys):
        rc = main([
            "preprocess",
            "--manifest", str(ingested / "data" / "manifest.csv"),
            "--detector", "retinaface",
            "--out", str(ingested / "x"),
        ])
        assert rc == 1
        assert "detector" in capsys.readouterr().err


class TestBuildMerged:
    def test_three_variants(self, preprocessed):
        rc = main([
            "build-merged",
            "--manifest", str(preprocessed / "data" / "manifest.csv"),
            "--detections", str(preprocessed / "pre" / "detections.csv"),
            "--out", str(preprocessed / "merged"),
        ])
        assert rc == 0
        merged = load_manifest(preprocessed / "merged" / "manifest.csv")
        assert len(merged) == 56 + 55 + 55
        variants = {s.variant for s in merged}
        assert variants == {"original", "aligned", "cropped"}


class TestTrain:
    def test_run_dir_artifacts(self, ingested):
        out = ingested / "run"
        rc = main([
            "train",
            "--manifest", str(ingested / "data" / "manifest.csv"),
            "--arch", "resnet18",
            "--augment", "off",
            "--sampler", "off",
            "--seed", "4",
            "--epochs", "1",
            "--batch-size", "16",
            "--out", str(out),
        ])
        assert rc == 0
        assert (out / "checkpoint.pt").is_file()
        assert (out / "epochs.jsonl").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["epochs_run"] == 1


class TestGridCommands:
    def test_ablation_with_failing_cell_exits_2(self, tmp_path):
        from fermix.manifest import save_manifest, split as split_manifest
        from fermix.synth import synth_generate

        broken = split_manifest(synth_generate(4, seed=1), ratios=(0.9, 0.0, 0.1), seed=1)
        save_manifest(broken, tmp_path / "broken")
        cfg = write_yaml(tmp_path / "c.yaml", {
            "seed": 1,
            "data_root": str(tmp_path),
            "runs_root": str(tmp_path / "runs"),
            "manifests": {"original": "broken/manifest.csv"},
            "train": {"epochs": 1, "batch_size": 8},
            "ablation": {"architectures": ["resnet18"], "stages": ["original"]},
        })
        rc = main(["ablation", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert (tmp_path / "out" / "results.txt").is_file()

    def test_ablation_bad_config_exits_1(self, tmp_path, capsys):
        cfg = write_yaml(tmp_path / "c.yaml", {"ablation": {"stages": ["nope"]}})
        rc = main(["ablation", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 1
        assert "config error" in capsys.readouterr().err

    def test_report_rerenders(self, tmp_path):
        from test_experiments import _stub_table
        from fermix.experiments import render

        table = _stub_table()
        render(table, tmp_path / "first")
        rc = main([
            "report",
            "--results", str(tmp_path / "first" / "results.json"),
            "--out", str(tmp_path / "second"),
            "--format", "text,json",
        ])
        assert rc == 0
        assert (tmp_path / "second" / "results.txt").read_bytes() == (
            tmp_path / "first" / "results.txt"
        ).read_bytes()

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "fermix" in capsys.readouterr().out
