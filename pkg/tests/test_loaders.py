import logging
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fermix.errors import LoaderError
from fermix.loaders import load_ckplus, load_ferplus, load_kdef
from fermix.manifest import merge, DatasetManifest, standardize

from conftest import ferplus_row, write_ferplus_csv, write_image_tree


class TestFerplus:
    def test_fixture_with_contempt_rows(self, tmp_path):
        # 10 rows, 2 with contempt majority -> 8 records (hand count)
        rows = [
            ferplus_row("a0", 10, {"anger": 5, "happiness": 1}),
            ferplus_row("a1", 20, {"disgust": 4}),
            ferplus_row("a2", 30, {"contempt": 6, "anger": 2}),  # dropped
            ferplus_row("a3", 40, {"fear": 3, "sadness": 1}),
            ferplus_row("a4", 50, {"happiness": 7}),
            ferplus_row("a5", 60, {"neutral": 9}),
            ferplus_row("a6", 70, {"contempt": 8}),  # dropped
            ferplus_row("a7", 80, {"sadness": 5}),
            ferplus_row("a8", 90, {"surprise": 4, "fear": 2}),
            ferplus_row("a9", 99, {"anger": 6}),
        ]
        path = tmp_path / "fer.csv"
        write_ferplus_csv(path, rows)
        records = load_ferplus(path)
        assert len(records) == 8
        assert [r.source_key for r in records] == ["a0", "a1", "a3", "a4", "a5", "a7", "a8", "a9"]
        assert records[0].label == "angry"
        assert records[0].pixels.shape == (48, 48)
        assert records[0].pixels[0, 0] == 10

    def test_contempt_majority_dropped_keeps_length(self, tmp_path):
        base = [ferplus_row(f"k{i}", i, {"happiness": 3}) for i in range(4)]
        write_ferplus_csv(tmp_path / "a.csv", base)
        with_contempt = base + [ferplus_row("c", 5, {"contempt": 9, "fear": 1})]
        write_ferplus_csv(tmp_path / "b.csv", with_contempt)
        assert len(load_ferplus(tmp_path / "a.csv")) == len(load_ferplus(tmp_path / "b.csv")) == 4

    def test_unknown_and_nf_majorities_dropped(self, tmp_path):
        rows = [
            ferplus_row("u", 1, {"unknown": 9}),
            ferplus_row("n", 2, {"NF": 9}),
            ferplus_row("ok", 3, {"fear": 2}),
        ]
        write_ferplus_csv(tmp_path / "f.csv", rows)
        records = load_ferplus(tmp_path / "f.csv")
        assert [r.source_key for r in records] == ["ok"]

    def test_tie_breaks_to_lowest_canonical_index(self, tmp_path):
        rows = [
            ferplus_row("t1", 1, {"happiness": 4, "anger": 4}),       # angry (0) < happy (3)
            ferplus_row("t2", 1, {"surprise": 2, "sadness": 2}),      # sad (5) < surprise (6)
            ferplus_row("t3", 1, {"contempt": 3, "neutral": 3}),      # canonical beats contempt
        ]
        write_ferplus_csv(tmp_path / "t.csv", rows)
        records = load_ferplus(tmp_path / "t.csv")
        assert [r.label for r in records] == ["angry", "sad", "neutral"]

    def test_all_zero_votes_dropped(self, tmp_path):
        write_ferplus_csv(tmp_path / "z.csv", [ferplus_row("z", 1, {})])
        assert load_ferplus(tmp_path / "z.csv") == []

    def test_malformed_pixel_count_reports_row(self, tmp_path):
        rows = [
            ferplus_row("ok", 1, {"fear": 2}),
            ("bad", "1 2 3", {"anger": 5}),
        ]
        write_ferplus_csv(tmp_path / "bad.csv", rows)
        with pytest.raises(LoaderError, match="row 1"):
            load_ferplus(tmp_path / "bad.csv")

    def test_non_integer_pixel_token_reports_row(self, tmp_path):
        rows = [("bad", " ".join(["1"] * 2303 + ["x"]), {"anger": 5})]
        write_ferplus_csv(tmp_path / "bad.csv", rows)
        with pytest.raises(LoaderError, match="row 0"):
            load_ferplus(tmp_path / "bad.csv")

    def test_unreadable_file_fatal(self, tmp_path):
        with pytest.raises(LoaderError, match="cannot read"):
            load_ferplus(tmp_path / "missing.csv")

    def test_unknown_vote_policy(self, tmp_path):
        with pytest.raises(ValueError):
            load_ferplus(tmp_path / "x.csv", vote_policy="plurality")

    def test_deterministic(self, tmp_path):
        rows = [ferplus_row(f"k{i}", i * 3, {"fear": 2, "anger": 1}) for i in range(6)]
        write_ferplus_csv(tmp_path / "d.csv", rows)
        a = load_ferplus(tmp_path / "d.csv")
        b = load_ferplus(tmp_path / "d.csv")
        assert [r.source_key for r in a] == [r.source_key for r in b]
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))


class TestCkplus:
    def test_fixture_tree(self, tmp_path):
        layout = {name: 2 for name in
                  ("anger", "disgust", "fear", "happy", "neutral", "sadness", "surprise")}
        write_image_tree(tmp_path, layout)
        records = load_ckplus(tmp_path)
        assert len(records) == 14
        assert all(r.source == "CKPLUS" for r in records)
        assert all(r.pixels.ndim == 2 for r in records)

    def test_empty_directory(self, tmp_path):
        assert load_ckplus(tmp_path) == []

    def test_contempt_ignored(self, tmp_path):
        write_image_tree(tmp_path, {"anger": 2, "contempt": 3})
        records = load_ckplus(tmp_path)
        assert len(records) == 2
        assert all(r.label == "angry" for r in records)

    def test_unknown_subdirectory_warns_and_skips(self, tmp_path, caplog):
        write_image_tree(tmp_path, {"fear": 1, "boredom": 2})
        with caplog.at_level(logging.WARNING):
            records = load_ckplus(tmp_path)
        assert len(records) == 1
        assert any("boredom" in r.message for r in caplog.records)

    def test_unreadable_image_errors(self, tmp_path):
        d = tmp_path / "happy"
        d.mkdir()
        (d / "broken.png").write_bytes(b"not a png")
        with pytest.raises(LoaderError, match="broken.png"):
            load_ckplus(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(LoaderError):
            load_ckplus(tmp_path / "nope")


def _write_kdef_file(root: Path, stem: str, size=(76, 56)):
    arr = np.random.default_rng(len(stem)).integers(0, 256, (*size, 3)).astype(np.uint8)
    root.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, "RGB").save(root / f"{stem}.JPG")


class TestKdef:
    EMOTION_STEMS = ["AF01AFS", "AF01ANS", "AF01DIS", "AF01HAS", "AF01NES", "AF01SAS", "AF01SUS"]

    def test_one_per_emotion_straight_pose(self, tmp_path):
        for stem in self.EMOTION_STEMS:
            _write_kdef_file(tmp_path / "AF01", stem)
        records = load_kdef(tmp_path, {"S"})
        assert len(records) == 7
        assert sorted(r.label for r in records) == sorted(
            ["fear", "angry", "disgust", "happy", "neutral", "sad", "surprise"]
        )
        assert all(r.pixels.shape[2] == 3 for r in records)

    def test_empty_pose_filter(self, tmp_path):
        for stem in self.EMOTION_STEMS:
            _write_kdef_file(tmp_path, stem)
        assert load_kdef(tmp_path, set()) == []

    def test_pose_filtering(self, tmp_path):
        _write_kdef_file(tmp_path, "AM10HAS")
        _write_kdef_file(tmp_path, "AM10HAHL")
        _write_kdef_file(tmp_path, "AM10HAFL")
        records = load_kdef(tmp_path, {"S", "HL", "HR"})
        assert sorted(r.source_key for r in records) == ["AM10HAHL", "AM10HAS"]

    def test_undecodable_filename_warns_and_skips(self, tmp_path, caplog):
        _write_kdef_file(tmp_path, "AF01HAS")
        _write_kdef_file(tmp_path, "NOTKDEF")
        with caplog.at_level(logging.WARNING):
            records = load_kdef(tmp_path, {"S"})
        assert len(records) == 1
        assert any("NOTKDEF" in r.message for r in caplog.records)


needs_real_data = pytest.mark.skipif(
    "FERMIX_FULL_DATA" not in os.environ,
    reason="licensed source datasets not provisioned (set FERMIX_FULL_DATA)",
)

# Published per-class distribution of the harmonized corpus.
FULL_CLASS_COUNTS = {
    "FERPLUS": {"Angry": 3110, "Disgust": 248, "Fear": 819, "Happy": 9355,
                "Neutral": 12905, "Sad": 4370, "Surprise": 4462},
    "CKPLUS": {"Angry": 135, "Disgust": 177, "Fear": 75, "Happy": 207,
               "Neutral": 0, "Sad": 84, "Surprise": 249},
    "KDEF": {"Angry": 420, "Disgust": 420, "Fear": 420, "Happy": 420,
             "Neutral": 420, "Sad": 419, "Surprise": 419},
}


@needs_real_data
class TestFullData:
    def _root(self) -> Path:
        return Path(os.environ["FERMIX_FULL_DATA"])

    def test_ferplus_full_counts(self):
        records = load_ferplus(self._root() / "ferplus.csv")
        assert len(records) == 35269
        counts = {}
        for r in records:
            counts[r.label] = counts.get(r.label, 0) + 1
        assert counts["disgust"] == 248

    def test_ckplus_full_counts(self):
        records = load_ckplus(self._root() / "ckplus")
        assert len(records) == 927
        assert sum(1 for r in records if r.label == "fear") == 75
        assert sum(1 for r in records if r.label == "neutral") == 0

    def test_kdef_full_counts(self):
        records = load_kdef(self._root() / "kdef")
        assert len(records) == 2938
        counts = {}
        for r in records:
            counts[r.label] = counts.get(r.label, 0) + 1
        assert all(v in (419, 420) for v in counts.values())

    def test_merged_totals(self):
        manifests = []
        for records in (
            load_ferplus(self._root() / "ferplus.csv"),
            load_ckplus(self._root() / "ckplus"),
            load_kdef(self._root() / "kdef"),
        ):
            manifests.append(DatasetManifest([standardize(r) for r in records]))
        merged = merge(manifests)
        assert len(merged) == 39134
        from fermix.labels import EmotionLabel

        assert merged.class_counts[EmotionLabel.HAPPY] == 9982
        assert merged.class_counts[EmotionLabel.NEUTRAL] == 13325
