import json

import numpy as np
import pytest

import semtrace

from maskadapter.export import AdapterConfig, export_candidates
from maskadapter.model import PromptSegNet
from maskadapter.pgm import read_mask, read_pgm


class TestExportContract:
    def test_manifest_and_scores_per_image(self, pair_corpus, base_checkpoint, tmp_path):
        cfg = AdapterConfig(checkpoint=str(base_checkpoint), candidates_per_image=3,
                            export_root=str(tmp_path / "exp"))
        result = export_candidates(pair_corpus / "images", cfg)
        assert len(result.exported) == 5 and not result.failed
        doc = json.loads((tmp_path / "exp" / "pair0.candidates.json").read_text())
        assert doc["schema_version"] == 1
        assert doc["image_id"] == "pair0"
        assert len(doc["candidates"]) == 3
        for entry in doc["candidates"]:
            assert 0.0 <= entry["predicted_iou"] <= 1.0
            read_mask(tmp_path / "exp" / entry["mask_path"])   # valid 0/255 PGM

    def test_a11_interchange_round_trip(self, pair_corpus, base_checkpoint, tmp_path):
        cfg = AdapterConfig(checkpoint=str(base_checkpoint),
                            export_root=str(tmp_path / "exp"))
        result = export_candidates(pair_corpus / "images", cfg)
        provider = semtrace.DirectoryProvider(candidates_root=tmp_path / "exp")
        errors = 0
        compared = 0
        for image_id in result.exported:
            img = read_pgm(pair_corpus / "images" / f"{image_id}.pgm")
            try:
                loaded = provider.candidates_for(image_id, img)
            except ValueError:
                errors += 1
                continue
            doc = json.loads((tmp_path / "exp" / f"{image_id}.candidates.json").read_text())
            assert len(loaded) == len(doc["candidates"])
            for cand, entry in zip(loaded, doc["candidates"]):
                compared += 1
                assert cand.predicted_iou == entry["predicted_iou"]
                original = read_mask(tmp_path / "exp" / entry["mask_path"])
                assert np.array_equal(cand.mask, original)
        print(f"A11 interchange round-trip: {'PASS' if errors == 0 else 'FAIL'} "
              f"({errors} parse errors, {compared} candidates compared)")
        assert errors == 0 and compared == 15

    def test_inference_failure_leaves_no_manifest(self, pair_corpus, base_checkpoint,
                                                  tmp_path, monkeypatch):
        def broken_forward(self, image, point):
            raise RuntimeError("inference exploded")

        monkeypatch.setattr(PromptSegNet, "forward", broken_forward)
        cfg = AdapterConfig(checkpoint=str(base_checkpoint),
                            export_root=str(tmp_path / "exp"))
        result = export_candidates(pair_corpus / "images", cfg)
        assert len(result.failed) == 5 and not result.exported
        assert not list((tmp_path / "exp").glob("*.candidates.json"))
        # the pipeline treats missing manifests as the fallback path
        provider = semtrace.DirectoryProvider(candidates_root=tmp_path / "exp")
        img = read_pgm(pair_corpus / "images" / "pair0.pgm")
        assert provider.candidates_for("pair0", img) == []

    def test_missing_checkpoint_aborts(self, pair_corpus, tmp_path):
        cfg = AdapterConfig(checkpoint=str(tmp_path / "nope.pt"),
                            export_root=str(tmp_path / "exp"))
        with pytest.raises(FileNotFoundError):
            export_candidates(pair_corpus / "images", cfg)

    def test_no_partial_files_after_export(self, pair_corpus, base_checkpoint, tmp_path):
        cfg = AdapterConfig(checkpoint=str(base_checkpoint),
                            export_root=str(tmp_path / "exp"))
        export_candidates(pair_corpus / "images", cfg)
        assert not list((tmp_path / "exp").glob("*.tmp"))


class TestEndToEnd:
    def test_finetuned_export_feeds_pipeline(self, pair_corpus, base_checkpoint, tmp_path):
        from maskadapter.train import FinetuneConfig, finetune

        ckpt = tmp_path / "tuned.pt"
        finetune(pair_corpus, base_checkpoint, ckpt, tmp_path / "log.jsonl",
                 FinetuneConfig(learning_rate=1e-3, max_iterations=30,
                                eval_every=10, patience=5, seed=1))
        cfg = AdapterConfig(checkpoint=str(ckpt), export_root=str(tmp_path / "exp"))
        result = export_candidates(pair_corpus / "images", cfg)
        assert len(result.exported) == 5

        manifest = semtrace.load_manifest(pair_corpus)
        pipe_cfg = semtrace.PipelineConfig(provider=semtrace.ProviderConfig(
            kind="directory", candidates_root=str(tmp_path / "exp")))
        batch = semtrace.run_batch(manifest, tmp_path / "run", pipe_cfg)
        records = semtrace.read_results(batch.results_path)
        assert len(records) == 5
        assert all(not r.get("failed") for r in records)
