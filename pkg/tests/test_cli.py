import json

import pytest

import semtrace as st
from semtrace.cli import main


@pytest.fixture()
def tiny_corpus(tmp_path):
    out = tmp_path / "corpus"
    code = main(["synth", "--out", str(out), "--cases", "2", "--samples", "3",
                 "--width", "64", "--height", "64", "--seed", "5"])
    assert code == 0
    return out


class TestSynthCommand:
    def test_generates_expected_records(self, tiny_corpus):
        manifest = st.load_manifest(tiny_corpus)
        assert len(manifest.records) == 6

    def test_rerun_identical_tree(self, tiny_corpus, tmp_path):
        out2 = tmp_path / "corpus2"
        assert main(["synth", "--out", str(out2), "--cases", "2", "--samples", "3",
                     "--width", "64", "--height", "64", "--seed", "5"]) == 0
        for p in sorted(tiny_corpus.rglob("*")):
            if p.is_file():
                rel = p.relative_to(tiny_corpus)
                assert (out2 / rel).read_bytes() == p.read_bytes()

    def test_zero_samples_is_usage_error(self, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path / "x"), "--samples", "0"]) == 2
        assert "--samples" in capsys.readouterr().err


class TestRunCommand:
    def test_null_provider_all_fallback(self, tiny_corpus, tmp_path, capsys):
        out = tmp_path / "run1"
        code = main(["run", "--corpus", str(tiny_corpus), "--out", str(out),
                     "--provider", "null"])
        assert code == 0
        summary = capsys.readouterr().out
        assert "fallback=6" in summary
        assert (out / "results.jsonl").exists()

    def test_directory_provider_mixed_sources(self, tiny_corpus, tmp_path):
        manifest = st.load_manifest(tiny_corpus)
        cands = tmp_path / "cands"
        for rec in manifest.records[:3]:
            gt = st.read_mask_pgm(manifest.resolve(rec.gt_mask_path))
            st.write_candidates(cands, rec.id, [(gt, 0.97)])
        out = tmp_path / "run2"
        assert main(["run", "--corpus", str(tiny_corpus), "--out", str(out),
                     "--provider", f"dir:{cands}"]) == 0
        records = st.read_results(out / "results.jsonl")
        sources = {r["image_id"]: r["source"] for r in records}
        assert sum(1 for s in sources.values() if s == "sam2") == 3
        assert sum(1 for s in sources.values() if s == "fallback") == 3

    def test_oracle_provider_flags(self, tiny_corpus, tmp_path, capsys):
        out = tmp_path / "run3"
        code = main(["run", "--corpus", str(tiny_corpus), "--out", str(out),
                     "--provider", "oracle", "--oracle-fail-prob", "0.0",
                     "--oracle-perturbations", "none", "--seed", "5"])
        assert code == 0
        assert "fallback=0" in capsys.readouterr().out

    def test_missing_corpus_is_io_error(self, tmp_path, capsys):
        assert main(["run", "--corpus", str(tmp_path / "nope"), "--out",
                     str(tmp_path / "r")]) == 3
        assert "error:" in capsys.readouterr().err

    def test_bad_provider_spec(self, tiny_corpus, tmp_path, capsys):
        assert main(["run", "--corpus", str(tiny_corpus), "--out",
                     str(tmp_path / "r"), "--provider", "magic"]) == 3

    def test_config_file_layering(self, tiny_corpus, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "gate": {"tau_conf": 0.5},
            "sauvola": {"window": 15, "k": 0.3},
            "provider": {"kind": "oracle",
                         "oracle": {"perturbations": ["none"],
                                    "fail_probability": 0.0, "seed": 1}},
        }))
        out = tmp_path / "run_cfg"
        assert main(["run", "--corpus", str(tiny_corpus), "--out", str(out),
                     "--config", str(config)]) == 0
        assert "fallback=0" in capsys.readouterr().out
        # flags override the config file: the null provider wins
        out2 = tmp_path / "run_flag"
        assert main(["run", "--corpus", str(tiny_corpus), "--out", str(out2),
                     "--config", str(config), "--provider", "null"]) == 0
        assert "fallback=6" in capsys.readouterr().out


class TestReportAndCompare:
    def test_report_rows_per_case(self, tiny_corpus, tmp_path, capsys):
        run = tmp_path / "run"
        main(["run", "--corpus", str(tiny_corpus), "--out", str(run),
              "--provider", "null"])
        capsys.readouterr()
        assert main(["report", "--results", str(run / "results.jsonl"),
                     "--out", str(tmp_path / "rep")]) == 0
        text = (tmp_path / "rep" / "report.txt").read_text()
        case_rows = [l for l in text.splitlines() if l.startswith("case")]
        assert len(case_rows) == 2
        assert "±" in case_rows[0]

    def test_compare_run_against_itself(self, tiny_corpus, tmp_path):
        run = tmp_path / "run"
        main(["run", "--corpus", str(tiny_corpus), "--out", str(run),
              "--provider", "null"])
        out = tmp_path / "cmp"
        assert main(["compare", "--baseline", str(run), "--hybrid", str(run),
                     "--out", str(out)]) == 0
        text = (out / "comparison.txt").read_text()
        assert "Overall Improvement" in text
        assert "+0.00%" in text

    def test_report_missing_results_io_error(self, tmp_path):
        assert main(["report", "--results", str(tmp_path / "missing.jsonl")]) == 3


class TestGateDebug:
    def test_prints_reports_per_candidate(self, tiny_corpus, tmp_path, capsys):
        manifest = st.load_manifest(tiny_corpus)
        rec = manifest.records[0]
        gt = st.read_mask_pgm(manifest.resolve(rec.gt_mask_path))
        split = gt.copy()
        split[gt.shape[0] // 2, :] = False
        cands = tmp_path / "cands"
        st.write_candidates(cands, rec.id, [(gt, 0.97), (split, 0.95), (gt, 0.5)])
        code = main(["gate-debug", "--image", str(manifest.resolve(rec.image_path)),
                     "--candidates", str(cands)])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 3
        assert out[0].startswith("c0: PASS")
        assert "components" in out[1] and "FAIL" in out[1]
        assert "confidence" in out[2] and "FAIL" in out[2]

    def test_no_candidates_reports_fallback(self, tiny_corpus, tmp_path, capsys):
        manifest = st.load_manifest(tiny_corpus)
        rec = manifest.records[0]
        code = main(["gate-debug", "--image", str(manifest.resolve(rec.image_path)),
                     "--candidates", str(tmp_path / "empty")])
        assert code == 0
        assert "fallback" in capsys.readouterr().out

    def test_missing_image_io_error(self, tmp_path):
        assert main(["gate-debug", "--image", str(tmp_path / "no.pgm"),
                     "--candidates", str(tmp_path)]) == 3
