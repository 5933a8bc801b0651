import numpy as np
import pytest

import semtrace as st
from semtrace.providers import OracleConfig, apply_perturbation
from semtrace.synth import LayoutSpec, Rect, Rng, SynthParams


@pytest.fixture()
def mini_corpus(tmp_path):
    layout = LayoutSpec(48, 48, (Rect(14, 10, 20, 20),))
    path = st.make_corpus([layout], [SynthParams(bg_level=0, noise_sigma=5.0, seed=0)],
                          samples_per_case=4, seed=3, out_dir=tmp_path / "corpus")
    return st.load_manifest(path)


class TestDirectoryProvider:
    def test_reads_candidates_in_manifest_order(self, tmp_path):
        rng = np.random.default_rng(50)
        img = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
        masks = [np.zeros((20, 20), bool) for _ in range(3)]
        for i, m in enumerate(masks):
            m[i + 2:i + 8, 4:12] = True
        st.write_candidates(tmp_path, "img7", list(zip(masks, [0.91, 0.88, 0.95])))
        provider = st.DirectoryProvider(candidates_root=tmp_path)
        cands = provider.candidates_for("img7", img)
        assert [c.predicted_iou for c in cands] == [0.91, 0.88, 0.95]
        for c, m in zip(cands, masks):
            assert np.array_equal(c.mask, m)

    def test_missing_manifest_means_no_candidates(self, tmp_path):
        provider = st.DirectoryProvider(candidates_root=tmp_path)
        assert provider.candidates_for("absent", np.zeros((4, 4), np.uint8)) == []

    def test_round_trip_preserves_masks_and_scores(self, tmp_path):
        rng = np.random.default_rng(51)
        mask = rng.random((16, 16)) < 0.4
        st.write_candidates(tmp_path, "rt", [(mask, 0.4375)])
        cands = st.DirectoryProvider(tmp_path).candidates_for(
            "rt", np.zeros((16, 16), np.uint8))
        assert len(cands) == 1
        assert np.array_equal(cands[0].mask, mask)
        assert cands[0].predicted_iou == 0.4375

    def test_malformed_manifest_names_file(self, tmp_path):
        bad = tmp_path / "x.candidates.json"
        bad.write_text("{not json")
        with pytest.raises(ValueError, match="x.candidates.json"):
            st.DirectoryProvider(tmp_path).candidates_for("x", np.zeros((4, 4), np.uint8))

    def test_dimension_mismatch_names_mask_file(self, tmp_path):
        st.write_candidates(tmp_path, "y", [(np.ones((6, 6), bool), 0.9)])
        with pytest.raises(ValueError, match="y.cand0.pgm"):
            st.DirectoryProvider(tmp_path).candidates_for("y", np.zeros((8, 8), np.uint8))


class TestPerturbations:
    def test_erode_two_on_square(self):
        gt = np.zeros((32, 32), dtype=bool)
        gt[6:26, 6:26] = True   # 20x20 square
        out = apply_perturbation(gt, "erode:2", Rng(0))
        assert int(out.sum()) == 256
        assert st.mask_iou(out, gt) == pytest.approx(0.64)

    def test_none_is_identity(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[2:5, 2:5] = True
        assert np.array_equal(apply_perturbation(gt, "none", Rng(0)), gt)

    def test_translate(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[2:4, 2:4] = True
        out = apply_perturbation(gt, "translate:2,1", Rng(0))
        expected = np.zeros((8, 8), dtype=bool)
        expected[3:5, 4:6] = True
        assert np.array_equal(out, expected)

    def test_split_always_multiple_components(self):
        for h in (1, 3, 20):
            gt = np.zeros((24, 24), dtype=bool)
            gt[2:2 + h, 4:20] = True
            out = apply_perturbation(gt, "split:2", Rng(0))
            assert st.mask_count(out) >= 2

    def test_flip_noise_flips_roughly_p_fraction(self):
        gt = np.zeros((50, 50), dtype=bool)
        out = apply_perturbation(gt, "flip_noise:0.2", Rng(9))
        assert 0.12 < out.mean() < 0.28

    def test_unknown_spec_rejected(self):
        with pytest.raises(ValueError):
            OracleConfig(perturbations=("grow:1",))
        with pytest.raises(ValueError):
            OracleConfig(score_mode="best")


class TestOracleProvider:
    def test_identity_perturbation_scores_one(self, mini_corpus):
        provider = st.OracleProvider(
            cfg=OracleConfig(perturbations=("none",), score_mode="true_iou"),
            corpus=mini_corpus)
        rec = mini_corpus.records[0]
        img = st.read_pgm(mini_corpus.resolve(rec.image_path))
        cands = provider.candidates_for(rec.id, img)
        assert len(cands) == 1
        assert cands[0].predicted_iou == 1.0
        gt = st.read_mask_pgm(mini_corpus.resolve(rec.gt_mask_path))
        assert np.array_equal(cands[0].mask, gt)

    def test_fixed_score_mode(self, mini_corpus):
        provider = st.OracleProvider(
            cfg=OracleConfig(perturbations=("erode:1",), score_mode="fixed:0.77"),
            corpus=mini_corpus)
        rec = mini_corpus.records[0]
        img = st.read_pgm(mini_corpus.resolve(rec.image_path))
        assert provider.candidates_for(rec.id, img)[0].predicted_iou == 0.77

    def test_forced_failure_mode_fails_gate(self, mini_corpus):
        provider = st.OracleProvider(
            cfg=OracleConfig(perturbations=("none",), fail_probability=1.0, seed=5),
            corpus=mini_corpus)
        for rec in mini_corpus.records:
            img = st.read_pgm(mini_corpus.resolve(rec.image_path))
            cands = provider.candidates_for(rec.id, img)
            selection, reports = st.select_candidate(cands, st.GateConfig())
            assert selection is None
            assert all(not r.topology_pass for r in reports)

    def test_deterministic_per_image(self, mini_corpus):
        cfg = OracleConfig(perturbations=("erode:1", "flip_noise:0.01"),
                           fail_probability=0.5, seed=8)
        rec = mini_corpus.records[1]
        img = st.read_pgm(mini_corpus.resolve(rec.image_path))
        a = st.OracleProvider(cfg=cfg, corpus=mini_corpus).candidates_for(rec.id, img)
        b = st.OracleProvider(cfg=cfg, corpus=mini_corpus).candidates_for(rec.id, img)
        assert len(a) == len(b)
        for ca, cb in zip(a, b):
            assert ca.predicted_iou == cb.predicted_iou
            assert np.array_equal(ca.mask, cb.mask)

    def test_failure_set_independent_of_perturbation_list(self, mini_corpus):
        def failing_ids(perturbations):
            cfg = OracleConfig(perturbations=perturbations, fail_probability=0.5, seed=12)
            provider = st.OracleProvider(cfg=cfg, corpus=mini_corpus)
            failed = set()
            for rec in mini_corpus.records:
                img = st.read_pgm(mini_corpus.resolve(rec.image_path))
                cands = provider.candidates_for(rec.id, img)
                if all(st.mask_count(c.mask) >= 2 for c in cands):
                    failed.add(rec.id)
            return failed

        assert failing_ids(("none",)) == failing_ids(("erode:1", "dilate:1"))

    def test_unknown_image_id_rejected(self, mini_corpus):
        provider = st.OracleProvider(cfg=OracleConfig(), corpus=mini_corpus)
        with pytest.raises(KeyError):
            provider.candidates_for("nope", np.zeros((4, 4), np.uint8))


class TestNullProvider:
    def test_always_empty(self):
        provider = st.NullProvider()
        assert provider.candidates_for("anything", np.zeros((4, 4), np.uint8)) == []
