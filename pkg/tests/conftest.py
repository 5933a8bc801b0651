"""Shared fixtures: the standard 10x50 synthetic corpus and the three
pipeline runs (fallback-only, hybrid, directory-with-gaps) used by the
acceptance suite and a few integration tests.
"""

from __future__ import annotations

from pathlib import Path

import pytest

import semtrace as st

from helpers import CORPUS_SEED, ORACLE_PERTURBATIONS


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> st.synth.CorpusManifest:
    root = tmp_path_factory.mktemp("corpus500")
    manifest_path = st.make_corpus(st.default_layouts(), st.default_cases(),
                                   samples_per_case=50, seed=CORPUS_SEED, out_dir=root)
    return st.load_manifest(manifest_path)


@pytest.fixture(scope="session")
def baseline_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_baseline")
    cfg = st.PipelineConfig(provider=st.ProviderConfig(kind="null"))
    return st.run_batch(corpus, out, cfg)


@pytest.fixture(scope="session")
def hybrid_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_hybrid")
    oracle = st.OracleConfig(perturbations=ORACLE_PERTURBATIONS,
                             score_mode="true_iou", fail_probability=0.1,
                             seed=CORPUS_SEED)
    cfg = st.PipelineConfig(provider=st.ProviderConfig(kind="oracle", oracle=oracle))
    return st.run_batch(corpus, out, cfg)


@pytest.fixture(scope="session")
def gapped_candidates_dir(corpus, tmp_path_factory) -> Path:
    """Interchange fixtures for every other corpus image; the rest are gaps."""
    root = tmp_path_factory.mktemp("candidates_gapped")
    for i, record in enumerate(corpus.records):
        if i % 2 == 1:
            continue
        gt = st.read_mask_pgm(corpus.resolve(record.gt_mask_path))
        grown = st.dilate(gt, st.StructuringElement(3, "square"))
        st.write_candidates(root, record.id,
                            [(grown, st.mask_iou(grown, gt)), (gt, 0.99)])
    return root


@pytest.fixture(scope="session")
def gapped_run(corpus, gapped_candidates_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_gapped")
    cfg = st.PipelineConfig(provider=st.ProviderConfig(
        kind="directory", candidates_root=str(gapped_candidates_dir)))
    return st.run_batch(corpus, out, cfg)
