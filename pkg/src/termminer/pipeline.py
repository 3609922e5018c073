"""Pipeline stages.  Each stage reads declared inputs and writes declared outputs
under the output directory, plus a ``manifests/<stage>.json`` record of its
parameters and the SHA-256 of every file it read or wrote.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import mine_pairs
from .config import PipelineConfig
from .evaluation import (
    DEFAULT_STOPWORDS,
    cluster_purity,
    cluster_word_labels,
    coverage_match,
    load_stopwords,
    recovered_keywords,
    top_ngrams,
    tokenize,
)
from .io import (
    MissingInputError,
    load_boundaries,
    load_corpus_manifest,
    read_bag,
    read_json,
    read_segments,
    read_transcriptions,
    require,
    segment_rows,
    sha256_file,
    write_bag,
    write_corpus,
    write_json,
    write_jsonl,
    write_transcriptions,
)
from .leader import ClusteringResult, cluster_report, leader_cluster
from .segment_clustering import Codebook, hac_ward, kmeans, suggest_k, transcribe
from .segmentation import merge_boundaries, segment_utterance
from .string_metrics import normalized_levenshtein
from .synthesis import GroundTruth, generate_corpus, generate_frames

logger = logging.getLogger(__name__)

STAGES = ("synth", "segment", "codebook", "transcribe", "mine", "cluster", "evaluate")


class InvariantViolation(RuntimeError):
    """An internal consistency check on a stage's output failed."""


def _out(cfg: PipelineConfig) -> Path:
    p = Path(cfg.paths.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _record(cfg: PipelineConfig, stage: str, params: dict, inputs: dict[str, Path], outputs: dict[str, Path]) -> Path:
    def describe(paths: dict[str, Path]) -> dict:
        return {name: {"file": Path(p).name, "sha256": sha256_file(p)} for name, p in sorted(paths.items())}

    path = _out(cfg) / "manifests" / f"{stage}.json"
    write_json(path, {
        "stage": stage,
        "version": __version__,
        "parameters": params,
        "inputs": describe(inputs),
        "outputs": describe(outputs),
    })
    return path


def transcriptions_path(cfg: PipelineConfig) -> Path:
    if cfg.paths.transcriptions:
        return Path(cfg.paths.transcriptions)
    return _out(cfg) / "transcriptions.jsonl"


def ground_truth_path(cfg: PipelineConfig) -> Path:
    if cfg.paths.ground_truth:
        return Path(cfg.paths.ground_truth)
    return _out(cfg) / "ground_truth.json"


def run_synth(cfg: PipelineConfig) -> dict[str, Path]:
    s = cfg.synth
    out = _out(cfg)
    corpus, truth = generate_corpus(s.synth_config())
    outputs = {"ground_truth": out / "ground_truth.json"}
    write_json(outputs["ground_truth"], truth.to_dict())
    if s.features:
        frames, hyps = generate_frames(corpus, s.alphabet_size, dim=s.feature_dim, seed=s.seed)
        outputs["corpus_manifest"] = write_corpus(out / "corpus", frames, hyps)
        outputs["planted"] = out / "planted.jsonl"
        write_transcriptions(outputs["planted"], corpus)
    else:
        outputs["transcriptions"] = out / "transcriptions.jsonl"
        write_transcriptions(outputs["transcriptions"], corpus)
    _record(cfg, "synth", {"synth": vars(s).copy()}, {}, outputs)
    logger.info("synthesized %d utterances", len(corpus))
    return outputs


def run_segment(cfg: PipelineConfig) -> dict[str, Path]:
    if not cfg.paths.manifest:
        raise MissingInputError("segment needs a corpus manifest (--manifest)")
    manifest = require(Path(cfg.paths.manifest), "corpus manifest")
    bdir = Path(cfg.paths.boundaries) if cfg.paths.boundaries else None
    if bdir is not None:
        require(bdir, "boundary directory")
    out = _out(cfg)
    window = cfg.segmentation.window_ms
    merged, features = {}, []
    for fm in load_corpus_manifest(manifest):
        hyps = load_boundaries(bdir, fm.utt_id)
        merged[fm.utt_id] = merge_boundaries(hyps, window) if hyps is not None and any(hyps.hypotheses) else []
        features.extend(segment_utterance(fm, hyps, window))
    outputs = {"segments": out / "segments.jsonl", "merged_boundaries": out / "merged_boundaries.json"}
    write_jsonl(outputs["segments"], segment_rows(features))
    write_json(outputs["merged_boundaries"], merged)
    _record(cfg, "segment", {"segmentation": vars(cfg.segmentation).copy()}, {"manifest": manifest}, outputs)
    logger.info("%d segments from %d utterances", len(features), len(merged))
    return outputs


def run_codebook(cfg: PipelineConfig) -> dict[str, Path]:
    out = _out(cfg)
    seg_path = require(out / "segments.jsonl", "segment features")
    segs = read_segments(seg_path)
    X = np.stack([s.vector for s in segs])
    c = cfg.codebook
    dendro = hac_ward(X, sample_cap=c.hac_sample_cap, seed=c.seed)
    if np.any(np.diff(dendro.heights) < 0):
        raise InvariantViolation("Ward merge heights are not monotone")
    res = kmeans(X, k=c.k, seed=c.seed, max_iters=c.max_iters)
    outputs = {
        "codebook": out / "codebook.json",
        "dendrogram": out / "dendrogram.json",
        "k_suggestions": out / "k_suggestions.json",
    }
    write_json(outputs["codebook"], res.codebook.to_dict())
    write_json(outputs["dendrogram"], dendro.to_dict())
    write_json(outputs["k_suggestions"], [[k, g] for k, g in suggest_k(dendro, min(c.suggest_max_k, dendro.leaf_count))])
    _record(cfg, "codebook", {"codebook": vars(c).copy(), "kmeans_iterations": res.n_iter}, {"segments": seg_path}, outputs)
    return outputs


def run_transcribe(cfg: PipelineConfig) -> dict[str, Path]:
    out = _out(cfg)
    cb_path = require(out / "codebook.json", "codebook")
    seg_path = require(out / "segments.jsonl", "segment features")
    codebook = Codebook.from_dict(read_json(cb_path))
    by_utt: dict[str, list] = {}
    for s in read_segments(seg_path):
        by_utt.setdefault(s.utt_id, []).append(s)
    corpus = [transcribe(codebook, by_utt[u], u) for u in sorted(by_utt)]
    outputs = {"transcriptions": out / "transcriptions.jsonl"}
    write_transcriptions(outputs["transcriptions"], corpus)
    _record(cfg, "transcribe", {}, {"codebook": cb_path, "segments": seg_path}, outputs)
    return outputs


def run_mine(cfg: PipelineConfig) -> dict[str, Path]:
    out = _out(cfg)
    tpath = require(transcriptions_path(cfg), "transcriptions")
    m = cfg.mining
    bag = mine_pairs(read_transcriptions(tpath), m.scheme(), m.min_length, m.traceback, m.jobs)
    outputs = {"bag": out / "bag.jsonl"}
    write_bag(outputs["bag"], bag)
    params = {k: v for k, v in vars(m).items() if k != "jobs"}
    _record(cfg, "mine", {"mining": params, "pairs_aligned": bag.pairs_aligned}, {"transcriptions": tpath}, outputs)
    logger.info("%d bag entries from %d pairs", len(bag), bag.pairs_aligned)
    return outputs


def run_cluster(cfg: PipelineConfig) -> dict[str, Path]:
    out = _out(cfg)
    bag_path = require(out / "bag.jsonl", "subsequence bag")
    bag = read_bag(bag_path)
    mc = cfg.mining_config()
    if len(bag) == 0:
        result = ClusteringResult([], [], 0)
    else:
        result = leader_cluster(bag, mc, cfg.clustering.max_rounds)
    for c in result.clusters:
        if any(normalized_levenshtein(c.centroid, m.units, mc.norm_b) >= mc.radius_T for m in c.members):
            raise InvariantViolation(f"cluster {c.cluster_id} has a member outside the radius")
    outputs = {"clusters": out / "clusters.json", "cluster_report": out / "cluster_report.json"}
    write_json(outputs["clusters"], result.to_dict())
    write_json(outputs["cluster_report"], {
        "by_centroid_length": cluster_report(result, cfg.evaluation.report_top, "centroid_length"),
        "by_size": cluster_report(result, cfg.evaluation.report_top, "size"),
    })
    _record(cfg, "cluster", {"clustering": vars(cfg.clustering).copy()}, {"bag": bag_path}, outputs)
    return outputs


def _purity_csv(purity) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster_id", "dominant_label", "size", "purity"])
    for c in purity.clusters:
        w.writerow([c.cluster_id, c.dominant_label, c.size, f"{c.purity:.6f}"])
    return buf.getvalue()


def _relabel_inventory(truth: GroundTruth, planted: list, found: list) -> GroundTruth:
    """Express planted keywords in the codebook's unit labels.

    k-means numbers its units arbitrarily, so each planted unit is mapped to
    the transcribed unit it most often lines up with.  Utterances whose
    transcription length differs from the planted one are skipped.
    """
    votes: dict[int, Counter] = {}
    by_id = {u.utt_id: u for u in found}
    for p in planted:
        f = by_id.get(p.utt_id)
        if f is None or len(f.units) != len(p.units):
            continue
        for a, b in zip(p.units, f.units):
            votes.setdefault(a, Counter())[b] += 1
    mapping = {a: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0] for a, c in votes.items()}
    inventory = {k: tuple(mapping.get(u, -1) for u in seq) for k, seq in truth.inventory.items()}
    return GroundTruth(inventory, truth.occurrences, truth.words)


def run_evaluate(cfg: PipelineConfig) -> dict[str, Path]:
    out = _out(cfg)
    e = cfg.evaluation
    cl_path = require(out / "clusters.json", "clusters")
    result = ClusteringResult.from_dict(read_json(cl_path))
    inputs = {"clusters": cl_path}
    gt_path = ground_truth_path(cfg)
    truth = None
    if gt_path.exists():
        truth = GroundTruth.from_dict(read_json(gt_path))
        inputs["ground_truth"] = gt_path
        planted_path = out / "planted.jsonl"
        if planted_path.exists() and transcriptions_path(cfg).exists():
            inputs["planted"] = planted_path
            inputs["transcriptions"] = transcriptions_path(cfg)
            truth = _relabel_inventory(truth, read_transcriptions(planted_path), read_transcriptions(inputs["transcriptions"]))
    elif cfg.paths.ground_truth:
        require(gt_path, "ground truth")

    report: dict = {}
    outputs = {"evaluation": out / "evaluation.json"}
    labels: dict[int, list[str]] = {}
    if truth is not None:
        purity = cluster_purity(result, truth)
        recovered = sorted(recovered_keywords(result, truth))
        near = sorted(recovered_keywords(result, truth, cfg.clustering.radius_T, cfg.clustering.norm_b))
        report["purity"] = purity.to_dict()
        report["recovery"] = {
            "recovered": recovered,
            "within_radius": near,
            "total": len(truth.inventory),
            "rate": len(recovered) / len(truth.inventory) if truth.inventory else 0.0,
        }
        labels = cluster_word_labels(purity, e.min_label_purity)
        outputs["purity_csv"] = out / "purity.csv"
        outputs["purity_csv"].write_text(_purity_csv(purity), encoding="utf-8")
    if e.labels:
        lpath = require(Path(e.labels), "cluster label mapping")
        inputs["labels"] = lpath
        labels = {int(k): ([v] if isinstance(v, str) else list(v)) for k, v in read_json(lpath).items()}

    stopwords = DEFAULT_STOPWORDS
    if e.stopwords:
        inputs["stopwords"] = require(Path(e.stopwords), "stopword file")
        stopwords = load_stopwords(inputs["stopwords"])
    if e.transcript:
        inputs["transcript"] = require(Path(e.transcript), "reference transcript")
        transcripts = [tokenize(line) for line in inputs["transcript"].read_text(encoding="utf-8").splitlines()]
    elif truth is not None:
        transcripts = [truth.transcript(u) for u in sorted(truth.words)]
    else:
        transcripts = []
    if transcripts:
        ngrams = top_ngrams(transcripts, {3: e.top_trigrams, 2: e.top_bigrams, 1: e.top_unigrams}, stopwords)
        coverage = coverage_match(labels, ngrams, stopwords)
        report["coverage"] = coverage.to_dict()
        report["coverage"]["rate_by_n"] = {str(n): coverage.rate_for(n) for n in (3, 2, 1)}
        outputs["coverage_csv"] = out / "coverage.csv"
        outputs["coverage_csv"].write_text(coverage.to_csv(), encoding="utf-8")
    write_json(outputs["evaluation"], report)
    _record(cfg, "evaluate", {"evaluation": vars(e).copy()}, inputs, outputs)
    return outputs


RUNNERS = {
    "synth": run_synth,
    "segment": run_segment,
    "codebook": run_codebook,
    "transcribe": run_transcribe,
    "mine": run_mine,
    "cluster": run_cluster,
    "evaluate": run_evaluate,
}


def run_pipeline(cfg: PipelineConfig) -> dict[str, Path]:
    """Chain the stages; the acoustic front end runs only when a corpus manifest is configured."""
    stages = ["segment", "codebook", "transcribe"] if cfg.paths.manifest else []
    stages += ["mine", "cluster", "evaluate"]
    outputs: dict[str, Path] = {}
    for stage in stages:
        logger.info("stage %s", stage)
        outputs.update(RUNNERS[stage](cfg))
    return outputs


def summarize(outputs: dict[str, Path]) -> str:
    return json.dumps({k: str(v) for k, v in sorted(outputs.items())}, indent=2)
