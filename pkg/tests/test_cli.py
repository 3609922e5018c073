import json
from pathlib import Path

import pytest
import yaml

from termminer.cli import EXIT_INVARIANT, EXIT_MISSING, EXIT_OK, EXIT_USAGE, main
from termminer.config import ConfigError, PipelineConfig, apply_overrides, env_overrides, load_config
from termminer import pipeline


def _write_cfg(tmp_path: Path, out: Path, **sections) -> Path:
    tree = {
        "paths": {"output_dir": str(out)},
        "synth": {"num_utterances": 8, "num_keywords": 2, "utterance_length": [20, 30], "seed": 1},
        "mining": {"gap": -1, "traceback": "global"},
    }
    for k, v in sections.items():
        tree.setdefault(k, {}).update(v)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(tree))
    return p


def test_env_overrides():
    env = {"TERMMINER_MINING_GAP": "-1", "TERMMINER_CLUSTERING_RADIUS_T": "1.2", "OTHER": "x",
           "TERMMINER_SYNTH_MAX_KEYWORDS_PER_UTTERANCE": "1"}
    assert env_overrides(env)["mining"] == {"gap": "-1"}
    cfg = load_config(None, env)
    assert cfg.mining.gap == -1.0 and cfg.clustering.radius_T == 1.2
    assert cfg.synth.max_keywords_per_utterance == 1


def test_bad_overrides():
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), {"mining": {"gap": "lots"}})
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), {"nosuch": {"x": 1}})
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), {"mining": {"nosuch": 1}})
    cfg = apply_overrides(PipelineConfig(), {"mining": {"traceback": "sideways"}})
    with pytest.raises(ConfigError):
        cfg.validate()


def test_synth_mine_cluster_evaluate(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, out)
    assert main(["synth", "--config", str(cfg)]) == EXIT_OK
    assert main(["pipeline", "--config", str(cfg)]) == EXIT_OK
    for name in ("bag.jsonl", "clusters.json", "evaluation.json", "manifests/mine.json", "manifests/evaluate.json"):
        assert (out / name).exists(), name
    report = json.loads((out / "evaluation.json").read_text())
    assert "recovery" in report and "coverage" in report
    manifest = json.loads((out / "manifests" / "mine.json").read_text())
    assert manifest["parameters"]["mining"]["gap"] == -1.0
    assert "jobs" not in manifest["parameters"]["mining"]


def test_cluster_alias_and_flags(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, out)
    assert main(["synth", "--config", str(cfg)]) == EXIT_OK
    assert main(["mine", "--config", str(cfg), "--min-length", "5", "--traceback", "last-row"]) == EXIT_OK
    assert main(["cluster-keywords", "--config", str(cfg), "--radius-T", "1.0"]) == EXIT_OK
    m = json.loads((out / "manifests" / "cluster.json").read_text())
    assert m["parameters"]["clustering"]["radius_T"] == 1.0


def test_exit_codes(tmp_path, monkeypatch):
    out = tmp_path / "out"
    assert main(["mine", "-o", str(out)]) == EXIT_MISSING
    assert main(["mine", "-o", str(out), "--config", str(tmp_path / "nope.yaml")]) == EXIT_MISSING
    assert main(["mine", "-o", str(out), "--jobs", "0"]) == EXIT_USAGE
    assert main(["mine", "--no-such-flag"]) == EXIT_USAGE
    assert main(["segment", "-o", str(out)]) == EXIT_MISSING

    def broken(cfg):
        raise pipeline.InvariantViolation("forced")

    monkeypatch.setitem(pipeline.RUNNERS, "cluster", broken)
    assert main(["cluster", "-o", str(out)]) == EXIT_INVARIANT


def test_feature_front_end(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(
        tmp_path, out,
        synth={"features": True, "num_utterances": 4, "alphabet_size": 6, "utterance_length": [20, 24]},
        codebook={"k": 6},
    )
    assert main(["synth", "--config", str(cfg)]) == EXIT_OK
    manifest = out / "corpus" / "manifest.json"
    args = ["--config", str(cfg), "--manifest", str(manifest), "--boundaries", str(out / "corpus" / "boundaries")]
    assert main(["segment", *args]) == EXIT_OK
    assert main(["codebook", *args]) == EXIT_OK
    assert main(["transcribe", "--config", str(cfg)]) == EXIT_OK
    planted = [json.loads(l)["units"] for l in (out / "planted.jsonl").read_text().splitlines()]
    found = [json.loads(l)["units"] for l in (out / "transcriptions.jsonl").read_text().splitlines()]
    assert [len(x) for x in planted] == [len(x) for x in found]
    # well separated blobs: the codebook relabels units but keeps the partition
    mapping = {}
    for p, f in zip(sum(planted, []), sum(found, [])):
        assert mapping.setdefault(p, f) == f


def test_downstream_rerun_keeps_upstream(tmp_path):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path, out)
    main(["synth", "--config", str(cfg)])
    main(["mine", "--config", str(cfg)])
    before = (out / "bag.jsonl").read_bytes(), (out / "transcriptions.jsonl").read_bytes()
    main(["cluster", "--config", str(cfg)])
    main(["evaluate", "--config", str(cfg)])
    assert ((out / "bag.jsonl").read_bytes(), (out / "transcriptions.jsonl").read_bytes()) == before


def test_feature_run_recovers_like_token_run(tmp_path):
    base = {"synth": {"num_utterances": 10, "num_keywords": 2, "alphabet_size": 10, "utterance_length": [20, 26]},
            "codebook": {"k": 10}}
    results = []
    for features in (False, True):
        out = tmp_path / f"f{int(features)}"
        tree = {**base, "synth": {**base["synth"], "features": features}}
        cfg = _write_cfg(tmp_path, out, **tree)
        assert main(["synth", "--config", str(cfg)]) == EXIT_OK
        extra = []
        if features:
            extra = ["--manifest", str(out / "corpus" / "manifest.json"), "--boundaries", str(out / "corpus" / "boundaries")]
        assert main(["pipeline", "--config", str(cfg), *extra]) == EXIT_OK
        results.append(json.loads((out / "evaluation.json").read_text())["recovery"]["recovered"])
    assert results[0] == results[1]
