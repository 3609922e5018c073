"""On-disk formats for corpora and pipeline artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .alignment import BagEntry, SubsequenceBag
from .segment_clustering import UnitSequence
from .segmentation import BoundaryHypothesisSet, FrameMatrix, Segment, SegmentFeature


class MissingInputError(FileNotFoundError):
    """A stage input that should exist on disk does not."""


def require(path: Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing {what}: {path}")
    return path


def write_json(path: Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: Path) -> Iterator[dict]:
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# corpus manifest: {utt_id: {"features": path, "duration_ms": float, "frame_period_ms": float}}

def read_features_csv(path: Path) -> np.ndarray:
    with Path(path).open(encoding="utf-8", newline="") as f:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    return np.array(rows, dtype=float)


def write_features_csv(path: Path, frames: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        for row in frames:
            w.writerow([repr(float(x)) for x in row])


def load_corpus_manifest(path: Path) -> list[FrameMatrix]:
    path = require(path, "corpus manifest")
    manifest = read_json(path)
    out = []
    for utt_id in sorted(manifest):
        entry = manifest[utt_id]
        fpath = Path(entry["features"])
        if not fpath.is_absolute():
            fpath = path.parent / fpath
        frames = read_features_csv(require(fpath, f"feature file for {utt_id}"))
        out.append(FrameMatrix(utt_id, frames, float(entry.get("frame_period_ms", 10.0))))
    return out


def write_corpus(root: Path, frames: list[FrameMatrix], hyps: list[BoundaryHypothesisSet]) -> Path:
    """Write feature CSVs, boundary JSONs and the manifest under ``root``."""
    root = Path(root)
    manifest = {}
    for fm in frames:
        rel = Path("features") / f"{fm.utt_id}.csv"
        write_features_csv(root / rel, fm.frames)
        manifest[fm.utt_id] = {
            "features": rel.as_posix(),
            "duration_ms": fm.duration_ms,
            "frame_period_ms": fm.frame_period_ms,
        }
    for h in hyps:
        write_json(root / "boundaries" / f"{h.utt_id}.json", [list(x) for x in h.hypotheses])
    write_json(root / "manifest.json", manifest)
    return root / "manifest.json"


def load_boundaries(directory: Path | None, utt_id: str) -> BoundaryHypothesisSet | None:
    if directory is None:
        return None
    path = Path(directory) / f"{utt_id}.json"
    if not path.exists():
        return None
    return BoundaryHypothesisSet(utt_id, tuple(tuple(h) for h in read_json(path)))


def segment_rows(features: Iterable[SegmentFeature]) -> Iterator[dict]:
    for sf in features:
        yield {
            "utt_id": sf.utt_id,
            "span": [sf.segment.start_frame, sf.segment.end_frame],
            "vector": [float(x) for x in sf.vector],
        }


def read_segments(path: Path) -> list[SegmentFeature]:
    return [
        SegmentFeature(r["utt_id"], Segment(*r["span"]), np.array(r["vector"], dtype=float))
        for r in read_jsonl(require(path, "segment features"))
    ]


def write_transcriptions(path: Path, corpus: Iterable[UnitSequence]) -> None:
    write_jsonl(path, (u.to_dict() for u in corpus))


def read_transcriptions(path: Path) -> list[UnitSequence]:
    return [UnitSequence.from_dict(r) for r in read_jsonl(require(path, "transcriptions"))]


def write_bag(path: Path, bag: SubsequenceBag) -> None:
    write_jsonl(path, (e.to_dict() for e in bag))


def read_bag(path: Path) -> SubsequenceBag:
    return SubsequenceBag(BagEntry.from_dict(r) for r in read_jsonl(require(path, "subsequence bag")))
