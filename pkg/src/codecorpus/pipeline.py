"""Corpus building: token-budget sampling, depth stratification, ablation
variants, and fixed-length sequence packing with manifests.

Per-document stages (parsing, transforming, encoding) parallelize across
processes; outputs are identical for any worker count because per-document
seeds derive from the document id, not the schedule.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import bpe, syntax, transforms
from .corpus import Document
from .seeding import derive_seed

SHARD_MAX_ROWS = 1_000_000

T = TypeVar("T")
R = TypeVar("R")

# Worker-process state, set once per process by the pool initializer.
_worker_vocab: bpe.BpeVocabulary | None = None


def _init_encode_worker(vocab_path: str, merges_path: str) -> None:
    global _worker_vocab
    _worker_vocab = bpe.load_vocabulary(vocab_path, merges_path)


def _encode_worker(text: str) -> list[int]:
    assert _worker_vocab is not None
    return _worker_vocab.encode(text)


def _depth_worker(text: str) -> int | None:
    try:
        return syntax.depth(syntax.parse(text))
    except syntax.ParseError:
        return None


def _transform_worker(args: tuple[str, str, str, int]) -> tuple[str, str | None]:
    doc_id, text, mode_value, seed = args
    try:
        return doc_id, transforms.transform_source(
            text, transforms.TransformMode(mode_value), seed=seed, source_id=doc_id)
    except syntax.ParseError:
        return doc_id, None


def _parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int,
                  initializer=None, initargs=()) -> list[R]:
    if workers <= 1 or len(items) < 2:
        if initializer is not None:
            initializer(*initargs)
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, initializer=initializer,
                             initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


@dataclass
class CorpusManifest:
    """Everything needed to reproduce one packed dataset bit-exactly."""

    source: str = ""
    token_budget: int | None = None
    seed: int | None = None
    transform: dict | None = None
    depth_bin: str | None = None
    sequence_length: int = 0
    documents_used: int = 0
    tokens_emitted: int = 0
    sequences_emitted: int = 0
    dropped_tail: int = 0
    parse_failures: int = 0
    budget_exhausted: bool = False
    document_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "token_budget": self.token_budget,
            "seed": self.seed,
            "transform": self.transform,
            "depth_bin": self.depth_bin,
            "sequence_length": self.sequence_length,
            "documents_used": self.documents_used,
            "tokens_emitted": self.tokens_emitted,
            "sequences_emitted": self.sequences_emitted,
            "dropped_tail": self.dropped_tail,
            "parse_failures": self.parse_failures,
            "budget_exhausted": self.budget_exhausted,
            "document_ids": self.document_ids,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CorpusManifest":
        return cls(**{k: payload[k] for k in cls.__dataclass_fields__ if k in payload})


@dataclass
class PackedDataset:
    """Fixed-length token-id rows with delimiter bookkeeping."""

    sequence_length: int
    sequences: np.ndarray  # shape (n, sequence_length), uint32
    manifest: CorpusManifest

    def save(self, outdir: str | Path) -> None:
        """Write little-endian u32 shards plus a JSON sidecar manifest."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        shards = []
        rows = np.ascontiguousarray(self.sequences, dtype="<u4")
        for i in range(0, len(rows), SHARD_MAX_ROWS):
            chunk = rows[i:i + SHARD_MAX_ROWS]
            name = f"tokens-{i // SHARD_MAX_ROWS:05d}.bin"
            chunk.tofile(outdir / name)
            shards.append({"file": name, "rows": int(len(chunk))})
        payload = self.manifest.to_dict()
        payload["shards"] = shards
        (outdir / "manifest.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, outdir: str | Path) -> "PackedDataset":
        outdir = Path(outdir)
        payload = json.loads((outdir / "manifest.json").read_text(encoding="utf-8"))
        manifest = CorpusManifest.from_dict(payload)
        length = manifest.sequence_length
        chunks = []
        for shard in payload["shards"]:
            data = np.fromfile(outdir / shard["file"], dtype="<u4")
            chunks.append(data.reshape(-1, length) if length else data.reshape(0, 0))
        if chunks:
            sequences = np.vstack(chunks)
        else:
            sequences = np.zeros((0, length), dtype="<u4")
        return cls(sequence_length=length, sequences=sequences, manifest=manifest)


@dataclass
class SampleStats:
    tokens_counted: int
    exhausted: bool


def sample_documents(docs: Sequence[Document], token_budget: int, seed: int,
                     vocab: bpe.BpeVocabulary) -> tuple[list[Document], SampleStats]:
    """Seeded shuffle, then take documents until the budget is first crossed.

    If the corpus runs out below the budget, every document is returned and
    the exhausted flag is set for the manifest.
    """
    if token_budget <= 0:
        raise ValueError("token_budget must be positive")
    order = list(docs)
    random.Random(seed).shuffle(order)
    sampled: list[Document] = []
    total = 0
    for doc in order:
        sampled.append(doc)
        total += len(vocab.encode(doc.text))
        if total >= token_budget:
            return sampled, SampleStats(tokens_counted=total, exhausted=False)
    return sampled, SampleStats(tokens_counted=total, exhausted=True)


@dataclass
class StratificationResult:
    bins: dict[syntax.DepthBin, list[Document]]
    overflow: list[Document]
    failures: list[str]


def stratify_by_depth(docs: Sequence[Document],
                      bins: syntax.DepthBins = syntax.DEFAULT_BINS,
                      workers: int = 1) -> StratificationResult:
    """Partition parseable documents into shallow/middle/deep by syntax depth.

    Parse failures and over-deep documents are excluded from every subset.
    """
    depths = _parallel_map(_depth_worker, [d.text for d in docs], workers)
    result = StratificationResult(
        bins={syntax.DepthBin.SHALLOW: [], syntax.DepthBin.MIDDLE: [],
              syntax.DepthBin.DEEP: []},
        overflow=[], failures=[])
    for doc, d in zip(docs, depths):
        if d is None:
            result.failures.append(doc.id)
            continue
        target = syntax.classify_depth(d, bins)
        if target is syntax.DepthBin.OVERFLOW:
            result.overflow.append(doc)
        else:
            result.bins[target].append(doc)
    return result


def depth_profile(docs: Sequence[Document], workers: int = 1) -> syntax.DepthProfile:
    """Corpus depth histogram; worker partitions merge associatively."""
    depths = _parallel_map(_depth_worker, [d.text for d in docs], workers)
    profile = syntax.DepthProfile()
    for d in depths:
        if d is None:
            profile.add_failure()
        else:
            profile.add(d)
    return profile


def transform_corpus(docs: Sequence[Document], spec: transforms.TransformSpec,
                     workers: int = 1) -> tuple[list[Document], dict[str, str]]:
    """Transform each document with its derived seed; 1:1 with the input.

    Documents the grammar rejects pass through unchanged and are flagged in
    the returned per-document status map.
    """
    jobs = [(d.id, d.text, spec.mode.value, derive_seed(spec.seed, d.id)) for d in docs]
    results = _parallel_map(_transform_worker, jobs, workers)
    out: list[Document] = []
    status: dict[str, str] = {}
    for doc, (_, text) in zip(docs, results):
        if text is None:
            out.append(Document(id=doc.id, text=doc.text))
            status[doc.id] = "parse_failed"
        else:
            out.append(Document(id=doc.id, text=text))
            status[doc.id] = "ok"
    return out, status


def encode_documents(docs: Sequence[Document], vocab: bpe.BpeVocabulary,
                     workers: int = 1,
                     vocab_paths: tuple[str, str] | None = None) -> list[list[int]]:
    """Token ids per document, in document order."""
    texts = [d.text for d in docs]
    if workers > 1 and vocab_paths is not None:
        return _parallel_map(_encode_worker, texts, workers,
                             initializer=_init_encode_worker, initargs=vocab_paths)
    return [vocab.encode(t) for t in texts]


def pack_encoded(token_lists: Sequence[Sequence[int]], end_of_text_id: int,
                 sequence_length: int) -> tuple[np.ndarray, int, int]:
    """Chunk delimited token streams into fixed-length rows.

    One delimiter follows every document, including the last. Returns the
    rows, the total stream length, and the dropped partial tail.
    """
    if sequence_length < 2:
        raise ValueError("sequence_length must be >= 2")
    rows: list[np.ndarray] = []
    buffer: list[int] = []
    total = 0
    for ids in token_lists:
        buffer.extend(ids)
        buffer.append(end_of_text_id)
        total += len(ids) + 1
        while len(buffer) >= sequence_length:
            rows.append(np.asarray(buffer[:sequence_length], dtype="<u4"))
            del buffer[:sequence_length]
    sequences = (np.vstack(rows) if rows
                 else np.zeros((0, sequence_length), dtype="<u4"))
    return sequences, total, len(buffer)


def pack(docs: Sequence[Document], vocab: bpe.BpeVocabulary, sequence_length: int,
         source: str = "", workers: int = 1,
         vocab_paths: tuple[str, str] | None = None) -> PackedDataset:
    """Encode, delimit, and chunk documents into a packed dataset."""
    encoded = encode_documents(docs, vocab, workers=workers, vocab_paths=vocab_paths)
    sequences, total, tail = pack_encoded(encoded, vocab.end_of_text_id, sequence_length)
    manifest = CorpusManifest(
        source=source,
        sequence_length=sequence_length,
        documents_used=len(docs),
        tokens_emitted=total,
        sequences_emitted=int(len(sequences)),
        dropped_tail=tail,
        document_ids=[d.id for d in docs],
    )
    return PackedDataset(sequence_length=sequence_length, sequences=sequences,
                         manifest=manifest)


ABLATION_MODES = (transforms.TransformMode.RAW,
                  transforms.TransformMode.COMMENT_FREE,
                  transforms.TransformMode.COMMENT_FREE_SCRAMBLED,
                  transforms.TransformMode.COMMENT_FREE_RANDOMIZED)


def build_ablation_corpora(docs: Sequence[Document], vocab: bpe.BpeVocabulary,
                           seed: int, sequence_length: int,
                           token_budget: int | None = None, source: str = "",
                           workers: int = 1,
                           vocab_paths: tuple[str, str] | None = None,
                           ) -> dict[transforms.TransformMode, PackedDataset]:
    """One packed dataset per ablation mode over one shared document sample.

    Documents are sampled from the raw corpus first and transformed second,
    so the four variants enumerate the same document ids in the same order;
    grammar rejects are excluded identically from all variants.
    """
    parseable: list[Document] = []
    failures = 0
    for doc, d in zip(docs, _parallel_map(_depth_worker, [x.text for x in docs], workers)):
        if d is None:
            failures += 1
        else:
            parseable.append(doc)

    exhausted = False
    if token_budget is not None:
        sampled, stats = sample_documents(parseable, token_budget, seed, vocab)
        exhausted = stats.exhausted
    else:
        sampled = parseable

    out: dict[transforms.TransformMode, PackedDataset] = {}
    for mode in ABLATION_MODES:
        spec = transforms.TransformSpec(mode=mode, seed=seed)
        variant_docs, status = transform_corpus(sampled, spec, workers=workers)
        bad = [i for i, s in status.items() if s != "ok"]
        if bad:
            raise RuntimeError(f"pre-filtered documents failed to transform: {bad[:3]}")
        dataset = pack(variant_docs, vocab, sequence_length, source=source,
                       workers=workers, vocab_paths=vocab_paths)
        dataset.manifest.seed = seed
        dataset.manifest.token_budget = token_budget
        dataset.manifest.transform = spec.to_json()
        dataset.manifest.parse_failures = failures
        dataset.manifest.budget_exhausted = exhausted
        out[mode] = dataset
    return out
