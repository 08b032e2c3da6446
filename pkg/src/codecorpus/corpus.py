"""Corpus record I/O: a directory of text files or a JSONL file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusFormatError(ValueError):
    """Unreadable corpus path or malformed record."""


@dataclass
class Document:
    """One corpus record: an opaque id and its UTF-8 text."""

    id: str
    text: str


def read_corpus(path: str | Path) -> tuple[list[Document], str]:
    """Load documents plus the detected format ("dir" or "jsonl").

    Directory corpora use the sorted relative file path as the document id;
    JSONL corpora carry explicit {"id", "text"} records.
    """
    path = Path(path)
    if path.is_dir():
        docs = []
        for file in sorted(p for p in path.rglob("*") if p.is_file()):
            docs.append(Document(id=file.relative_to(path).as_posix(),
                                 text=file.read_text(encoding="utf-8")))
        return docs, "dir"
    if path.is_file():
        docs = []
        with path.open(encoding="utf-8") as handle:
            for n, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    docs.append(Document(id=str(record["id"]), text=record["text"]))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorpusFormatError(f"{path}:{n}: bad corpus record: {exc}") from exc
        return docs, "jsonl"
    raise CorpusFormatError(f"corpus path does not exist: {path}")


def write_corpus(docs: list[Document], path: str | Path, fmt: str) -> None:
    """Emit documents in the same record format they were read in."""
    path = Path(path)
    if fmt == "dir":
        path.mkdir(parents=True, exist_ok=True)
        for doc in docs:
            target = path / doc.id
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(doc.text, encoding="utf-8")
    elif fmt == "jsonl":
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for doc in docs:
                handle.write(json.dumps({"id": doc.id, "text": doc.text},
                                        ensure_ascii=False) + "\n")
    else:
        raise CorpusFormatError(f"unknown corpus format: {fmt}")
