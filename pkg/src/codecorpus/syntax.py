"""Parsing, canonical unparsing, and the syntax-depth metric for Python source.

Trees follow the abstract grammar of the running CPython interpreter (the
stdlib ``ast`` module). Unparsing emits canonical formatting: 4-space
indentation, single-quoted strings, one blank line before top-level
function and class definitions.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

# Token-like leaf categories (expression contexts, operator tags) are not
# structural hierarchy and do not contribute to depth or node-kind shape.
_TOKEN_LEAVES = (ast.expr_context, ast.boolop, ast.operator, ast.unaryop, ast.cmpop)


class ParseError(ValueError):
    """Source text that the Python grammar rejects.

    Documents raising this are excluded from stratified corpora.
    """

    def __init__(self, msg: str, source_id: str = "", lineno: int | None = None,
                 offset: int | None = None):
        super().__init__(msg)
        self.msg = msg
        self.source_id = source_id
        self.lineno = lineno
        self.offset = offset


@dataclass
class SyntaxTree:
    """A parsed source document: module root plus an opaque document id."""

    root: ast.Module
    source_id: str = ""


def parse(source: str, source_id: str = "") -> SyntaxTree:
    """Parse source text into a syntax tree; raises ParseError on bad input."""
    try:
        root = ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        lineno = getattr(exc, "lineno", None)
        offset = getattr(exc, "offset", None)
        raise ParseError(str(exc), source_id=source_id, lineno=lineno, offset=offset) from exc
    return SyntaxTree(root=root, source_id=source_id)


def unparse(tree: SyntaxTree) -> str:
    """Emit canonical source text for a tree; the output re-parses."""
    return ast.unparse(tree.root)


def iter_children(node: ast.AST) -> Iterator[ast.AST]:
    """Structural children of a node, skipping token-like leaf fields."""
    for child in ast.iter_child_nodes(node):
        if not isinstance(child, _TOKEN_LEAVES):
            yield child


def depth(tree: SyntaxTree) -> int:
    """Number of nodes on the longest root-to-leaf path, module root = 1.

    Iterative so that pathologically deep documents cannot hit the
    interpreter recursion limit.
    """
    best = 0
    stack: list[tuple[ast.AST, int]] = [(tree.root, 1)]
    while stack:
        node, d = stack.pop()
        if d > best:
            best = d
        for child in iter_children(node):
            stack.append((child, d + 1))
    return best


def kind_signature(tree: SyntaxTree) -> tuple:
    """Nested node-kind shape of a tree, for isomorphism comparisons."""

    def sig(node: ast.AST) -> tuple:
        return (type(node).__name__,) + tuple(sig(c) for c in iter_children(node))

    return sig(tree.root)


def is_isomorphic(a: SyntaxTree, b: SyntaxTree) -> bool:
    """True when two trees have identical node-kind shape (payloads ignored)."""
    return kind_signature(a) == kind_signature(b)


class DepthBin(Enum):
    SHALLOW = "shallow"
    MIDDLE = "middle"
    DEEP = "deep"
    OVERFLOW = "overflow"


@dataclass(frozen=True)
class DepthBins:
    """Inclusive upper edges of the shallow/middle/deep depth bins."""

    shallow_max: int = 7
    middle_max: int = 11
    deep_max: int = 20


DEFAULT_BINS = DepthBins()


def classify_depth(d: int, bins: DepthBins = DEFAULT_BINS) -> DepthBin:
    """Bin a depth value; Overflow falls outside every stratified subset."""
    if d < 1:
        raise ValueError(f"depth must be >= 1, got {d}")
    if d <= bins.shallow_max:
        return DepthBin.SHALLOW
    if d <= bins.middle_max:
        return DepthBin.MIDDLE
    if d <= bins.deep_max:
        return DepthBin.DEEP
    return DepthBin.OVERFLOW


@dataclass
class DepthProfile:
    """Corpus-level histogram of syntax depth with parse-failure tally."""

    histogram: dict[int, int] = field(default_factory=dict)
    parsed: int = 0
    failed: int = 0

    def add(self, d: int) -> None:
        self.histogram[d] = self.histogram.get(d, 0) + 1
        self.parsed += 1

    def add_failure(self) -> None:
        self.failed += 1

    def merge(self, other: "DepthProfile") -> "DepthProfile":
        """Combine two partial profiles; associative and commutative."""
        merged = DepthProfile(histogram=dict(self.histogram),
                              parsed=self.parsed + other.parsed,
                              failed=self.failed + other.failed)
        for d, n in other.histogram.items():
            merged.histogram[d] = merged.histogram.get(d, 0) + n
        return merged

    def to_json(self) -> str:
        payload = {
            "histogram": {str(d): self.histogram[d] for d in sorted(self.histogram)},
            "parsed": self.parsed,
            "failed": self.failed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DepthProfile":
        payload = json.loads(text)
        return cls(histogram={int(k): v for k, v in payload["histogram"].items()},
                   parsed=payload["parsed"], failed=payload["failed"])


def depth_profile(sources: Iterable[str]) -> DepthProfile:
    """Histogram depths of parseable documents; failures tallied, not binned."""
    profile = DepthProfile()
    for text in sources:
        try:
            tree = parse(text)
        except ParseError:
            profile.add_failure()
        else:
            profile.add(depth(tree))
    return profile
