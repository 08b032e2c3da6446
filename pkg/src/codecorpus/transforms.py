"""Tree-to-tree code ablations: comment stripping, identifier scrambling,
and consistent identifier randomization.

All transforms are pure per-document functions: they deep-copy the input
tree, and their output always re-parses. Transformed code is not required
to execute or type-check, only to parse.
"""

from __future__ import annotations

import ast
import copy
import keyword
import random
import string
from dataclasses import dataclass, field
from enum import Enum

from .syntax import SyntaxTree

_RANDOM_NAME_LENGTH = 8
_NAME_FIRST_CHARS = string.ascii_letters + "_"
_NAME_REST_CHARS = string.ascii_letters + string.digits + "_"
_KEYWORDS = frozenset(keyword.kwlist)


class TransformMode(Enum):
    RAW = "raw"
    COMMENT_FREE = "cf"
    COMMENT_FREE_SCRAMBLED = "cf_s"
    COMMENT_FREE_RANDOMIZED = "cf_r"


@dataclass(frozen=True)
class TransformSpec:
    """Which ablation to apply and the seed driving its randomness."""

    mode: TransformMode
    seed: int = 0

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "seed": self.seed}

    @classmethod
    def from_json(cls, payload: dict) -> "TransformSpec":
        return cls(mode=TransformMode(payload["mode"]), seed=int(payload.get("seed", 0)))


class IdentifierCategory(Enum):
    VARIABLE = "variable"
    FUNCTION = "function"
    CLASS_DEF = "class-definition"
    ARGUMENT = "argument"
    ATTRIBUTE = "attribute"
    IMPORT_NAME = "import-name"


@dataclass
class IdentifierOccurrence:
    """One renameable name site: the carrying node plus the slot holding it.

    ``part`` indexes either a component of a dotted module path or an entry
    of a names list (global/nonlocal statements).
    """

    name: str
    category: IdentifierCategory
    node: ast.AST
    field: str
    part: int | None = None
    span: tuple[int, int, int, int] | None = None

    def assign(self, new_name: str) -> None:
        value = getattr(self.node, self.field)
        if isinstance(value, list):
            value[self.part] = new_name
        elif self.part is not None:
            parts = value.split(".")
            parts[self.part] = new_name
            setattr(self.node, self.field, ".".join(parts))
        else:
            setattr(self.node, self.field, new_name)


def _span(node: ast.AST) -> tuple[int, int, int, int] | None:
    if getattr(node, "lineno", None) is None or getattr(node, "end_lineno", None) is None:
        return None
    return (node.lineno, node.col_offset, node.end_lineno, node.end_col_offset)


def _dotted(out: list[IdentifierOccurrence], node: ast.AST, fld: str,
            category: IdentifierCategory) -> None:
    value = getattr(node, fld, None)
    if not value:
        return
    parts = value.split(".")
    for i, part in enumerate(parts):
        index = i if len(parts) > 1 else None
        out.append(IdentifierOccurrence(part, category, node, fld, index, _span(node)))


def collect_identifiers(tree: SyntaxTree) -> list[IdentifierOccurrence]:
    """Every renameable name site in document order.

    Categories: variables (including exception aliases and global/nonlocal
    names), function and class definition names, argument names (defs,
    lambdas, and call keywords), attribute names, and import names
    (modules, dotted components, and aliases). Keywords, string contents,
    and star imports are excluded.
    """
    out: list[IdentifierOccurrence] = []
    _visit(tree.root, out)
    return out


def _visit(node: ast.AST, out: list[IdentifierOccurrence]) -> None:
    if isinstance(node, ast.Name):
        out.append(IdentifierOccurrence(node.id, IdentifierCategory.VARIABLE,
                                        node, "id", None, _span(node)))
        return
    if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
        # Source order: decorators, name, arguments, return annotation, body.
        for dec in node.decorator_list:
            _visit(dec, out)
        out.append(IdentifierOccurrence(node.name, IdentifierCategory.FUNCTION,
                                        node, "name", None, _span(node)))
        _visit(node.args, out)
        if node.returns is not None:
            _visit(node.returns, out)
        for stmt in node.body:
            _visit(stmt, out)
        return
    if isinstance(node, ast.ClassDef):
        for dec in node.decorator_list:
            _visit(dec, out)
        out.append(IdentifierOccurrence(node.name, IdentifierCategory.CLASS_DEF,
                                        node, "name", None, _span(node)))
        for base in node.bases:
            _visit(base, out)
        for kw in node.keywords:
            _visit(kw, out)
        for stmt in node.body:
            _visit(stmt, out)
        return
    if isinstance(node, ast.Attribute):
        _visit(node.value, out)
        out.append(IdentifierOccurrence(node.attr, IdentifierCategory.ATTRIBUTE,
                                        node, "attr", None, _span(node)))
        return
    if isinstance(node, ast.arg):
        out.append(IdentifierOccurrence(node.arg, IdentifierCategory.ARGUMENT,
                                        node, "arg", None, _span(node)))
        if node.annotation is not None:
            _visit(node.annotation, out)
        return
    if isinstance(node, ast.keyword):
        if node.arg is not None:
            out.append(IdentifierOccurrence(node.arg, IdentifierCategory.ARGUMENT,
                                            node, "arg", None, _span(node)))
        _visit(node.value, out)
        return
    if isinstance(node, ast.alias):
        if node.name != "*":
            _dotted(out, node, "name", IdentifierCategory.IMPORT_NAME)
        if node.asname:
            out.append(IdentifierOccurrence(node.asname, IdentifierCategory.IMPORT_NAME,
                                            node, "asname", None, _span(node)))
        return
    if isinstance(node, ast.ImportFrom):
        _dotted(out, node, "module", IdentifierCategory.IMPORT_NAME)
        for a in node.names:
            _visit(a, out)
        return
    if isinstance(node, ast.ExceptHandler):
        if node.type is not None:
            _visit(node.type, out)
        if node.name:
            out.append(IdentifierOccurrence(node.name, IdentifierCategory.VARIABLE,
                                            node, "name", None, _span(node)))
        for stmt in node.body:
            _visit(stmt, out)
        return
    if isinstance(node, (ast.Global, ast.Nonlocal)):
        for i, name in enumerate(node.names):
            out.append(IdentifierOccurrence(name, IdentifierCategory.VARIABLE,
                                            node, "names", i, _span(node)))
        return
    for _, value in ast.iter_fields(node):
        _visit_field(value, out)


def _visit_field(value, out: list[IdentifierOccurrence]) -> None:
    if isinstance(value, ast.AST):
        _visit(value, out)
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, ast.AST):
                _visit(item, out)


def _is_string_statement(stmt: ast.stmt) -> bool:
    return (isinstance(stmt, ast.Expr)
            and isinstance(stmt.value, ast.Constant)
            and isinstance(stmt.value.value, str))


def strip_comments(tree: SyntaxTree) -> SyntaxTree:
    """Drop statement-position string constants (docstrings and string
    pseudo-comments); hash comments never reach the tree.

    A block left empty by the removal is repaired with the grammar's no-op
    statement so the result still parses.
    """
    root = copy.deepcopy(tree.root)
    for node in ast.walk(root):
        for fld, value in ast.iter_fields(node):
            if not (isinstance(value, list) and value
                    and all(isinstance(v, ast.stmt) for v in value)):
                continue
            kept = [s for s in value if not _is_string_statement(s)]
            if not kept and fld == "body" and not isinstance(node, ast.Module):
                kept = [ast.Pass()]
            setattr(node, fld, kept)
        # A try statement needs at least one handler or a finally clause.
        if isinstance(node, ast.Try) and not node.handlers and not node.finalbody:
            node.finalbody = [ast.Pass()]
    return SyntaxTree(root=root, source_id=tree.source_id)


def scramble_identifiers(tree: SyntaxTree, seed: int) -> SyntaxTree:
    """Independently redraw every name site from the document's identifiers.

    Each site receives a name sampled uniformly from the set of distinct
    identifier names appearing in the document, so one original name may
    map differently at different sites and distinct definitions may
    collide. Tree shape is untouched.
    """
    root = copy.deepcopy(tree.root)
    scrambled = SyntaxTree(root=root, source_id=tree.source_id)
    occurrences = collect_identifiers(scrambled)
    pool = sorted({occ.name for occ in occurrences})
    if not pool:
        return scrambled
    rng = random.Random(seed)
    for occ in occurrences:
        occ.assign(pool[rng.randrange(len(pool))])
    return scrambled


@dataclass
class RenameMap:
    """Injective document-global map from original names to replacements."""

    entries: dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def __getitem__(self, name: str) -> str:
        return self.entries[name]


def build_rename_map(names: list[str], seed: int) -> RenameMap:
    """Draw a distinct 8-character replacement for each name.

    Replacements start with a letter or underscore, never collide with a
    reserved keyword, an existing document name, or each other.
    """
    rng = random.Random(seed)
    taken = set(names) | _KEYWORDS
    entries: dict[str, str] = {}
    for name in names:
        while True:
            candidate = rng.choice(_NAME_FIRST_CHARS) + "".join(
                rng.choice(_NAME_REST_CHARS) for _ in range(_RANDOM_NAME_LENGTH - 1))
            if candidate not in taken:
                break
        taken.add(candidate)
        entries[name] = candidate
    return RenameMap(entries=entries, seed=seed)


def randomize_identifiers(tree: SyntaxTree, seed: int) -> SyntaxTree:
    """Replace every name with its 8-character random string, consistently.

    The rename map is keyed by name string alone, not by binding scope: a
    function and an attribute that share a name share a replacement, which
    is what keeps call/definition dependencies intact.
    """
    root = copy.deepcopy(tree.root)
    randomized = SyntaxTree(root=root, source_id=tree.source_id)
    occurrences = collect_identifiers(randomized)
    names: list[str] = []
    seen: set[str] = set()
    for occ in occurrences:
        if occ.name not in seen:
            seen.add(occ.name)
            names.append(occ.name)
    rename = build_rename_map(names, seed)
    for occ in occurrences:
        occ.assign(rename[occ.name])
    return randomized


def apply(spec: TransformSpec, tree: SyntaxTree) -> SyntaxTree:
    """Apply one ablation mode; scramble/randomize imply comment stripping."""
    if spec.mode is TransformMode.RAW:
        return tree
    stripped = strip_comments(tree)
    if spec.mode is TransformMode.COMMENT_FREE:
        return stripped
    if spec.mode is TransformMode.COMMENT_FREE_SCRAMBLED:
        return scramble_identifiers(stripped, spec.seed)
    return randomize_identifiers(stripped, spec.seed)


def transform_source(source: str, mode: TransformMode, seed: int = 0,
                     source_id: str = "") -> str:
    """Parse, transform, and unparse one document.

    Raw mode returns the source byte-for-byte; other modes emit canonical
    formatting with a trailing newline.
    """
    from .syntax import parse, unparse

    if mode is TransformMode.RAW:
        return source
    tree = parse(source, source_id=source_id)
    return unparse(apply(TransformSpec(mode=mode, seed=seed), tree)) + "\n"
