"""Uniform ordered tree model shared by every parse phase.

Trees are immutable. Equality and hashing look only at ``kind``,
``literal`` and ``children``; the remaining fields are annotations that
travel with a node but never change its identity.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

KIND_RE = re.compile(r"^[A-Z0-9-]+$")
UNKNOWN = "UNKNOWN"
MARKER = "[*]"

Path = tuple[int, ...]
Span = tuple[int, int, int]  # line, column start, column end


class SexpError(ValueError):
    """Raised when S-expression text cannot be decoded."""

    def __init__(self, message: str, pos: int, text: str = ""):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1)
        super().__init__(f"{message} (line {line}, column {col})")
        self.pos = pos
        self.line = line
        self.column = col


@dataclass(frozen=True)
class TreeNode:
    kind: str
    children: tuple["TreeNode", ...] = ()
    literal: Optional[str] = None
    eu: bool = field(default=False, compare=False, repr=False)
    origin_id: Optional[int] = field(default=None, compare=False, repr=False)
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    counted: bool = field(default=False, compare=False, repr=False)
    source_literal: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if self.kind != MARKER and not KIND_RE.match(self.kind):
            raise ValueError(f"invalid node kind {self.kind!r}")
        if self.literal is not None and self.children:
            raise ValueError(f"{self.kind}: a literal node cannot have children")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def with_children(self, children: Iterable["TreeNode"]) -> "TreeNode":
        return replace(self, children=tuple(children))

    def walk(self, path: Path = ()) -> Iterator[tuple[Path, "TreeNode"]]:
        """Pre-order traversal yielding ``(path, node)`` pairs."""
        stack = [(path, self)]
        while stack:
            p, node = stack.pop()
            yield p, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((p + (i,), node.children[i]))

    def at(self, path: Path) -> "TreeNode":
        node = self
        for i in path:
            node = node.children[i]
        return node

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children)

    def leaves(self) -> Iterator["TreeNode"]:
        for _, node in self.walk():
            if not node.children:
                yield node

    def __str__(self) -> str:
        return sexp_encode(self)


def node(kind: str, *children: TreeNode, **kw) -> TreeNode:
    return TreeNode(kind, tuple(children), **kw)


def leaf(kind: str, literal: Optional[str] = None, **kw) -> TreeNode:
    return TreeNode(kind, (), literal, **kw)


# -- S-expressions ---------------------------------------------------------

def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _annotations(n: TreeNode) -> list[str]:
    out = []
    if n.eu:
        out.append("@eu")
    if n.counted:
        out.append("@count")
    if n.origin_id is not None:
        out.append(f"@id={n.origin_id}")
    if n.span is not None:
        out.append("@span=%d:%d:%d" % n.span)
    if n.source_literal is not None:
        out.append("@src=" + _quote(n.source_literal))
    return out


def sexp_encode(tree: TreeNode, annotate: bool = False) -> str:
    """Render ``tree`` as canonical S-expression text.

    With ``annotate`` the EU flag, origin id, span and abstraction source
    are appended as ``@`` tokens so that :func:`sexp_decode` restores them.
    """
    parts: list[str] = []

    def emit(n: TreeNode) -> None:
        if n.kind == MARKER:
            parts.append(MARKER)
            return
        parts.append("(" + n.kind)
        if n.literal is not None:
            parts.append(" " + _quote(n.literal))
        if annotate:
            for a in _annotations(n):
                parts.append(" " + a)
        for c in n.children:
            parts.append(" ")
            emit(c)
        parts.append(")")

    emit(tree)
    return "".join(parts)


def sexp_encode_forest(forest: Iterable[TreeNode]) -> str:
    return " ".join(sexp_encode(t) for t in forest)


class _Reader:
    def __init__(self, text: str, allow_marker: bool):
        self.text = text
        self.pos = 0
        self.allow_marker = allow_marker

    def error(self, msg: str, pos: Optional[int] = None):
        raise SexpError(msg, self.pos if pos is None else pos, self.text)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def read_string(self) -> str:
        start = self.pos
        assert self.text[self.pos] == '"'
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    break
                out.append(self.text[self.pos + 1])
                self.pos += 2
            elif ch == '"':
                self.pos += 1
                return "".join(out)
            else:
                out.append(ch)
                self.pos += 1
        self.error("unterminated string", start)

    def read_node(self) -> TreeNode:
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("unexpected end of input")
        if self.text.startswith(MARKER, self.pos):
            if not self.allow_marker:
                self.error("binding marker not allowed here")
            self.pos += len(MARKER)
            return TreeNode(MARKER)
        if self.text[self.pos] != "(":
            self.error("expected '('")
        open_pos = self.pos
        self.pos += 1
        self.skip_ws()
        m = re.compile(r"[^\s()\"]+").match(self.text, self.pos)
        if not m:
            self.error("expected node kind")
        kind = m.group(0)
        if not KIND_RE.match(kind):
            self.error(f"bad kind token {kind!r}")
        self.pos = m.end()
        literal = None
        ann: dict = {}
        children: list[TreeNode] = []
        while True:
            self.skip_ws()
            if self.pos >= len(self.text):
                self.error("unbalanced parentheses at end of input", self.pos)
            ch = self.text[self.pos]
            if ch == ")":
                self.pos += 1
                break
            if ch == '"':
                if literal is not None or children:
                    self.error("unexpected string")
                literal = self.read_string()
            elif ch == "@":
                self.read_annotation(ann)
            else:
                if literal is not None:
                    self.error("a literal node cannot have children")
                children.append(self.read_node())
        try:
            return TreeNode(kind, tuple(children), literal, **ann)
        except ValueError as exc:
            self.error(str(exc), open_pos)

    def read_annotation(self, ann: dict) -> None:
        m = re.compile(r"@([a-z]+)(=)?").match(self.text, self.pos)
        if not m:
            self.error("bad annotation")
        name = m.group(1)
        self.pos = m.end()
        if name == "eu":
            ann["eu"] = True
        elif name == "count":
            ann["counted"] = True
        elif name == "id" and m.group(2):
            v = re.compile(r"\d+").match(self.text, self.pos)
            if not v:
                self.error("bad @id value")
            ann["origin_id"] = int(v.group(0))
            self.pos = v.end()
        elif name == "span" and m.group(2):
            v = re.compile(r"(\d+):(\d+):(\d+)").match(self.text, self.pos)
            if not v:
                self.error("bad @span value")
            ann["span"] = tuple(int(x) for x in v.groups())
            self.pos = v.end()
        elif name == "src" and m.group(2) and self.text[self.pos:self.pos + 1] == '"':
            ann["source_literal"] = self.read_string()
        else:
            self.error(f"unknown annotation @{name}")


def sexp_decode(text: str, allow_marker: bool = False) -> TreeNode:
    """Parse exactly one S-expression tree."""
    r = _Reader(text, allow_marker)
    tree = r.read_node()
    if not r.at_end():
        r.error("trailing input after tree")
    return tree


def sexp_decode_forest(text: str, allow_marker: bool = False) -> list[TreeNode]:
    """Parse a whitespace-separated sequence of trees (at least one)."""
    r = _Reader(text, allow_marker)
    out = [r.read_node()]
    while not r.at_end():
        out.append(r.read_node())
    return out


# -- EU accounting -----------------------------------------------------------

@dataclass(frozen=True)
class EuReport:
    phase: int
    total_leaves: int
    eu_leaves: int
    resolved_of_phase2: Optional[int] = None
    unresolved_of_phase2: Optional[int] = None

    @property
    def fraction(self) -> float:
        return self.eu_leaves / self.total_leaves if self.total_leaves else 0.0

    @property
    def unresolved_fraction(self) -> Optional[float]:
        """Share of phase-2 EU leaves still unresolved (0.0 when there were none)."""
        if self.unresolved_of_phase2 is None:
            return None
        denom = self.resolved_of_phase2 + self.unresolved_of_phase2
        return self.unresolved_of_phase2 / denom if denom else 0.0


def is_eu_leaf(n: TreeNode) -> bool:
    if n.children:
        return False
    return n.kind == UNKNOWN or (n.eu and n.literal is not None)


def eu_stats(tree: TreeNode, phase: int, phase2_eu_ids: Optional[set[int]] = None) -> EuReport:
    if phase not in (1, 2, 3):
        raise ValueError(f"phase must be 1, 2 or 3, not {phase!r}")
    if phase == 3 and phase2_eu_ids is None:
        raise ValueError("phase 3 accounting needs the phase-2 EU origin ids")
    total = eu = 0
    surviving: set[int] = set()
    for n in tree.leaves():
        total += 1
        if is_eu_leaf(n):
            eu += 1
            if n.origin_id is not None:
                surviving.add(n.origin_id)
    if phase != 3:
        return EuReport(phase, total, eu)
    unresolved = len(phase2_eu_ids & surviving)
    return EuReport(phase, total, eu, len(phase2_eu_ids) - unresolved, unresolved)


def eu_origin_ids(tree: TreeNode) -> set[int]:
    """Origin ids carried by the EU leaves of ``tree``."""
    return {n.origin_id for n in tree.leaves() if is_eu_leaf(n) and n.origin_id is not None}
