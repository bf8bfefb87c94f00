"""Literal abstraction: rewrite free-text leaves into kind-only nodes.

Each abstraction is a named regular expression. A literal is replaced by one
child per matching abstraction, in list order, so that rules and the miner
can talk about "an https URL" or "a path under /usr/src" without literals.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

from .tree import KIND_RE, TreeNode


class AbstractionError(ValueError):
    pass


@dataclass(frozen=True)
class Abstraction:
    name: str
    pattern: str
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.name.startswith("ABS-") or not KIND_RE.match(self.name):
            raise AbstractionError(f"abstraction name must look like ABS-..., got {self.name!r}")
        try:
            object.__setattr__(self, "regex", re.compile(self.pattern))
        except re.error as exc:
            raise AbstractionError(f"{self.name}: bad pattern {self.pattern!r}: {exc}") from None


def parse_abstractions(text: str) -> list[Abstraction]:
    """Read ``NAME<whitespace>PATTERN`` lines; ``#`` starts a comment line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise AbstractionError(f"line {lineno}: expected NAME PATTERN")
        try:
            out.append(Abstraction(parts[0], parts[1].strip()))
        except AbstractionError as exc:
            raise AbstractionError(f"line {lineno}: {exc}") from None
    return out


def load_abstractions(path: Union[str, Path]) -> list[Abstraction]:
    return parse_abstractions(Path(path).read_text(encoding="utf-8"))


def bundled_abstractions() -> list[Abstraction]:
    f = resources.files("dockrules") / "data" / "abstractions.txt"
    return parse_abstractions(f.read_text(encoding="utf-8"))


def abstract_literal(value: str, abstractions: Sequence[Abstraction]) -> list[str]:
    return [a.name for a in abstractions if a.regex.search(value)]


def abstract_tree(tree: TreeNode, abstractions: Iterable[Abstraction]) -> TreeNode:
    """Replace every literal with its abstract children.

    The original text is kept in ``source_literal``. Repeat counts of counted
    flags are left alone.
    """
    abstractions = tuple(abstractions)

    def visit(n: TreeNode) -> TreeNode:
        if n.literal is not None:
            if n.counted:
                return n
            kids = tuple(TreeNode(k) for k in abstract_literal(n.literal, abstractions))
            return replace(n, literal=None, children=kids, source_literal=n.literal)
        if not n.children:
            return n
        return n.with_children(visit(c) for c in n.children)

    return visit(tree)


def literal_count(tree: TreeNode, include_counts: bool = False) -> int:
    return sum(1 for _, n in tree.walk()
               if n.literal is not None and (include_counts or not n.counted))
