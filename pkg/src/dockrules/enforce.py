"""Static rule enforcement over parsed, abstracted Dockerfile trees.

Checking one rule runs in three stages: find every place the antecedent
aligns, bind the region where the consequent is allowed to appear, then
search that region for every consequent tree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .rules import RuleMetrics, TreeAssociationRule
from .tree import MARKER, Path, TreeNode

SATISFIED, VIOLATED = "satisfied", "violated"


class EnforcementError(ValueError):
    pass


# -- stage I: alignment -------------------------------------------------------

def aligns(h: TreeNode, p: TreeNode) -> bool:
    """True when pattern ``p`` aligns at ``h`` (induced, ordered, partial)."""
    if h.kind != p.kind:
        return False
    j = 0
    hc = h.children
    for pc in p.children:
        while j < len(hc) and not aligns(hc[j], pc):
            j += 1
        if j == len(hc):
            return False
        j += 1
    return True


def match_pattern(haystack: TreeNode, pattern: TreeNode) -> list[Path]:
    """Paths (in pre-order) of every node where ``pattern`` aligns."""
    return [path for path, n in haystack.walk() if aligns(n, pattern)]


def strip_marker(pattern: TreeNode) -> tuple[TreeNode, Optional[Path]]:
    """Remove the ``[*]`` marker; return the pattern and the path of the node
    that held it (None when there was no marker)."""
    holder: list[Path] = []

    def visit(n: TreeNode, path: Path) -> TreeNode:
        kids = []
        for c in n.children:
            if c.kind == MARKER:
                holder.append(path)
                continue
            kids.append(visit(c, path + (len(kids),)))
        return TreeNode(n.kind, tuple(kids), n.literal)

    stripped = visit(pattern, ())
    return stripped, (holder[0] if holder else None)


def _earliest_end(hc: Sequence[TreeNode], pcs: Sequence[TreeNode]) -> int:
    """Index just past the greedy leftmost embedding of ``pcs`` (or -1)."""
    j = 0
    for pc in pcs:
        while j < len(hc) and not aligns(hc[j], pc):
            j += 1
        if j == len(hc):
            return -1
        j += 1
    return j


def _latest_start(hc: Sequence[TreeNode], pcs: Sequence[TreeNode]) -> int:
    """Index of the first child used by the greedy rightmost embedding (or -1)."""
    j = len(hc) - 1
    for pc in reversed(pcs):
        while j >= 0 and not aligns(hc[j], pc):
            j -= 1
        if j < 0:
            return -1
        j -= 1
    return j + 1


def holder_images(h: TreeNode, p: TreeNode, holder: Path, at: Path = ()) -> list[Path]:
    """Every haystack path the pattern node at ``holder`` can map to in some
    alignment of ``p`` at ``h`` (``at`` is the path of ``h``)."""
    if not holder:
        return [at] if aligns(h, p) else []
    if h.kind != p.kind:
        return []
    i = holder[0]
    pcs, hc = p.children, h.children
    lo = _earliest_end(hc, pcs[:i])
    hi = _latest_start(hc, pcs[i + 1:]) if i + 1 < len(pcs) else len(hc)
    if lo < 0 or hi < 0:
        return []
    out: list[Path] = []
    for j in range(lo, hi):
        out.extend(holder_images(hc[j], pcs[i], holder[1:], at + (j,)))
    return out


# -- stage II: region binding ------------------------------------------------

def _is_directive(n: TreeNode) -> bool:
    return n.kind.startswith("DOCKER-") and n.kind != "DOCKER-FILE"


def _subtree_paths(n: TreeNode, at: Path) -> list[Path]:
    return [p for p, _ in n.walk(at)]


def bind_region(tree: TreeNode, match: Path, location: str, scope: str = "intra",
                holder: Optional[Path] = None, pattern: Optional[TreeNode] = None) -> list[Path]:
    """Paths eligible for the consequent search, in pre-order.

    For ``child-of`` the pattern (marker stripped) and the marker holder path
    are needed so the region can follow the holder's alignment.
    """
    if location == "child-of":
        if pattern is None or holder is None:
            raise EnforcementError("child-of binding needs the antecedent pattern and marker holder")
        region: set[Path] = set()
        for img in holder_images(tree.at(match), pattern, holder, match):
            sub = tree.at(img)
            region.update(p for p in _subtree_paths(sub, img) if p != img)
        return sorted(region)
    if location not in ("precedes", "follows"):
        raise EnforcementError(f"unknown location {location!r}")

    directive_depth = None
    for depth in range(len(match), 0, -1):
        if _is_directive(tree.at(match[:depth])):
            directive_depth = depth
            break
    if directive_depth is None:
        raise EnforcementError(f"match at {match} is not inside any directive")
    dpath = match[:directive_depth]
    anchor = match
    for depth in range(len(match), directive_depth, -1):
        if tree.at(match[:depth]).kind == "BASH-COMMAND":
            anchor = match[:depth]
            break

    before = location == "precedes"
    out: list[Path] = []

    def is_before(p: Path, ref: Path) -> bool:
        # p strictly precedes ref in pre-order and is not an ancestor of it
        return p < ref and p != ref[:len(p)]

    def is_after(p: Path, ref: Path) -> bool:
        return p > ref and p[:len(ref)] != ref

    side = is_before if before else is_after
    directive = tree.at(dpath)
    for p, n in directive.walk(dpath):
        if n.kind == "BASH-COMMAND" and side(p, anchor):
            out.extend(_subtree_paths(n, p))
    if scope == "inter":
        for i, d in enumerate(tree.at(dpath[:-1]).children):
            sib = dpath[:-1] + (i,)
            if (i < dpath[-1]) == before and i != dpath[-1]:
                out.extend(_subtree_paths(d, sib))
    return sorted(set(out))


# -- stage III: consequent search -------------------------------------------

@dataclass(frozen=True)
class Match:
    path: Path
    region: tuple[Path, ...]
    outcome: str
    span: Optional[tuple[int, int, int]] = None

    @property
    def satisfied(self) -> bool:
        return self.outcome == SATISFIED


@dataclass(frozen=True)
class Violation:
    rule: str
    file: str
    line: Optional[int]
    column: Optional[int]

    def to_json(self) -> str:
        return json.dumps({"file": self.file, "rule": self.rule,
                           "line": self.line, "column": self.column}, sort_keys=True)


def _span_of(tree: TreeNode, path: Path):
    for depth in range(len(path), -1, -1):
        span = tree.at(path[:depth]).span
        if span is not None:
            return span
    return None


def check_rule(tree: TreeNode, rule: TreeAssociationRule) -> list[Match]:
    pattern, holder = strip_marker(rule.antecedent)
    consequent_hits = [set(match_pattern(tree, c)) for c in rule.consequent]
    out = []
    for path in match_pattern(tree, pattern):
        region = bind_region(tree, path, rule.location, rule.scope, holder, pattern)
        rset = set(region)
        ok = all(hits & rset for hits in consequent_hits)
        out.append(Match(path, tuple(region), SATISFIED if ok else VIOLATED, _span_of(tree, path)))
    return out


def rule_metrics(corpus: Iterable[TreeNode], rule: TreeAssociationRule) -> RuleMetrics:
    support = satisfied = 0
    for tree in corpus:
        for m in check_rule(tree, rule):
            support += 1
            satisfied += m.satisfied
    return RuleMetrics.from_counts(support, satisfied)


def passes(metrics: RuleMetrics, min_support: float, min_confidence: float) -> bool:
    if metrics.support < min_support:
        return False
    if metrics.confidence is None:
        return min_confidence <= 0
    return metrics.confidence >= min_confidence


def filter_rules(rules: Sequence[TreeAssociationRule],
                 corpus: Union[Sequence[TreeNode], Mapping[str, RuleMetrics]],
                 min_support: float = 50, min_confidence: float = 0.75) -> list[TreeAssociationRule]:
    """Keep rules meeting both thresholds.

    ``corpus`` is either a list of trees or a mapping from rule name to
    already measured metrics.
    """
    trees = None if isinstance(corpus, Mapping) else list(corpus)
    kept = []
    for r in rules:
        m = corpus[r.name] if trees is None else rule_metrics(trees, r)
        if passes(m, min_support, min_confidence):
            kept.append(r)
    return kept


def average_violation_rate(metrics: Iterable[RuleMetrics]) -> Optional[float]:
    """Arithmetic mean of the defined per-rule violation rates."""
    rates = [m.violation_rate for m in metrics if m.violation_rate is not None]
    return sum(rates) / len(rates) if rates else None


def enforce_corpus(files: Iterable[tuple[str, TreeNode]], rules: Sequence[TreeAssociationRule]
                   ) -> tuple[list[Violation], dict[str, RuleMetrics]]:
    """Check every rule on every file; return violations and per-rule metrics."""
    counts = {r.name: [0, 0] for r in rules}
    violations = []
    for file_id, tree in files:
        for r in rules:
            for m in check_rule(tree, r):
                counts[r.name][0] += 1
                if m.satisfied:
                    counts[r.name][1] += 1
                else:
                    line, col = (m.span[0], m.span[1]) if m.span else (None, None)
                    violations.append(Violation(r.name, file_id, line, col))
    metrics = {name: RuleMetrics.from_counts(s, ok) for name, (s, ok) in counts.items()}
    return violations, metrics


def _pct(x: Optional[float]) -> str:
    return "-" if x is None else f"{100 * x:.2f}%"


def metrics_table(metrics: Mapping[str, RuleMetrics]) -> str:
    """Plain-text table with one row per rule."""
    rows = [("rule", "support", "confidence", "violation_rate")]
    rows += [(n, str(m.support), _pct(m.confidence), _pct(m.violation_rate)) for n, m in metrics.items()]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    return "\n".join(lines) + "\n"
