"""Frequent subtree mining and automatic discovery of local rules.

Subtrees are grouped by root kind. Candidate patterns grow by rightmost-path
extension (the FREQT/CMTreeMiner enumeration order); each candidate keeps an
occurrence list of ``(instance, image of its rightmost leaf)`` pairs, which is
enough to extend it without re-matching. Counting is per instance.

A pattern ``(K c1 ... cm)`` is reported when it is frequent, each of its
root-child components ``(K ci)`` occurs in exactly the same instances as the
whole pattern, and no strictly larger pattern with both properties exists.
Grouping by occurrence set this way keeps options that co-occur in one rule
and splits options with different usage into separate rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .enforce import aligns
from .rules import TreeAssociationRule, format_rule
from .schemas import bundled_schemas, phase3_kinds
from .tree import MARKER, TreeNode, sexp_encode

DEFAULT_MAX_DEPTH = 6
DEFAULT_MAX_NODES = 20


@dataclass
class SubtreeGroup:
    root_kind: str
    instances: list[TreeNode]

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class FrequentSubtree:
    tree: TreeNode
    frequency: int
    support_fraction: float


@dataclass
class MiningStats:
    candidates: int = 0
    frequent: int = 0
    truncated: bool = False


def _strip(n: TreeNode) -> TreeNode:
    """Kind-only copy of a tree (literals dropped)."""
    return TreeNode(n.kind, tuple(_strip(c) for c in n.children))


def collect_subtrees(corpus: Iterable[TreeNode], kind: str) -> SubtreeGroup:
    """Every node of ``kind`` in the corpus, as a full-depth instance."""
    instances = [n for tree in corpus for _, n in tree.walk() if n.kind == kind]
    return SubtreeGroup(kind, instances)


def min_count(n: int, min_support: float) -> int:
    """Smallest instance count whose share of ``n`` reaches ``min_support``."""
    return max(1, math.ceil(min_support * n - 1e-9))


def _to_tree(pattern: tuple[tuple[int, str], ...]) -> TreeNode:
    def build(i: int) -> tuple[TreeNode, int]:
        depth, kind = pattern[i]
        kids = []
        j = i + 1
        while j < len(pattern) and pattern[j][0] == depth + 1:
            child, j = build(j)
            kids.append(child)
        return TreeNode(kind, tuple(kids)), j

    return build(0)[0]


def _enumerate_frequent(instances: Sequence[TreeNode], threshold: int, max_depth: int,
                        max_nodes: int, stats: MiningStats) -> list[tuple[TreeNode, frozenset]]:
    """All frequent root-anchored patterns with their instance sets."""
    root_kind = instances[0].kind
    out: list[tuple[TreeNode, frozenset]] = []
    start = {(i, ()) for i, inst in enumerate(instances) if inst.kind == root_kind}
    stack = [(((0, root_kind),), start)]
    while stack:
        pattern, occ = stack.pop()
        out.append((_to_tree(pattern), frozenset(i for i, _ in occ)))
        stats.frequent += 1
        last_depth = pattern[-1][0]
        for d in range(last_depth, -1, -1):  # attach under the rightmost-path node at depth d
            ext: dict[str, set] = {}
            for inst_i, path in occ:
                parent = path[:d]
                lo = path[d] + 1 if d < last_depth else 0
                node = instances[inst_i].at(parent)
                for j in range(lo, len(node.children)):
                    ext.setdefault(node.children[j].kind, set()).add((inst_i, parent + (j,)))
            for kind in sorted(ext):
                new_occ = ext[kind]
                stats.candidates += 1
                if len({i for i, _ in new_occ}) < threshold:
                    continue
                if d + 2 > max_depth or len(pattern) + 1 > max_nodes:
                    stats.truncated = True
                    continue
                stack.append((pattern + ((d + 1, kind),), new_occ))
    return out


def mine_frequent_subtrees(group: SubtreeGroup, min_support: float = 0.75,
                           max_depth: int = DEFAULT_MAX_DEPTH, max_nodes: int = DEFAULT_MAX_NODES,
                           stats: Optional[MiningStats] = None) -> list[FrequentSubtree]:
    """Frequent, component-homogeneous, maximal patterns of one group.

    ``stats.truncated`` is set when the depth or node cap cut off a
    frequent candidate.
    """
    if not group.instances:
        raise ValueError("cannot mine an empty group")
    stats = stats if stats is not None else MiningStats()
    instances = [_strip(t) for t in group.instances]
    n = len(instances)
    threshold = min_count(n, min_support)
    frequent = _enumerate_frequent(instances, threshold, max_depth, max_nodes, stats)

    component_occ: dict[TreeNode, frozenset] = {}

    def occ_of_component(root: TreeNode, child: TreeNode) -> frozenset:
        key = TreeNode(root.kind, (child,))
        if key not in component_occ:
            component_occ[key] = frozenset(i for i, t in enumerate(instances) if aligns(t, key))
        return component_occ[key]

    homogeneous = [(p, occ) for p, occ in frequent
                   if all(occ_of_component(p, c) == occ for c in p.children)]
    result = []
    for p, occ in homogeneous:
        if any(q != p and aligns(q, p) for q, _ in homogeneous):
            continue
        result.append(FrequentSubtree(p, len(occ), len(occ) / n))
    result.sort(key=lambda f: (-f.frequency, sexp_encode(f.tree)))
    return result


def _camel(kind: str) -> str:
    parts = kind.lower().split("-")
    return parts[0] + "".join(p.capitalize() for p in parts[1:])


def build_tars(group_kind: str, frequents: Iterable[FrequentSubtree]) -> list[TreeAssociationRule]:
    """One child-of rule per frequent pattern that has at least one child."""
    rules = []
    seen = set()
    for f in frequents:
        if f.tree.kind != group_kind:
            raise ValueError(f"pattern rooted at {f.tree.kind}, expected {group_kind}")
        if not f.tree.children:
            continue
        rule = TreeAssociationRule(f"{_camel(group_kind)}Mined{len(rules) + 1}",
                                   TreeNode(group_kind, (TreeNode(MARKER),)),
                                   f.tree.children, "child-of", "intra")
        if rule.key() not in seen:
            seen.add(rule.key())
            rules.append(rule)
    return rules


@dataclass
class MinedRule:
    rule: TreeAssociationRule
    frequency: int
    group_size: int

    @property
    def support_fraction(self) -> float:
        return self.frequency / self.group_size


@dataclass
class MiningReport:
    rules: list[MinedRule] = field(default_factory=list)
    truncated_kinds: list[str] = field(default_factory=list)


def mine_report(corpus: Sequence[TreeNode], kinds: Optional[Iterable[str]] = None,
                min_support: float = 0.75, schemas=None) -> MiningReport:
    """Mine every group and keep per-rule frequencies for reporting."""
    corpus = list(corpus)
    if kinds is None:
        kinds = phase3_kinds(bundled_schemas() if schemas is None else schemas)
    report = MiningReport()
    seen: set[str] = set()
    for kind in sorted(set(kinds)):
        group = collect_subtrees(corpus, kind)
        if not group.instances:
            continue
        stats = MiningStats()
        frequents = mine_frequent_subtrees(group, min_support, stats=stats)
        if stats.truncated:
            report.truncated_kinds.append(kind)
        freq_by_key = {sexp_encode(f.tree): f.frequency for f in frequents}
        for rule in build_tars(kind, frequents):
            if rule.key() in seen:
                continue
            seen.add(rule.key())
            pattern = TreeNode(kind, rule.consequent)
            report.rules.append(MinedRule(rule, freq_by_key[sexp_encode(pattern)], len(group)))
    return report


def mine_rules(corpus: Sequence[TreeNode], kinds: Optional[Iterable[str]] = None,
               min_support: float = 0.75, schemas=None) -> list[TreeAssociationRule]:
    """Local rules mined from every group of the given kinds.

    ``kinds`` defaults to every kind the schema set introduces.
    """
    return [m.rule for m in mine_report(corpus, kinds, min_support, schemas).rules]


def format_mined(report: MiningReport) -> str:
    blocks = []
    for m in report.rules:
        blocks.append(format_rule(m.rule, [f"frequency {m.frequency}/{m.group_size}",
                                           f"support_fraction {m.support_fraction:.4f}"]))
    header = ""
    if report.truncated_kinds:
        header = "# truncated by pattern size caps: " + " ".join(report.truncated_kinds) + "\n\n"
    return header + "\n".join(blocks)
