"""Phased Dockerfile parsing, tree association rules, mining and enforcement."""
from __future__ import annotations

from .abstraction import Abstraction, abstract_literal, abstract_tree, bundled_abstractions
from .corpus import corpus_eu_summary, ingest, parse_all_phases
from .dockerfile import parse_dockerfile
from .enforce import bind_region, check_rule, filter_rules, match_pattern, rule_metrics
from .mine import build_tars, collect_subtrees, mine_frequent_subtrees, mine_rules
from .rules import TreeAssociationRule, RuleMetrics, gold_rules, gold_rules_unfiltered, parse_rule
from .schemas import bundled_schemas, enrich_phase3, load_schemas, parse_command
from .shell import enrich_phase2, parse_shell
from .tree import TreeNode, eu_stats, sexp_decode, sexp_encode

__all__ = [
    "Abstraction", "RuleMetrics", "TreeAssociationRule", "TreeNode",
    "abstract_literal", "abstract_tree", "bind_region", "build_tars", "bundled_abstractions",
    "bundled_schemas", "check_rule", "collect_subtrees", "corpus_eu_summary", "enrich_phase2",
    "enrich_phase3", "eu_stats", "filter_rules", "gold_rules", "gold_rules_unfiltered", "ingest",
    "load_schemas", "match_pattern", "mine_frequent_subtrees", "mine_rules", "parse_all_phases",
    "parse_command", "parse_dockerfile", "parse_rule", "parse_shell", "rule_metrics",
    "sexp_decode", "sexp_encode",
]
