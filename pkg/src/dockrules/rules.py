"""Tree association rules: data model, text format and the bundled rule sets.

Rule file format, one block per rule::

    rule aptGetInstallUseNoRec
    location child-of
    scope intra
    antecedent (APT-GET-INSTALL [*])
    consequent (FLAG-NO-RECOMMENDS)
    reconstructed true      # optional

``consequent`` holds one or more S-expression trees. Lines starting with
``#`` are comments.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from .tree import MARKER, SexpError, TreeNode, sexp_decode, sexp_decode_forest, sexp_encode, sexp_encode_forest

LOCATIONS = ("precedes", "follows", "child-of")
SCOPES = ("intra", "inter")
# alternative spellings accepted in rule text
KIND_ALIASES = {"ABS-URL-PROTOCOL-HTTPS": "ABS-URL-HTTPS"}


class RuleError(ValueError):
    pass


def _marker_count(t: TreeNode) -> int:
    return sum(1 for _, n in t.walk() if n.kind == MARKER)


def _has_literal(t: TreeNode) -> bool:
    return any(n.literal is not None for _, n in t.walk())


def _alias(t: TreeNode) -> TreeNode:
    kind = KIND_ALIASES.get(t.kind, t.kind)
    kids = tuple(_alias(c) for c in t.children)
    if kind == t.kind and kids == t.children:
        return t
    return TreeNode(kind, kids, t.literal)


@dataclass(frozen=True)
class TreeAssociationRule:
    name: str
    antecedent: TreeNode
    consequent: tuple[TreeNode, ...]
    location: str
    scope: str = "intra"
    reconstructed: bool = False

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise RuleError(f"{self.name}: unknown location {self.location!r}")
        if self.scope not in SCOPES:
            raise RuleError(f"{self.name}: unknown scope {self.scope!r}")
        if not self.consequent:
            raise RuleError(f"{self.name}: empty consequent")
        markers = _marker_count(self.antecedent)
        if self.location == "child-of" and markers == 0:
            raise RuleError(f"{self.name}: child-of rule needs a [*] marker in the antecedent")
        if markers > 1:
            raise RuleError(f"{self.name}: more than one [*] marker")
        if self.location != "child-of" and markers:
            raise RuleError(f"{self.name}: [*] is only allowed in child-of rules")
        if self.antecedent.kind == MARKER:
            raise RuleError(f"{self.name}: [*] cannot be the antecedent root")
        for t in (self.antecedent,) + tuple(self.consequent):
            if _has_literal(t):
                raise RuleError(f"{self.name}: patterns may not contain literals")
        if any(_marker_count(t) for t in self.consequent):
            raise RuleError(f"{self.name}: [*] is not allowed in the consequent")

    @property
    def is_local(self) -> bool:
        return self.location == "child-of"

    def key(self) -> str:
        return sexp_encode(self.antecedent) + " => " + sexp_encode_forest(self.consequent)


@dataclass(frozen=True)
class RuleMetrics:
    support: int
    confidence: Optional[float]
    violation_rate: Optional[float]

    @classmethod
    def from_counts(cls, support: int, satisfied: int) -> "RuleMetrics":
        if support == 0:
            return cls(0, None, None)
        violated = support - satisfied
        return cls(support, satisfied / support, violated / support)


def _blocks(text: str) -> Iterable[tuple[int, list[tuple[int, str]]]]:
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("rule ") and block:
            yield block[0][0], block
            block = []
        block.append((lineno, line))
    if block:
        yield block[0][0], block


def _parse_block(lines: list[tuple[int, str]]) -> TreeAssociationRule:
    fields: dict[str, str] = {}
    for lineno, line in lines:
        key, _, value = line.partition(" ")
        if key not in ("rule", "location", "scope", "antecedent", "consequent", "reconstructed"):
            raise RuleError(f"line {lineno}: unknown field {key!r}")
        if key in fields and key != "consequent":
            raise RuleError(f"line {lineno}: duplicate field {key!r}")
        value = value.strip()
        fields[key] = (fields[key] + " " + value) if key in fields else value
    for required in ("rule", "location", "antecedent", "consequent"):
        if required not in fields:
            raise RuleError(f"line {lines[0][0]}: missing {required!r}")
    scope = fields.get("scope", "intra")
    scope = {"intra-directive": "intra", "inter-directive": "inter"}.get(scope, scope)
    try:
        ante = _alias(sexp_decode(fields["antecedent"], allow_marker=True))
        cons = tuple(_alias(t) for t in sexp_decode_forest(fields["consequent"], allow_marker=True))
    except SexpError as exc:
        raise RuleError(f"rule {fields['rule']}: {exc}") from None
    recon = fields.get("reconstructed", "false").lower()
    if recon not in ("true", "false"):
        raise RuleError(f"rule {fields['rule']}: reconstructed must be true or false")
    return TreeAssociationRule(fields["rule"], ante, cons, fields["location"], scope, recon == "true")


def parse_rules(text: str) -> list[TreeAssociationRule]:
    return [_parse_block(block) for _, block in _blocks(text)]


def parse_rule(text: str) -> TreeAssociationRule:
    rules = parse_rules(text)
    if len(rules) != 1:
        raise RuleError(f"expected exactly one rule, found {len(rules)}")
    return rules[0]


def format_rule(rule: TreeAssociationRule, comments: Iterable[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines += [
        f"rule {rule.name}",
        f"location {rule.location}",
        f"scope {rule.scope}",
        f"antecedent {sexp_encode(rule.antecedent)}",
        f"consequent {sexp_encode_forest(rule.consequent)}",
    ]
    if rule.reconstructed:
        lines.append("reconstructed true")
    return "\n".join(lines) + "\n"


def format_rules(rules: Iterable[TreeAssociationRule]) -> str:
    return "\n".join(format_rule(r) for r in rules)


def load_rules(path: Union[str, Path]) -> list[TreeAssociationRule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def _data(name: str) -> str:
    return (resources.files("dockrules") / "data" / name).read_text(encoding="utf-8")


def gold_rules() -> list[TreeAssociationRule]:
    """The 15 expert rules that pass the default support/confidence filter."""
    return parse_rules(_data("gold-rules"))


def gold_rules_unfiltered() -> list[TreeAssociationRule]:
    """The 8 expert rules that the default filter removes."""
    return parse_rules(_data("gold-rules-unfiltered"))


def reference_metrics() -> dict[str, RuleMetrics]:
    """Recorded Gold Set support and confidence for all 23 expert rules."""
    out = {}
    for row in csv.DictReader(io.StringIO(_data("reference-metrics.tsv")), delimiter="\t"):
        conf = float(row["confidence"])
        out[row["rule"]] = RuleMetrics(int(row["support"]), conf, 1.0 - conf)
    return out
