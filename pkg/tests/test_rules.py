import pytest

from dockrules.rules import (RuleError, RuleMetrics, format_rule, gold_rules, gold_rules_unfiltered,
                             parse_rule, parse_rules, reference_metrics)
from dockrules.tree import sexp_encode

REFERENCE_NAMES = [
    "pipUseCacheDir", "npmCacheCleanUseForce", "mkdirUsrSrcThenRemove", "rmRecurisveAfterMktempD",
    "curlUseFlagF", "tarSomethingRmTheSomething", "apkAddUseNoCache", "aptGetInstallUseNoRec",
    "curlUseHttpsUrl", "gpgUseBatchFlag", "sha256sumEchoOneSpace", "gpgUseHaPools",
    "configureUseBuildFlag", "wgetUseHttpsUrl", "aptGetInstallRmAptLists", "aptGetInstallUseY",
    "aptGetUpdatePrecedesInstall", "gpgVerifyAscRmAsc", "npmCacheCleanAfterInstall",
    "gemUpdateSystemRmRootGem", "gemUpdateNoDocument", "yumInstallForceYes", "yumInstallRmVarCacheYum",
]


def test_parse_child_of_rule():
    r = parse_rule("rule r\nlocation child-of\nscope intra\n"
                   "antecedent (APT-GET-INSTALL [*])\nconsequent (FLAG-NO-RECOMMENDS)\n")
    assert sexp_encode(r.antecedent) == "(APT-GET-INSTALL [*])"
    assert [sexp_encode(c) for c in r.consequent] == ["(FLAG-NO-RECOMMENDS)"]


@pytest.mark.parametrize("text,msg", [
    ("rule r\nlocation child-of\nantecedent (A)\nconsequent (B)\n", r"\[\*\]"),
    ("rule r\nlocation child-of\nantecedent (A [*] [*])\nconsequent (B)\n", "more than one"),
    ("rule r\nlocation follows\nantecedent (A [*])\nconsequent (B)\n", "only allowed"),
    ("rule r\nlocation beside\nantecedent (A)\nconsequent (B)\n", "location"),
    ("rule r\nlocation follows\nscope global\nantecedent (A)\nconsequent (B)\n", "scope"),
    ('rule r\nlocation follows\nantecedent (A "x")\nconsequent (B)\n', "literal"),
])
def test_rule_errors(text, msg):
    with pytest.raises(RuleError, match=msg):
        parse_rule(text)


def test_alias_for_https_kind():
    r = parse_rule("rule r\nlocation child-of\nantecedent (SC-CURL-URL [*])\nconsequent (ABS-URL-PROTOCOL-HTTPS)\n")
    assert r.consequent[0].kind == "ABS-URL-HTTPS"


def test_gold_rule_set():
    gold = gold_rules()
    assert len(gold) == 15
    assert sum(r.location == "child-of" for r in gold) == 9
    assert all(r.scope == "intra" for r in gold)
    names = [r.name for r in gold] + [r.name for r in gold_rules_unfiltered()]
    assert sorted(names) == sorted(REFERENCE_NAMES)
    by = {r.name: r for r in gold}
    upd = by["aptGetUpdatePrecedesInstall"]
    assert (upd.location, sexp_encode(upd.antecedent), sexp_encode(upd.consequent[0])) == \
        ("precedes", "(APT-GET-INSTALL)", "(APT-GET-UPDATE)")
    lists = by["aptGetInstallRmAptLists"]
    assert lists.location == "follows"
    assert sexp_encode(lists.consequent[0]) == "(RM (RM-F-RECURSIVE) (RM-PATH (ABS-APT-LISTS)))"
    assert sexp_encode(by["apkAddUseNoCache"].antecedent) == "(APK-ADD [*])"


def test_round_trip_of_bundled_rules():
    for r in gold_rules() + gold_rules_unfiltered():
        assert parse_rule(format_rule(r)) == r


def test_multi_rule_file_with_comments():
    text = "# header\nrule a\nlocation follows\nantecedent (A)\nconsequent (B) (C)\n\n" \
           "rule b\nlocation precedes\nscope inter\nantecedent (A)\nconsequent (B)\n"
    a, b = parse_rules(text)
    assert len(a.consequent) == 2 and b.scope == "inter"


def test_metrics_invariant():
    m = RuleMetrics.from_counts(7, 5)
    assert m.confidence + m.violation_rate == 1
    assert RuleMetrics.from_counts(0, 0).confidence is None


def test_reference_data_matches_names():
    t = reference_metrics()
    assert list(t) == REFERENCE_NAMES
    assert t["aptGetInstallUseY"] == RuleMetrics(525, 1.0, 0.0)
