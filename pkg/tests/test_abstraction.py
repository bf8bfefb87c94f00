import re

import pytest

from dockrules.abstraction import (Abstraction, AbstractionError, abstract_literal, abstract_tree,
                                   bundled_abstractions, literal_count, parse_abstractions)
from dockrules.tree import leaf, node, sexp_encode

BUNDLED = bundled_abstractions()


def test_literal_examples():
    assert abstract_literal("https://example.com", BUNDLED) == ["ABS-URL-HTTPS", "ABS-URL"]
    rel = [Abstraction("ABS-PATH-REL", r"^(\.)+/")]
    assert abstract_literal("./configure", rel) == ["ABS-PATH-REL"]
    assert abstract_literal("hello", BUNDLED) == []


def test_tree_examples():
    t = node("CURL", leaf("CURL-URL", "https://example.com"))
    out = abstract_tree(t, BUNDLED)
    assert sexp_encode(out) == "(CURL (CURL-URL (ABS-URL-HTTPS) (ABS-URL)))"
    assert out.children[0].source_literal == "https://example.com"
    rm = abstract_tree(leaf("RM-PATH", "/var/lib/apt/lists/*"), BUNDLED)
    expected = [a.name for a in BUNDLED if re.search(a.pattern, "/var/lib/apt/lists/*")]
    assert [c.kind for c in rm.children] == expected
    assert "ABS-APT-LISTS" in expected


def test_counts_are_exempt():
    t = node("APT-GET-INSTALL", leaf("FLAG-QUIET", "2", counted=True), leaf("PACKAGE", "x"))
    out = abstract_tree(t, BUNDLED)
    assert out.children[0].literal == "2"
    assert literal_count(out) == 0 and literal_count(out, include_counts=True) == 1


def test_idempotent_and_no_literal_tree_unchanged():
    t = node("A", leaf("B", "https://x/y.tar.gz"), node("C", leaf("D", "/usr/src/a b")))
    once = abstract_tree(t, BUNDLED)
    assert abstract_tree(once, BUNDLED) == once
    bare = node("A", node("B"))
    assert abstract_tree(bare, BUNDLED) == bare


def test_file_format_and_validation():
    got = parse_abstractions("# c\nABS-X   ^x\n\nABS-Y [ab]+ c\n")
    assert [(a.name, a.pattern) for a in got] == [("ABS-X", "^x"), ("ABS-Y", "[ab]+ c")]
    with pytest.raises(AbstractionError):
        parse_abstractions("NOTABS x\n")
    with pytest.raises(AbstractionError):
        parse_abstractions("ABS-BAD (\n")


def test_one_node_per_pattern_even_with_many_hits():
    assert abstract_literal("a*b*c?", BUNDLED).count("ABS-GLOB") == 1
