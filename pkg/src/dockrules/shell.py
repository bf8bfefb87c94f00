"""Phase II: parse embedded shell payloads into command-sequence trees.

Only the command-sequence structure is recovered. Each simple command stays
one EU literal (program word plus arguments) for phase III to refine.
Control structures, functions and heredocs are kept verbatim under an
``UNKNOWN`` node.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .tree import UNKNOWN, TreeNode, leaf

log = logging.getLogger(__name__)

SHELL_PAYLOAD_KINDS = ("DOCKER-RUN", "DOCKER-CMD", "DOCKER-ENTRYPOINT")

# longest first
_OPERATORS = (
    "&>>", "<<-", "<<<", "&&", "||", ";;", "|&", "&>", "<<", "<&", "<>", ">>", ">&", ">|",
    ";", "&", "|", "(", ")", "<", ">",
)
_REDIRECT_KINDS = {
    ">": "REDIRECT-OUT", ">|": "REDIRECT-OUT", "&>": "REDIRECT-OUT",
    ">>": "REDIRECT-APPEND", "&>>": "REDIRECT-APPEND",
    "<": "REDIRECT-IN", "<>": "REDIRECT-IN",
    ">&": "REDIRECT-DUP", "<&": "REDIRECT-DUP",
    "<<<": "REDIRECT-HERESTRING",
}
_HEREDOC = ("<<", "<<-")
_OPENERS = {"if": "fi", "case": "esac", "for": "done", "while": "done", "until": "done",
            "select": "done", "{": "}", "[[": "]]"}
_CONNECTIVES = {"&&": "BASH-AND", "||": "BASH-OR"}
_COMMAND_PREFIXES = {"then", "do", "else", "elif", "{", "if", "while", "until", "!"}


class ShellSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


class _Unsupported(Exception):
    pass


@dataclass(frozen=True)
class Token:
    type: str  # "word", "op" or "newline"
    text: str  # raw source text
    start: int
    end: int
    value: str = ""  # quote-removed text for words


def _scan_dollar(s: str, i: int) -> int:
    """Return the index just past a ``$(...)``, ``$((...))`` or ``${...}``."""
    if s.startswith("$(", i):
        return _scan_balanced(s, i + 2, "(", ")", i)
    if s.startswith("${", i):
        return _scan_balanced(s, i + 2, "{", "}", i)
    return i + 1


def _scan_balanced(s: str, i: int, open_ch: str, close_ch: str, origin: int) -> int:
    depth = 1
    while i < len(s):
        ch = s[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "'":
            j = s.find("'", i + 1)
            if j < 0:
                raise ShellSyntaxError("unterminated single quote", i)
            i = j + 1
            continue
        if ch == '"':
            i = _scan_double(s, i)[0]
            continue
        if ch == "`":
            i = _scan_backtick(s, i)
            continue
        if ch == "$" and i + 1 < len(s) and s[i + 1] in "({":
            i = _scan_dollar(s, i)
            continue
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise ShellSyntaxError(f"unbalanced {open_ch!r}", origin)


def _scan_backtick(s: str, i: int) -> int:
    j = i + 1
    while j < len(s):
        if s[j] == "\\":
            j += 2
            continue
        if s[j] == "`":
            return j + 1
        j += 1
    raise ShellSyntaxError("unterminated backquote", i)


def _scan_double(s: str, i: int) -> tuple[int, str]:
    """Scan a double-quoted string starting at ``s[i] == '"'``."""
    out = []
    j = i + 1
    while j < len(s):
        ch = s[j]
        if ch == "\\" and j + 1 < len(s):
            nxt = s[j + 1]
            if nxt in '"\\$`':
                out.append(nxt)
            elif nxt != "\n":
                out.append(ch + nxt)
            j += 2
            continue
        if ch == '"':
            return j + 1, "".join(out)
        if ch == "$" and j + 1 < len(s) and s[j + 1] in "({":
            k = _scan_dollar(s, j)
            out.append(s[j:k])
            j = k
            continue
        if ch == "`":
            k = _scan_backtick(s, j)
            out.append(s[j:k])
            j = k
            continue
        out.append(ch)
        j += 1
    raise ShellSyntaxError("unterminated double quote", i)


def tokenize(s: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        if ch in " \t\r":
            i += 1
            continue
        if ch == "\n":
            tokens.append(Token("newline", "\n", i, i + 1))
            i += 1
            continue
        if ch == "#":
            j = s.find("\n", i)
            i = n if j < 0 else j
            continue
        op = next((o for o in _OPERATORS if s.startswith(o, i)), None)
        if op:
            tokens.append(Token("op", op, i, i + len(op)))
            i += len(op)
            continue
        start = i
        value = []
        while i < n:
            ch = s[i]
            if ch in " \t\r\n" or any(s.startswith(o, i) for o in _OPERATORS):
                break
            if ch == "\\":
                if i + 1 < n and s[i + 1] != "\n":
                    value.append(s[i + 1])
                i += 2
            elif ch == "'":
                j = s.find("'", i + 1)
                if j < 0:
                    raise ShellSyntaxError("unterminated single quote", i)
                value.append(s[i + 1:j])
                i = j + 1
            elif ch == '"':
                i, text = _scan_double(s, i)
                value.append(text)
            elif ch == "`":
                j = _scan_backtick(s, i)
                value.append(s[i:j])
                i = j
            elif ch == "$" and i + 1 < n and s[i + 1] in "({":
                j = _scan_dollar(s, i)
                value.append(s[i:j])
                i = j
            else:
                value.append(ch)
                i += 1
        raw = s[start:i]
        # an all-digit word glued to a redirection is its file descriptor
        if raw.isdigit() and i < n and s[i] in "<>":
            op = next(o for o in _OPERATORS if s.startswith(o, i))
            tokens.append(Token("op", raw + op, start, i + len(op)))
            i += len(op)
            continue
        tokens.append(Token("word", raw, start, i, "".join(value)))
    return tokens


def split_words(text: str) -> list[Token]:
    """Shell word splitting with quote removal; operators are kept as words."""
    return [t if t.type == "word" else replace(t, type="word", value=t.text)
            for t in tokenize(text) if t.type != "newline"]


def _is_assignment(tok: Token) -> bool:
    name, eq, _ = tok.text.partition("=")
    return bool(eq) and name.replace("_", "a").isalnum() and not name[0].isdigit()


def _redirect_op(text: str) -> str:
    return text.lstrip("0123456789")


class _Parser:
    def __init__(self, script: str, ids: Iterator[int]):
        self.script = script
        self.tokens = tokenize(script)
        self.i = 0
        self.ids = ids
        self.warnings: list[str] = []

    def peek(self) -> Optional[Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t is not None and t.type == "op" and t.text in ops

    def skip_newlines(self) -> None:
        while self.peek() is not None and self.peek().type == "newline":
            self.i += 1

    def eu(self, kind: str, text: str) -> TreeNode:
        return leaf(kind, text, eu=True, origin_id=next(self.ids))

    def error(self, msg: str) -> ShellSyntaxError:
        t = self.peek()
        return ShellSyntaxError(msg, t.start if t else len(self.script))

    # list := and_or ((';' | '&' | NL) and_or)*
    def parse_list(self, closer: Optional[str] = None) -> TreeNode:
        items = []
        self.skip_newlines()
        while True:
            t = self.peek()
            if t is None or (closer and t.type == "op" and t.text == closer):
                break
            items.append(self.parse_and_or())
            t = self.peek()
            if t is None:
                break
            if t.type == "newline" or (t.type == "op" and t.text in (";", "&")):
                self.i += 1
                self.skip_newlines()
                continue
            if closer and t.type == "op" and t.text == closer:
                break
            raise self.error(f"unexpected {t.text!r}")
        if not items:
            raise self.error("empty command list")
        if len(items) == 1:
            return items[0]
        return TreeNode("BASH-SEQ", tuple(items))

    def parse_and_or(self) -> TreeNode:
        # left-associative; runs of the same connective share one node
        items = [self.parse_pipeline()]
        kind = None
        while self.at_op("&&", "||"):
            op_kind = _CONNECTIVES[self.next().text]
            self.skip_newlines()
            right = self.parse_pipeline()
            if kind is not None and op_kind != kind:
                items = [TreeNode(kind, tuple(items))]
            kind = op_kind
            items.append(right)
        return items[0] if kind is None else TreeNode(kind, tuple(items))

    def parse_pipeline(self) -> TreeNode:
        parts = [self.parse_command()]
        while self.at_op("|", "|&"):
            self.i += 1
            self.skip_newlines()
            parts.append(self.parse_command())
        if len(parts) == 1:
            return parts[0]
        return TreeNode("BASH-PIPE", tuple(parts))

    def parse_command(self) -> TreeNode:
        t = self.peek()
        if t is None:
            raise self.error("expected a command")
        if t.type == "op" and t.text == "(":
            self.i += 1
            inner = self.parse_list(closer=")")
            if not self.at_op(")"):
                raise ShellSyntaxError("unbalanced '('", t.start)
            self.i += 1
            return self.wrap_redirects(TreeNode("BASH-SUBSHELL", (inner,)), self.parse_redirects())
        if t.type == "word" and (t.text in _OPENERS or t.text == "function"
                                  or self.looks_like_function()):
            return self.parse_unsupported()
        return self.parse_simple()

    def looks_like_function(self) -> bool:
        toks = self.tokens[self.i:self.i + 3]
        return (len(toks) == 3 and toks[0].type == "word"
                and toks[1].text == "(" and toks[2].text == ")")

    def parse_unsupported(self) -> TreeNode:
        start_tok = self.peek()
        stack: list[str] = []
        need_body = False
        command_pos = True
        started = False
        while self.peek() is not None:
            t = self.next()
            if t.type == "word":
                if command_pos and t.text == "function":
                    need_body = True
                elif (command_pos or (need_body and not stack)) and t.text in _OPENERS:
                    stack.append(_OPENERS[t.text])
                    need_body = False
                    started = True
                elif stack and t.text == stack[-1] and (command_pos or t.text == "]]"):
                    stack.pop()
                command_pos = t.text in _COMMAND_PREFIXES
            else:
                if t.text == ")" and not stack and self.tokens[self.i - 2].text == "(":
                    need_body = True  # name() { ... }
                command_pos = True
            if started and not stack and not need_body:
                break
        if stack or need_body:
            raise ShellSyntaxError(f"unterminated {start_tok.text!r}", start_tok.start)
        text = self.script[start_tok.start:self.tokens[self.i - 1].end]
        self.warnings.append(f"unsupported shell construct {start_tok.text!r} kept verbatim")
        cmd = TreeNode("BASH-COMMAND", (self.eu(UNKNOWN, text),))
        return self.wrap_redirects(cmd, self.parse_redirects())

    def parse_redirects(self) -> list[TreeNode]:
        out = []
        while True:
            t = self.peek()
            if t is None or t.type != "op":
                return out
            op = _redirect_op(t.text)
            if op in _HEREDOC:
                raise _Unsupported()
            if op not in _REDIRECT_KINDS:
                return out
            self.i += 1
            target = self.peek()
            if target is None or target.type != "word":
                raise self.error(f"missing target for {t.text!r}")
            self.i += 1
            out.append(leaf(_REDIRECT_KINDS[op], target.value))

    def wrap_redirects(self, inner: TreeNode, redirects: list[TreeNode]) -> TreeNode:
        if not redirects:
            return inner
        return TreeNode("BASH-REDIRECT", (inner, *redirects))

    def parse_simple(self) -> TreeNode:
        start = self.i
        assigns: list[TreeNode] = []
        words: list[Token] = []
        redirects: list[TreeNode] = []
        try:
            while True:
                t = self.peek()
                if t is None or t.type == "newline":
                    break
                if t.type == "op":
                    r = self.parse_redirects()
                    if not r:
                        break
                    redirects.extend(r)
                    continue
                self.i += 1
                if not words and _is_assignment(t):
                    assigns.append(leaf("ASSIGN-PAIR", t.value))
                else:
                    words.append(t)
        except _Unsupported:
            # heredoc: swallow the rest of this simple command verbatim
            while self.peek() is not None and not (
                self.peek().type == "newline"
                or (self.peek().type == "op" and self.peek().text in (";", "&", "&&", "||", "|", ")"))
            ):
                self.i += 1
            first, last = self.tokens[start], self.tokens[self.i - 1]
            self.warnings.append("heredoc kept verbatim")
            return TreeNode("BASH-COMMAND", (self.eu(UNKNOWN, self.script[first.start:last.end]),))
        if not words and not assigns and not redirects:
            raise self.error("expected a command")
        node = None
        if words:
            node = TreeNode("BASH-COMMAND", (), " ".join(w.text for w in words),
                            eu=True, origin_id=next(self.ids))
        if assigns:
            node = TreeNode("BASH-ASSIGN", tuple(assigns) + ((node,) if node else ()))
        if node is None:
            node = TreeNode("BASH-COMMAND", (), "", eu=True, origin_id=next(self.ids))
        return self.wrap_redirects(node, redirects)


def parse_shell(script: str, ids: Optional[Iterator[int]] = None,
                warnings: Optional[list[str]] = None) -> TreeNode:
    """Parse ``script`` strictly; raises :class:`ShellSyntaxError`."""
    p = _Parser(script, ids if ids is not None else itertools.count(1))
    tree = p.parse_list()
    if p.peek() is not None:
        raise p.error(f"unexpected {p.peek().text!r}")
    if warnings is not None:
        warnings.extend(p.warnings)
    return tree


def degraded(script: str, ids: Iterator[int]) -> TreeNode:
    return TreeNode("BASH-COMMAND", (leaf(UNKNOWN, script, eu=True, origin_id=next(ids)),))


def parse_shell_lenient(script: str, ids: Iterator[int], warnings: list[str]) -> TreeNode:
    """Like :func:`parse_shell` but degrades to an ``UNKNOWN`` command on error."""
    # parse against a scratch counter so a failed attempt burns no ids
    scratch: list[int] = []
    counter = itertools.count(1)

    def take():
        for k in counter:
            scratch.append(k)
            yield k

    try:
        tree = parse_shell(script, take(), warnings)
    except ShellSyntaxError as exc:
        warnings.append(f"shell parse degraded to UNKNOWN: {exc}")
        log.debug("degrading shell payload %r: %s", script, exc)
        return degraded(script, ids)
    remap = {k: next(ids) for k in scratch}
    return _remap_ids(tree, remap)


def _remap_ids(t: TreeNode, remap: dict[int, int]) -> TreeNode:
    kids = tuple(_remap_ids(c, remap) for c in t.children)
    oid = remap.get(t.origin_id) if t.origin_id is not None else None
    return replace(t, children=kids, origin_id=oid)


def enrich_phase2(tree: TreeNode, warnings: Optional[list[str]] = None) -> TreeNode:
    """Replace each shell-form payload literal with its parsed shell tree.

    Origin ids are assigned in document order starting at 1.
    """
    ids = itertools.count(1)
    sink = warnings if warnings is not None else []

    def visit(n: TreeNode) -> TreeNode:
        if n.kind in SHELL_PAYLOAD_KINDS and n.literal is not None and n.eu:
            shell = parse_shell_lenient(n.literal, ids, sink)
            return replace(n, literal=None, eu=False, children=(shell,))
        if not n.children:
            return n
        return n.with_children(visit(c) for c in n.children)

    return visit(tree)
