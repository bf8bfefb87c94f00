"""Phase I: top-level Dockerfile parsing.

Shell-form ``RUN``/``CMD``/``ENTRYPOINT`` payloads are kept as a single EU
literal on the directive node; phase II replaces them with shell trees.
"""
from __future__ import annotations

import json
import re
import shlex
from dataclasses import dataclass
from typing import Optional

from .tree import TreeNode, leaf

DIRECTIVES = (
    "FROM", "RUN", "CMD", "LABEL", "EXPOSE", "ENV", "ADD", "COPY", "ENTRYPOINT",
    "VOLUME", "USER", "WORKDIR", "ARG", "ONBUILD", "STOPSIGNAL", "HEALTHCHECK",
    "SHELL", "MAINTAINER",
)
SHELL_DIRECTIVES = ("RUN", "CMD", "ENTRYPOINT")

_PARSER_DIRECTIVE = re.compile(r"^#\s*([a-zA-Z]+)\s*=\s*(.*?)\s*$")
_FLAG_RE = re.compile(r"^--([a-z][a-z-]*)(?:=(.*))?$")


class DockerfileError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class DockerDirective:
    name: str
    raw_args: str
    form: str  # "shell" or "exec"
    line: int
    column: int
    end_column: int


def _split_lines(text: str) -> tuple[list[tuple[int, str]], str]:
    """Strip parser directives; return numbered lines and the escape char."""
    escape = "\\"
    lines = text.splitlines()
    start = 0
    for i, raw in enumerate(lines):
        m = _PARSER_DIRECTIVE.match(raw.strip())
        if not m:
            break
        if m.group(1).lower() == "escape":
            if m.group(2) not in ("\\", "`"):
                raise DockerfileError(f"invalid escape token {m.group(2)!r}", i + 1)
            escape = m.group(2)
        elif m.group(1).lower() != "syntax":
            break
        start = i + 1
    return [(i + 1, lines[i]) for i in range(start, len(lines))], escape


def scan_directives(text: str) -> list[DockerDirective]:
    """Group physical lines into logical directives, splicing continuations."""
    numbered, escape = _split_lines(text)
    out: list[DockerDirective] = []
    i = 0
    while i < len(numbered):
        lineno, raw = numbered[i]
        i += 1
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col = len(raw) - len(raw.lstrip())
        end_col = len(raw.rstrip())
        body = raw.lstrip()
        pieces = []
        while True:
            r = body.rstrip()
            if r.endswith(escape):
                pieces.append(r[:-1])
                # comment and empty lines inside a continuation are skipped
                while i < len(numbered) and (
                    not numbered[i][1].strip() or numbered[i][1].lstrip().startswith("#")
                ):
                    i += 1
                if i >= len(numbered):
                    break
                body = numbered[i][1]
                i += 1
            else:
                pieces.append(body)
                break
        logical = "".join(pieces)
        m = re.match(r"(\S+)(\s+|$)", logical)
        keyword = m.group(1).upper()
        if keyword not in DIRECTIVES:
            raise DockerfileError(f"unknown instruction {m.group(1)!r}", lineno)
        args = logical[m.end():].strip()
        form = "exec" if keyword in SHELL_DIRECTIVES + ("SHELL",) and args.startswith("[") else "shell"
        out.append(DockerDirective(keyword, args, form, lineno, col, end_col))
    return out


def _exec_args(d: DockerDirective) -> list[str]:
    try:
        value = json.loads(d.raw_args)
    except json.JSONDecodeError as exc:
        raise DockerfileError(f"malformed exec-form JSON in {d.name}: {exc.msg}", d.line) from None
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DockerfileError(f"{d.name} exec form must be a JSON array of strings", d.line)
    return value


def _words(s: str) -> list[str]:
    return s.split()


def _split_flags(words: list[str]) -> tuple[list[TreeNode], list[str]]:
    flags = []
    while words and _FLAG_RE.match(words[0]):
        m = _FLAG_RE.match(words.pop(0))
        flags.append(leaf("FLAG-" + m.group(1).upper(), m.group(2) or ""))
    return flags, words


def _pairs(args: str, kind: str) -> list[TreeNode]:
    """``k=v k2=v2`` style, or the legacy single ``k v`` form."""
    try:
        words = shlex.split(args, posix=True)
    except ValueError:
        words = args.split()
    if words and "=" not in words[0]:
        return [leaf(kind, words[0] + "=" + " ".join(words[1:]))]
    return [leaf(kind, w) for w in words]


def _from(d: DockerDirective) -> list[TreeNode]:
    flags, words = _split_flags(_words(d.raw_args))
    if not words:
        raise DockerfileError("FROM requires an image", d.line)
    ref = words[0]
    children = list(flags)
    digest = None
    if "@" in ref:
        ref, digest = ref.split("@", 1)
    slash = ref.rfind("/")
    colon = ref.rfind(":")
    if colon > slash:
        image, tag = ref[:colon], ref[colon + 1:]
    else:
        image, tag = ref, None
    children.append(leaf("IMAGE", image))
    if digest is not None:
        children.append(leaf("DIGEST", digest))
    else:
        children.append(leaf("TAG", tag or "latest"))
    if len(words) >= 3 and words[1].upper() == "AS":
        children.append(leaf("STAGE-NAME", words[2]))
    return children


def _directive_children(d: DockerDirective) -> list[TreeNode]:
    name = d.name
    if name == "FROM":
        return _from(d)
    if name in SHELL_DIRECTIVES or name == "SHELL":
        if d.form == "exec":
            return [TreeNode("EXEC-FORM", tuple(leaf("EXEC-ARG", a) for a in _exec_args(d)))]
        return []
    if name == "ENV":
        return _pairs(d.raw_args, "ENV-PAIR")
    if name == "LABEL":
        return _pairs(d.raw_args, "LABEL-PAIR")
    if name == "ARG":
        return [leaf("ARG-PAIR", w) for w in _words(d.raw_args)]
    if name == "EXPOSE":
        return [leaf("PORT", w) for w in _words(d.raw_args)]
    if name in ("ADD", "COPY"):
        flags, words = _split_flags(_words(d.raw_args))
        if d.raw_args.lstrip().startswith("["):
            words = _exec_args(DockerDirective(name, d.raw_args[d.raw_args.index("["):], "exec",
                                               d.line, d.column, d.end_column))
        if not words:
            return flags
        srcs = [leaf("SOURCE", w) for w in words[:-1]]
        return flags + srcs + [leaf("DESTINATION", words[-1])]
    if name == "VOLUME":
        if d.raw_args.startswith("["):
            return [leaf("VOLUME-PATH", p) for p in _exec_args(d)]
        return [leaf("VOLUME-PATH", w) for w in _words(d.raw_args)]
    if name == "USER":
        return [leaf("USER-NAME", d.raw_args)]
    if name == "WORKDIR":
        return [leaf("WORKDIR-PATH", d.raw_args)]
    if name == "STOPSIGNAL":
        return [leaf("SIGNAL", d.raw_args)]
    if name == "MAINTAINER":
        return [leaf("MAINTAINER-NAME", d.raw_args)]
    if name == "ONBUILD":
        return [leaf("ONBUILD-INSTRUCTION", d.raw_args)]
    if name == "HEALTHCHECK":
        return [leaf("HEALTHCHECK-ARGS", d.raw_args)]
    raise AssertionError(name)  # pragma: no cover


def directive_node(d: DockerDirective) -> TreeNode:
    span = (d.line, d.column, d.end_column)
    kind = "DOCKER-" + d.name
    if d.name in SHELL_DIRECTIVES and d.form == "shell":
        return TreeNode(kind, (), d.raw_args, eu=True, span=span)
    children = _directive_children(d)
    if not children:
        # an argument-less directive still carries its (empty) text
        return TreeNode(kind, (), d.raw_args, span=span)
    return TreeNode(kind, tuple(children), span=span)


def parse_dockerfile(text: str) -> TreeNode:
    directives = scan_directives(text)
    if not directives:
        raise DockerfileError("no directives")
    return TreeNode("DOCKER-FILE", tuple(directive_node(d) for d in directives))
