"""Phase III: declarative command schemas and the option parsers built from them.

A schema document describes one tool (or subcommand)::

    command: apt-get install
    root: APT-GET-INSTALL
    flag FLAG-YES = -y | --yes | --assume-yes
    flag* FLAG-QUIET = -q | --quiet
    opt FLAG-OPTION<APT-OPTION> = -o | --option
    args PACKAGES/PACKAGE *

``flag`` options take no value, ``flag*`` options are counted and ``opt``
options take one value. ``command:`` accepts ``|``-separated alternative
spellings of the command path. A file may hold several documents separated
by ``---`` lines.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .shell import split_words
from .tree import KIND_RE, UNKNOWN, TreeNode, leaf

NONE, COUNTED, VALUE = "none", "counted", "one-value"
_ARITY = {"flag": NONE, "flag*": COUNTED, "opt": VALUE}
_OPT_RE = re.compile(r"^([A-Z0-9-]+)(?:<([A-Z0-9-]+)>)?$")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class OptionSpec:
    kind: str
    spellings: tuple[str, ...]
    arity: str = NONE
    value_kind: Optional[str] = None


@dataclass(frozen=True)
class PositionalSpec:
    item_kind: str
    collection_kind: Optional[str] = None
    count: Optional[int] = None  # None means zero-or-more

    @property
    def cardinality(self) -> str:
        return "zero-or-more" if self.count is None else f"exactly-{self.count}"


@dataclass(frozen=True)
class CommandSchema:
    command_paths: tuple[tuple[str, ...], ...]
    root_kind: str
    options: tuple[OptionSpec, ...] = ()
    positionals: tuple[PositionalSpec, ...] = ()

    @property
    def command_path(self) -> tuple[str, ...]:
        return self.command_paths[0]

    def option_for(self, spelling: str) -> Optional[OptionSpec]:
        for opt in self.options:
            if spelling in opt.spellings:
                return opt
        return None


def _check_kind(kind: str, lineno: int) -> str:
    if not KIND_RE.match(kind):
        raise SchemaError(f"line {lineno}: bad node kind {kind!r}")
    return kind


def parse_schema(text: str) -> CommandSchema:
    paths: list[tuple[str, ...]] = []
    root = None
    options: list[OptionSpec] = []
    positionals: list[PositionalSpec] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith("#") else ""
        if not line:
            continue
        if line.startswith("command:"):
            paths = [tuple(alt.split()) for alt in line[len("command:"):].split("|")]
            if not all(paths):
                raise SchemaError(f"line {lineno}: empty command path")
            continue
        if line.startswith("root:"):
            root = _check_kind(line[len("root:"):].strip(), lineno)
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword in _ARITY:
            lhs, eq, rhs = rest.partition("=")
            m = _OPT_RE.match(lhs.strip())
            if not eq or not m:
                raise SchemaError(f"line {lineno}: expected 'KIND = spellings'")
            kind, value_kind = m.groups()
            arity = _ARITY[keyword]
            if (arity == VALUE) != (value_kind is not None):
                raise SchemaError(f"line {lineno}: only 'opt' options declare a <VALUE-KIND>")
            spellings = tuple(s.strip() for s in rhs.split("|") if s.strip())
            if not spellings or not all(s.startswith("-") for s in spellings):
                raise SchemaError(f"line {lineno}: option spellings must start with '-'")
            options.append(OptionSpec(kind, spellings, arity, value_kind))
        elif keyword == "args":
            parts = rest.split()
            if len(parts) != 2:
                raise SchemaError(f"line {lineno}: expected 'args [COLLECTION/]ITEM *|N'")
            coll, _, item = parts[0].rpartition("/")
            if parts[1] == "*":
                count = None
            elif parts[1].isdigit():
                count = int(parts[1])
            else:
                raise SchemaError(f"line {lineno}: unknown cardinality {parts[1]!r}")
            positionals.append(PositionalSpec(_check_kind(item, lineno),
                                              _check_kind(coll, lineno) if coll else None, count))
        else:
            raise SchemaError(f"line {lineno}: unknown arity keyword {keyword!r}")
    if not paths:
        raise SchemaError("schema is missing 'command:'")
    if root is None:
        raise SchemaError("schema is missing 'root:'")
    seen: dict[str, str] = {}
    for opt in options:
        for s in opt.spellings:
            if s in seen:
                raise SchemaError(f"{root}: spelling {s!r} used by both {seen[s]} and {opt.kind}")
            seen[s] = opt.kind
    return CommandSchema(tuple(paths), root, tuple(options), tuple(positionals))


def split_documents(text: str) -> list[str]:
    docs = re.split(r"^---\s*$", text, flags=re.MULTILINE)
    return [d for d in docs if re.search(r"^\s*command:", d, re.MULTILINE)]


def load_schemas(texts: Iterable[str]) -> list[CommandSchema]:
    """Parse and validate schema documents; root kinds must be unique."""
    out: list[CommandSchema] = []
    roots: set[str] = set()
    for text in texts:
        schema = parse_schema(text)
        if schema.root_kind in roots:
            raise SchemaError(f"duplicate root kind {schema.root_kind}")
        roots.add(schema.root_kind)
        out.append(schema)
    return out


def load_schema_dir(path: Union[str, Path]) -> list[CommandSchema]:
    texts = []
    for f in sorted(Path(path).glob("*.schema")):
        texts.extend(split_documents(f.read_text(encoding="utf-8")))
    return load_schemas(texts)


def bundled_schemas() -> list[CommandSchema]:
    texts = []
    root = resources.files("dockrules") / "data" / "schemas"
    for f in sorted(root.iterdir(), key=lambda p: p.name):
        if f.name.endswith(".schema"):
            texts.extend(split_documents(f.read_text(encoding="utf-8")))
    return load_schemas(texts)


class SchemaSet:
    """Lookup structure over an immutable list of schemas."""

    def __init__(self, schemas: Sequence[CommandSchema]):
        self.schemas = tuple(schemas)
        self.by_program: dict[str, list[tuple[tuple[str, ...], CommandSchema]]] = {}
        for s in self.schemas:
            for path in s.command_paths:
                self.by_program.setdefault(path[0], []).append((path, s))
        for entries in self.by_program.values():
            entries.sort(key=lambda e: -len(e[0]))

    def __len__(self) -> int:
        return len(self.schemas)

    def normalize_program(self, word: str) -> str:
        if "/" in word:
            base = word.rsplit("/", 1)[1]
            if base in self.by_program:
                return base
        return word

    def match(self, words: list[str]) -> Optional[tuple[CommandSchema, list[int]]]:
        """Find the longest matching command path; return the schema and the
        indices of the words that remain as arguments."""
        if not words:
            return None
        prog = self.normalize_program(words[0])
        for path, schema in self.by_program.get(prog, ()):
            rest = list(range(1, len(words)))
            consumed: list[int] = []
            ok = True
            for sub in path[1:]:
                j = 0
                while j < len(rest) and words[rest[j]].startswith("-") and len(words[rest[j]]) > 1:
                    opt = schema.option_for(words[rest[j]])
                    j += 2 if opt is not None and opt.arity == VALUE else 1
                if j < len(rest) and words[rest[j]] == sub:
                    consumed.append(rest[j])
                    rest = rest[:j] + rest[j + 1:]
                else:
                    ok = False
                    break
            if ok:
                return schema, rest
        return None


def _as_set(schemas) -> SchemaSet:
    return schemas if isinstance(schemas, SchemaSet) else SchemaSet(schemas)


def _parse_args(schema: CommandSchema, args: list[str]) -> list[TreeNode]:
    seen_flags: set[str] = set()
    counts: dict[str, int] = {}
    values: dict[str, list[str]] = {}
    unknown: list[str] = []
    positional: list[str] = []

    def take(opt: OptionSpec, attached: Optional[str], it) -> None:
        if opt.arity == NONE:
            seen_flags.add(opt.kind)
        elif opt.arity == COUNTED:
            counts[opt.kind] = counts.get(opt.kind, 0) + 1
        else:
            value = attached if attached is not None else next(it, None)
            values.setdefault(opt.kind, []).append(value if value is not None else "")

    it = iter(args)
    for word in it:
        if word == "--":
            positional.extend(it)
            break
        if word.startswith("--") and len(word) > 2:
            name, eq, val = word.partition("=")
            opt = schema.option_for(name)
            if opt is None:
                unknown.append(name)
            elif opt.arity != VALUE and eq:
                unknown.append(word)
            else:
                take(opt, val if eq else None, it)
        elif word.startswith("-") and len(word) > 1:
            opt = schema.option_for(word)
            if opt is not None:
                take(opt, None, it)
                continue
            for j in range(1, len(word)):
                opt = schema.option_for("-" + word[j])
                if opt is None:
                    unknown.append("-" + word[j])
                    continue
                if opt.arity == VALUE:
                    take(opt, word[j + 1:] or None, it)
                    break
                take(opt, None, it)
        else:
            positional.append(word)

    children: list[TreeNode] = []
    for opt in schema.options:  # declaration order
        if opt.kind in seen_flags and opt.arity == NONE:
            children.append(TreeNode(opt.kind))
            seen_flags.discard(opt.kind)
        elif opt.arity == COUNTED and opt.kind in counts:
            children.append(leaf(opt.kind, str(counts.pop(opt.kind)), counted=True))
        elif opt.arity == VALUE and opt.kind in values:
            for v in values.pop(opt.kind):
                children.append(TreeNode(opt.kind, (leaf(opt.value_kind, v),)))
    children.extend(leaf("UNKNOWN-FLAG", u) for u in unknown)

    specs = schema.positionals
    fixed_after = [sum(s.count or 0 for s in specs[k + 1:]) for k in range(len(specs))]
    pos = 0
    for k, spec in enumerate(specs):
        if spec.count is None:
            n = max(0, len(positional) - pos - fixed_after[k])
        else:
            n = min(spec.count, len(positional) - pos)
        items = [leaf(spec.item_kind, v) for v in positional[pos:pos + n]]
        pos += n
        if spec.collection_kind:
            if items:
                children.append(TreeNode(spec.collection_kind, tuple(items)))
        else:
            children.extend(items)
    children.extend(leaf("UNKNOWN-ARG", v) for v in positional[pos:])
    return children


def parse_command(command_text: str, schemas, origin_id: Optional[int] = None) -> TreeNode:
    """Parse one simple-command literal with the matching schema.

    Commands without a matching schema come back as an EU ``UNKNOWN`` leaf
    that keeps ``origin_id``.
    """
    sset = _as_set(schemas)
    try:
        words = [t.value for t in split_words(command_text)]
    except ValueError:
        words = []
    found = sset.match(words)
    if found is None:
        return leaf(UNKNOWN, command_text, eu=True, origin_id=origin_id)
    schema, rest = found
    children = _parse_args(schema, [words[i] for i in rest])
    return TreeNode(schema.root_kind, tuple(children), origin_id=origin_id)


def enrich_phase3(tree: TreeNode, schemas) -> tuple[TreeNode, dict[int, bool]]:
    """Replace every ``BASH-COMMAND`` literal with its command tree.

    Returns the new tree and a map from phase-II origin id to whether that
    command was resolved by a schema.
    """
    sset = _as_set(schemas)
    resolution: dict[int, bool] = {}

    def visit(n: TreeNode) -> TreeNode:
        if n.kind == "BASH-COMMAND" and n.literal is not None:
            cmd = parse_command(n.literal, sset, n.origin_id)
            if n.origin_id is not None:
                resolution[n.origin_id] = cmd.kind != UNKNOWN
            return replace(n, literal=None, eu=False, origin_id=None, children=(cmd,))
        if n.kind == UNKNOWN and n.origin_id is not None:
            resolution[n.origin_id] = False
        if not n.children:
            return n
        return n.with_children(visit(c) for c in n.children)

    return visit(tree), resolution


def phase3_kinds(schemas) -> set[str]:
    """Every node kind a schema set can introduce."""
    kinds: set[str] = set()
    for s in _as_set(schemas).schemas:
        kinds.add(s.root_kind)
        for o in s.options:
            kinds.add(o.kind)
            if o.value_kind:
                kinds.add(o.value_kind)
        for p in s.positionals:
            kinds.add(p.item_kind)
            if p.collection_kind:
                kinds.add(p.collection_kind)
    return kinds

