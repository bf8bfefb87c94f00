"""Corpus ingestion: discovery, SHA1 de-duplication, phased parsing and
effectively-uninterpretable (EU) leaf statistics."""
from __future__ import annotations

import hashlib
import os
import re
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from .abstraction import Abstraction, abstract_tree, bundled_abstractions
from .dockerfile import DockerfileError, parse_dockerfile
from .schemas import CommandSchema, SchemaSet, bundled_schemas, enrich_phase3
from .shell import enrich_phase2
from .tree import EuReport, TreeNode, eu_origin_ids, eu_stats

DEFAULT_FILTER = "dockerfile"


@dataclass
class ParsedDockerfile:
    phase1: TreeNode
    phase2: TreeNode
    phase3: TreeNode
    abstracted: TreeNode
    eu_reports: dict[int, EuReport]
    resolution: dict[int, bool]
    warnings: list[str] = field(default_factory=list)


def parse_all_phases(text: str, schemas: Union[Sequence[CommandSchema], SchemaSet, None] = None,
                     abstractions: Optional[Sequence[Abstraction]] = None) -> ParsedDockerfile:
    """Run phases I-III plus abstraction on one Dockerfile's text."""
    schemas = bundled_schemas() if schemas is None else schemas
    abstractions = bundled_abstractions() if abstractions is None else abstractions
    warnings: list[str] = []
    p1 = parse_dockerfile(text)
    p2 = enrich_phase2(p1, warnings)
    p3, resolution = enrich_phase3(p2, schemas)
    reports = {
        1: eu_stats(p1, 1),
        2: eu_stats(p2, 2),
        3: eu_stats(p3, 3, eu_origin_ids(p2)),
    }
    return ParsedDockerfile(p1, p2, p3, abstract_tree(p3, abstractions), reports, resolution, warnings)


@dataclass
class CorpusEntry:
    path: str
    sha1: str
    phase3_tree: TreeNode
    abstracted_tree: TreeNode
    eu_reports: dict[int, EuReport]
    warnings: list[str] = field(default_factory=list)


@dataclass
class Reject:
    path: str
    reason: str


@dataclass
class Corpus:
    entries: list[CorpusEntry]
    rejects: list[Reject]

    def trees(self) -> list[TreeNode]:
        return [e.abstracted_tree for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _make_filter(filename_filter) -> Callable[[str], bool]:
    if filename_filter is None:
        return lambda name: DEFAULT_FILTER in name.lower()
    if callable(filename_filter):
        return filename_filter
    rx = re.compile(filename_filter, re.IGNORECASE)
    return lambda name: rx.search(name) is not None


def discover(root_paths: Iterable[Union[str, Path]], filename_filter=None) -> list[Path]:
    """Files under ``root_paths`` whose names pass the filter, sorted.

    Paths given directly as files are always included.
    """
    accept = _make_filter(filename_filter)
    found: set[Path] = set()
    for root in root_paths:
        root = Path(root)
        if root.is_file():
            found.add(root)
        elif root.is_dir():
            for p in root.rglob("*"):
                if p.is_file() and accept(p.name):
                    found.add(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {root}")
    return sorted(found)


_worker_state: dict = {}


def _init_worker(schemas, abstractions) -> None:
    _worker_state["schemas"] = SchemaSet(schemas)
    _worker_state["abstractions"] = abstractions


def _process(item: tuple[str, bytes]):
    path, data = item
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError:
        text = data.decode("latin-1")
    try:
        parsed = parse_all_phases(text, _worker_state["schemas"], _worker_state["abstractions"])
    except DockerfileError as exc:
        return Reject(path, str(exc))
    digest = hashlib.sha1(data).hexdigest()
    return CorpusEntry(path, digest, parsed.phase3, parsed.abstracted, parsed.eu_reports, parsed.warnings)


def ingest(root_paths: Iterable[Union[str, Path]], filename_filter=None,
           schemas: Optional[Sequence[CommandSchema]] = None,
           abstractions: Optional[Sequence[Abstraction]] = None,
           jobs: Optional[int] = 1) -> Corpus:
    """Read, de-duplicate and parse every matching file.

    Files that fail Dockerfile parsing, or cannot be read, become rejects
    with a reason. ``jobs`` > 1 parses files in worker processes; ``None``
    uses every CPU.
    """
    schemas = list(bundled_schemas() if schemas is None else schemas)
    abstractions = list(bundled_abstractions() if abstractions is None else abstractions)
    rejects: list[Reject] = []
    seen: set[str] = set()
    items: list[tuple[str, bytes]] = []
    for p in discover(root_paths, filename_filter):
        try:
            data = p.read_bytes()
        except OSError as exc:
            rejects.append(Reject(str(p), f"read error: {exc.strerror or exc}"))
            continue
        digest = hashlib.sha1(data).hexdigest()
        if digest in seen:
            continue
        seen.add(digest)
        items.append((str(p), data))

    jobs = (os.cpu_count() or 1) if jobs is None else jobs
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(schemas, abstractions)) as pool:
            results = list(pool.map(_process, items, chunksize=max(1, len(items) // (4 * jobs))))
    else:
        _init_worker(schemas, abstractions)
        results = [_process(it) for it in items]

    entries = [r for r in results if isinstance(r, CorpusEntry)]
    rejects.extend(r for r in results if isinstance(r, Reject))
    return Corpus(entries, sorted(rejects, key=lambda r: r.path))


def _describe(values: list[float]) -> dict[str, float]:
    if len(values) == 1:
        q1 = q3 = values[0]
    else:
        q1, _, q3 = statistics.quantiles(values, n=4, method="inclusive")
    return {"mean": statistics.fmean(values), "median": statistics.median(values),
            "q1": q1, "q3": q3, "min": min(values), "max": max(values)}


def per_file_metrics(entries: Iterable[CorpusEntry]) -> list[dict]:
    rows = []
    for e in entries:
        r = e.eu_reports
        rows.append({"path": e.path, "M1": r[1].fraction, "M2": r[2].fraction,
                     "M3": r[3].unresolved_fraction,
                     "leaves": [r[1].total_leaves, r[2].total_leaves, r[3].total_leaves],
                     "eu_leaves": [r[1].eu_leaves, r[2].eu_leaves, r[3].eu_leaves]})
    return rows


def corpus_eu_summary(entries: Iterable[CorpusEntry]) -> dict:
    """Distribution of M1/M2/M3 over a corpus plus the fully-resolved share."""
    rows = per_file_metrics(entries)
    if not rows:
        raise ValueError("empty corpus")
    summary = {m: _describe([row[m] for row in rows]) for m in ("M1", "M2", "M3")}
    summary["files"] = len(rows)
    summary["fully_resolved_fraction"] = sum(1 for row in rows if row["M3"] == 0) / len(rows)
    summary["per_file"] = rows
    return summary
