"""Corpus discovery, per-table processing and ordered output writing."""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from . import __version__, _kernels
from .complexity import FilterConfig, has_vertical_dependency, qualifying_spanners, sorted_columns
from .geometry import MalformedAnnotation
from .hierarchy import ForestError, build_forest
from .ingest import AnnotationParseError, Diagnostics, Split, load_table
from .qa import CorruptForest, generate_records

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class TableTask:
    table_id: str
    split: Split
    structure_path: str
    words_path: str | None


@dataclass
class TableResult:
    table_id: str
    split: Split
    status: str  # "kept", "dropped" or "corrupt"
    records: list[str] = field(default_factory=list)
    forest: str | None = None
    nodes: int = 0
    diagnostics: dict | None = None


def _split_from_path(path: Path, root: Path) -> Split | None:
    for part in path.relative_to(root).parts[:-1]:
        try:
            return Split.parse(part)
        except ValueError:
            continue
    return None


def _words_path(stem: str, xml_path: Path, words_dir: Path | None) -> Path | None:
    base = words_dir if words_dir is not None else xml_path.parent
    for name in (f"{stem}_words.json", f"{stem}.json"):
        if (base / name).exists():
            return base / name
    return None


def _split_list_label(path: str) -> tuple[str | None, str]:
    if "=" in path:
        label, p = path.split("=", 1)
        return label, p
    return None, path


def discover(structure_dir, words_dir=None, split_lists: Iterable[str] = ()) -> list[TableTask]:
    """Pair structure and word files; split comes from split lists or directory names.

    A split list is ``SPLIT=path`` or a path whose file name names the split
    (``val_filelist.txt``); each line holds a table id or a file path.
    """
    root = Path(structure_dir)
    if not root.is_dir():
        raise CorpusError(f"structure dir {root} does not exist")
    wdir = Path(words_dir) if words_dir else None
    xmls = sorted(root.rglob("*.xml"))
    by_stem: dict[str, Path] = {}
    for p in xmls:
        if p.stem in by_stem:
            raise CorpusError(f"duplicate table id {p.stem}: {by_stem[p.stem]} and {p}")
        by_stem[p.stem] = p

    assigned: dict[str, Split] = {}
    for spec in split_lists:
        label, lp = _split_list_label(spec)
        if label is None:
            name = Path(lp).name.lower()
            found = [s for s in ("train", "val", "test") if name.startswith(s)]
            if not found:
                raise CorpusError(f"cannot tell the split of list {lp}; use SPLIT=path")
            label = found[0]
        split = Split.parse(label)
        with open(lp, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    assigned[Path(line.strip()).stem] = split

    tasks = []
    if split_lists:
        for stem, split in assigned.items():
            xml = by_stem.get(stem)
            if xml is None:
                tasks.append(TableTask(stem, split, str(root / f"{stem}.xml"), None))
                continue
            wp = _words_path(stem, xml, wdir)
            tasks.append(TableTask(stem, split, str(xml), None if wp is None else str(wp)))
    else:
        for stem, xml in by_stem.items():
            split = _split_from_path(xml, root)
            if split is None:
                raise CorpusError(f"cannot tell the split of {xml}; pass --split-list")
            wp = _words_path(stem, xml, wdir)
            tasks.append(TableTask(stem, split, str(xml), None if wp is None else str(wp)))
    tasks.sort(key=lambda t: (list(Split).index(t.split), t.table_id))
    return tasks


def process_table(task: TableTask, cfg: FilterConfig, build: bool = True) -> TableResult:
    """Parse, filter and (when ``build``) emit forest and questions for one table.

    Unreadable or inconsistent annotations yield status "corrupt"; nothing raises.
    """
    diag = Diagnostics(source=task.structure_path)
    try:
        if task.words_path is None:
            raise FileNotFoundError(f"no word file for {task.table_id}")
        xml = Path(task.structure_path).read_bytes()
        words = Path(task.words_path).read_bytes()
        table = load_table(xml, words, task.table_id, task.split, diag)
        cells = qualifying_spanners(table, cfg, diag)
        keep = len(cells) >= 2 and has_vertical_dependency(cells, cfg.containment_eps)
        if not keep:
            return TableResult(task.table_id, task.split, "dropped",
                               diagnostics=None if diag.is_empty() else diag.to_dict())
        result = TableResult(task.table_id, task.split, "kept")
        if build:
            forest = build_forest(cells, sorted_columns(table), cfg)
            diag.warnings.extend(forest.warnings)
            records = generate_records(table, forest, diag.warnings)
            result.forest = json.dumps(forest.to_dict(table.table_id), ensure_ascii=False)
            result.records = [r.to_json() for r in records]
            result.nodes = len(forest.nodes)
    except (OSError, AnnotationParseError, MalformedAnnotation, CorruptForest, ForestError) as exc:
        diag.error = f"{type(exc).__name__}: {exc}"
        return TableResult(task.table_id, task.split, "corrupt", diagnostics=diag.to_dict())
    result.diagnostics = None if diag.is_empty() else diag.to_dict()
    return result


def _job(args):
    task, cfg, build = args
    return process_table(task, cfg, build)


def run(tasks: list[TableTask], cfg: FilterConfig, workers: int = 1, build: bool = True,
        chunksize: int = 32) -> Iterator[TableResult]:
    """Yield results in task order whatever the worker count."""
    _kernels.warm_up()
    jobs = ((t, cfg, build) for t in tasks)
    if workers <= 1:
        yield from map(_job, jobs)
        return
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        yield from pool.map(_job, jobs, chunksize=chunksize)


def config_hash(cfg: FilterConfig) -> str:
    payload = json.dumps({"filter": cfg.to_dict(), "version": __version__}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def write_outputs(results: Iterable[TableResult], out_dir, cfg: FilterConfig, build: bool = True,
                  progress=None) -> dict:
    """Stream results into the output tree; returns the filter log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kept").mkdir(exist_ok=True)
    if build:
        (out / "benchmark").mkdir(exist_ok=True)
        (out / "forests").mkdir(exist_ok=True)
    handles: dict[tuple[str, Split], object] = {}

    def handle(kind: str, split: Split):
        if (kind, split) not in handles:
            ext = "txt" if kind == "kept" else "jsonl"
            handles[(kind, split)] = open(out / kind / f"{split.value}.{ext}", "w", encoding="utf-8",
                                          newline="\n")
        return handles[(kind, split)]

    log_: dict[str, dict] = {}
    try:
        with open(out / "diagnostics.jsonl", "w", encoding="utf-8", newline="\n") as diag_f:
            for n, r in enumerate(results, 1):
                counts = log_.setdefault(r.split.value, {"tables_in": 0, "tables_kept": 0, "corrupt": 0,
                                                         "questions": 0, "nodes": 0})
                counts["tables_in"] += 1
                handle("kept", r.split)
                if r.status == "corrupt":
                    counts["corrupt"] += 1
                elif r.status == "kept":
                    counts["tables_kept"] += 1
                    handle("kept", r.split).write(r.table_id + "\n")
                    if build:
                        counts["questions"] += len(r.records)
                        counts["nodes"] += r.nodes
                        handle("forests", r.split).write(r.forest + "\n")
                        bench = handle("benchmark", r.split)
                        for line in r.records:
                            bench.write(line + "\n")
                if r.diagnostics is not None:
                    diag_f.write(json.dumps({"table_id": r.table_id, "split": r.split.value,
                                             "status": r.status, **r.diagnostics}, ensure_ascii=False) + "\n")
                if progress is not None:
                    progress(n)
    finally:
        for h in handles.values():
            h.close()
    if build:
        for split in {s for _, s in handles}:
            for kind in ("benchmark", "forests"):
                (out / kind / f"{split.value}.jsonl").touch()
    ordered = {s.value: log_[s.value] for s in Split if s.value in log_}
    (out / "filter_log.json").write_text(json.dumps(ordered, indent=2) + "\n", encoding="utf-8")
    if build:
        manifest = {
            "tool": "chitab",
            "version": __version__,
            "config_hash": config_hash(cfg),
            "config": cfg.to_dict(),
            "splits": ordered,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return ordered
