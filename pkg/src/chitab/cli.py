"""Command-line entry point: ``chitab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .client import EndpointConfig, collect_responses
from .config import ConfigError, RunConfig, resolve
from .harness import (HarnessError, per_table_solve_rate, read_responses, sample_tuning_subset, score,
                      solve_rate_csv, stability)
from .pipeline import CorpusError, config_hash, discover, run, write_outputs
from .qa import PromptStyle, QuestionType, read_records, render_prompt
from .stats import combine, histogram_csv, questions_per_table_histogram, render_text

log = logging.getLogger("chitab")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class DataError(Exception):
    pass


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--structure-dir", dest="structure_dir")
    p.add_argument("--words-dir", dest="words_dir")
    p.add_argument("--split-list", dest="split_list", action="append", default=[],
                   help="SPLIT=path or a path named after its split; repeatable")
    p.add_argument("--out")
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-covered-columns", dest="min_covered_columns", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--workers", type=int)


def _add_strict(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strict", action="store_true", default=None, help="accept only a bare integer answer")


def _load_gold(paths) -> list:
    records = []
    for p in paths:
        path = Path(p)
        files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
        for f in files:
            records.extend(read_records(f))
    if not records:
        raise DataError("no records")
    return records


def _write(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_corpus(args, build: bool) -> int:
    cfg = resolve(vars(args), args.config)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise DataError(str(exc)) from None
    if cfg.out is None:
        raise DataError("--out is required")
    fcfg = cfg.filter_config()
    log.info("config hash %s", config_hash(fcfg))
    tasks = discover(cfg.structure_dir, cfg.words_dir, cfg.split_list)
    if not tasks:
        raise DataError(f"no structure files under {cfg.structure_dir}")
    total = len(tasks)

    def progress(n):
        if n % 5000 == 0 or n == total:
            log.info("%d/%d tables", n, total)

    counts = write_outputs(run(tasks, fcfg, cfg.workers, build), cfg.out, fcfg, build, progress)
    for split, c in counts.items():
        log.info("%s: %d in, %d kept, %d corrupt", split, c["tables_in"], c["tables_kept"], c["corrupt"])
    return EXIT_OK


def cmd_stats(args) -> int:
    root = Path(args.input)
    bench = root / "benchmark" if (root / "benchmark").is_dir() else root
    files = sorted(bench.glob("*.jsonl")) if bench.is_dir() else [bench]
    records = [r for f in files if f.exists() for r in read_records(f)]
    if not records:
        raise DataError("no records")
    log_path = root / "filter_log.json"
    run_log = json.loads(log_path.read_text()) if log_path.exists() else None
    stats = combine(run_log, records)
    hist = questions_per_table_histogram(records)
    if args.format == "json":
        _write(json.dumps({"splits": [s.to_dict() for s in stats],
                           "histogram": {str(k): v for k, v in hist.items()}}, indent=2) + "\n", None)
    else:
        _write(render_text(stats), None)
    if args.histogram_csv:
        _write(histogram_csv(hist), args.histogram_csv)
    return EXIT_OK


def cmd_prompts(args) -> int:
    styles = list(PromptStyle) if args.style == "all" else [PromptStyle.parse(args.style)]
    for s in styles:
        prefix = f"{s.value}\t" if len(styles) > 1 else ""
        print(prefix + render_prompt(s, QuestionType(args.qtype), args.heading))
    return EXIT_OK


def cmd_collect(args) -> int:
    ep = EndpointConfig.load(args.endpoint_config)
    if args.group:
        ep.group = args.group
    if args.max_concurrency:
        ep.max_concurrency = args.max_concurrency
    records = _load_gold(args.gold)
    if args.ids:
        wanted = {ln.strip() for ln in Path(args.ids).read_text().splitlines() if ln.strip()}
        records = [r for r in records if r.question_id in wanted]
    n = failed = 0
    for r in collect_responses(ep, records, PromptStyle.parse(args.style), args.runs, args.out, args.images_dir):
        n += 1
        failed += r.error is not None
    log.info("collected %d responses (%d failed) into %s", n, failed, args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    gold = _load_gold(args.gold)
    reports = score(read_responses(args.responses), gold, bool(args.strict), args.count_failures)
    if args.format == "json":
        _write(json.dumps([r.to_dict() for r in reports], indent=2) + "\n", args.out)
    else:
        lines = ["group\tstyle\tSHQA\tVLQA\toverall\tn"]
        for r in reports:
            acc = [f"{r.accuracy[q]:.1f}" if q in r.accuracy else "-" for q in QuestionType]
            lines.append(f"{r.group}\t{r.prompt_style.value}\t{acc[0]}\t{acc[1]}\t{r.overall:.1f}\t{sum(r.n.values())}")
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_stability(args) -> int:
    responses = read_responses(args.responses)
    gold = _load_gold(args.gold) if args.gold else None
    groups = sorted({r.group for r in responses})
    if not groups:
        raise DataError("no responses")
    reports = [stability(responses, args.runs, gold, bool(args.strict), group=g) for g in groups]
    if args.format == "json":
        _write(json.dumps([r.to_dict() for r in reports], indent=2) + "\n", args.out)
    else:
        lines = ["group\tmean_accuracy\tunstable\tstability_pct"]
        for r in reports:
            acc = "-" if r.mean_accuracy is None else f"{r.mean_accuracy:.1f}"
            lines.append(f"{r.group}\t{acc}\t{r.unstable_questions}\t{r.stability_pct:.1f}")
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_solve_rates(args) -> int:
    rates = per_table_solve_rate(read_responses(args.responses), _load_gold(args.gold), bool(args.strict))
    _write(solve_rate_csv(rates), args.out)
    return EXIT_OK


def cmd_sample_subset(args) -> int:
    seed = args.seed
    if args.config:
        cfg = resolve({"seed": seed}, args.config)
        seed = cfg.seed
    ids = sample_tuning_subset(_load_gold(args.gold), args.n_per_type, seed if seed is not None else 0)
    _write("".join(i + "\n" for i in ids), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chitab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chitab {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="write kept-table id lists per split and diagnostics")
    _add_corpus_flags(p)
    p = sub.add_parser("build", help="write benchmark JSONL, forests and manifest")
    _add_corpus_flags(p)

    p = sub.add_parser("stats", help="coverage, answer statistics and questions-per-table histogram")
    p.add_argument("input", help="build output dir or a benchmark JSONL file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--histogram-csv", dest="histogram_csv")

    p = sub.add_parser("prompts", help="render one prompt style for a heading")
    p.add_argument("heading")
    p.add_argument("--style", default="Base", help="prompt style or 'all'")
    p.add_argument("--qtype", choices=[q.value for q in QuestionType], default="SHQA")

    p = sub.add_parser("collect", help="query a vision-chat endpoint")
    p.add_argument("--endpoint-config", dest="endpoint_config", required=True)
    p.add_argument("--gold", action="append", required=True)
    p.add_argument("--images-dir", dest="images_dir")
    p.add_argument("--style", default="Base")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--group")
    p.add_argument("--ids", help="file of question ids to restrict to")
    p.add_argument("--max-concurrency", dest="max_concurrency", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", help="exact-match accuracy per group and style")
    p.add_argument("--responses", required=True)
    p.add_argument("--gold", action="append", required=True)
    p.add_argument("--count-failures", dest="count_failures", action="store_true",
                   help="score failed requests as empty answers instead of skipping them")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    _add_strict(p)

    p = sub.add_parser("stability", help="answer stability across repeated runs")
    p.add_argument("--responses", required=True)
    p.add_argument("--gold", action="append")
    p.add_argument("--runs", type=int, default=29)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    _add_strict(p)

    p = sub.add_parser("solve-rates", help="per-table solve rate CSV")
    p.add_argument("--responses", required=True)
    p.add_argument("--gold", action="append", required=True)
    p.add_argument("--out")
    _add_strict(p)

    p = sub.add_parser("sample-subset", help="prompt-tuning subset, one question per table per type")
    p.add_argument("--gold", action="append", required=True)
    p.add_argument("--n-per-type", dest="n_per_type", type=int, default=1250)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--workers", type=int, help="accepted for symmetry; sampling is single-threaded")
    p.add_argument("--out")
    return parser


COMMANDS = {
    "filter": lambda a: cmd_corpus(a, build=False),
    "build": lambda a: cmd_corpus(a, build=True),
    "stats": cmd_stats,
    "prompts": cmd_prompts,
    "collect": cmd_collect,
    "score": cmd_score,
    "stability": cmd_stability,
    "solve-rates": cmd_solve_rates,
    "sample-subset": cmd_sample_subset,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (DataError, ConfigError, CorpusError, HarnessError, OSError, ValueError) as exc:
        print(f"chitab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
