"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 invariant violation, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from corpusforge import __version__
from corpusforge.config import ENV_VAR, load_config
from corpusforge.corpus import read_manifest, write_manifest
from corpusforge.errors import CorpusForgeError, StorageError
from corpusforge import pipeline

log = logging.getLogger("corpusforge")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corpusforge", description="Broadcast speech corpus curation and TTS evaluation.")
    p.add_argument("--config", help=f"JSON config file (default: ${ENV_VAR}, then built-in defaults)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-segment stages")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="build a manifest from a directory of wav + txt pairs")
    s.add_argument("--out", type=Path, help="manifest path (default: paths.manifest)")

    sub.add_parser("pipeline", help="score ingest, heuristics, repair, classification, selection, split")

    s = sub.add_parser("split", help="partition a manifest into train/dev/test")
    s.add_argument("manifest", type=Path)
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--n-dev", type=int)
    s.add_argument("--n-test", type=int)
    s.add_argument("--strategy", choices=["tail", "seeded-random"])

    s = sub.add_parser("synth-gl", help="Griffin-Lim synthesis from binary mel files")
    s.add_argument("mel_dir", type=Path)
    s.add_argument("out_dir", type=Path)
    s.add_argument("--iters", type=int)

    s = sub.add_parser("eval", help="WER/CER/MCD evaluation of synthesized audio")
    s.add_argument("ref_dir", type=Path)
    s.add_argument("syn_dir", type=Path)
    s.add_argument("--transcripts", type=Path, help="JSONL of reference texts")
    s.add_argument("--hyps", type=Path, help="JSONL of ASR hypotheses on the synthesized audio")
    s.add_argument("--system-id", default="sys")
    s.add_argument("--model", default="")
    s.add_argument("--r", dest="reduction_factor", default="N/A")
    s.add_argument("--vowelized", default="")
    s.add_argument("--out-dir", type=Path, help="write per_utterance.csv, report.csv, report.txt here")

    s = sub.add_parser("report", help="render a MOS ratings CSV or evaluation CSV as a table")
    s.add_argument("input", type=Path)

    s = sub.add_parser("speakers", help="link speaker names across metadata files")
    s.add_argument("paths", type=Path, nargs="+")
    s.add_argument("--out", type=Path, help="CSV output (default: stdout)")
    return p


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"writing {path}: {exc}") from exc


def _run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.command == "ingest":
        manifest, _ = pipeline.cmd_ingest(cfg, args.out)
        print(f"ingested {len(manifest)} segments ({manifest.total_duration_s / 60:.1f} min)")
    elif args.command == "pipeline":
        result = pipeline.cmd_pipeline(cfg, jobs=args.jobs)
        print(result.summary_text, end="")
        print(f"selected {len(result.selected)} of {len(result.classified)} segments -> {cfg.paths.output_dir}")
    elif args.command == "split":
        n_dev = cfg.split.n_dev if args.n_dev is None else args.n_dev
        n_test = cfg.split.n_test if args.n_test is None else args.n_test
        parts = pipeline.cmd_split(read_manifest(args.manifest), n_dev, n_test,
                                   args.strategy or cfg.split.strategy, cfg.seed)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        for name, part in zip(("train", "dev", "test"), parts):
            write_manifest(part, args.out_dir / f"{name}.jsonl")
        print("train/dev/test = " + "/".join(str(len(x)) for x in parts))
    elif args.command == "synth-gl":
        written = pipeline.cmd_synth_gl(args.mel_dir, args.out_dir, cfg, args.iters)
        print(f"wrote {len(written)} wav files" if written else f"no .mel files in {args.mel_dir}")
    elif args.command == "eval":
        out = pipeline.cmd_eval(args.ref_dir, args.syn_dir, args.transcripts, args.hyps, cfg,
                                args.system_id, args.model, args.reduction_factor, args.vowelized, args.jobs)
        if args.out_dir:
            _write(args.out_dir / "per_utterance.csv", out.per_utterance_csv)
            _write(args.out_dir / "report.csv", out.report_csv)
            _write(args.out_dir / "report.txt", out.report_text)
        print(out.report_text, end="")
        if out.breakdown_text:
            print(out.breakdown_text, end="")
    elif args.command == "report":
        print(pipeline.cmd_report(args.input, cfg), end="")
    elif args.command == "speakers":
        text, _ = pipeline.cmd_speakers(args.paths, cfg)
        if args.out:
            _write(args.out, text)
        else:
            print(text, end="")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _run(args)
    except CorpusForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
