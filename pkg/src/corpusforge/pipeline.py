"""Batch commands: ingest, selection pipeline, splits, GL synthesis, evaluation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpusforge import __version__
from corpusforge.config import PipelineConfig
from corpusforge.corpus import (
    AudioSegment,
    CorpusManifest,
    Waveform,
    class_summary_csv,
    format_class_summary,
    load_wav,
    read_manifest,
    summarize_corpus,
    write_manifest,
    write_wav,
)
from corpusforge import dsp
from corpusforge.errors import CorpusForgeError, InputError, StorageError
from corpusforge.evaluate import (
    EvalRow,
    breakdown_table,
    cer,
    error_rate,
    evaluation_report,
    mos_by_system,
    mos_table,
    read_mos_csv,
    read_report_csv,
    mcd,
    pool_alignments,
    wer,
)
from corpusforge.metadata import link_speakers, load_overrides, normalize_name, parse_metadata, speakers_csv
from corpusforge.quality import classify_segment, compute_heuristics, ingest_scores, read_score_file, select
from corpusforge.textproc import DiacritizerHook, read_hypotheses, repair_transcript

log = logging.getLogger(__name__)


class SegmentError(CorpusForgeError):
    """A module error re-raised with the segment it happened on."""

    def __init__(self, segment_id: str, cause: Exception):
        self.segment_id = segment_id
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"segment {segment_id}: {cause}")


def _require(path: Optional[str], what: str) -> Path:
    if not path:
        raise InputError(f"config is missing paths.{what}")
    p = Path(path)
    if not p.exists():
        raise InputError(f"paths.{what} does not exist: {p}")
    return p


# ---------------------------------------------------------------- ingest


def cmd_ingest(cfg: PipelineConfig, out_path: Optional[Path] = None) -> Tuple[CorpusManifest, List[str]]:
    """Scan ``corpus_root`` for ``<id>.wav`` + ``<id>.txt`` pairs.

    An optional ``<id>.meta.txt`` supplies the speaker (first speaker entry,
    normalized). WAVs without a transcript are skipped with a warning.
    """
    root = _require(cfg.paths.corpus_root, "corpus_root")
    if not root.is_dir():
        raise InputError(f"corpus_root is not a directory: {root}")
    overrides = load_overrides(cfg.paths.speaker_overrides) if cfg.paths.speaker_overrides else {}
    segments, warnings = [], []
    for wav_path in sorted(root.rglob("*.wav")):
        sid = wav_path.stem
        txt = wav_path.with_suffix(".txt")
        if not txt.exists():
            warnings.append(f"{wav_path.name}: no transcript, skipped")
            continue
        wav = load_wav(wav_path)
        speaker = ""
        meta_path = wav_path.with_name(sid + ".meta.txt")
        if meta_path.exists():
            meta, meta_warnings = parse_metadata(meta_path.read_text(encoding="utf-8"))
            warnings += [f"{meta_path.name}: {w}" for w in meta_warnings]
            if meta.speaker_entries:
                raw = meta.speaker_entries[0]
                speaker = overrides.get(raw) or normalize_name(raw, cfg.metadata.fold_arabic)
        segments.append(AudioSegment(
            id=sid,
            audio_path=str(wav_path.relative_to(root)),
            start_s=0.0,
            end_s=wav.duration_s,
            speaker_id=speaker,
            transcript_raw=" ".join(txt.read_text(encoding="utf-8").split()),
            sample_rate_hz=wav.sample_rate_hz,
        ))
    for w in warnings:
        log.warning(w)
    manifest = CorpusManifest(tuple(segments), source_name=root.name)
    out_path = out_path or Path(cfg.paths.manifest or Path(cfg.paths.output_dir) / "manifest.jsonl")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out_path)
    return manifest, warnings


# ---------------------------------------------------------------- pipeline


@dataclass
class PipelineResult:
    classified: CorpusManifest
    selected: CorpusManifest
    splits: Optional[Tuple[CorpusManifest, CorpusManifest, CorpusManifest]]
    summary_text: str
    provenance: Dict
    warnings: List[str] = field(default_factory=list)


def read_flags(path) -> Dict[str, Tuple[bool, bool]]:
    """``segment_id,overlap,wrong_speaker`` CSV with 0/1 or true/false cells."""
    truthy = {"1", "true", "yes", "y", "t"}
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["segment_id"]] = (
                row.get("overlap", "0").strip().lower() in truthy,
                row.get("wrong_speaker", "0").strip().lower() in truthy,
            )
    return out


def _audio_base(cfg: PipelineConfig, manifest_path: Path) -> Path:
    return Path(cfg.paths.corpus_root) if cfg.paths.corpus_root else manifest_path.parent


def cmd_pipeline(cfg: PipelineConfig, jobs: int = 1) -> PipelineResult:
    """Score ingest, heuristics, repair, classification, selection and split.

    Output is a pure function of the config and its input files, so reruns
    write byte-identical manifests.
    """
    manifest_path = _require(cfg.paths.manifest, "manifest")
    manifest = read_manifest(manifest_path)
    warnings: List[str] = []

    if cfg.paths.score_file:
        manifest, w = ingest_scores(manifest, read_score_file(_require(cfg.paths.score_file, "score_file")))
        warnings += w
    flags = read_flags(_require(cfg.paths.flags, "flags")) if cfg.paths.flags else {}
    hyps = read_hypotheses(_require(cfg.paths.asr_hypotheses, "asr_hypotheses")) if cfg.paths.asr_hypotheses else {}
    hook = None
    if cfg.paths.diacritizer_command or cfg.paths.diacritizer_table:
        hook = DiacritizerHook(
            command=cfg.paths.diacritizer_command, table=cfg.paths.diacritizer_table,
            coverage_policy=cfg.text.coverage_policy,
        )

    base = _audio_base(cfg, manifest_path)
    heur_cfg = cfg.quality.heuristics()
    cache: Dict[str, Waveform] = {}

    def audio_key(seg: AudioSegment) -> str:
        path = Path(seg.audio_path)
        return str(path if path.is_absolute() else base / path)

    # each file is decoded once here; workers only read the cache
    for seg in manifest:
        key = audio_key(seg)
        if key not in cache:
            try:
                cache[key] = load_wav(key)
            except CorpusForgeError as exc:
                raise SegmentError(seg.id, exc) from exc

    def heuristics_for(seg: AudioSegment):
        try:
            return compute_heuristics(cache[audio_key(seg)].slice(seg.start_s, seg.end_s), heur_cfg)
        except CorpusForgeError as exc:
            raise SegmentError(seg.id, exc) from exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        reports = list(pool.map(heuristics_for, manifest.segments))

    repair_cfg = cfg.repair.repair_config()
    thresholds = cfg.quality.thresholds()
    classified = []
    for seg, heur in zip(manifest.segments, reports):
        extra = dict(seg.extra)
        changes = {}
        disagreement = None
        hyp = hyps.get(seg.id)
        if cfg.repair.enabled and hyp is not None and seg.transcript_raw.split() and hyp.split():
            result = repair_transcript(seg.transcript_raw.split(), hyp.split(), repair_cfg)
            disagreement = result.disagreement
            changes["transcript_repaired"] = " ".join(result.repaired)
            extra["asr_disagreement"] = round(disagreement, 6)
        if hook is not None:
            try:
                text = changes.get("transcript_repaired") or seg.transcript_raw
                changes["transcript_vowelized"], _ = hook(text)
            except CorpusForgeError as exc:
                raise SegmentError(seg.id, exc) from exc
        overlap, wrong_speaker = flags.get(
            seg.id, (bool(extra.get("overlap", False)), bool(extra.get("wrong_speaker", False)))
        )
        extra["heuristics"] = heur.to_json()
        label = classify_segment(seg, heur, overlap, wrong_speaker, disagreement, thresholds)
        classified.append(seg.replace(class_label=label, extra=extra, **changes))
    classified_m = manifest.with_segments(classified)

    selected = select(classified_m, cfg.selection.policy())
    if len(selected) == 0:
        warnings.append("selection is empty")
    splits = None
    need = cfg.split.n_dev + cfg.split.n_test
    if len(selected) > need:
        splits = cmd_split(selected, cfg.split.n_dev, cfg.split.n_test, cfg.split.strategy, cfg.seed)
    else:
        warnings.append(f"split skipped: {len(selected)} selected segments, need more than {need}")
    for w in warnings[-2:]:
        log.warning(w)

    summary = summarize_corpus(classified_m)
    provenance = {
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "input_manifest": manifest_path.name,
        "segments_in": len(manifest),
        "segments_selected": len(selected),
        "selected_minutes": round(selected.total_duration_s / 60.0, 6),
        "policy": cfg.selection.model_dump(mode="json"),
    }
    summary_text = f"# config_hash={provenance['config_hash']}\n" + format_class_summary(summary, cfg.report_decimals)

    out = Path(cfg.paths.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(classified_m, out / "classified.jsonl")
        write_manifest(selected, out / "selected.jsonl")
        if splits is not None:
            for name, part in zip(("train", "dev", "test"), splits):
                write_manifest(part, out / f"{name}.jsonl")
        (out / "class_summary.txt").write_text(summary_text, encoding="utf-8")
        (out / "class_summary.csv").write_text(
            f"# config_hash={provenance['config_hash']}\n" + class_summary_csv(summary, cfg.report_decimals),
            encoding="utf-8",
        )
        (out / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"writing pipeline outputs to {out}: {exc}") from exc
    return PipelineResult(classified_m, selected, splits, summary_text, provenance, warnings)


# ---------------------------------------------------------------- split


def cmd_split(
    manifest: CorpusManifest, n_dev: int = 25, n_test: int = 25, strategy: str = "tail", seed: int = 0
) -> Tuple[CorpusManifest, CorpusManifest, CorpusManifest]:
    """Partition into (train, dev, test); every part keeps manifest order.

    ``tail`` takes dev and test from the end of the manifest; ``seeded-random``
    draws them with a seeded permutation.
    """
    n = len(manifest)
    if n_dev < 0 or n_test < 0:
        raise InputError("split sizes must be nonnegative")
    if n_dev + n_test >= n:
        raise InputError(f"corpus of {n} segments too small for {n_dev} dev + {n_test} test")
    if strategy == "tail":
        order = np.arange(n)
    elif strategy == "seeded-random":
        order = np.random.default_rng(seed).permutation(n)
    else:
        raise InputError(f"unknown split strategy {strategy!r}")
    n_train = n - n_dev - n_test
    parts = (order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:])
    segs = manifest.segments
    return tuple(manifest.with_segments(segs[i] for i in sorted(p)) for p in parts)


# ---------------------------------------------------------------- GL synthesis


def cmd_synth_gl(mel_dir, out_dir, cfg: PipelineConfig = PipelineConfig(), n_iter: Optional[int] = None) -> List[Path]:
    """Invert every ``*.mel`` matrix file in ``mel_dir`` to a WAV in ``out_dir``."""
    mel_dir, out_dir = Path(mel_dir), Path(out_dir)
    if not mel_dir.is_dir():
        raise InputError(f"mel directory not found: {mel_dir}")
    files = sorted(mel_dir.glob("*.mel"))
    if not files:
        log.info("no .mel files in %s; nothing to do", mel_dir)
        return []
    stft_cfg = cfg.dsp.stft()
    fb = cfg.dsp.filterbank()
    n_iter = cfg.dsp.gl_iters if n_iter is None else n_iter
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in files:
        values = dsp.read_matrix(path)
        if values.shape[1] != fb.n_mels:
            raise InputError(f"{path}: {values.shape[1]} mel channels, config expects {fb.n_mels}")
        mel = dsp.MelSpectrogram(values, fb, stft_cfg, cfg.dsp.power)
        wav = dsp.synthesize_from_mel(mel, n_iter)
        peak = float(np.max(np.abs(wav.samples))) if len(wav) else 0.0
        if peak > 1.0:
            log.warning("%s: peak %.3f clipped to full scale", path.name, peak)
        target = out_dir / (path.stem + ".wav")
        write_wav(target, wav)
        written.append(target)
    return written


# ---------------------------------------------------------------- evaluation


@dataclass
class EvalOutput:
    per_utterance_csv: str
    report_csv: str
    report_text: str
    breakdown_text: str
    corpus_row: EvalRow


def _cepstra(path: Path, cfg: PipelineConfig) -> np.ndarray:
    wav = load_wav(path)
    mel = dsp.log_mel(wav, cfg.dsp.stft(), cfg.dsp.filterbank(), cfg.dsp.power)
    return dsp.mel_cepstrum(mel, cfg.eval.n_cep)


def cmd_eval(
    ref_dir,
    syn_dir,
    transcripts=None,
    hyps=None,
    cfg: PipelineConfig = PipelineConfig(),
    system_id: str = "sys",
    model: str = "",
    reduction_factor: str = "N/A",
    vowelized: str = "",
    jobs: int = 1,
) -> EvalOutput:
    """WER/CER against ASR hypotheses and MCD against reference audio, per utterance and pooled."""
    ref_dir, syn_dir = Path(ref_dir), Path(syn_dir)
    ids = sorted(p.stem for p in ref_dir.glob("*.wav"))
    if not ids:
        raise InputError(f"no reference wavs in {ref_dir}")
    missing_syn = [i for i in ids if not (syn_dir / f"{i}.wav").exists()]
    if missing_syn:
        raise InputError("missing synthesized audio for: " + ", ".join(missing_syn))
    refs = read_hypotheses(transcripts) if transcripts else {}
    hyp_map = read_hypotheses(hyps) if hyps else {}
    if refs:
        missing = [i for i in ids if i not in refs or i not in hyp_map]
        if missing:
            raise InputError("missing transcript or hypothesis for: " + ", ".join(missing))

    def one(sid: str):
        try:
            res = mcd(_cepstra(ref_dir / f"{sid}.wav", cfg), _cepstra(syn_dir / f"{sid}.wav", cfg), cfg.eval.use_dtw)
        except CorpusForgeError as exc:
            raise SegmentError(sid, exc) from exc
        w = c = None
        if refs:
            w = wer(refs[sid], hyp_map[sid], cfg.eval.punctuation)
            c = cer(refs[sid], hyp_map[sid], cfg.eval.strip_diacritics)
        return sid, res, w, c

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(one, ids))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "wer", "cer", "w_sub", "w_ins", "w_del", "c_sub", "c_ins", "c_del", "mcd_mean", "mcd_std"])
    for sid, res, w, c in results:
        row = [sid]
        if w is not None:
            row += [repr(100 * error_rate(w)), repr(100 * error_rate(c)),
                    w.substitutions, w.insertions, w.deletions, c.substitutions, c.insertions, c.deletions]
        else:
            row += ["", "", "", "", "", "", "", ""]
        row += [repr(res.mean_db), repr(res.std_db)]
        writer.writerow(row)

    means = np.array([r.mean_db for _, r, _, _ in results])
    if refs:
        w_all = pool_alignments(w for _, _, w, _ in results)
        c_all = pool_alignments(c for _, _, _, c in results)
        wer_pct, cer_pct = 100 * error_rate(w_all), 100 * error_rate(c_all)
        breakdown = breakdown_table([(f"{system_id} (words)", w_all), (f"{system_id} (chars)", c_all)])
    else:
        wer_pct = cer_pct = math.nan
        breakdown = ""
    corpus_row = EvalRow(system_id, wer_pct, cer_pct, float(means.mean()), float(means.std()),
                         model=model, reduction_factor=reduction_factor, vowelized=vowelized)
    report_csv, report_text = evaluation_report([corpus_row], cfg.config_hash())
    return EvalOutput(buf.getvalue(), report_csv, report_text, breakdown, corpus_row)


def cmd_speakers(paths: Sequence[Path], cfg: PipelineConfig = PipelineConfig()) -> Tuple[str, List[str]]:
    """Link speaker names across metadata files; returns (CSV text, warnings)."""
    entries, warnings = [], []
    files: List[Path] = []
    for p in paths:
        p = Path(p)
        files += sorted(p.rglob("*.txt")) if p.is_dir() else [p]
    for f in files:
        meta, w = parse_metadata(f.read_text(encoding="utf-8"))
        entries += list(meta.speaker_entries)
        warnings += [f"{f.name}: {x}" for x in w]
    overrides = load_overrides(cfg.paths.speaker_overrides) if cfg.paths.speaker_overrides else {}
    records = link_speakers(entries, overrides, cfg.metadata.fold_arabic, cfg.metadata.fuzzy, cfg.metadata.fuzzy_threshold)
    return speakers_csv(records), warnings


def cmd_report(path, cfg: PipelineConfig = PipelineConfig()) -> str:
    """Render a MOS ratings CSV or an evaluation-report CSV as a text table.

    The input kind is recognised from its header row.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"report input not found: {path}") from None
    except OSError as exc:
        raise StorageError(f"reading {path}: {exc}") from exc
    header = next((ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")), "")
    columns = {c.strip() for c in header.split(",")}
    if "rater_id" in columns:
        table = mos_table(mos_by_system(read_mos_csv(text)))
        return f"# config_hash={cfg.config_hash()}\n" + table
    if {"wer", "cer", "mcd_mean"} <= columns:
        _, table = evaluation_report(read_report_csv(text), cfg.config_hash())
        return table
    raise InputError(f"{path}: not a MOS ratings file or an evaluation report")
