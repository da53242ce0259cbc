"""Segment quality heuristics, six-way classification and selection.

Neural MOS predictors are not run here; their per-segment scores are read
from CSV files and merged into the manifest. The signal heuristics below
back the class predicates the predictors do not cover.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpusforge.corpus import MOS_MAX, MOS_MIN, AudioSegment, CorpusManifest, SegmentClass, Waveform
from corpusforge.errors import (
    DuplicateIdError,
    InputError,
    InvariantError,
    MissingScoreError,
    ScoreRangeError,
    UnknownSegmentError,
)

log = logging.getLogger(__name__)

SNR_CAP_DB = 100.0


@dataclass(frozen=True)
class ScoreRow:
    segment_id: str
    scorer: str
    score: float


def read_score_file(path_or_text, from_text: bool = False) -> List[ScoreRow]:
    """Parse a ``segment_id,scorer,score`` CSV. Range is checked on ingest."""
    text = path_or_text if from_text else Path(path_or_text).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    if [f.strip() for f in reader.fieldnames] != ["segment_id", "scorer", "score"]:
        raise InputError(f"score file header must be segment_id,scorer,score; got {reader.fieldnames}")
    rows, seen = [], set()
    for line_no, rec in enumerate(reader, start=2):
        key = (rec["segment_id"], rec["scorer"])
        if key in seen:
            raise DuplicateIdError(f"{key[0]}/{key[1]}", f"score file line {line_no}")
        seen.add(key)
        try:
            score = float(rec["score"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"score file line {line_no}: bad score {rec['score']!r}") from exc
        rows.append(ScoreRow(key[0], key[1], score))
    return rows


def ingest_scores(
    manifest: CorpusManifest, rows: Sequence[ScoreRow]
) -> Tuple[CorpusManifest, List[str]]:
    """Merge predicted scores into segments; returns the new manifest and warnings."""
    known = manifest.by_id()
    unknown = sorted({r.segment_id for r in rows if r.segment_id not in known})
    if unknown:
        raise UnknownSegmentError(unknown)
    bad = [r for r in rows if not (MOS_MIN <= r.score <= MOS_MAX) or math.isnan(r.score)]
    if bad:
        raise ScoreRangeError(
            "scores outside [1, 5]: " + ", ".join(f"{r.segment_id}/{r.scorer}={r.score}" for r in bad)
        )
    updates: Dict[str, Dict[str, float]] = {}
    warnings = []
    for r in rows:
        scores = updates.setdefault(r.segment_id, dict(known[r.segment_id].scores))
        if r.scorer in known[r.segment_id].scores:
            warnings.append(f"{r.segment_id}: overwriting existing {r.scorer} score")
        scores[r.scorer] = r.score
    for w in warnings:
        log.warning(w)
    segments = [s.replace(scores=updates[s.id]) if s.id in updates else s for s in manifest]
    return manifest.with_segments(segments), warnings


# ---------------------------------------------------------------- heuristics


def _frame(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if len(x) < frame_len:
        return np.empty((0, frame_len))
    return np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop]


def estimate_snr(w: Waveform, frame_ms: float = 25.0, hop_ms: float = 10.0) -> float:
    """Frame-energy SNR: 10*log10(p90 / p10) of per-frame mean power, capped at 100 dB."""
    frame_len = max(1, int(round(frame_ms * w.sample_rate_hz / 1000)))
    hop = max(1, int(round(hop_ms * w.sample_rate_hz / 1000)))
    frames = _frame(w.samples, frame_len, hop)
    if len(frames) < 10:
        raise InputError(f"need at least 10 frames for SNR, got {len(frames)}")
    energy = (frames * frames).mean(axis=1)
    if not np.any(energy > 0):
        raise InputError("cannot estimate SNR of an all-zero signal")
    p10, p90 = np.percentile(energy, [10, 90])
    if p10 <= 0:
        return SNR_CAP_DB
    return float(min(10.0 * math.log10(p90 / p10), SNR_CAP_DB))


def spectral_flatness(frames: np.ndarray) -> np.ndarray:
    """Geometric over arithmetic mean of each frame's magnitude spectrum.

    Silent frames are defined to have flatness 0.
    """
    window = np.hanning(frames.shape[1] + 2)[1:-1]
    mag = np.abs(np.fft.rfft(frames * window, axis=1))
    arith = mag.mean(axis=1)
    with np.errstate(divide="ignore"):
        geo = np.exp(np.log(np.maximum(mag, np.finfo(float).tiny)).mean(axis=1))
    out = np.zeros(len(frames))
    live = arith > 0
    out[live] = geo[live] / arith[live]
    return np.clip(out, 0.0, 1.0)


def music_likelihood(
    w: Waveform, window_s: float = 0.5, frame_ms: float = 32.0, hop_ms: float = 16.0
) -> Tuple[float, float]:
    """Mean spectral flatness over the first and the last ``window_s`` seconds."""
    if w.duration_s < 2 * window_s:
        raise InputError(f"need at least {2 * window_s:.3f} s of audio, got {w.duration_s:.3f} s")
    n = int(round(window_s * w.sample_rate_hz))
    frame_len = max(2, int(round(frame_ms * w.sample_rate_hz / 1000)))
    hop = max(1, int(round(hop_ms * w.sample_rate_hz / 1000)))
    head = _frame(w.samples[:n], min(frame_len, n), hop)
    tail = _frame(w.samples[-n:], min(frame_len, n), hop)
    return float(spectral_flatness(head).mean()), float(spectral_flatness(tail).mean())


def clipping_ratio(w: Waveform, level: float = 0.999) -> float:
    return float(np.mean(np.abs(w.samples) >= level)) if len(w) else 0.0


@dataclass(frozen=True)
class HeuristicReport:
    snr_db: float
    spectral_flatness_head: float
    spectral_flatness_tail: float
    clipping_ratio: float

    def __post_init__(self):
        for name in ("snr_db", "spectral_flatness_head", "spectral_flatness_tail", "clipping_ratio"):
            if not math.isfinite(getattr(self, name)):
                raise InvariantError(f"{name} must be finite")

    def to_json(self) -> Dict[str, float]:
        return {
            "snr_db": round(self.snr_db, 6),
            "spectral_flatness_head": round(self.spectral_flatness_head, 6),
            "spectral_flatness_tail": round(self.spectral_flatness_tail, 6),
            "clipping_ratio": round(self.clipping_ratio, 6),
        }


@dataclass(frozen=True)
class HeuristicConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    music_window_s: float = 0.5
    clip_level: float = 0.999


def compute_heuristics(w: Waveform, cfg: HeuristicConfig = HeuristicConfig()) -> HeuristicReport:
    head, tail = music_likelihood(w, cfg.music_window_s)
    return HeuristicReport(
        snr_db=estimate_snr(w, cfg.frame_ms, cfg.hop_ms),
        spectral_flatness_head=head,
        spectral_flatness_tail=tail,
        clipping_ratio=clipping_ratio(w, cfg.clip_level),
    )


# ---------------------------------------------------------------- classification


@dataclass(frozen=True)
class ClassThresholds:
    music_flatness: float = 0.45
    snr_db: float = 15.0
    clipping: float = 0.01
    disagreement: float = 0.20


# fixed priority; earlier entries win when several fire
CLASS_PRIORITY = (
    SegmentClass.BACKGROUND_MUSIC,
    SegmentClass.OVERLAPPED_SPEECH,
    SegmentClass.WRONG_SPEAKER,
    SegmentClass.WRONG_TRANSCRIPTION,
    SegmentClass.BAD_RECORDING,
)


def fired_predicates(
    heuristics: HeuristicReport,
    overlap: bool = False,
    wrong_speaker: bool = False,
    asr_disagreement: Optional[float] = None,
    thresholds: ClassThresholds = ClassThresholds(),
) -> List[SegmentClass]:
    """Every fault class whose predicate holds, in priority order."""
    fired = {
        SegmentClass.BACKGROUND_MUSIC: max(heuristics.spectral_flatness_head, heuristics.spectral_flatness_tail)
        > thresholds.music_flatness,
        SegmentClass.OVERLAPPED_SPEECH: bool(overlap),
        SegmentClass.WRONG_SPEAKER: bool(wrong_speaker),
        SegmentClass.WRONG_TRANSCRIPTION: asr_disagreement is not None
        and asr_disagreement > thresholds.disagreement,
        SegmentClass.BAD_RECORDING: heuristics.snr_db < thresholds.snr_db
        or heuristics.clipping_ratio > thresholds.clipping,
    }
    return [c for c in CLASS_PRIORITY if fired[c]]


def classify_segment(
    segment: Optional[AudioSegment],
    heuristics: HeuristicReport,
    overlap: bool = False,
    wrong_speaker: bool = False,
    asr_disagreement: Optional[float] = None,
    thresholds: ClassThresholds = ClassThresholds(),
) -> SegmentClass:
    """First fault class in priority order, or GoodRecording when none applies.

    ``segment`` is accepted for context only; the decision depends on the
    heuristics, the ingested flags and the ASR disagreement.
    """
    fired = fired_predicates(heuristics, overlap, wrong_speaker, asr_disagreement, thresholds)
    return fired[0] if fired else SegmentClass.GOOD_RECORDING


# ---------------------------------------------------------------- selection


@dataclass(frozen=True)
class SelectionPolicy:
    """How scored/classified segments become the kept subset.

    ``mode`` is ``automatic`` (score threshold only), ``manual`` (class
    filter only) or ``combined`` (both).
    """

    threshold: float = 4.0
    scorer_name: str = "dnsmos"
    required_class: SegmentClass = SegmentClass.GOOD_RECORDING
    max_minutes: Optional[float] = None
    mode: str = "automatic"
    strict: bool = True

    def __post_init__(self):
        if not MOS_MIN <= self.threshold <= MOS_MAX:
            raise InvariantError(f"threshold must be in [1, 5], got {self.threshold}")
        if self.mode not in ("automatic", "manual", "combined"):
            raise InvariantError(f"unknown selection mode {self.mode!r}")
        if self.max_minutes is not None and self.max_minutes < 0:
            raise InvariantError("max_minutes must be nonnegative")
        if not isinstance(self.required_class, SegmentClass):
            object.__setattr__(self, "required_class", SegmentClass(self.required_class))

    @property
    def uses_score(self) -> bool:
        return self.mode in ("automatic", "combined")

    @property
    def uses_class(self) -> bool:
        return self.mode in ("manual", "combined")


def select(manifest: CorpusManifest, policy: SelectionPolicy) -> CorpusManifest:
    """Keep the segments passing ``policy``, in original manifest order.

    With ``max_minutes``, survivors are admitted best score first (manifest
    order among ties) until the next one would exceed the cap.
    """
    if policy.uses_score:
        missing = [s.id for s in manifest if policy.scorer_name not in s.scores]
        if missing:
            raise MissingScoreError(policy.scorer_name, missing)
    if policy.uses_class:
        unlabeled = [s.id for s in manifest if s.class_label is None]
        if unlabeled:
            raise InputError("segments without class label: " + ", ".join(unlabeled))

    def passes(seg: AudioSegment) -> bool:
        if policy.uses_score:
            score = seg.scores[policy.scorer_name]
            ok = score > policy.threshold if policy.strict else score >= policy.threshold
            if not ok:
                return False
        if policy.uses_class and seg.class_label != policy.required_class:
            return False
        return True

    kept = [(i, s) for i, s in enumerate(manifest) if passes(s)]
    if policy.max_minutes is not None:
        cap_s = policy.max_minutes * 60.0
        if policy.uses_score:
            ranked = sorted(kept, key=lambda p: (-p[1].scores[policy.scorer_name], p[0]))
        else:
            ranked = list(kept)
        admitted, total = [], 0.0
        for i, seg in ranked:
            if total + seg.duration_s > cap_s + 1e-9:
                break
            admitted.append((i, seg))
            total += seg.duration_s
        kept = sorted(admitted, key=lambda p: p[0])
    return manifest.with_segments(s for _, s in kept)
