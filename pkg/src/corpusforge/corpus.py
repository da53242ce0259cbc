"""Core corpus types, JSON Lines manifests and PCM16 WAV access."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import wave
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from corpusforge import __version__
from corpusforge.errors import (
    DuplicateIdError,
    InvariantError,
    ManifestFormatError,
    NonMonoError,
    ScoreRangeError,
    UnclassifiedSegmentError,
    UnreadableWavError,
    UnsupportedEncodingError,
)

MOS_MIN = 1.0
MOS_MAX = 5.0


class SegmentClass(str, enum.Enum):
    BACKGROUND_MUSIC = "BackgroundMusic"
    WRONG_TRANSCRIPTION = "WrongTranscription"
    OVERLAPPED_SPEECH = "OverlappedSpeech"
    WRONG_SPEAKER = "WrongSpeaker"
    BAD_RECORDING = "BadRecording"
    GOOD_RECORDING = "GoodRecording"


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate_hz <= 0:
            raise InvariantError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise InvariantError("waveform contains non-finite samples")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def slice(self, start_s: float, end_s: float) -> "Waveform":
        a = max(0, int(round(start_s * self.sample_rate_hz)))
        b = min(len(self), int(round(end_s * self.sample_rate_hz)))
        return Waveform(self.samples[a:b], self.sample_rate_hz)


def load_wav(path) -> Waveform:
    """Read a 16-bit PCM mono WAV file; samples are scaled by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            sr = fh.getframerate()
            comp = fh.getcomptype()
            raw = fh.readframes(fh.getnframes())
    except FileNotFoundError as exc:
        raise UnreadableWavError(f"{path}: file not found") from exc
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedEncodingError(f"{path}: {exc}") from exc
        raise UnreadableWavError(f"{path}: {exc}") from exc
    except (OSError, EOFError) as exc:
        raise UnreadableWavError(f"{path}: {exc}") from exc
    if channels != 1:
        raise NonMonoError(f"{path}: non-mono ({channels} channels)")
    if width != 2 or comp != "NONE":
        raise UnsupportedEncodingError(f"{path}: expected PCM16, got {8 * width}-bit {comp}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, sr)


def write_wav(path, waveform: Waveform) -> None:
    """Write PCM16 mono. Samples outside [-1, 1) are clipped."""
    pcm = np.clip(np.round(waveform.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(waveform.sample_rate_hz)
        fh.writeframes(pcm.tobytes())


@dataclass(frozen=True)
class AudioSegment:
    id: str
    audio_path: str
    start_s: float
    end_s: float
    speaker_id: str = ""
    transcript_raw: str = ""
    transcript_vowelized: Optional[str] = None
    transcript_repaired: Optional[str] = None
    class_label: Optional[SegmentClass] = None
    scores: Dict[str, float] = field(default_factory=dict)
    sample_rate_hz: int = 16000
    # Unknown manifest fields, preserved verbatim on round-trip.
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise InvariantError("segment id must be non-empty")
        if not (self.end_s - self.start_s > 0):
            raise InvariantError(
                f"segment {self.id}: end_s ({self.end_s}) must exceed start_s ({self.start_s})"
            )
        if self.sample_rate_hz <= 0:
            raise InvariantError(f"segment {self.id}: sample_rate_hz must be positive")
        for name, value in self.scores.items():
            if not (MOS_MIN <= value <= MOS_MAX):
                raise ScoreRangeError(f"segment {self.id}: score {name}={value} outside [1, 5]")
        if self.class_label is not None and not isinstance(self.class_label, SegmentClass):
            object.__setattr__(self, "class_label", SegmentClass(self.class_label))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def replace(self, **changes) -> "AudioSegment":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "id": self.id,
            "audio_path": self.audio_path,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "speaker_id": self.speaker_id,
            "transcript_raw": self.transcript_raw,
            "transcript_vowelized": self.transcript_vowelized,
            "transcript_repaired": self.transcript_repaired,
            "class_label": self.class_label.value if self.class_label else None,
            "scores": dict(self.scores),
            "sample_rate_hz": self.sample_rate_hz,
        }
        for key, value in self.extra.items():
            out.setdefault(key, value)
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "AudioSegment":
        known = {f.name for f in dataclasses.fields(cls)} - {"extra"}
        kwargs = {k: obj[k] for k in known if k in obj}
        extra = {k: v for k, v in obj.items() if k not in known}
        if kwargs.get("class_label") is not None:
            kwargs["class_label"] = SegmentClass(kwargs["class_label"])
        kwargs["scores"] = {str(k): float(v) for k, v in (kwargs.get("scores") or {}).items()}
        for key in ("start_s", "end_s"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        return cls(extra=extra, **kwargs)


@dataclass(frozen=True)
class CorpusManifest:
    segments: Tuple[AudioSegment, ...] = ()
    source_name: str = ""
    created_at: str = ""
    tool_version: str = __version__

    def __post_init__(self):
        segments = tuple(self.segments)
        seen = set()
        for seg in segments:
            if seg.id in seen:
                raise DuplicateIdError(seg.id)
            seen.add(seg.id)
        object.__setattr__(self, "segments", segments)
        if not self.created_at:
            object.__setattr__(
                self, "created_at", datetime.now(timezone.utc).isoformat(timespec="seconds")
            )

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def ids(self) -> List[str]:
        return [s.id for s in self.segments]

    def by_id(self) -> Dict[str, AudioSegment]:
        return {s.id: s for s in self.segments}

    def with_segments(self, segments: Iterable[AudioSegment]) -> "CorpusManifest":
        return dataclasses.replace(self, segments=tuple(segments))

    @property
    def total_duration_s(self) -> float:
        return math.fsum(s.duration_s for s in self.segments)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_manifest(manifest: CorpusManifest, path) -> None:
    """Write one JSON object per segment.

    Provenance (source name, creation time, tool version) goes to a sidecar
    ``<path>.meta.json`` so the JSONL body stays one line per segment.
    """
    path = Path(path)
    lines = [
        json.dumps(seg.to_json(), ensure_ascii=False, allow_nan=False) + "\n"
        for seg in manifest.segments
    ]
    path.write_text("".join(lines), encoding="utf-8")
    meta = {
        "source_name": manifest.source_name,
        "created_at": manifest.created_at,
        "tool_version": manifest.tool_version,
    }
    _meta_path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    segments: List[AudioSegment] = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestFormatError(path, line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ManifestFormatError(path, line_no, "expected a JSON object")
            try:
                seg = AudioSegment.from_json(obj)
            except (TypeError, KeyError, ValueError) as exc:
                if isinstance(exc, InvariantError):
                    raise
                raise ManifestFormatError(path, line_no, str(exc)) from exc
            if seg.id in seen:
                raise DuplicateIdError(seg.id, f"{path}:{line_no}")
            seen.add(seg.id)
            segments.append(seg)
    meta_file = _meta_path(path)
    meta: Dict[str, Any] = {}
    if meta_file.exists():
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
    return CorpusManifest(
        segments=tuple(segments),
        source_name=meta.get("source_name", path.stem),
        created_at=meta.get("created_at", ""),
        tool_version=meta.get("tool_version", __version__),
    )


@dataclass(frozen=True)
class ClassSummaryRow:
    label: SegmentClass
    segments: int
    seconds: float

    @property
    def minutes(self) -> float:
        return self.seconds / 60.0


def summarize_corpus(manifest: CorpusManifest) -> Dict[SegmentClass, ClassSummaryRow]:
    """Per-class segment counts and durations, every class present (zeros included)."""
    missing = [s.id for s in manifest if s.class_label is None]
    if missing:
        raise UnclassifiedSegmentError(missing)
    counts = {c: 0 for c in SegmentClass}
    seconds: Dict[SegmentClass, List[float]] = {c: [] for c in SegmentClass}
    for seg in manifest:
        counts[seg.class_label] += 1
        seconds[seg.class_label].append(seg.duration_s)
    return {c: ClassSummaryRow(c, counts[c], math.fsum(seconds[c])) for c in SegmentClass}


def format_class_summary(summary: Mapping[SegmentClass, ClassSummaryRow], decimals: int = 0) -> str:
    """Plain-text table: class, number of segments, duration in minutes."""
    rows = [("Class", "# Seg.", "Dur.")]
    for row in summary.values():
        rows.append((row.label.value, str(row.segments), f"{row.minutes:.{decimals}f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        f"{r[0]:<{widths[0]}}  {r[1]:>{widths[1]}}  {r[2]:>{widths[2]}}" for r in rows
    ) + "\n"


def class_summary_csv(summary: Mapping[SegmentClass, ClassSummaryRow], decimals: int = 0) -> str:
    lines = ["class,segments,minutes"]
    for row in summary.values():
        lines.append(f"{row.label.value},{row.segments},{row.minutes:.{decimals}f}")
    return "\n".join(lines) + "\n"
