"""Deterministic synthetic broadcast corpus for demos and end-to-end tests.

Clean segments are voiced-speech stand-ins: harmonic syllables with a
gliding pitch separated by digital silence. Corrupted segments add one fault
each: low-frequency rumble, a noise-like music bed over the first or last
second, or hard clipping. The oracle score file gives every clean segment a
predicted MOS above 4 and every corrupted one a score of at most 4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np
import scipy.signal

from corpusforge.corpus import AudioSegment, CorpusManifest, SegmentClass, Waveform, write_manifest, write_wav

SR = 16000
WORDS = ["kitab", "qalam", "madrasa", "bayt", "shams", "qamar", "bahr", "jabal", "nahr", "waqt"]


@dataclass(frozen=True)
class SyntheticCorpus:
    root: Path
    manifest_path: Path
    score_path: Path
    hypotheses_path: Path
    flags_path: Path
    clean_ids: List[str]
    corrupted_ids: List[str]
    expected_class: Dict[str, SegmentClass]


def speech_like(rng: np.random.Generator, duration_s: float = 2.5, level: float = 0.3) -> np.ndarray:
    n = int(duration_s * SR)
    out = np.zeros(n)
    t0 = int(0.05 * SR)
    while t0 < n - int(0.2 * SR):
        syl = int(rng.uniform(0.15, 0.3) * SR)
        syl = min(syl, n - t0 - int(0.03 * SR))
        t = np.arange(syl) / SR
        f0 = rng.uniform(110, 200) * (1 + 0.1 * t / t[-1])
        phase = 2 * np.pi * np.cumsum(f0) / SR
        tone = sum((0.8 ** k) * np.sin(k * phase) for k in range(1, 12))
        env = np.sin(np.pi * np.arange(syl) / syl) ** 2
        out[t0:t0 + syl] = level * env * tone / 3.0
        t0 += syl + int(rng.uniform(0.03, 0.08) * SR)
    return out


def add_noise(rng: np.random.Generator, x: np.ndarray, level: float = 0.05) -> np.ndarray:
    """Low-frequency rumble (one-pole low-passed white noise), normalized to ``level`` RMS."""
    rumble = scipy.signal.lfilter([1.0], [1.0, -0.98], rng.standard_normal(len(x)))
    return x + level * rumble / rumble.std()


def add_music(rng: np.random.Generator, x: np.ndarray, at_head: bool, seconds: float = 1.0) -> np.ndarray:
    n = int(seconds * SR)
    bed = 0.25 * rng.standard_normal(n)
    # slow swell so the bed reads as a jingle rather than a click
    bed *= 0.6 + 0.4 * np.sin(2 * np.pi * 2.0 * np.arange(n) / SR) ** 2
    out = x.copy()
    if at_head:
        out[:n] += bed
    else:
        out[-n:] += bed
    return out


def clip(x: np.ndarray, gain: float = 6.0) -> np.ndarray:
    return np.clip(gain * x, -1.0, 1.0)


def make_synthetic_corpus(root, seed: int = 0, n_clean: int = 12) -> SyntheticCorpus:
    """Write 20 segments (12 clean + 8 corrupted) with oracle scores and ASR hypotheses."""
    root = Path(root)
    wav_dir = root / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    faults = ["noise", "noise", "noise", "music_head", "music_head", "music_tail", "clipped", "clipped"]
    plan = ["clean"] * n_clean + faults
    order = rng.permutation(len(plan))

    segments, score_lines, hyp_lines, flag_lines = [], ["segment_id,scorer,score"], [], ["segment_id,overlap,wrong_speaker"]
    clean_ids, corrupted_ids, expected = [], [], {}
    for k, idx in enumerate(order):
        kind = plan[idx]
        sid = f"seg{k:02d}"
        x = speech_like(rng)
        if kind == "noise":
            x = add_noise(rng, x)
            label = SegmentClass.BAD_RECORDING
        elif kind == "music_head":
            x = add_music(rng, x, at_head=True)
            label = SegmentClass.BACKGROUND_MUSIC
        elif kind == "music_tail":
            x = add_music(rng, x, at_head=False)
            label = SegmentClass.BACKGROUND_MUSIC
        elif kind == "clipped":
            x = clip(x)
            label = SegmentClass.BAD_RECORDING
        else:
            label = SegmentClass.GOOD_RECORDING
        x = np.clip(x, -1.0, 32767 / 32768)
        path = wav_dir / f"{sid}.wav"
        write_wav(path, Waveform(x, SR))
        hyp = [WORDS[j] for j in rng.integers(0, len(WORDS), size=6)]
        # the transcript carries one misspelling that the ASR output corrects
        words = list(hyp)
        words[2] = words[2][:-1] + words[2][-1] * 2
        if kind == "clean":
            score = round(float(rng.uniform(4.1, 4.9)), 2)
            clean_ids.append(sid)
        else:
            score = round(float(rng.uniform(1.5, 3.9)), 2)
            if not corrupted_ids:
                # sits exactly on the default threshold, which is strict
                score = 4.0
            corrupted_ids.append(sid)
        expected[sid] = label
        segments.append(AudioSegment(
            id=sid, audio_path=str(path.relative_to(root)), start_s=0.0, end_s=len(x) / SR,
            speaker_id="Anchor A", transcript_raw=" ".join(words), sample_rate_hz=SR,
        ))
        score_lines.append(f"{sid},dnsmos,{score}")
        hyp_lines.append(json.dumps({"segment_id": sid, "hypothesis": " ".join(hyp)}))
        flag_lines.append(f"{sid},0,0")

    manifest = CorpusManifest(tuple(segments), source_name="synthetic", created_at="2000-01-01T00:00:00+00:00")
    manifest_path = root / "manifest.jsonl"
    write_manifest(manifest, manifest_path)
    score_path = root / "scores.csv"
    score_path.write_text("\n".join(score_lines) + "\n", encoding="utf-8")
    hyp_path = root / "asr.jsonl"
    hyp_path.write_text("\n".join(hyp_lines) + "\n", encoding="utf-8")
    flags_path = root / "flags.csv"
    flags_path.write_text("\n".join(flag_lines) + "\n", encoding="utf-8")
    return SyntheticCorpus(root, manifest_path, score_path, hyp_path, flags_path, clean_ids, corrupted_ids, expected)
