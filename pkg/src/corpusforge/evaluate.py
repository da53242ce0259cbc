"""Objective metrics for synthesized speech.

Edit-distance alignment for WER/CER with substitution/insertion/deletion
breakdown, mel-cepstral distortion with optional DTW pairing, per-token
duration extraction from teacher attention, and MOS aggregation.
"""

from __future__ import annotations

import csv
import io
import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from corpusforge.errors import InputError, ScoreRangeError

MATCH, SUB, INS, DEL = "C", "S", "I", "D"

# dB scale factor for mel-cepstral distortion: (10 / ln 10) * sqrt(2)
MCD_CONST = 10.0 / math.log(10.0) * math.sqrt(2.0)

DEFAULT_PUNCTUATION = ".,;:!?\"'()[]{}«»“”‘’-–—…/\\،؛؟"


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int
    path: Tuple[Tuple[str, Optional[int], Optional[int]], ...]

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def distance(self) -> int:
        return self.errors


def _edit_table(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> np.ndarray:
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        r = ref[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if r == hyp[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)
    return d


def edit_distance(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> int:
    return int(_edit_table(ref, hyp)[len(ref), len(hyp)])


def align(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> AlignmentResult:
    """Minimum-edit alignment of ``hyp`` against ``ref`` with unit costs.

    Backtracking from the end prefers the diagonal (match/substitution), then
    deletion, then insertion whenever several moves are optimal.
    """
    ref, hyp = list(ref), list(hyp)
    if not ref:
        raise InputError("reference must be non-empty")
    d = _edit_table(ref, hyp)
    i, j = len(ref), len(hyp)
    path = []
    s = ins = dels = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if d[i, j] == d[i - 1, j - 1] + (0 if same else 1):
                if same:
                    path.append((MATCH, i - 1, j - 1))
                else:
                    path.append((SUB, i - 1, j - 1))
                    s += 1
                i, j = i - 1, j - 1
                continue
        if i > 0 and d[i, j] == d[i - 1, j] + 1:
            path.append((DEL, i - 1, None))
            dels += 1
            i -= 1
        else:
            path.append((INS, None, j - 1))
            ins += 1
            j -= 1
    path.reverse()
    return AlignmentResult(s, ins, dels, len(ref), tuple(path))


def error_rate(ar: AlignmentResult) -> float:
    """(S + I + D) / N as a fraction; multiply by 100 for percent."""
    return ar.errors / ar.ref_len


_DIACRITICS = re.compile("[\u064b-\u0652\u0670]")


def strip_diacritics(text: str) -> str:
    return _DIACRITICS.sub("", text)


def char_tokens(text: str, drop_diacritics: bool = False) -> List[str]:
    """Characters of ``text`` after whitespace collapsing; spaces are kept as tokens."""
    text = unicodedata.normalize("NFC", text)
    if drop_diacritics:
        text = strip_diacritics(text)
    return list(" ".join(text.split()))


def word_tokens(text: str, punctuation: str = DEFAULT_PUNCTUATION) -> List[str]:
    text = unicodedata.normalize("NFC", text)
    if punctuation:
        text = text.translate({ord(c): " " for c in punctuation})
    return text.split()


def wer(reference: str, hypothesis: str, punctuation: str = DEFAULT_PUNCTUATION) -> AlignmentResult:
    return align(word_tokens(reference, punctuation), word_tokens(hypothesis, punctuation))


def cer(reference: str, hypothesis: str, drop_diacritics: bool = False) -> AlignmentResult:
    return align(char_tokens(reference, drop_diacritics), char_tokens(hypothesis, drop_diacritics))


def pool_alignments(results: Iterable[AlignmentResult]) -> AlignmentResult:
    """Corpus-level totals (paths are not concatenated)."""
    s = i = d = n = 0
    for r in results:
        s, i, d, n = s + r.substitutions, i + r.insertions, d + r.deletions, n + r.ref_len
    if n == 0:
        raise InputError("no alignments to pool")
    return AlignmentResult(s, i, d, n, ())


# ---------------------------------------------------------------- MCD


@dataclass(frozen=True)
class McdResult:
    mean_db: float
    std_db: float
    n_frames_aligned: int
    path: Tuple[Tuple[int, int], ...] = ()


def frame_distortions(ref_cep: np.ndarray, syn_cep: np.ndarray) -> np.ndarray:
    """Pairwise per-frame MCD in dB (c0 excluded), shape [len(ref), len(syn)]."""
    a = np.asarray(ref_cep, dtype=np.float64)[:, 1:]
    b = np.asarray(syn_cep, dtype=np.float64)[:, 1:]
    diff = a[:, None, :] - b[None, :, :]
    return MCD_CONST * np.sqrt((diff * diff).sum(-1))


def dtw_path(cost: np.ndarray) -> List[Tuple[int, int]]:
    """Minimum-total-cost monotone path through ``cost`` with steps (1,0), (0,1), (1,1)."""
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        ci = cost[i - 1]
        for j in range(1, m + 1):
            acc[i, j] = ci[j - 1] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    i, j = n, m
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        moves = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        _, i, j = min(moves, key=lambda t: t[0])
        path.append((i - 1, j - 1))
    path.reverse()
    return path


def mcd(ref_cep: np.ndarray, syn_cep: np.ndarray, use_dtw: bool = True) -> McdResult:
    """Mel-cepstral distortion in dB between two cepstrogram matrices [frames x coefs].

    Coefficient 0 (energy) is excluded. With ``use_dtw`` frames are paired
    along the minimum-cost DTW path, otherwise frame ``i`` is paired with
    frame ``i`` and the longer input is truncated.
    """
    ref_cep = np.atleast_2d(np.asarray(ref_cep, dtype=np.float64))
    syn_cep = np.atleast_2d(np.asarray(syn_cep, dtype=np.float64))
    if ref_cep.shape[1] != syn_cep.shape[1]:
        raise InputError(
            f"coefficient count mismatch: {ref_cep.shape[1]} vs {syn_cep.shape[1]}"
        )
    if ref_cep.shape[0] == 0 or syn_cep.shape[0] == 0 or ref_cep.shape[1] < 2:
        raise InputError("MCD needs at least one frame and two coefficients")
    if use_dtw:
        cost = frame_distortions(ref_cep, syn_cep)
        path = dtw_path(cost)
        per_frame = np.array([cost[i, j] for i, j in path])
    else:
        n = min(len(ref_cep), len(syn_cep))
        diff = ref_cep[:n, 1:] - syn_cep[:n, 1:]
        per_frame = MCD_CONST * np.sqrt((diff * diff).sum(1))
        path = [(i, i) for i in range(n)]
    return McdResult(float(per_frame.mean()), float(per_frame.std()), len(per_frame), tuple(path))


# ---------------------------------------------------------------- durations


@dataclass(frozen=True)
class DurationSeq:
    durations: Tuple[int, ...]
    score: float = 0.0

    @property
    def total(self) -> int:
        return sum(self.durations)


def extract_durations(attention: np.ndarray) -> DurationSeq:
    """Per-token frame counts from a teacher attention matrix [frames x tokens].

    Finds the monotone path starting at token 0 on the first frame and ending
    at the last token on the last frame, advancing by zero or one token per
    frame, that maximizes the summed attention weight. Durations are the run
    lengths. Among equal-weight paths the one with the earliest transitions
    is chosen.
    """
    att = np.asarray(attention, dtype=np.float64)
    if att.ndim != 2 or att.shape[0] < 1 or att.shape[1] < 1:
        raise InputError(f"attention must be a non-empty 2-D matrix, got shape {att.shape}")
    if not np.all(np.isfinite(att)):
        raise InputError("attention contains non-finite entries")
    n_frames, n_tokens = att.shape
    if n_frames < n_tokens:
        raise InputError(
            f"cannot cover {n_tokens} tokens with {n_frames} frames using unit steps"
        )
    value = np.full((n_frames, n_tokens), -np.inf)
    value[0, 0] = att[0, 0]
    for t in range(1, n_frames):
        stay = value[t - 1]
        advance = np.concatenate(([-np.inf], value[t - 1, :-1]))
        value[t] = att[t] + np.maximum(stay, advance)

    durations = [0] * n_tokens
    j = n_tokens - 1
    for t in range(n_frames - 1, 0, -1):
        durations[j] += 1
        # staying on j keeps the transition into j as early as possible
        if j > 0 and value[t - 1, j - 1] > value[t - 1, j]:
            j -= 1
    durations[j] += 1
    return DurationSeq(tuple(durations), float(value[-1, -1]))


def durations_to_path(durations: Sequence[int]) -> List[int]:
    return [j for j, d in enumerate(durations) for _ in range(d)]


# ---------------------------------------------------------------- MOS


@dataclass(frozen=True)
class MosSummary:
    mean: float
    ci95: float
    n: int

    def format(self, mean_decimals: int = 1, ci_decimals: int = 2) -> str:
        return f"{self.mean:.{mean_decimals}f} ± {self.ci95:.{ci_decimals}f}"


def aggregate_mos(scores: Iterable[float]) -> MosSummary:
    """Mean with a normal-approximation 95% interval half-width, 1.96 * sd / sqrt(n)."""
    values = np.asarray(list(scores), dtype=np.float64)
    if values.size == 0:
        raise InputError("need at least one score")
    bad = values[(values < 1.0) | (values > 5.0) | ~np.isfinite(values)]
    if bad.size:
        raise ScoreRangeError(f"scores outside [1, 5]: {bad.tolist()}")
    n = int(values.size)
    if n == 1:
        return MosSummary(float(values[0]), 0.0, 1)
    sd = float(values.std(ddof=1))
    return MosSummary(float(values.mean()), 1.96 * sd / math.sqrt(n), n)


@dataclass(frozen=True)
class MosRating:
    rater_id: str
    sample_id: str
    system_id: str
    score: float


def read_mos_csv(text: str) -> List[MosRating]:
    """Parse ``rater_id,sample_id,system_id,score`` rows."""
    reader = csv.DictReader(io.StringIO(text))
    need = {"rater_id", "sample_id", "system_id", "score"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise InputError(f"MOS file needs columns {sorted(need)}")
    rows = []
    for line_no, row in enumerate(reader, start=2):
        try:
            score = float(row["score"])
        except ValueError as exc:
            raise InputError(f"line {line_no}: bad score {row['score']!r}") from exc
        rows.append(MosRating(row["rater_id"], row["sample_id"], row["system_id"], score))
    return rows


def mos_by_system(ratings: Sequence[MosRating]) -> dict:
    systems: dict = {}
    for r in ratings:
        systems.setdefault(r.system_id, []).append(r.score)
    return {sid: aggregate_mos(v) for sid, v in systems.items()}


def mos_table(summaries: dict, label: str = "MOS") -> str:
    rows = [("ID", label, "n")]
    rows += [(sid, s.format(), str(s.n)) for sid, s in summaries.items()]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class EvalRow:
    system_id: str
    wer: float
    cer: float
    mcd_mean: float
    mcd_std: float
    model: str = ""
    reduction_factor: str = "N/A"
    vowelized: str = ""


REPORT_COLUMNS = ("id", "model", "r", "vowelized", "wer", "cer", "mcd_mean", "mcd_std")


def _fmt1(x: float) -> str:
    return "N/A" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.1f}"


def evaluation_report(
    rows: Sequence[EvalRow], config_hash: Optional[str] = None
) -> Tuple[str, str]:
    """Render rows as (csv_text, plain_text_table).

    WER and CER are percentages; MCD is rendered ``mean ± std`` in dB with
    one decimal. The CSV keeps full precision so it re-parses to the same rows.
    """
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow([
            r.system_id, r.model, r.reduction_factor, r.vowelized,
            repr(float(r.wer)), repr(float(r.cer)), repr(float(r.mcd_mean)), repr(float(r.mcd_std)),
        ])

    header = ("ID", "Model", "R", "Vowel.", "WER", "CER", "MCD")
    cells = [header]
    for r in rows:
        mcd_cell = "N/A" if math.isnan(r.mcd_mean) else f"{r.mcd_mean:.1f} ± {r.mcd_std:.1f}"
        cells.append((r.system_id, r.model, r.reduction_factor, r.vowelized,
                      _fmt1(r.wer), _fmt1(r.cer), mcd_cell))
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    for row in cells:
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return buf.getvalue(), "\n".join(lines) + "\n"


def read_report_csv(text: str) -> List[EvalRow]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return [
        EvalRow(
            system_id=row["id"], model=row["model"], reduction_factor=row["r"],
            vowelized=row["vowelized"], wer=float(row["wer"]), cer=float(row["cer"]),
            mcd_mean=float(row["mcd_mean"]), mcd_std=float(row["mcd_std"]),
        )
        for row in reader
    ]


def breakdown_table(rows: Sequence[Tuple[str, AlignmentResult]], decimals: int = 1) -> str:
    """Sub/Ins/Del/error-rate table, one row per labelled alignment."""
    cells = [("ID", "Sub.", "Ins.", "Del.", "ER [%]")]
    for label, ar in rows:
        cells.append((label, str(ar.substitutions), str(ar.insertions), str(ar.deletions),
                      f"{100.0 * error_rate(ar):.{decimals}f}"))
    widths = [max(len(r[i]) for r in cells) for i in range(5)]
    return "\n".join(" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells) + "\n"
