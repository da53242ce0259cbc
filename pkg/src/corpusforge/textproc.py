"""Vowelization checks, diacritizer hook and ASR-guided transcript repair."""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

from corpusforge.errors import CoverageError, InputError, InvariantError
from corpusforge.evaluate import SUB, align, edit_distance, error_rate

log = logging.getLogger(__name__)

# Arabic harakat: fathatan .. sukun
DIACRITIC_RE = re.compile("[\u064b-\u0652]")


@dataclass(frozen=True)
class VowelizationReport:
    vowelized_ratio: float
    undiacritized_tokens: Tuple[str, ...]


def validate_vowelization(text: str) -> VowelizationReport:
    tokens = text.split()
    if not tokens:
        raise InputError("cannot validate empty text")
    missing = tuple(t for t in tokens if not DIACRITIC_RE.search(t))
    return VowelizationReport((len(tokens) - len(missing)) / len(tokens), missing)


@dataclass(frozen=True)
class RepairConfig:
    token_similarity_max: float = 0.5
    disagreement_flag_threshold: float = 0.20

    def __post_init__(self):
        for name in ("token_similarity_max", "disagreement_flag_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvariantError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class RepairResult:
    repaired: Tuple[str, ...]
    disagreement: float
    substitutions: Tuple[Tuple[str, str], ...]
    rejected: Tuple[Tuple[str, str], ...] = ()
    insertions: int = 0
    deletions: int = 0


def token_distance(a: str, b: str) -> float:
    """Character edit distance divided by the longer token length."""
    longest = max(len(a), len(b))
    return edit_distance(list(a), list(b)) / longest if longest else 0.0


def repair_transcript(
    reference: Sequence[str], hypothesis: Sequence[str], cfg: RepairConfig = RepairConfig()
) -> RepairResult:
    """Replace reference tokens by aligned ASR tokens that look like spelling variants.

    Only substitutions within ``cfg.token_similarity_max`` normalized
    character distance are applied; insertions and deletions are counted but
    never applied, so the output has exactly as many tokens as the reference.
    """
    reference, hypothesis = list(reference), list(hypothesis)
    if not reference or not hypothesis:
        raise InputError("repair needs non-empty reference and hypothesis")
    ar = align(reference, hypothesis)
    repaired = list(reference)
    applied, rejected = [], []
    for op, i, j in ar.path:
        if op != SUB:
            continue
        ref_tok, hyp_tok = reference[i], hypothesis[j]
        if token_distance(ref_tok, hyp_tok) <= cfg.token_similarity_max:
            repaired[i] = hyp_tok
            applied.append((ref_tok, hyp_tok))
        else:
            rejected.append((ref_tok, hyp_tok))
    return RepairResult(
        repaired=tuple(repaired),
        disagreement=error_rate(ar),
        substitutions=tuple(applied),
        rejected=tuple(rejected),
        insertions=ar.insertions,
        deletions=ar.deletions,
    )


def flag_wrong_transcription(disagreement: float, cfg: RepairConfig = RepairConfig()) -> bool:
    return disagreement > cfg.disagreement_flag_threshold


def read_hypotheses(path) -> Dict[str, str]:
    """Read a JSONL file of ``{"segment_id": ..., "hypothesis": ...}`` objects.

    ``text`` is accepted in place of ``hypothesis`` so reference transcript
    files share the format.
    """
    out: Dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sid = str(obj["segment_id"])
                text = obj["hypothesis"] if "hypothesis" in obj else obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{path}:{line_no}: expected segment_id and hypothesis") from exc
            if sid in out:
                raise InputError(f"{path}:{line_no}: duplicate segment_id {sid!r}")
            out[sid] = str(text)
    return out


@dataclass
class DiacritizerHook:
    """External diacritizer.

    Either ``command`` (a subprocess reading UTF-8 text on stdin and writing
    the diacritized text on stdout) or ``table`` (a TSV of
    ``word<TAB>diacritized``) must be given. The hook must preserve the
    token count.
    """

    command: Optional[Union[str, Sequence[str]]] = None
    table: Optional[Union[str, Path]] = None
    coverage_policy: str = "warn"
    timeout_s: float = 60.0
    _lookup: Optional[Dict[str, str]] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if (self.command is None) == (self.table is None):
            raise InputError("diacritizer needs exactly one of command or table")
        if self.coverage_policy not in ("fail", "warn"):
            raise InputError(f"coverage_policy must be 'fail' or 'warn', got {self.coverage_policy!r}")

    def _table(self) -> Dict[str, str]:
        if self._lookup is None:
            lookup = {}
            for line in Path(self.table).read_text(encoding="utf-8").splitlines():
                if line.strip() and not line.startswith("#"):
                    word, _, vowelized = line.partition("\t")
                    lookup[word] = vowelized or word
            self._lookup = lookup
        return self._lookup

    def _run(self, text: str) -> str:
        if self.table is not None:
            lookup = self._table()
            return " ".join(lookup.get(tok, tok) for tok in text.split())
        cmd = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        proc = subprocess.run(
            cmd, input=text.encode("utf-8"), capture_output=True, timeout=self.timeout_s
        )
        if proc.returncode != 0:
            raise InputError(
                f"diacritizer exited with {proc.returncode}: {proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        return proc.stdout.decode("utf-8")

    def __call__(self, text: str) -> Tuple[str, VowelizationReport]:
        out = " ".join(self._run(text).split())
        n_in, n_out = len(text.split()), len(out.split())
        if n_in != n_out:
            raise InvariantError(f"diacritizer changed token count {n_in} -> {n_out}")
        report = validate_vowelization(out)
        if report.undiacritized_tokens:
            msg = f"{len(report.undiacritized_tokens)} undiacritized tokens: " + " ".join(
                report.undiacritized_tokens[:10]
            )
            if self.coverage_policy == "fail":
                raise CoverageError(msg)
            log.warning(msg)
        return out, report
