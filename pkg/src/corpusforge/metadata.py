"""Episode metadata parsing and speaker-name linking.

Broadcast metadata arrives as loosely formatted ``key: value`` lines, mostly
at the top of a file but sometimes scattered through the transcript body,
either as their own lines or as inline ``[key: value]`` tags. Field names are
frequently misspelled, so the key vocabulary is a configurable alias table.
"""

from __future__ import annotations

import csv
import io
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from corpusforge.errors import InputError

# canonical field -> accepted spellings (compared after _key_form)
DEFAULT_KEYS: Dict[str, Tuple[str, ...]] = {
    "program_name": (
        "program", "programme", "program name", "programme name", "progam", "prgram",
        "show", "البرنامج", "اسم البرنامج",
    ),
    "episode_title": ("episode title", "episode", "title", "episode titel", "عنوان الحلقة", "العنوان", "الحلقة"),
    "episode_date": ("date", "episode date", "broadcast date", "air date", "تاريخ", "التاريخ", "تاريخ الحلقة"),
    "speaker_entries": (
        "speaker", "speakers", "speeker", "spaeker", "guest", "guests", "presenter", "anchor",
        "host", "المتحدث", "المتحدثون", "الضيف", "الضيوف", "المذيع", "مقدم البرنامج",
    ),
    "topics": ("topic", "topics", "subject", "subjects", "الموضوع", "المواضيع", "محاور الحلقة"),
}

_LIST_FIELDS = {"speaker_entries", "topics"}
_SPEAKER_SPLIT = re.compile(r"\s*[;|؛]\s*")
_TOPIC_SPLIT = re.compile(r"\s*[;|؛,،]\s*")
_LINE_KV = re.compile(r"^\s*([^:\[\]]{1,40}?)\s*[:：]\s*(.*?)\s*$")
_INLINE_KV = re.compile(r"\[\s*([^:\[\]]{1,40}?)\s*[:：]\s*([^\[\]]*?)\s*\]")


def _key_form(key: str) -> str:
    key = unicodedata.normalize("NFC", key).casefold()
    key = re.sub(r"[\s_\-]+", " ", key)
    return key.strip()


@dataclass(frozen=True)
class EpisodeMetadata:
    program_name: str = ""
    episode_title: str = ""
    episode_date: str = ""
    speaker_entries: Tuple[str, ...] = ()
    topics: Tuple[str, ...] = ()
    ignored_lines: int = 0


def _alias_table(keys: Mapping[str, Sequence[str]]) -> Dict[str, str]:
    table = {}
    for canonical, aliases in keys.items():
        table[_key_form(canonical)] = canonical
        for alias in aliases:
            table[_key_form(alias)] = canonical
    return table


def parse_metadata(
    raw_text: str, keys: Mapping[str, Sequence[str]] = DEFAULT_KEYS
) -> Tuple[EpisodeMetadata, List[str]]:
    """Extract metadata fields from free-form text.

    Never fails. Returns the metadata and a list of warnings (repeated
    single-valued fields, empty values). Lines that carry no recognized
    field are counted in ``ignored_lines``.
    """
    aliases = _alias_table(keys)
    values: Dict[str, List[str]] = {name: [] for name in keys}
    values.setdefault("speaker_entries", [])
    values.setdefault("topics", [])
    warnings: List[str] = []
    ignored = 0

    def take(field_name: str, value: str, line_no: int):
        value = value.strip()
        if not value:
            warnings.append(f"line {line_no}: empty value for {field_name}")
            return
        if field_name in _LIST_FIELDS:
            splitter = _SPEAKER_SPLIT if field_name == "speaker_entries" else _TOPIC_SPLIT
            values[field_name].extend(v for v in splitter.split(value) if v)
        else:
            if values[field_name] and values[field_name][-1] != value:
                warnings.append(f"line {line_no}: {field_name} repeated, keeping first value")
            values[field_name].append(value)

    for line_no, line in enumerate(raw_text.splitlines(), start=1):
        if not line.strip():
            continue
        matched = False
        m = _LINE_KV.match(line)
        if m and _key_form(m.group(1)) in aliases:
            take(aliases[_key_form(m.group(1))], m.group(2), line_no)
            matched = True
        else:
            for inline in _INLINE_KV.finditer(line):
                name = aliases.get(_key_form(inline.group(1)))
                if name is not None:
                    take(name, inline.group(2), line_no)
                    matched = True
        if not matched:
            ignored += 1

    def first(name: str) -> str:
        return values.get(name, [""])[0] if values.get(name) else ""

    meta = EpisodeMetadata(
        program_name=first("program_name"),
        episode_title=first("episode_title"),
        episode_date=first("episode_date"),
        speaker_entries=tuple(values["speaker_entries"]),
        topics=tuple(values["topics"]),
        ignored_lines=ignored,
    )
    return meta, warnings


_ALEF_FOLD = str.maketrans({"أ": "ا", "إ": "ا", "آ": "ا", "ٱ": "ا", "ة": "ه"})


def _is_edge_junk(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def normalize_name(raw: str, fold_arabic: bool = False) -> str:
    """Canonical textual form of a speaker name.

    >>> normalize_name("Barack Obama/the US President")
    'Barack Obama'
    """
    if not raw or not raw.strip():
        raise InputError("cannot normalize an empty name")
    name = unicodedata.normalize("NFC", raw)
    name = name.split("/", 1)[0]
    if fold_arabic:
        name = name.translate(_ALEF_FOLD)
    name = " ".join(name.split())
    start, end = 0, len(name)
    while start < end and _is_edge_junk(name[start]):
        start += 1
    while end > start and _is_edge_junk(name[end - 1]):
        end -= 1
    name = name[start:end]
    if not name:
        raise InputError(f"name {raw!r} normalizes to an empty string")
    return name


@dataclass(frozen=True)
class SpeakerRecord:
    canonical_name: str
    variants: FrozenSet[str] = field(default_factory=frozenset)
    segment_count: int = 0


def _normalized_distance(a: str, b: str) -> float:
    from corpusforge.evaluate import edit_distance

    if not a and not b:
        return 0.0
    return edit_distance(list(a), list(b)) / max(len(a), len(b))


def link_speakers(
    entries: Iterable[str],
    overrides: Optional[Mapping[str, str]] = None,
    fold_arabic: bool = False,
    fuzzy: bool = False,
    fuzzy_threshold: float = 0.2,
) -> List[SpeakerRecord]:
    """Group raw speaker strings into canonical speaker records.

    Exact match on the normalized form unless ``fuzzy`` is set, in which
    case normalized forms within ``fuzzy_threshold`` normalized edit
    distance are merged (single linkage). ``overrides`` maps raw strings to
    a canonical name and wins over everything else. ``segment_count`` is the
    number of entries that resolved to the record.
    """
    overrides = dict(overrides or {})
    entries = list(entries)
    key_of: Dict[str, str] = {}
    for raw in entries:
        if raw not in key_of:
            key_of[raw] = overrides[raw] if raw in overrides else normalize_name(raw, fold_arabic)

    if fuzzy:
        occurrences = Counter(key_of[raw] for raw in entries)
        forms = sorted(set(key_of[raw] for raw in entries if raw not in overrides))
        parent = {f: f for f in forms}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, a in enumerate(forms):
            for b in forms[i + 1:]:
                if _normalized_distance(a, b) <= fuzzy_threshold:
                    parent[find(b)] = find(a)
        clusters: Dict[str, List[str]] = {}
        for f in forms:
            clusters.setdefault(find(f), []).append(f)
        for members in clusters.values():
            rep = min(members, key=lambda f: (-occurrences[f], f))
            for raw, key in key_of.items():
                if raw not in overrides and key in members:
                    key_of[raw] = rep

    variants: Dict[str, set] = {}
    counts: Counter = Counter()
    for raw in entries:
        key = key_of[raw]
        variants.setdefault(key, set()).add(raw)
        counts[key] += 1
    records = [SpeakerRecord(k, frozenset(v), counts[k]) for k, v in variants.items()]
    records.sort(key=lambda r: (-r.segment_count, r.canonical_name))
    return records


def speakers_csv(records: Sequence[SpeakerRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["canonical_name", "n_variants", "segment_count"])
    for rec in records:
        writer.writerow([rec.canonical_name, len(rec.variants), rec.segment_count])
    return buf.getvalue()


def load_overrides(path) -> Dict[str, str]:
    """Read a manual raw -> canonical map.

    Accepts a JSON object or a two-column CSV/TSV (``raw,canonical``).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InputError(f"{path}: override map must be a JSON object")
        return {str(k): str(v) for k, v in data.items()}
    delimiter = "\t" if path.suffix == ".tsv" else ","
    out = {}
    for row in csv.reader(io.StringIO(text), delimiter=delimiter):
        if not row or row[0].startswith("#") or row[:2] == ["raw", "canonical"]:
            continue
        if len(row) < 2:
            raise InputError(f"{path}: override row needs two columns: {row}")
        out[row[0]] = row[1]
    return out
