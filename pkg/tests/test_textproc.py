from __future__ import annotations

import json
import sys

import pytest
from hypothesis import given, settings, strategies as st

from corpusforge.errors import CoverageError, InputError, InvariantError
from corpusforge.textproc import (
    DiacritizerHook,
    RepairConfig,
    flag_wrong_transcription,
    read_hypotheses,
    repair_transcript,
    token_distance,
    validate_vowelization,
)

from conftest import brute_edit_distance

KATABA = "كَتَبَ"
QALAM = "قَلَمٌ"


def test_vowelization_ratios():
    assert validate_vowelization(" ".join([KATABA, QALAM, KATABA, QALAM])).vowelized_ratio == 1.0
    rep = validate_vowelization("كتب قلم")
    assert rep.vowelized_ratio == 0.0 and rep.undiacritized_tokens == ("كتب", "قلم")
    assert validate_vowelization(f"{KATABA} قلم").vowelized_ratio == 0.5
    with pytest.raises(InputError):
        validate_vowelization("   ")


def test_repair_identity_case():
    r = repair_transcript(["a", "b"], ["a", "b"])
    assert r.repaired == ("a", "b") and r.disagreement == 0 and r.substitutions == ()


def test_repair_spelling_variant_applied():
    assert token_distance("ktab", "ktaab") == brute_edit_distance("ktab", "ktaab") / 5 == 0.2
    r = repair_transcript(["ktab"], ["ktaab"])
    assert r.repaired == ("ktaab",)
    assert r.substitutions == (("ktab", "ktaab"),)


def test_repair_unrelated_word_kept():
    assert token_distance("cat", "helicopter") == brute_edit_distance("cat", "helicopter") / 10 == 0.8
    r = repair_transcript(["cat"], ["helicopter"])
    assert r.repaired == ("cat",)
    assert r.rejected == (("cat", "helicopter"),)
    assert r.disagreement == 1.0


def test_insertions_and_deletions_not_applied():
    r = repair_transcript(["the", "big", "cat"], ["the", "cat", "sat", "down"])
    assert len(r.repaired) == 3
    assert r.repaired[0] == "the"


def test_wrong_transcription_flag():
    assert flag_wrong_transcription(0.0) is False
    assert flag_wrong_transcription(0.21) is True
    assert flag_wrong_transcription(0.20) is False


def test_repair_config_validation():
    with pytest.raises(ValueError):
        RepairConfig(token_similarity_max=1.5)
    with pytest.raises(InputError):
        repair_transcript([], ["x"])


tokens = st.lists(st.text(alphabet="abkt", min_size=1, max_size=5), min_size=1, max_size=10)


@settings(max_examples=1000, deadline=None)
@given(tokens, tokens, st.floats(0, 1))
def test_repair_is_conservative(ref, hyp, thr):
    r = repair_transcript(ref, hyp, RepairConfig(token_similarity_max=thr))
    assert len(r.repaired) == len(ref)
    for out, orig in zip(r.repaired, ref):
        assert out == orig or out in hyp
    for (a, b) in r.substitutions:
        assert token_distance(a, b) <= thr
    assert repair_transcript(ref, ref).repaired == tuple(ref)


def test_read_hypotheses(tmp_path):
    p = tmp_path / "h.jsonl"
    p.write_text(
        json.dumps({"segment_id": "a", "hypothesis": "x y"}) + "\n\n" + json.dumps({"segment_id": "b", "text": "z"}) + "\n",
        encoding="utf-8",
    )
    assert read_hypotheses(p) == {"a": "x y", "b": "z"}
    p.write_text('{"segment_id": "a"}\n')
    with pytest.raises(InputError, match=":1"):
        read_hypotheses(p)


def test_table_diacritizer(tmp_path):
    table = tmp_path / "d.tsv"
    table.write_text(f"كتب\t{KATABA}\nقلم\t{QALAM}\n", encoding="utf-8")
    out, rep = DiacritizerHook(table=table)("كتب قلم")
    assert out == f"{KATABA} {QALAM}" and rep.vowelized_ratio == 1.0
    out, rep = DiacritizerHook(table=table)("كتب بيت")
    assert rep.undiacritized_tokens == ("بيت",)
    with pytest.raises(CoverageError):
        DiacritizerHook(table=table, coverage_policy="fail")("كتب بيت")


def test_command_diacritizer_and_token_count_guard():
    add_fatha = [sys.executable, "-c", "import sys; t=sys.stdin.read(); print(' '.join(w + 'َ' for w in t.split()))"]
    out, rep = DiacritizerHook(command=add_fatha)("كتب قلم")
    assert rep.vowelized_ratio == 1.0 and len(out.split()) == 2
    merge = [sys.executable, "-c", "import sys; print(sys.stdin.read().replace(' ', ''))"]
    with pytest.raises(InvariantError):
        DiacritizerHook(command=merge)("كتب قلم")
    failing = [sys.executable, "-c", "import sys; sys.exit(3)"]
    with pytest.raises(InputError):
        DiacritizerHook(command=failing)("x")


def test_diacritizer_needs_exactly_one_backend(tmp_path):
    with pytest.raises(InputError):
        DiacritizerHook()
    with pytest.raises(InputError):
        DiacritizerHook(command="cat", table=tmp_path / "t.tsv")
