from __future__ import annotations

import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpusforge import dsp
from corpusforge.cli import main
from corpusforge.config import parse_config
from corpusforge.corpus import AudioSegment, CorpusManifest, SegmentClass, Waveform, load_wav, read_manifest, write_wav
from corpusforge.errors import InputError, MatrixFormatError
from corpusforge.pipeline import cmd_eval, cmd_ingest, cmd_pipeline, cmd_report, cmd_speakers, cmd_split, cmd_synth_gl
from corpusforge.synthetic import speech_like

OUTPUTS = ("classified.jsonl", "selected.jsonl", "class_summary.csv", "class_summary.txt", "provenance.json")


def pipeline_config(sc, out_dir, **selection):
    return parse_config({
        "paths": {
            "manifest": str(sc.manifest_path), "score_file": str(sc.score_path),
            "asr_hypotheses": str(sc.hypotheses_path), "flags": str(sc.flags_path),
            "output_dir": str(out_dir),
        },
        "selection": selection,
    })


def make_manifest(n):
    return CorpusManifest(tuple(
        AudioSegment(id=f"u{i:03d}", audio_path=f"{i}.wav", start_s=0, end_s=2.0) for i in range(n)
    ))


# ---------------------------------------------------------------- ingest


def _tree(root, n, missing_transcript=()):
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    for i in range(n):
        write_wav(root / f"ep{i}.wav", Waveform(0.1 * rng.standard_normal(16000), 16000))
        if i not in missing_transcript:
            (root / f"ep{i}.txt").write_text(f"utterance  number {i}\n", encoding="utf-8")
    return root


def test_ingest_three_pairs(tmp_path):
    root = _tree(tmp_path / "c", 3)
    (root / "ep0.meta.txt").write_text("Speaker: Barack Obama/the US President\n", encoding="utf-8")
    cfg = parse_config({"paths": {"corpus_root": str(root), "manifest": str(tmp_path / "m.jsonl")}})
    m, warnings = cmd_ingest(cfg)
    assert len(m) == 3 and warnings == []
    assert m.segments[0].speaker_id == "Barack Obama"
    assert m.segments[1].transcript_raw == "utterance number 1"
    assert m.segments[1].duration_s == 1.0
    assert read_manifest(tmp_path / "m.jsonl") == m


def test_ingest_missing_transcript_and_empty_tree(tmp_path):
    root = _tree(tmp_path / "c", 3, missing_transcript={1})
    cfg = parse_config({"paths": {"corpus_root": str(root), "manifest": str(tmp_path / "m.jsonl")}})
    m, warnings = cmd_ingest(cfg)
    assert len(m) == 2 and len(warnings) == 1 and "ep1.wav" in warnings[0]
    (tmp_path / "empty").mkdir()
    cfg = parse_config({"paths": {"corpus_root": str(tmp_path / "empty"), "manifest": str(tmp_path / "e.jsonl")}})
    assert len(cmd_ingest(cfg)[0]) == 0
    with pytest.raises(InputError):
        cmd_ingest(parse_config({"paths": {"corpus_root": str(tmp_path / "absent")}}))


# ---------------------------------------------------------------- pipeline


def test_pipeline_selects_clean_segments(synthetic_corpus, tmp_path):
    sc = synthetic_corpus
    result = cmd_pipeline(pipeline_config(sc, tmp_path / "out"))
    assert sorted(result.selected.ids) == sorted(sc.clean_ids)
    assert {s.id: s.class_label for s in result.classified} == sc.expected_class
    seg = result.classified.segments[0]
    assert seg.transcript_repaired is not None and len(seg.transcript_repaired.split()) == 6
    assert set(seg.extra) >= {"heuristics", "asr_disagreement"}
    for name in OUTPUTS:
        assert (tmp_path / "out" / name).exists()
    h = result.provenance["config_hash"]
    assert f"# config_hash={h}" in (tmp_path / "out" / "class_summary.txt").read_text()
    assert f"# config_hash={h}" in (tmp_path / "out" / "class_summary.csv").read_text()


def test_pipeline_rerun_and_jobs_are_byte_identical(synthetic_corpus, tmp_path):
    sc = synthetic_corpus
    cmd_pipeline(pipeline_config(sc, tmp_path / "a"), jobs=1)
    cmd_pipeline(pipeline_config(sc, tmp_path / "a"), jobs=1)
    first = {n: (tmp_path / "a" / n).read_bytes() for n in OUTPUTS}
    cmd_pipeline(pipeline_config(sc, tmp_path / "a"), jobs=4)
    assert {n: (tmp_path / "a" / n).read_bytes() for n in OUTPUTS} == first


def test_pipeline_threshold_five_is_empty(synthetic_corpus, tmp_path):
    result = cmd_pipeline(pipeline_config(synthetic_corpus, tmp_path / "o", threshold=5.0))
    assert len(result.selected) == 0
    assert any("empty" in w for w in result.warnings)


def test_pipeline_with_diacritizer_table(synthetic_corpus, tmp_path):
    table = tmp_path / "d.tsv"
    table.write_text("qamar\tqamarَ\n", encoding="utf-8")
    cfg = pipeline_config(synthetic_corpus, tmp_path / "o")
    cfg = cfg.model_copy(update={"paths": cfg.paths.model_copy(update={"diacritizer_table": str(table)})})
    result = cmd_pipeline(cfg)
    assert all(s.transcript_vowelized is not None for s in result.classified)


def test_pipeline_flags_route_classes(synthetic_corpus, tmp_path):
    sc = synthetic_corpus
    flags = tmp_path / "flags.csv"
    flags.write_text(f"segment_id,overlap,wrong_speaker\n{sc.clean_ids[0]},1,0\n{sc.clean_ids[1]},0,true\n")
    cfg = pipeline_config(sc, tmp_path / "o")
    cfg = cfg.model_copy(update={"paths": cfg.paths.model_copy(update={"flags": str(flags)})})
    labels = {s.id: s.class_label for s in cmd_pipeline(cfg).classified}
    assert labels[sc.clean_ids[0]] is SegmentClass.OVERLAPPED_SPEECH
    assert labels[sc.clean_ids[1]] is SegmentClass.WRONG_SPEAKER


# ---------------------------------------------------------------- split


def test_split_counts_and_errors():
    train, dev, test = cmd_split(make_manifest(100), 25, 25)
    assert (len(train), len(dev), len(test)) == (50, 25, 25)
    assert test.ids[-1] == "u099" and dev.ids[0] == "u050"
    with pytest.raises(InputError):
        cmd_split(make_manifest(50), 25, 25)


def test_random_split_depends_on_seed():
    a = cmd_split(make_manifest(100), 25, 25, "seeded-random", seed=1)
    b = cmd_split(make_manifest(100), 25, 25, "seeded-random", seed=2)
    assert [len(p) for p in a] == [len(p) for p in b] == [50, 25, 25]
    assert a[1].ids != b[1].ids
    assert cmd_split(make_manifest(100), 25, 25, "seeded-random", seed=1) == a


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 60), st.integers(0, 20), st.integers(0, 20), st.sampled_from(["tail", "seeded-random"]), st.integers(0, 99))
def test_split_is_partition(n, n_dev, n_test, strategy, seed):
    m = make_manifest(n)
    if n_dev + n_test >= n:
        with pytest.raises(InputError):
            cmd_split(m, n_dev, n_test, strategy, seed)
        return
    parts = cmd_split(m, n_dev, n_test, strategy, seed)
    ids = [i for p in parts for i in p.ids]
    assert sorted(ids) == sorted(m.ids) and len(set(ids)) == len(ids)


# ---------------------------------------------------------------- synth-gl and eval


def _utterance(seed=0, seconds=1.0):
    return speech_like(np.random.default_rng(seed), seconds) + 0.002 * np.random.default_rng(seed + 1).standard_normal(int(16000 * seconds))


def test_synth_gl_writes_one_wav_per_mel(tmp_path):
    cfg = parse_config({"dsp": {"gl_iters": 10}})
    mel_dir = tmp_path / "mel"
    mel_dir.mkdir()
    for i in range(2):
        mel = dsp.log_mel(_utterance(i), cfg.dsp.stft(), cfg.dsp.filterbank())
        dsp.write_matrix(mel_dir / f"u{i}.mel", mel.values)
    out = cmd_synth_gl(mel_dir, tmp_path / "wav", cfg)
    assert [p.name for p in out] == ["u0.wav", "u1.wav"]
    first = out[0].read_bytes()
    cmd_synth_gl(mel_dir, tmp_path / "wav", cfg)
    assert out[0].read_bytes() == first


@pytest.mark.xfail(strict=True, reason="plain GL from a pseudo-inverted mel does not reach 0.05; see decisions ledger")
def test_synth_gl_self_analysis_spectral_bound(tmp_path):
    cfg = parse_config({})
    x = _utterance(3)
    mel_dir = tmp_path / "mel"
    mel_dir.mkdir()
    dsp.write_matrix(mel_dir / "u.mel", dsp.log_mel(x, cfg.dsp.stft(), cfg.dsp.filterbank()).values)
    (wav,) = cmd_synth_gl(mel_dir, tmp_path / "wav", cfg)
    y = load_wav(wav).samples
    n = min(len(x), len(y))
    ref = dsp.stft(x[:n]).magnitude
    err = np.linalg.norm(dsp.stft(y[:n]).magnitude - ref) / np.linalg.norm(ref)
    assert err < 0.05


def test_synth_gl_empty_and_corrupt(tmp_path):
    (tmp_path / "mel").mkdir()
    assert cmd_synth_gl(tmp_path / "mel", tmp_path / "o") == []
    assert not (tmp_path / "o").exists()
    (tmp_path / "mel" / "bad.mel").write_bytes(b"CFMX")
    with pytest.raises(MatrixFormatError, match="bad.mel"):
        cmd_synth_gl(tmp_path / "mel", tmp_path / "o")


def _eval_fixture(tmp_path, hyp_text):
    ref, syn = tmp_path / "ref", tmp_path / "syn"
    ref.mkdir()
    syn.mkdir()
    texts = {"a": "the cat sat on the mat", "b": "one two three"}
    for i, sid in enumerate(texts):
        write_wav(ref / f"{sid}.wav", Waveform(_utterance(i), 16000))
        shutil.copy(ref / f"{sid}.wav", syn / f"{sid}.wav")
    tr = tmp_path / "tr.jsonl"
    tr.write_text("".join(json.dumps({"segment_id": k, "text": v}) + "\n" for k, v in texts.items()))
    hy = tmp_path / "hy.jsonl"
    hy.write_text("".join(json.dumps({"segment_id": k, "hypothesis": hyp_text.get(k, v)}) + "\n" for k, v in texts.items()))
    return ref, syn, tr, hy


def test_eval_self_comparison_is_zero(tmp_path):
    ref, syn, tr, hy = _eval_fixture(tmp_path, {})
    out = cmd_eval(ref, syn, tr, hy, system_id="GT")
    r = out.corpus_row
    assert (r.wer, r.cer, r.mcd_mean, r.mcd_std) == (0.0, 0.0, 0.0, 0.0)
    assert "config_hash=" in out.report_csv and "config_hash=" in out.report_text
    assert len(out.per_utterance_csv.splitlines()) == 3


def test_eval_injected_errors(tmp_path):
    # "a": one substitution and one deletion; "b": one insertion
    ref, syn, tr, hy = _eval_fixture(tmp_path, {"a": "the bat sat on mat", "b": "one two three four"})
    out = cmd_eval(ref, syn, tr, hy)
    assert out.corpus_row.wer == pytest.approx(100 * 3 / 9)
    assert "sys (words) | 1    | 1    | 1" in out.breakdown_text


def test_eval_lists_missing_ids(tmp_path):
    ref, syn, tr, hy = _eval_fixture(tmp_path, {})
    (syn / "b.wav").unlink()
    with pytest.raises(InputError, match="b"):
        cmd_eval(ref, syn, tr, hy)


def test_report_and_speakers(tmp_path):
    mos = tmp_path / "mos.csv"
    mos.write_text("rater_id,sample_id,system_id,score\n" + "".join(f"r{i},s,7V,{s}\n" for i, s in enumerate([4, 4, 4, 4, 5, 5, 5, 5])))
    assert "7V | 4.5 ± 0.37 | 8" in cmd_report(mos)
    (tmp_path / "junk.csv").write_text("x,y\n")
    with pytest.raises(InputError):
        cmd_report(tmp_path / "junk.csv")
    meta = tmp_path / "meta"
    meta.mkdir()
    (meta / "e1.txt").write_text("speaker: Barack Obama/the US President; Angela Merkel\n")
    (meta / "e2.txt").write_text("guest: Barack  Obama\n")
    text, _ = cmd_speakers([meta])
    assert text.splitlines()[1:] == ["Barack Obama,2,2", "Angela Merkel,1,1"]


# ---------------------------------------------------------------- CLI


def test_cli_pipeline_and_exit_codes(synthetic_corpus, tmp_path, capsys, monkeypatch):
    sc = synthetic_corpus
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"paths": {
        "manifest": str(sc.manifest_path), "score_file": str(sc.score_path),
        "flags": str(sc.flags_path), "output_dir": str(tmp_path / "out"),
    }}))
    assert main(["--config", str(cfg_path), "--jobs", "2", "pipeline"]) == 0
    assert "selected 12 of 20" in capsys.readouterr().out

    monkeypatch.setenv("CORPUSFORGE_CONFIG", str(cfg_path))
    assert main(["split", str(sc.manifest_path), "--out-dir", str(tmp_path / "s"), "--n-dev", "5", "--n-test", "5"]) == 0
    assert "train/dev/test = 10/5/5" in capsys.readouterr().out

    # input error: split larger than corpus
    assert main(["split", str(sc.manifest_path), "--out-dir", str(tmp_path / "s")]) == 1
    # invariant violation: duplicate ids
    dup = tmp_path / "dup.jsonl"
    line = sc.manifest_path.read_text().splitlines()[0]
    dup.write_text(line + "\n" + line + "\n")
    assert main(["split", str(dup), "--out-dir", str(tmp_path / "s")]) == 2
    # I/O failure: output path is an existing file
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["speakers", str(tmp_path / "cfg.json"), "--out", str(blocker / "x.csv")]) == 3
    err = capsys.readouterr().err
    assert "error:" in err


def test_cli_synth_gl_empty_dir_notice(tmp_path, capsys):
    (tmp_path / "mel").mkdir()
    assert main(["synth-gl", str(tmp_path / "mel"), str(tmp_path / "o")]) == 0
    assert "no .mel files" in capsys.readouterr().out


def test_python_dash_m_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "corpusforge", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "corpusforge" in proc.stdout
