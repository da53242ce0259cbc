"""Pipeline configuration: one JSON file, strictly validated."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from corpusforge.corpus import SegmentClass
from corpusforge.dsp import StftConfig, build_filterbank
from corpusforge.errors import ConfigError
from corpusforge.evaluate import DEFAULT_PUNCTUATION
from corpusforge.quality import ClassThresholds, HeuristicConfig, SelectionPolicy
from corpusforge.textproc import RepairConfig

ENV_VAR = "CORPUSFORGE_CONFIG"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PathsConfig(_Strict):
    corpus_root: Optional[str] = None
    manifest: Optional[str] = None
    score_file: Optional[str] = None
    asr_hypotheses: Optional[str] = None
    flags: Optional[str] = None
    diacritizer_command: Optional[str] = None
    diacritizer_table: Optional[str] = None
    speaker_overrides: Optional[str] = None
    output_dir: str = "out"


class QualityConfig(_Strict):
    frame_ms: float = Field(25.0, gt=0)
    hop_ms: float = Field(10.0, gt=0)
    music_window_s: float = Field(0.5, gt=0)
    clip_level: float = Field(0.999, gt=0, le=1)
    tau_music: float = Field(0.45, ge=0, le=1)
    tau_snr: float = Field(15.0, ge=0, le=100)
    tau_clip: float = Field(0.01, ge=0, le=1)
    tau_wer: float = Field(0.20, ge=0)

    def heuristics(self) -> HeuristicConfig:
        return HeuristicConfig(self.frame_ms, self.hop_ms, self.music_window_s, self.clip_level)

    def thresholds(self) -> ClassThresholds:
        return ClassThresholds(self.tau_music, self.tau_snr, self.tau_clip, self.tau_wer)


class SelectionConfig(_Strict):
    mode: Literal["automatic", "manual", "combined"] = "automatic"
    threshold: float = Field(4.0, ge=1, le=5)
    scorer_name: str = "dnsmos"
    strict: bool = True
    required_class: SegmentClass = SegmentClass.GOOD_RECORDING
    max_minutes: Optional[float] = Field(None, ge=0)

    def policy(self) -> SelectionPolicy:
        return SelectionPolicy(
            threshold=self.threshold, scorer_name=self.scorer_name,
            required_class=self.required_class, max_minutes=self.max_minutes,
            mode=self.mode, strict=self.strict,
        )


class RepairSection(_Strict):
    enabled: bool = True
    token_similarity_max: float = Field(0.5, ge=0, le=1)
    disagreement_flag_threshold: float = Field(0.20, ge=0, le=1)

    def repair_config(self) -> RepairConfig:
        return RepairConfig(self.token_similarity_max, self.disagreement_flag_threshold)


class TextConfig(_Strict):
    coverage_policy: Literal["fail", "warn"] = "warn"


class MetadataConfig(_Strict):
    fold_arabic: bool = False
    fuzzy: bool = False
    fuzzy_threshold: float = Field(0.2, ge=0, le=1)


class DspConfig(_Strict):
    sample_rate_hz: int = Field(16000, gt=0)
    n_fft: int = 1024
    win: int = 800
    hop: int = 200
    n_mels: int = Field(80, ge=2)
    f_min: float = Field(80.0, ge=0)
    f_max: float = 7600.0
    power: bool = False
    gl_iters: int = Field(60, ge=0)

    @model_validator(mode="after")
    def _check(self):
        try:
            self.stft()
        except ValueError as exc:
            raise ValueError(str(exc)) from None
        if not self.f_min < self.f_max <= self.sample_rate_hz / 2:
            raise ValueError("need f_min < f_max <= sample_rate_hz / 2")
        return self

    def stft(self) -> StftConfig:
        return StftConfig(self.n_fft, self.hop, self.win, self.sample_rate_hz)

    def filterbank(self):
        return build_filterbank(self.n_mels, self.f_min, self.f_max, self.n_fft, self.sample_rate_hz)


class EvalConfig(_Strict):
    n_cep: int = Field(13, ge=2)
    use_dtw: bool = True
    strip_diacritics: bool = False
    punctuation: str = DEFAULT_PUNCTUATION


class SplitConfig(_Strict):
    n_dev: int = Field(25, ge=0)
    n_test: int = Field(25, ge=0)
    strategy: Literal["tail", "seeded-random"] = "tail"


class PipelineConfig(_Strict):
    paths: PathsConfig = PathsConfig()
    quality: QualityConfig = QualityConfig()
    selection: SelectionConfig = SelectionConfig()
    repair: RepairSection = RepairSection()
    text: TextConfig = TextConfig()
    metadata: MetadataConfig = MetadataConfig()
    dsp: DspConfig = DspConfig()
    eval: EvalConfig = EvalConfig()
    split: SplitConfig = SplitConfig()
    report_decimals: int = Field(0, ge=0, le=6)
    seed: int = 0

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _resolve_paths(cfg: PipelineConfig, base: Path) -> PipelineConfig:
    updates = {}
    for name, value in cfg.paths.model_dump().items():
        if value and name != "diacritizer_command" and not Path(value).is_absolute():
            updates[name] = str((base / value).resolve())
    return cfg.model_copy(update={"paths": cfg.paths.model_copy(update=updates)})


def parse_config(data: dict, base_dir: Optional[Path] = None) -> PipelineConfig:
    try:
        cfg = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            lines.append(f"{loc}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None
    return _resolve_paths(cfg, base_dir) if base_dir is not None else cfg


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """Load a config file; falls back to $CORPUSFORGE_CONFIG, then to defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return PipelineConfig()
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return parse_config(data, p.parent.resolve())
