"""Spectral analysis and phase reconstruction.

STFT/ISTFT, HTK-style mel filterbanks and their pseudo-inverse, log-mel and
mel-cepstrum features, Griffin-Lim phase retrieval, and a small binary
matrix format for exchanging mel-spectrograms and attention matrices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import scipy.fft

from corpusforge.corpus import Waveform
from corpusforge.errors import InputError, InvariantError, MatrixFormatError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 1024
    hop: int = 200
    win: int = 800
    sample_rate_hz: int = 16000
    window: str = "hann"

    def __post_init__(self):
        if self.n_fft <= 0 or self.n_fft & (self.n_fft - 1):
            raise InvariantError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.win <= self.n_fft:
            raise InvariantError(
                f"need 0 < hop <= win <= n_fft, got hop={self.hop} win={self.win} n_fft={self.n_fft}"
            )
        if self.window != "hann":
            raise InvariantError(f"unsupported window {self.window!r}")
        if self.sample_rate_hz <= 0:
            raise InvariantError("sample_rate_hz must be positive")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def analysis_window(self) -> np.ndarray:
        """Periodic Hann of length ``win``, zero-padded to ``n_fft`` and centred."""
        n = np.arange(self.win)
        w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.win)
        out = np.zeros(self.n_fft)
        left = (self.n_fft - self.win) // 2
        out[left:left + self.win] = w
        return out


@dataclass(frozen=True)
class Spectrogram:
    magnitude: np.ndarray  # [frames x bins]
    config: StftConfig
    phase: Optional[np.ndarray] = None
    length: Optional[int] = None

    def __post_init__(self):
        mag = np.asarray(self.magnitude, dtype=np.float64)
        if mag.ndim != 2 or mag.shape[1] != self.config.n_bins:
            raise InputError(f"magnitude shape {mag.shape} incompatible with n_fft={self.config.n_fft}")
        if not np.all(np.isfinite(mag)) or np.any(mag < 0):
            raise InvariantError("magnitudes must be finite and nonnegative")
        object.__setattr__(self, "magnitude", mag)

    @property
    def complex(self) -> np.ndarray:
        if self.phase is None:
            return self.magnitude.astype(np.complex128)
        return self.magnitude * np.exp(1j * self.phase)


def _samples(x: Union[Waveform, np.ndarray]) -> np.ndarray:
    return x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)


def _reflect_index(n: int, pad: int, total: int) -> np.ndarray:
    """Source sample for each position of a reflect-padded signal of ``total`` samples."""
    p = np.arange(total) - pad
    if n == 1:
        return np.zeros(total, dtype=np.int64)
    period = 2 * (n - 1)
    k = np.mod(p, period)
    return np.where(k >= n, period - k, k)


def _centre_shift(cfg: StftConfig) -> np.ndarray:
    # moves the phase reference from the frame start to the frame centre
    return (-1.0) ** np.arange(cfg.n_bins)


def stft_complex(x: Union[Waveform, np.ndarray], cfg: StftConfig) -> np.ndarray:
    """Complex STFT [frames x bins] with centred, reflect-padded frames.

    Phase is measured relative to the centre of each frame, so an all-zero
    phase spectrogram describes frames symmetric about their centres.
    """
    x = _samples(x)
    if x.ndim != 1 or len(x) < cfg.win:
        raise InputError(f"signal of {len(x)} samples shorter than window ({cfg.win})")
    pad = cfg.n_fft // 2
    n_frames = 1 + len(x) // cfg.hop
    xp = x[_reflect_index(len(x), pad, len(x) + 2 * pad)]
    frames = np.lib.stride_tricks.sliding_window_view(xp, cfg.n_fft)[::cfg.hop][:n_frames]
    return np.fft.rfft(frames * cfg.analysis_window(), axis=1) * _centre_shift(cfg)


def stft(x: Union[Waveform, np.ndarray], cfg: StftConfig = StftConfig()) -> Spectrogram:
    spec = stft_complex(x, cfg)
    return Spectrogram(np.abs(spec), cfg, np.angle(spec), len(_samples(x)))


def istft_complex(spec: np.ndarray, cfg: StftConfig, length: Optional[int] = None) -> np.ndarray:
    """Least-squares inverse of :func:`stft_complex`.

    Windowed frames are overlap-added on the padded time axis and every
    padded position is folded back onto the sample it was reflected from,
    then divided by the folded squared-window sum. For a consistent
    spectrogram this reconstructs the signal exactly; for any other input it
    returns the signal whose STFT is closest in the least-squares sense.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.n_bins:
        raise InputError(f"spectrogram shape {spec.shape} incompatible with n_fft={cfg.n_fft}")
    n_frames = spec.shape[0]
    if length is None:
        length = cfg.hop * (n_frames - 1)
    if length < 1:
        raise InputError("output length must be positive")
    window = cfg.analysis_window()
    frames = np.fft.irfft(spec * _centre_shift(cfg), n=cfg.n_fft, axis=1) * window
    total = cfg.n_fft + cfg.hop * (n_frames - 1)
    ola = np.zeros(total)
    wss = np.zeros(total)
    w2 = window * window
    for t in range(n_frames):
        s = t * cfg.hop
        ola[s:s + cfg.n_fft] += frames[t]
        wss[s:s + cfg.n_fft] += w2
    idx = _reflect_index(length, cfg.n_fft // 2, total)
    num = np.bincount(idx, weights=ola, minlength=length)[:length]
    den = np.bincount(idx, weights=wss, minlength=length)[:length]
    out = np.zeros(length)
    ok = den > 1e-12
    out[ok] = num[ok] / den[ok]
    return out


def istft(spec: Spectrogram, cfg: Optional[StftConfig] = None, length: Optional[int] = None) -> Waveform:
    cfg = cfg or spec.config
    length = length if length is not None else spec.length
    return Waveform(istft_complex(spec.complex, cfg, length), cfg.sample_rate_hz)


# ---------------------------------------------------------------- mel scale


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise InputError("frequency must be nonnegative")
    m = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(m) if m.ndim == 0 else m


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise InputError("mel value must be nonnegative")
    f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


@dataclass(frozen=True)
class MelFilterbank:
    matrix: np.ndarray  # [n_mels x bins]
    f_min: float
    f_max: float
    n_fft: int
    sample_rate_hz: int

    @property
    def n_mels(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.matrix)

    @cached_property
    def centers_hz(self) -> np.ndarray:
        mels = np.linspace(hz_to_mel(self.f_min), hz_to_mel(self.f_max), self.n_mels + 2)
        return mel_to_hz(mels)[1:-1]


def build_filterbank(
    n_mels: int = 80,
    f_min: float = 80.0,
    f_max: float = 7600.0,
    n_fft: int = 1024,
    sr: int = 16000,
) -> MelFilterbank:
    """Triangular filters with centres equally spaced on the mel scale.

    Each row is rescaled so its largest sampled value is exactly 1.
    """
    if n_mels < 2:
        raise InputError("n_mels must be at least 2")
    if not 0 <= f_min < f_max <= sr / 2:
        raise InputError(f"need 0 <= f_min < f_max <= sr/2, got {f_min}, {f_max}, sr={sr}")
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    freqs = np.linspace(0.0, sr / 2.0, n_fft // 2 + 1)
    fb = np.zeros((n_mels, len(freqs)))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(rise, fall))
        peak = fb[m].max()
        if peak <= 0:
            raise InputError(
                f"mel filter {m} ({lo:.1f}-{hi:.1f} Hz) contains no FFT bin; raise n_fft or lower n_mels"
            )
        fb[m] /= peak
    return MelFilterbank(fb, float(f_min), float(f_max), n_fft, sr)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # [frames x n_mels], natural-log
    filterbank: MelFilterbank
    config: StftConfig
    power: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.filterbank.n_mels:
            raise InputError(f"mel values shape {values.shape} vs {self.filterbank.n_mels} filters")
        if not np.all(np.isfinite(values)):
            raise InvariantError("mel values must be finite")
        object.__setattr__(self, "values", values)


def mel_spectrogram(spec: Spectrogram, fb: MelFilterbank, power: bool = False) -> MelSpectrogram:
    """Natural-log mel spectrogram, ``log(max(fb @ mag.T, 1e-10)).T``.

    With ``power`` the squared magnitude is filtered instead.
    """
    if spec.magnitude.shape[1] != fb.matrix.shape[1]:
        raise InputError(
            f"spectrogram has {spec.magnitude.shape[1]} bins, filterbank expects {fb.matrix.shape[1]}"
        )
    mag = spec.magnitude ** 2 if power else spec.magnitude
    values = np.log(np.maximum(fb.matrix @ mag.T, LOG_FLOOR)).T
    return MelSpectrogram(values, fb, spec.config, power)


def invert_mel(melspec: MelSpectrogram, fb: Optional[MelFilterbank] = None) -> Spectrogram:
    """Linear magnitude via the filterbank pseudo-inverse; negatives clamp to 0."""
    fb = fb or melspec.filterbank
    if melspec.values.shape[1] != fb.n_mels:
        raise InputError(f"mel has {melspec.values.shape[1]} channels, filterbank {fb.n_mels}")
    linear = np.maximum(fb.pinv @ np.exp(melspec.values).T, 0.0).T
    if melspec.power:
        linear = np.sqrt(linear)
    return Spectrogram(linear, melspec.config)


def mel_cepstrum(melspec: Union[MelSpectrogram, np.ndarray], n_coef: int = 13) -> np.ndarray:
    """Orthonormal DCT-II of each log-mel frame, first ``n_coef`` coefficients."""
    values = melspec.values if isinstance(melspec, MelSpectrogram) else np.asarray(melspec, dtype=np.float64)
    if n_coef > values.shape[1] or n_coef < 1:
        raise InputError(f"n_coef={n_coef} must be in [1, {values.shape[1]}]")
    return scipy.fft.dct(values, type=2, norm="ortho", axis=1)[:, :n_coef]


def log_mel(x: Union[Waveform, np.ndarray], cfg: StftConfig, fb: MelFilterbank, power: bool = False) -> MelSpectrogram:
    return mel_spectrogram(stft(x, cfg), fb, power)


# ---------------------------------------------------------------- Griffin-Lim


def spectral_inconsistency(x: np.ndarray, magnitude: np.ndarray, cfg: StftConfig) -> float:
    """Frobenius distance between |STFT(x)| and a target magnitude."""
    return float(np.linalg.norm(np.abs(stft_complex(x, cfg)) - magnitude))


def griffin_lim(
    mag: Spectrogram,
    n_iter: int = 60,
    cfg: Optional[StftConfig] = None,
    length: Optional[int] = None,
    momentum: float = 0.0,
    seed: Optional[int] = None,
    trace: Optional[List[float]] = None,
) -> Waveform:
    """Reconstruct a waveform whose STFT magnitude approximates ``mag``.

    Starts from zero phase (or uniform random phase when ``seed`` is given)
    and alternates magnitude substitution with the least-squares ISTFT.
    ``momentum`` > 0 enables the accelerated variant; the plain iteration
    (momentum 0) never increases the spectral inconsistency. If ``trace`` is
    a list, the inconsistency of every iterate is appended to it.
    """
    if n_iter < 0:
        raise InputError("n_iter must be >= 0")
    cfg = cfg or mag.config
    if mag.magnitude.shape[1] != cfg.n_bins:
        raise InputError("magnitude incompatible with STFT config")
    if length is None:
        length = mag.length if mag.length is not None else cfg.hop * (mag.magnitude.shape[0] - 1)
    target = mag.magnitude
    if seed is None:
        phase = np.ones_like(target, dtype=np.complex128)
    else:
        rng = np.random.default_rng(seed)
        phase = np.exp(2j * np.pi * rng.random(target.shape))
    x = istft_complex(target * phase, cfg, length)
    prev_proj = None
    for _ in range(n_iter):
        spec = stft_complex(x, cfg)
        if trace is not None:
            trace.append(float(np.linalg.norm(np.abs(spec) - target)))
        if momentum and prev_proj is not None:
            accel = spec + momentum * (spec - prev_proj)
            prev_proj = spec
            spec = accel
        else:
            prev_proj = spec
        x = istft_complex(target * np.exp(1j * np.angle(spec)), cfg, length)
    if trace is not None:
        trace.append(spectral_inconsistency(x, target, cfg))
    return Waveform(x, cfg.sample_rate_hz)


def synthesize_from_mel(
    melspec: MelSpectrogram, n_iter: int = 60, length: Optional[int] = None
) -> Waveform:
    """Mel -> linear magnitude (pseudo-inverse) -> Griffin-Lim."""
    return griffin_lim(invert_mel(melspec), n_iter, melspec.config, length)


# ---------------------------------------------------------------- matrix files

MATRIX_MAGIC = b"CFMX"
_HEADER = struct.Struct("<4sII4x")


def write_matrix(path, matrix: np.ndarray) -> None:
    """16-byte header (magic, rows, cols, 4 reserved) then row-major float32 LE."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if m.ndim != 2:
        raise InputError(f"matrix must be 2-D, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(path, "truncated header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise MatrixFormatError(path, f"bad magic {magic!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise MatrixFormatError(path, f"expected {expected} bytes for {rows}x{cols}, found {len(data)}")
    m = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise MatrixFormatError(path, "non-finite values")
    return m.astype(np.float64)
