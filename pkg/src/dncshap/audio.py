"""Waveform to log-mel raster, and turning speech attributions into words.

Spectrogram rasters are ``(n_mels, n_frames, 1)``: row 0 is the lowest mel
band, columns are time frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise AudioError("waveform must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise AudioError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 128
    n_frames: int = 128
    fft_size: int = 1024
    hop: int | None = None  # None: spread n_frames over the clip
    fmin: float = 0.0
    fmax: float | None = None  # None: Nyquist


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate, fft_size, n_mels, fmin=0.0, fmax=None):
    """Triangular filters (peak 1) on the ``fft_size // 2 + 1`` rfft bins."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_layout(n_samples, config=MelConfig()):
    """``(hop, frames_available, first_kept_frame)`` for a clip of ``n_samples``.

    Short clips are zero-padded up to one FFT window.
    """
    n = max(n_samples, config.fft_size)
    hop = config.hop or max(1, (n - config.fft_size) // max(config.n_frames - 1, 1))
    available = 1 + (n - config.fft_size) // hop
    start = max(0, (available - config.n_frames) // 2)
    return hop, available, start


def _hann(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mel_spectrogram(wave: Waveform, config=MelConfig()):
    """Mel-band magnitudes ``(n_mels, frames)`` before compression.

    Center-cropped to ``n_frames`` when the clip yields more; may be shorter.
    """
    x = wave.samples
    if x.size < config.fft_size:
        x = np.pad(x, (0, config.fft_size - x.size))
    hop, available, start = frame_layout(wave.samples.size, config)
    count = min(available - start, config.n_frames)
    idx = (start + np.arange(count))[:, None] * hop + np.arange(config.fft_size)[None, :]
    spectrum = np.abs(np.fft.rfft(x[idx] * _hann(config.fft_size), axis=1))
    fb = mel_filterbank(wave.sample_rate, config.fft_size, config.n_mels, config.fmin, config.fmax)
    return fb @ spectrum.T


def logmel(wave: Waveform, config=MelConfig()):
    """``(n_mels, n_frames, 1)`` raster in [0, 1]: log(1 + mel magnitude),
    min-max scaled, then zero-padded on the right to ``n_frames``. Silence
    maps to all zeros."""
    if not isinstance(wave, Waveform):
        wave = Waveform(*wave)
    mel = np.log1p(mel_spectrogram(wave, config))
    lo, hi = mel.min(), mel.max()
    mel = (mel - lo) / (hi - lo) if hi > lo else np.zeros_like(mel)
    out = np.zeros((config.n_mels, config.n_frames))
    out[:, :mel.shape[1]] = mel
    return out[..., None]


# -- attribution post-processing ---------------------------------------------

def time_importance(shap_speech):
    """Mean over the frequency (row) axis: one importance value per frame."""
    shap_speech = np.asarray(shap_speech, dtype=np.float64)
    if shap_speech.ndim == 3:
        shap_speech = shap_speech[..., 0]
    return shap_speech.mean(axis=0)


def threshold_segments(importance, percentile=30.0):
    """Frames at or above the ``percentile`` (linear interpolation) survive;
    returns the maximal runs as half-open ``(start, end)`` frame intervals."""
    if not 0.0 <= percentile <= 100.0:
        raise ValueError("percentile must be within [0, 100]")
    importance = np.asarray(importance, dtype=np.float64)
    if importance.size == 0:
        return []
    keep = importance >= np.percentile(importance, percentile)
    edges = np.flatnonzero(np.diff(np.concatenate(([0], keep.astype(np.int8), [0]))))
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


@dataclass(frozen=True)
class Word:
    text: str
    start: float
    end: float


def check_alignment(words, duration=None):
    prev_end = -math.inf
    for w in words:
        if w.end < w.start:
            raise AudioError(f"word {w.text!r} ends before it starts")
        if w.start < prev_end:
            raise AudioError(f"word {w.text!r} overlaps the previous word")
        if w.start < 0 or (duration is not None and w.end > duration + 1e-9):
            raise AudioError(f"word {w.text!r} lies outside the clip")
        prev_end = w.end
    return list(words)


def load_alignment(path, duration=None):
    """JSON list of ``{"word", "start", "end"}`` (seconds)."""
    with open(path) as fh:
        raw = json.load(fh)
    try:
        words = [Word(str(item["word"]), float(item["start"]), float(item["end"])) for item in raw]
    except (TypeError, KeyError, ValueError) as exc:
        raise AudioError(f"{path}: malformed alignment ({exc})") from exc
    return check_alignment(words, duration)


def highlight_words(intervals, alignment, frame_duration, time_offset=0.0):
    """Words with at least half their duration inside the retained frames.

    Frame ``i`` spans ``time_offset + [i, i + 1) * frame_duration``.
    """
    if frame_duration <= 0:
        raise ValueError("frame_duration must be positive")
    spans = [(time_offset + a * frame_duration, time_offset + b * frame_duration) for a, b in intervals]
    picked = []
    for w in alignment:
        length = w.end - w.start
        if length <= 0:
            if any(lo <= w.start < hi for lo, hi in spans):
                picked.append(w.text)
            continue
        inside = sum(max(0.0, min(hi, w.end) - max(lo, w.start)) for lo, hi in spans)
        if inside >= 0.5 * length:
            picked.append(w.text)
    return picked
