"""STFT front-end and overlap-add reconstruction.

Frames are centered: the signal is reflect-padded by ``fft_size // 2`` on
both sides so frame ``t`` is centered on sample ``t * frame_shift``.
Everything here runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

SAMPLE_RATE = 8000
FFT_SIZE = 256
FRAME_SHIFT = 128
N_BINS = FFT_SIZE // 2 + 1
WINDOW_SUM_FLOOR = 1e-8


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidArgument(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("waveform contains NaN or Inf")
        if self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class ComplexSpectrogram:
    """T x F complex STFT frames."""

    frames: np.ndarray
    fft_size: int = FFT_SIZE
    frame_shift: int = FRAME_SHIFT
    n_samples: int | None = field(default=None, compare=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.complex128)
        if frames.ndim != 2 or frames.shape[1] != self.fft_size // 2 + 1:
            raise InvalidArgument(
                f"expected T x {self.fft_size // 2 + 1} frames, got {frames.shape}"
            )
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def make_analysis_window(size: int) -> np.ndarray:
    """Periodic Hamming window, ``0.54 - 0.46 cos(2 pi n / size)``."""
    if size <= 0 or size % 2:
        raise InvalidArgument(f"window size must be even and positive, got {size}")
    n = np.arange(size)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / size)


def frame_count(n_samples: int, frame_shift: int = FRAME_SHIFT) -> int:
    return 1 + n_samples // frame_shift


def _frame_signal(padded: np.ndarray, fft_size: int, frame_shift: int, n_frames: int):
    stride = padded.strides[0]
    return np.lib.stride_tricks.as_strided(
        padded,
        shape=(n_frames, fft_size),
        strides=(frame_shift * stride, stride),
        writeable=False,
    )


def stft(
    wave: Waveform | np.ndarray,
    fft_size: int = FFT_SIZE,
    frame_shift: int = FRAME_SHIFT,
) -> ComplexSpectrogram:
    x = wave.samples if isinstance(wave, Waveform) else np.asarray(wave, dtype=np.float64)
    if x.size == 0:
        raise InvalidArgument("cannot take the STFT of an empty waveform")
    if frame_shift <= 0 or frame_shift > fft_size:
        raise InvalidArgument(f"frame_shift must be in (0, fft_size], got {frame_shift}")
    window = make_analysis_window(fft_size)
    half = fft_size // 2
    # numpy's reflect mode repeats the reflection for very short inputs
    padded = np.pad(x, half, mode="reflect") if x.size > 1 else np.pad(x, half)
    n_frames = frame_count(x.size, frame_shift)
    frames = _frame_signal(np.ascontiguousarray(padded), fft_size, frame_shift, n_frames)
    spec = np.fft.rfft(frames * window, n=fft_size, axis=1)
    return ComplexSpectrogram(spec, fft_size, frame_shift, n_samples=x.size)


def magnitude(spec: ComplexSpectrogram | np.ndarray) -> np.ndarray:
    frames = spec.frames if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    return np.abs(frames)


def phase(spec: ComplexSpectrogram | np.ndarray) -> np.ndarray:
    # np.angle(0) is 0, matching the zero-bin convention
    frames = spec.frames if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    return np.angle(frames)


def istft(
    mag: np.ndarray,
    ph: np.ndarray,
    frame_shift: int = FRAME_SHIFT,
    fft_size: int = FFT_SIZE,
    out_len: int | None = None,
    sample_rate: int = SAMPLE_RATE,
) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`.

    Each frame is inverse transformed, multiplied by the analysis window,
    summed, then divided by the running sum of squared windows (floored at
    ``WINDOW_SUM_FLOOR``). The centering pad is removed and the result is
    cropped or zero-padded to ``out_len``.
    """
    mag = np.asarray(mag, dtype=np.float64)
    ph = np.asarray(ph, dtype=np.float64)
    if mag.shape != ph.shape:
        raise InvalidArgument(f"magnitude {mag.shape} and phase {ph.shape} differ in shape")
    if mag.ndim != 2 or mag.shape[1] != fft_size // 2 + 1:
        raise InvalidArgument(f"expected T x {fft_size // 2 + 1} planes, got {mag.shape}")
    n_frames = mag.shape[0]
    if out_len is None:
        out_len = (n_frames - 1) * frame_shift
    window = make_analysis_window(fft_size)
    frames = np.fft.irfft(mag * np.exp(1j * ph), n=fft_size, axis=1) * window

    total = (n_frames - 1) * frame_shift + fft_size
    signal = np.zeros(total)
    norm = np.zeros(total)
    win_sq = window**2
    for t in range(n_frames):
        start = t * frame_shift
        signal[start : start + fft_size] += frames[t]
        norm[start : start + fft_size] += win_sq
    signal /= np.maximum(norm, WINDOW_SUM_FLOOR)

    half = fft_size // 2
    signal = signal[half:]
    if signal.size >= out_len:
        signal = signal[:out_len]
    else:
        signal = np.pad(signal, (0, out_len - signal.size))
    return Waveform(signal, sample_rate)
