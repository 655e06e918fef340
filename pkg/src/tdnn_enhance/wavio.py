"""Mono 8 kHz WAV reading and writing (PCM16 or float32)."""

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import SAMPLE_RATE, Waveform
from .errors import AudioFormatError, DataError


def read_wav(path, expected_rate=SAMPLE_RATE) -> Waveform:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if expected_rate is not None and rate != expected_rate:
        raise AudioFormatError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}; use PCM16 or float32")
    return Waveform(samples, rate)


def to_pcm16(samples) -> np.ndarray:
    """Clip to [-1, 1] and round to the nearest 16-bit code, no dither."""
    scaled = np.rint(np.clip(samples, -1.0, 1.0) * 32768.0)
    return np.clip(scaled, -32768, 32767).astype(np.int16)


def write_wav(path, wave: Waveform, fmt="pcm16") -> None:
    if fmt == "pcm16":
        data = to_pcm16(wave.samples)
    elif fmt == "float32":
        data = np.clip(wave.samples, -1.0, 1.0).astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, wave.sample_rate, data)
