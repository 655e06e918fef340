"""Noisy waveform -> enhanced waveform, reusing the noisy phase."""

import numpy as np

from . import dsp
from .errors import NumericFailure
from .masking import apply_mask
from .network import TdnnModel, forward


def enhance_waveform(model: TdnnModel, wave: dsp.Waveform) -> dsp.Waveform:
    spec = dsp.stft(wave)
    noisy_mag = dsp.magnitude(spec)
    with np.errstate(over="ignore", invalid="ignore"):
        mask = forward(model, noisy_mag)
    if not np.all(np.isfinite(mask)):
        raise NumericFailure("model produced a non-finite mask")
    return dsp.istft(
        apply_mask(noisy_mag, mask),
        dsp.phase(spec),
        spec.frame_shift,
        spec.fft_size,
        out_len=len(wave),
        sample_rate=wave.sample_rate,
    )
