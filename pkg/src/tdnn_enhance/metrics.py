"""Objective scores (plain SDR and STOI) and per-condition aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import firwin, resample_poly

from .dsp import Waveform
from .errors import InvalidArgument, SignalTooShort

SDR_CAP_DB = 100.0
SDR_METHOD = "sdr:plain"
PESQ_NOTE = "pesq: unsupported"

# STOI constants
STOI_FS = 10000
STOI_FRAME = 256
STOI_NFFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEGMENT = 30
STOI_BETA = -15.0
STOI_DYN_RANGE = 40.0
_RESAMPLE_TAPS_PER_PHASE = 32


def _samples(x):
    return x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)


def _rate(x, default):
    return x.sample_rate if isinstance(x, Waveform) else default


def sdr(reference, estimate) -> float:
    """10 log10(sum x^2 / sum (x - x_hat)^2), capped at +100 dB."""
    x, y = _samples(reference), _samples(estimate)
    if x.shape != y.shape:
        raise InvalidArgument(f"reference {x.shape} and estimate {y.shape} differ in length")
    if isinstance(reference, Waveform) and isinstance(estimate, Waveform) and (
        reference.sample_rate != estimate.sample_rate
    ):
        raise InvalidArgument("reference and estimate have different sample rates")
    energy = float(np.sum(x * x))
    if energy <= 0.0:
        raise InvalidArgument("reference has zero energy")
    err = float(np.sum((x - y) ** 2))
    if err < 1e-20 * energy:
        return SDR_CAP_DB
    return float(min(10.0 * np.log10(energy / err), SDR_CAP_DB))


@lru_cache(maxsize=None)
def _resample_filter(up, down):
    n_taps = _RESAMPLE_TAPS_PER_PHASE * up + 1
    return firwin(n_taps, 1.0 / max(up, down), window=("kaiser", 8.0))


def resample(x, from_rate: int, to_rate: int) -> np.ndarray:
    """Windowed-sinc polyphase resampling."""
    g = np.gcd(from_rate, to_rate)
    up, down = to_rate // g, from_rate // g
    if up == down:
        return np.array(x, dtype=np.float64)
    return resample_poly(x, up, down, window=_resample_filter(up, down))


@lru_cache(maxsize=None)
def third_octave_bands(fs=STOI_FS, nfft=STOI_NFFT, n_bands=STOI_BANDS, min_freq=STOI_MIN_FREQ):
    """Band matrix mapping ``nfft // 2 + 1`` FFT bins onto 1/3-octave bands."""
    freqs = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(n_bands)
    low = min_freq * 2.0 ** ((2 * k - 1) / 6.0)
    high = min_freq * 2.0 ** ((2 * k + 1) / 6.0)
    obm = np.zeros((n_bands, freqs.size))
    for i in range(n_bands):
        lo = int(np.argmin((freqs - low[i]) ** 2))
        hi = int(np.argmin((freqs - high[i]) ** 2))
        obm[i, lo:hi] = 1.0
    return obm


def _stoi_window():
    return np.hanning(STOI_FRAME + 2)[1:-1]


def _frames(x, hop):
    # the last full frame start is excluded, as in the reference algorithm
    starts = range(0, x.size - STOI_FRAME, hop)
    return np.array([x[s : s + STOI_FRAME] for s in starts]).reshape(-1, STOI_FRAME)


def _overlap_add(frames, hop):
    out = np.zeros((len(frames) - 1) * hop + STOI_FRAME) if len(frames) else np.zeros(0)
    for i, frame in enumerate(frames):
        out[i * hop : i * hop + STOI_FRAME] += frame
    return out


def remove_silent_frames(x, y, dyn_range=STOI_DYN_RANGE, hop=STOI_FRAME // 2):
    """Drop frames more than ``dyn_range`` dB below the loudest frame of ``x``
    (the same frames are dropped from ``y``) and re-assemble both signals."""
    w = _stoi_window()
    x_frames = _frames(x, hop) * w
    y_frames = _frames(y, hop) * w
    if not len(x_frames):
        return np.zeros(0), np.zeros(0)
    energies = 20.0 * np.log10(np.linalg.norm(x_frames, axis=1) + np.finfo(float).eps)
    keep = energies > np.max(energies) - dyn_range
    return _overlap_add(x_frames[keep], hop), _overlap_add(y_frames[keep], hop)


def _stoi_spectrum(x):
    hop = STOI_FRAME // 2
    frames = [x[s : s + STOI_FRAME] for s in range(0, x.size - STOI_FRAME, hop)]
    if not frames:
        return np.zeros((0, STOI_NFFT // 2 + 1))
    return np.fft.rfft(np.array(frames) * _stoi_window(), n=STOI_NFFT, axis=1)


def _correlation(a, b):
    """Pearson correlation along the last axis; exactly 1.0 when a == b."""
    a = a - a.mean(axis=-1, keepdims=True)
    b = b - b.mean(axis=-1, keepdims=True)
    num = np.sum(a * b, axis=-1)
    den = np.sqrt(np.sum(a * a, axis=-1) * np.sum(b * b, axis=-1))
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def stoi(reference, estimate, sample_rate=None) -> float:
    """Short-time objective intelligibility of ``estimate`` against ``reference``.

    Inputs at 8 kHz are resampled to 10 kHz first. Returns a value clipped
    to [0, 1].
    """
    x, y = _samples(reference), _samples(estimate)
    fs = sample_rate or _rate(reference, None) or _rate(estimate, None)
    if x.shape != y.shape:
        raise InvalidArgument(f"reference {x.shape} and estimate {y.shape} differ in length")
    if fs not in (8000, STOI_FS):
        raise InvalidArgument(f"stoi supports 8 kHz or 10 kHz input, got {fs}")
    if fs != STOI_FS:
        x = resample(x, fs, STOI_FS)
        y = resample(y, fs, STOI_FS)

    x, y = remove_silent_frames(x, y)
    obm = third_octave_bands()
    x_bands = np.sqrt(obm @ (np.abs(_stoi_spectrum(x)) ** 2).T)
    y_bands = np.sqrt(obm @ (np.abs(_stoi_spectrum(y)) ** 2).T)
    n_frames = x_bands.shape[1]
    if n_frames < STOI_SEGMENT:
        raise SignalTooShort(
            f"{n_frames} non-silent frames, need at least {STOI_SEGMENT} for one analysis segment"
        )

    # (segments, bands, frames)
    x_seg = np.lib.stride_tricks.sliding_window_view(x_bands, STOI_SEGMENT, axis=1).transpose(1, 0, 2)
    y_seg = np.lib.stride_tricks.sliding_window_view(y_bands, STOI_SEGMENT, axis=1).transpose(1, 0, 2)

    x_norm = np.linalg.norm(x_seg, axis=2, keepdims=True)
    y_norm = np.linalg.norm(y_seg, axis=2, keepdims=True)
    scale = np.divide(x_norm, y_norm, out=np.zeros_like(x_norm), where=y_norm > 0)
    clip = 10.0 ** (-STOI_BETA / 20.0)
    y_prime = np.minimum(y_seg * scale, x_seg * (1.0 + clip))
    score = float(np.mean(_correlation(x_seg, y_prime)))
    return float(np.clip(score, 0.0, 1.0))


# -- aggregation ---------------------------------------------------------

@dataclass(frozen=True)
class ScoreRow:
    utt_id: str
    snr_db: float | None
    seen: bool
    stoi: float
    sdr: float

    def __post_init__(self):
        if not 0.0 <= self.stoi <= 1.0:
            raise InvalidArgument(f"stoi {self.stoi} outside [0, 1]")
        if not np.isfinite(self.sdr):
            raise InvalidArgument(f"sdr {self.sdr} is not finite")


@dataclass(frozen=True)
class GroupMean:
    key: str
    stoi: float
    sdr: float
    count: int


GROUPINGS = ("by_snr", "by_seen_unseen", "overall")


def _group_key(row: ScoreRow, grouping):
    if grouping == "by_snr":
        return (0, row.snr_db) if row.snr_db is not None else (1, 0.0)
    if grouping == "by_seen_unseen":
        return "seen" if row.seen else "unseen"
    return "all"


def _label(key, grouping):
    if grouping == "by_snr":
        return f"{key[1]:g}dB" if key[0] == 0 else "clean"
    return key


def aggregate(rows, grouping="overall") -> list[GroupMean]:
    """Arithmetic mean of stoi and sdr per group, groups in sorted key order."""
    rows = list(rows)
    if not rows:
        raise InvalidArgument("cannot aggregate an empty score list")
    if grouping not in GROUPINGS:
        raise InvalidArgument(f"unknown grouping {grouping!r}; choose from {', '.join(GROUPINGS)}")
    groups = {}
    for row in rows:
        groups.setdefault(_group_key(row, grouping), []).append(row)
    out = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda r: r.utt_id)
        out.append(
            GroupMean(
                _label(key, grouping),
                float(np.mean([r.stoi for r in members])),
                float(np.mean([r.sdr for r in members])),
                len(members),
            )
        )
    return out


def format_scores(rows) -> str:
    lines = [f"# {SDR_METHOD}\t{PESQ_NOTE}", "id\tsnr_db\tnoise_set\tstoi\tsdr"]
    for r in rows:
        snr = "-" if r.snr_db is None else f"{r.snr_db:g}"
        lines.append(f"{r.utt_id}\t{snr}\t{'seen' if r.seen else 'unseen'}\t{r.stoi:.6f}\t{r.sdr:.4f}")
    return "\n".join(lines) + "\n"


def format_aggregate(groups, grouping: str) -> str:
    lines = [f"# {grouping}\t{SDR_METHOD}", "group\tstoi\tsdr\tpesq\tcount"]
    for g in groups:
        lines.append(f"{g.key}\t{g.stoi:.6f}\t{g.sdr:.4f}\tunsupported\t{g.count}")
    return "\n".join(lines) + "\n"
