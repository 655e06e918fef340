"""Corpus construction: SNR mixing, synthetic speech/noise, manifests and
the three kinds of training pairs (noisy->clean, clean->clean, noise->silence)."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .dsp import SAMPLE_RATE, Waveform
from .errors import DataError, InvalidArgument, ManifestError

SNR_LEVELS = (-5, 0, 5, 10, 15, 20)
SPLITS = ("train", "valid", "test")
NOISE_KINDS = ("white", "pink", "babble")
PEAK = 0.5


class PairKind(str, enum.Enum):
    NOISY_TO_CLEAN = "noisy_clean"
    CLEAN_TO_CLEAN = "clean_clean"
    NOISE_TO_SILENCE = "noise_silence"


@dataclass(frozen=True)
class TrainingPair:
    kind: PairKind
    input: Waveform
    target: Waveform
    utt_id: str
    snr_db: float | None = None

    def __post_init__(self):
        if len(self.input) != len(self.target):
            raise InvalidArgument(f"pair {self.utt_id}: input and target lengths differ")


def derive_seed(seed, *keys) -> np.random.SeedSequence:
    """Independent RNG stream for (seed, keys...), stable across processes."""
    words = [int(seed)]
    for key in keys:
        digest = hashlib.sha256(str(key).encode()).digest()
        words.append(int.from_bytes(digest[:8], "little"))
    return np.random.SeedSequence(words)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def power(x) -> float:
    x = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    return float(np.mean(x * x))


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, seed=0):
    """Crop noise to the clean length at a random offset and scale it to ``snr_db``.

    Returns ``(noisy, scaled_noise)`` with ``noisy = clean + scaled_noise``.
    Noise shorter than the clean signal is wrapped cyclically.
    """
    if clean.sample_rate != noise.sample_rate:
        raise InvalidArgument(
            f"sample rates differ: clean {clean.sample_rate} Hz, noise {noise.sample_rate} Hz"
        )
    p_clean = power(clean)
    if p_clean <= 0.0:
        raise InvalidArgument("clean signal has zero power")
    if power(noise) <= 0.0:
        raise InvalidArgument("noise signal has zero power")
    n, m = len(clean), len(noise)
    rng = _rng(seed)
    if m >= n:
        start = int(rng.integers(0, m - n + 1))
        segment = noise.samples[start : start + n]
    else:
        start = int(rng.integers(0, m))
        segment = np.take(noise.samples, start + np.arange(n), mode="wrap")
    p_segment = power(segment)
    if p_segment <= 0.0:
        raise InvalidArgument("selected noise segment has zero power")
    alpha = np.sqrt(p_clean / (p_segment * 10.0 ** (snr_db / 10.0)))
    scaled = alpha * segment
    return Waveform(clean.samples + scaled, clean.sample_rate), Waveform(scaled, clean.sample_rate)


def _peak_normalize(x):
    peak = np.max(np.abs(x))
    return x * (PEAK / peak) if peak > 0 else x


def _syllable(rng, n, sr):
    t = np.arange(n) / sr
    f0_start = rng.uniform(90.0, 220.0)
    f0 = f0_start * (1.0 + rng.uniform(-0.25, 0.25) * t / max(t[-1], 1e-9))
    ph = 2.0 * np.pi * np.cumsum(f0) / sr
    formants = (rng.uniform(300, 900), rng.uniform(900, 2300), rng.uniform(2300, 3400))
    bandwidths = (rng.uniform(60, 120), rng.uniform(90, 180), rng.uniform(120, 250))
    gains = (1.0, rng.uniform(0.3, 0.8), rng.uniform(0.1, 0.4))
    out = np.zeros(n)
    n_harm = int(3800.0 // (f0_start * 1.25))
    for k in range(1, n_harm + 1):
        fk = k * f0_start
        amp = sum(g / (1.0 + ((fk - f) / b) ** 2) for f, b, g in zip(formants, bandwidths, gains))
        out += amp / np.sqrt(k) * np.sin(k * ph + rng.uniform(0, 2 * np.pi))
    envelope = np.sqrt(np.sin(np.pi * np.arange(n) / n))
    envelope *= 1.0 + 0.3 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t)
    return out * envelope


def _fricative(rng, n):
    burst = rng.standard_normal(n)
    # crude high-pass: first difference
    burst = np.diff(burst, prepend=0.0)
    return 0.15 * burst * np.hanning(n)


def synth_speechlike(duration_s: float, seed=0, sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Harmonic, formant-shaped syllables with amplitude modulation and pauses."""
    if duration_s <= 0:
        raise InvalidArgument(f"duration must be positive, got {duration_s}")
    rng = _rng(seed)
    total = int(round(duration_s * sample_rate))
    out = np.zeros(total)
    pos = int(rng.uniform(0.05, 0.2) * sample_rate)
    while pos < total:
        for _ in range(int(rng.integers(1, 5))):
            n = int(rng.uniform(0.08, 0.3) * sample_rate)
            n = min(n, total - pos)
            if n < 16:
                break
            seg = _syllable(rng, n, sample_rate) * rng.uniform(0.4, 1.0)
            if rng.random() < 0.3:
                seg += _fricative(rng, n) * np.std(seg) / 0.15
            out[pos : pos + n] += seg
            pos += n + int(rng.uniform(0.0, 0.04) * sample_rate)
            if pos >= total:
                break
        pos += int(rng.uniform(0.1, 0.5) * sample_rate)
    return Waveform(_peak_normalize(out), sample_rate)


def synth_noise(kind: str, duration_s: float, seed=0, sample_rate: int = SAMPLE_RATE) -> Waveform:
    """White, pink-ish (random 1/f^a tilt) or babble-like noise, peak 0.5."""
    if kind not in NOISE_KINDS:
        raise InvalidArgument(f"unknown noise kind {kind!r}; choose from {', '.join(NOISE_KINDS)}")
    if duration_s <= 0:
        raise InvalidArgument(f"duration must be positive, got {duration_s}")
    rng = _rng(seed)
    n = int(round(duration_s * sample_rate))
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        tilt = rng.uniform(0.7, 1.3)
        spec = np.fft.rfft(rng.standard_normal(n))
        freqs = np.arange(spec.size, dtype=np.float64)
        freqs[0] = 1.0
        x = np.fft.irfft(spec / freqs ** (tilt / 2.0), n=n)
    else:
        x = np.zeros(n)
        for _ in range(int(rng.integers(5, 10))):
            talker = synth_speechlike(duration_s, rng, sample_rate).samples
            x += np.roll(talker, int(rng.integers(0, n)))
    return Waveform(_peak_normalize(x), sample_rate)


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    split: str
    clean_path: str
    noise_path: str | None = None
    snr_db: float | None = None
    seen: bool = True

    def to_line(self) -> str:
        return "\t".join(
            [
                self.utt_id,
                self.split,
                self.clean_path,
                self.noise_path or "-",
                "-" if self.snr_db is None else f"{self.snr_db:g}",
                "seen" if self.seen else "unseen",
            ]
        )


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    root: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def validate(self, check_files: bool = True) -> None:
        seen_ids = set()
        clean_split = {}
        for e in self.entries:
            if e.utt_id in seen_ids:
                raise ManifestError(f"duplicate utterance id {e.utt_id!r}")
            seen_ids.add(e.utt_id)
            other = clean_split.setdefault(e.clean_path, e.split)
            if other != e.split:
                raise ManifestError(
                    f"clean file {e.clean_path} appears in both {other!r} and {e.split!r}"
                )
        unseen = {e.noise_path for e in self.entries if e.noise_path and not e.seen}
        for e in self.entries:
            if e.split != "test" and e.noise_path in unseen:
                raise ManifestError(f"unseen noise {e.noise_path} is used in split {e.split!r}")
        if check_files:
            for e in self.entries:
                for rel in (e.clean_path, e.noise_path):
                    if rel and not self.resolve(rel).is_file():
                        raise DataError(f"{e.utt_id}: file not found: {self.resolve(rel)}")

    def write(self, path) -> None:
        lines = ["# id\tsplit\tclean\tnoise\tsnr_db\tnoise_set"]
        lines += [e.to_line() for e in self.entries]
        Path(path).write_text("\n".join(lines) + "\n")


def parse_manifest(text: str, root=".") -> Manifest:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = raw.rstrip("\n").split("\t")
        if len(fields) != 6:
            raise ManifestError(f"expected 6 tab-separated fields, got {len(fields)}", lineno)
        utt_id, split, clean, noise, snr, flag = (f.strip() for f in fields)
        if split not in SPLITS:
            raise ManifestError(f"unknown split {split!r}", lineno)
        if flag not in ("seen", "unseen"):
            raise ManifestError(f"noise set must be 'seen' or 'unseen', got {flag!r}", lineno)
        if (noise == "-") != (snr == "-"):
            raise ManifestError("noise path and SNR must both be given or both be '-'", lineno)
        try:
            snr_db = None if snr == "-" else float(snr)
        except ValueError:
            raise ManifestError(f"bad SNR value {snr!r}", lineno) from None
        entries.append(
            ManifestEntry(utt_id, split, clean, None if noise == "-" else noise, snr_db, flag == "seen")
        )
    return Manifest(entries, Path(root))


def read_manifest(path, check_files: bool = True) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    manifest = parse_manifest(path.read_text(), root=path.parent)
    manifest.validate(check_files=check_files)
    return manifest


# -- pairs -------------------------------------------------------------------

class AudioCache:
    """Memoizes WAV reads; mixing reuses the same noise files many times."""

    def __init__(self, manifest: Manifest):
        self.manifest = manifest
        self._cache = {}

    def load(self, rel: str) -> Waveform:
        from .wavio import read_wav

        if rel not in self._cache:
            self._cache[rel] = read_wav(self.manifest.resolve(rel))
        return self._cache[rel]


def mix_entry(entry: ManifestEntry, audio: AudioCache, seed):
    clean = audio.load(entry.clean_path)
    noise = audio.load(entry.noise_path)
    noisy, scaled = mix_at_snr(clean, noise, entry.snr_db, derive_seed(seed, entry.utt_id))
    return clean, noisy, scaled


def build_pairs(
    manifest: Manifest,
    mode,
    seed=0,
    split: str = "train",
    audio: AudioCache | None = None,
) -> Iterator[TrainingPair]:
    """Yield training pairs of one kind for the entries of ``split``.

    Each entry's noise offset comes from an RNG keyed on (seed, utterance
    id), so the result does not depend on iteration order.
    """
    mode = PairKind(mode)
    audio = audio or AudioCache(manifest)
    entries = manifest.split(split)
    if mode is PairKind.CLEAN_TO_CLEAN:
        done = set()
        for e in entries:
            if e.clean_path in done:
                continue
            done.add(e.clean_path)
            clean = audio.load(e.clean_path)
            yield TrainingPair(mode, clean, clean, Path(e.clean_path).stem)
        return
    mixed = [e for e in entries if e.noise_path is not None]
    if not mixed:
        raise ManifestError(f"split {split!r} has no noisy entries for mode {mode.value}")
    for e in mixed:
        clean, noisy, scaled = mix_entry(e, audio, seed)
        if mode is PairKind.NOISY_TO_CLEAN:
            yield TrainingPair(mode, noisy, clean, e.utt_id, e.snr_db)
        else:
            silence = Waveform(np.zeros(len(scaled)), scaled.sample_rate)
            yield TrainingPair(mode, scaled, silence, e.utt_id, e.snr_db)


# -- synthetic corpus --------------------------------------------------------

@dataclass
class SynthSpec:
    n_train: int = 20
    n_valid: int = 5
    n_test: int = 5
    n_noises: int = 3
    n_unseen: int = 1
    snrs: tuple = SNR_LEVELS
    duration: float = 8.0
    noise_duration: float = 30.0
    noise_kinds: tuple = NOISE_KINDS
    train_expand: str = "exhaustive"
    valid_expand: str = "random"
    test_expand: str = "random"


def synthesize_corpus(out_dir, spec: SynthSpec, seed=0) -> Manifest:
    """Write clean and noise WAVs under ``out_dir`` plus ``manifest.tsv``.

    Exhaustive expansion pairs every clean file with every eligible noise at
    every SNR; random expansion draws one (noise, SNR) per clean file.
    """
    from .wavio import write_wav

    if min(spec.n_train, spec.n_valid, spec.n_test) < 0 or spec.n_train + spec.n_valid + spec.n_test == 0:
        raise InvalidArgument("at least one utterance must be requested and counts must be >= 0")
    if spec.n_noises < 1:
        raise InvalidArgument("at least one training noise is required")
    if not spec.snrs:
        raise InvalidArgument("at least one SNR is required")
    for expand in (spec.train_expand, spec.valid_expand, spec.test_expand):
        if expand not in ("exhaustive", "random"):
            raise InvalidArgument(f"expansion must be 'exhaustive' or 'random', got {expand!r}")

    out = Path(out_dir)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "noise").mkdir(parents=True, exist_ok=True)

    def noise_file(name, index):
        kind = spec.noise_kinds[index % len(spec.noise_kinds)]
        rel = f"noise/{name}_{kind}.wav"
        write_wav(out / rel, synth_noise(kind, spec.noise_duration, derive_seed(seed, "noise", name)))
        return rel

    seen = [noise_file(f"n{i:02d}", i) for i in range(spec.n_noises)]
    unseen = [noise_file(f"u{i:02d}", i + 1) for i in range(spec.n_unseen)]

    entries = []
    counts = {"train": spec.n_train, "valid": spec.n_valid, "test": spec.n_test}
    expands = {"train": spec.train_expand, "valid": spec.valid_expand, "test": spec.test_expand}
    for split in SPLITS:
        rng = np.random.default_rng(derive_seed(seed, "assign", split))
        pool = [(p, True) for p in seen]
        if split == "test":
            pool += [(p, False) for p in unseen]
        for i in range(counts[split]):
            cid = f"{split}{i:04d}"
            rel = f"clean/{cid}.wav"
            write_wav(out / rel, synth_speechlike(spec.duration, derive_seed(seed, "clean", cid)))
            if expands[split] == "exhaustive":
                combos = [(n, s) for n in pool for s in spec.snrs]
            else:
                combos = [(pool[int(rng.integers(len(pool)))], spec.snrs[int(rng.integers(len(spec.snrs)))])]
            for (noise_rel, is_seen), snr in combos:
                uid = f"{cid}_{Path(noise_rel).stem}_{snr:g}dB"
                entries.append(ManifestEntry(uid, split, rel, noise_rel, float(snr), is_seen))
    manifest = Manifest(entries, out)
    manifest.validate()
    manifest.write(out / "manifest.tsv")
    return manifest
