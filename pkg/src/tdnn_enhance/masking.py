"""Mask arithmetic: ideal amplitude mask, mask application, and the
signal-approximation loss the network is trained on."""

import numpy as np

from .errors import InvalidArgument

IAM_FLOOR = 1e-8
IAM_CEILING = 10.0


def _check_same(a, b, names):
    if a.shape != b.shape:
        raise InvalidArgument(f"{names[0]} {a.shape} and {names[1]} {b.shape} differ in shape")


def compute_iam(clean_mag, noisy_mag):
    """|X| / max(|Y|, 1e-8), clamped to [0, 10]."""
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    _check_same(clean_mag, noisy_mag, ("clean_mag", "noisy_mag"))
    return np.clip(clean_mag / np.maximum(noisy_mag, IAM_FLOOR), 0.0, IAM_CEILING)


def apply_mask(noisy_mag, mask):
    noisy_mag = np.asarray(noisy_mag)
    mask = np.asarray(mask)
    _check_same(noisy_mag, mask, ("noisy_mag", "mask"))
    return noisy_mag * mask


def signal_mse(noisy_mag, mask, clean_mag):
    """Mean over all T*F bins of (|Y| * M - |X|)**2."""
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    _check_same(noisy_mag, mask, ("noisy_mag", "mask"))
    _check_same(noisy_mag, clean_mag, ("noisy_mag", "clean_mag"))
    if noisy_mag.size == 0:
        raise InvalidArgument("signal_mse needs at least one bin")
    diff = noisy_mag * mask - clean_mag
    return float(np.mean(diff * diff))
