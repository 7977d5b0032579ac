"""Shared helpers: exact fraction coercion and Python-int bitsets."""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable

import numpy as np


class CapExceeded(RuntimeError):
    """A brute-force search would exceed its configured enumeration cap."""


def as_fraction(x) -> Fraction:
    # Floats go through repr so 0.3 means 3/10, not the nearest binary double.
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("expected a number, got bool")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def mask_of(elements: Iterable[int]) -> int:
    mask = 0
    for e in elements:
        mask |= 1 << e
    return mask


def elements_of(mask: int) -> list[int]:
    """Ascending indices of the set bits of a non-negative int."""
    if mask < 0:
        raise ValueError("negative mask")
    if mask.bit_length() <= 128:
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return out
    nbytes = (mask.bit_length() + 7) // 8
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little")).tolist()


def bool_row_to_mask(row: np.ndarray) -> int:
    packed = np.packbits(np.asarray(row, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def mask_to_bool(mask: int, size: int) -> np.ndarray:
    nbytes = max(1, (size + 7) // 8)
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:size].astype(bool)


def pack_words(rows: np.ndarray) -> np.ndarray:
    """Pack a (k, n) boolean matrix into (k, ceil(n/64)) uint64 words."""
    rows = np.asarray(rows, dtype=bool)
    k, n = rows.shape
    words = max(1, (n + 63) // 64)
    padded = np.zeros((k, words * 64), dtype=bool)
    padded[:, :n] = rows
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(k, words)


def masks_to_words(masks: Iterable[int], n: int) -> np.ndarray:
    masks = list(masks)
    words = max(1, (n + 63) // 64)
    nbytes = words * 8
    buf = b"".join(m.to_bytes(nbytes, "little") for m in masks)
    arr = np.frombuffer(buf, dtype="<u8").reshape(len(masks), words)
    return arr.astype(np.uint64)


def popcount_rows(words: np.ndarray) -> np.ndarray:
    """Per-row popcount of a (k, w) uint64 array."""
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)
