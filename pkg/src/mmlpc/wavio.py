"""Canonical 44-byte-header 16-bit PCM mono WAV writing and reading."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import MalformedInputError

SAMPLE_RATE = 16000


def write_wav(samples, path) -> int:
    """Write samples (clipped to [-1, 1]) as 16-bit mono PCM; returns count."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.floor(x * 32767.0 + 0.5).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(SAMPLE_RATE)
        f.writeframes(pcm.tobytes())
    return pcm.size


def read_wav(path) -> np.ndarray:
    """Read a 16-bit mono PCM WAV back as int16 samples."""
    try:
        with wave.open(str(Path(path)), "rb") as f:
            if f.getnchannels() != 1 or f.getsampwidth() != 2:
                raise MalformedInputError(f"{path}: expected 16-bit mono PCM")
            data = f.readframes(f.getnframes())
    except wave.Error as exc:
        raise MalformedInputError(f"{path}: not a readable WAV file: {exc}") from exc
    return np.frombuffer(data, dtype="<i2")
