"""Conditioning-feature pipeline.

Turns 10 ms conditioning frames (18 Bark cepstral coefficients plus two
pitch parameters) into a linear-frequency spectral envelope, an
autocorrelation sequence and finally order-16 linear-prediction
coefficients, either full-band or per subband.  Also provides the 8-bit
mu-law sample codec used for the excitation alphabet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    MalformedInputError,
    NumericError,
    ParameterError,
    ValidationError,
)

NB_BANDS = 18
LPC_ORDER = 16
FRAME_VALUES = 20          # 18 cepstral coefficients + pitch period + pitch correlation
FRAME_BYTES = FRAME_VALUES * 4
DEFAULT_FFT_SIZE = 256
SAMPLE_RATE = 16000

# 19 band edges in Hz, uniformly spaced on the Traunmueller Bark scale
# between 0 and 8 kHz.  All cepstrum <-> envelope conversions share this
# single table.
_BARK_A, _BARK_B = 26.81, 1960.0


def _hz_to_bark(f):
    return _BARK_A * f / (_BARK_B + f) - 0.53


def _bark_to_hz(z):
    return _BARK_B * (z + 0.53) / (_BARK_A - (z + 0.53))


BARK_EDGES_HZ = tuple(
    _bark_to_hz(_hz_to_bark(0.0) + (_hz_to_bark(8000.0) - _hz_to_bark(0.0)) * k / NB_BANDS)
    for k in range(NB_BANDS + 1)
)
BARK_CENTERS_HZ = tuple(
    0.5 * (BARK_EDGES_HZ[i] + BARK_EDGES_HZ[i + 1]) for i in range(NB_BANDS)
)

# DCT-III basis: log-power of band j is sum_k c_k cos(pi k (2j+1) / (2 * 18)).
_IDCT = np.cos(
    np.pi * np.arange(NB_BANDS)[None, :] * (2.0 * np.arange(NB_BANDS)[:, None] + 1.0)
    / (2.0 * NB_BANDS)
)

# Gaussian lag window reaching -40 dB at lag 16, used only when the plain
# recursion turns unstable.
_LAG_WINDOW_SIGMA = LPC_ORDER / math.sqrt(2.0 * math.log(100.0))
_LAG_WINDOW = np.exp(-0.5 * (np.arange(LPC_ORDER + 1) / _LAG_WINDOW_SIGMA) ** 2)

MULAW_MU = 255.0
MULAW_ZERO = 128  # index that decodes to exactly 0.0
_LOG_256 = math.log(256.0)


@dataclass(frozen=True)
class FeatureFrame:
    """One 10 ms conditioning frame."""

    cepstrum: np.ndarray
    pitch_period: float
    pitch_correlation: float

    def __post_init__(self):
        cep = np.asarray(self.cepstrum, dtype=np.float64)
        if cep.shape != (NB_BANDS,):
            raise ValidationError(f"cepstrum must have {NB_BANDS} values, got shape {cep.shape}")
        if not np.all(np.isfinite(cep)):
            raise ValidationError("cepstrum contains non-finite values")
        if not (math.isfinite(self.pitch_period) and self.pitch_period > 0):
            raise ValidationError(f"pitch_period must be > 0, got {self.pitch_period}")
        if not (math.isfinite(self.pitch_correlation) and -1.0 <= self.pitch_correlation <= 1.0):
            raise ValidationError(
                f"pitch_correlation must lie in [-1, 1], got {self.pitch_correlation}"
            )
        object.__setattr__(self, "cepstrum", cep)

    def as_vector(self):
        """Frame as the flat 20-value layout used on disk and by the FRN."""
        return np.concatenate([self.cepstrum, [self.pitch_period, self.pitch_correlation]])


@dataclass(frozen=True)
class PowerSpectrum:
    """Nonnegative power over fft_size/2 + 1 linear frequency bins."""

    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim != 1 or bins.size < 2:
            raise ValidationError("power spectrum must be a 1-D array of at least 2 bins")
        if not np.all(np.isfinite(bins)) or np.any(bins < 0):
            raise ValidationError("power spectrum bins must be finite and nonnegative")
        object.__setattr__(self, "bins", bins)

    @property
    def fft_size(self):
        return 2 * (self.bins.size - 1)


@dataclass(frozen=True)
class LpcCoeffs:
    """Prediction coefficients a_1..a_order with p_t = sum_k a_k s_{t-k}."""

    order: int
    coeffs: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.order <= 0 or coeffs.shape != (self.order,):
            raise ValidationError(f"expected {self.order} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("LPC coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)


def parse_feature_file(data: bytes) -> list[FeatureFrame]:
    """Parse raw little-endian float32 feature frames (20 values per frame)."""
    if len(data) % FRAME_BYTES != 0:
        raise MalformedInputError(
            f"feature data is {len(data)} bytes, not a multiple of {FRAME_BYTES}"
        )
    raw = np.frombuffer(data, dtype="<f4").reshape(-1, FRAME_VALUES).astype(np.float64)
    frames = []
    for i, row in enumerate(raw):
        if not np.all(np.isfinite(row)):
            raise ValidationError(f"frame {i}: non-finite value in feature data")
        try:
            frames.append(FeatureFrame(row[:NB_BANDS], float(row[18]), float(row[19])))
        except ValidationError as exc:
            raise ValidationError(f"frame {i}: {exc}") from exc
    return frames


def serialize_feature_frames(frames) -> bytes:
    """Inverse of :func:`parse_feature_file`; bit-exact for parsed input."""
    if not frames:
        return b""
    rows = np.stack([f.as_vector() for f in frames])
    return rows.astype("<f4").tobytes()


def cepstrum_to_spectrum(frame: FeatureFrame, fft_size: int = DEFAULT_FFT_SIZE) -> PowerSpectrum:
    """Reconstruct the linear-frequency power envelope from Bark cepstrum.

    Inverse DCT over the 18 Bark bands gives per-band log power, which is
    exponentiated and linearly interpolated (in the power domain, flat
    beyond the first/last band centers) onto fft_size/2 + 1 bins.
    """
    _check_fft_size(fft_size)
    log_bands = _IDCT @ frame.cepstrum
    band_power = np.exp(log_bands)
    bin_freqs = np.arange(fft_size // 2 + 1) * (SAMPLE_RATE / 2.0) / (fft_size // 2)
    bins = np.interp(bin_freqs, BARK_CENTERS_HZ, band_power)
    if not np.all(np.isfinite(bins)):
        raise NumericError("spectral envelope overflowed to non-finite values")
    return PowerSpectrum(bins)


def spectrum_to_autocorrelation(spectrum: PowerSpectrum, order: int = LPC_ORDER) -> np.ndarray:
    """Autocorrelation lags 0..order via the inverse real FFT of the power."""
    if not np.any(spectrum.bins > 0):
        raise DegenerateInputError("all-zero power spectrum has no autocorrelation")
    r = np.fft.irfft(spectrum.bins)
    return r[: order + 1].copy()


def levinson_durbin(autocorr, order: int = LPC_ORDER) -> LpcCoeffs:
    """Solve the Toeplitz normal equations by Levinson-Durbin recursion.

    An unstable recursion (reflection coefficient magnitude >= 1) is retried
    once with a lag-windowed, diagonally-loaded autocorrelation.
    """
    r = np.asarray(autocorr, dtype=np.float64)
    if order <= 0:
        raise ParameterError(f"order must be positive, got {order}")
    if r.ndim != 1 or r.size < order + 1:
        raise ParameterError(f"need at least {order + 1} autocorrelation lags, got {r.size}")
    if r[0] <= 0:
        raise DegenerateInputError(f"autocorrelation lag 0 must be positive, got {r[0]}")
    a = _levinson(r, order)
    if a is None:
        regularized = r[: order + 1] * _LAG_WINDOW[: order + 1]
        regularized[0] += 1e-6 * r[0]
        a = _levinson(regularized, order)
        if a is None:
            raise NumericError("Levinson-Durbin recursion unstable even after lag windowing")
    return LpcCoeffs(order, a)


def _levinson(r, order):
    """One recursion pass; returns None on instability."""
    a = np.zeros(order)
    err = r[0]
    for i in range(order):
        acc = r[i + 1]
        if i:
            acc -= np.dot(a[:i], r[i:0:-1])
        if err <= 0:
            return None
        k = acc / err
        if abs(k) >= 1.0:
            return None
        a[:i] = a[:i] - k * a[i - 1 :: -1][:i]
        a[i] = k
        err *= 1.0 - k * k
    return a


def subband_lpc(
    frame: FeatureFrame,
    band: int,
    fft_size: int = DEFAULT_FFT_SIZE,
    bands: int = 4,
) -> LpcCoeffs:
    """Order-16 LPC for one critically-sampled subband.

    The full-band envelope is split into `bands` equal contiguous bin
    ranges (adjacent ranges share their boundary bin, so each range is a
    valid half-spectrum of an fft_size/bands transform) and the selected
    range is treated as the subband's own power spectrum.  A band holding
    less than 1e-12 of the total energy yields all-zero coefficients
    flagged as degenerate instead of an error.
    """
    if bands <= 0 or not 0 <= band < bands:
        raise ParameterError(f"band must lie in [0, {bands}), got {band}")
    _check_fft_size(fft_size)
    if fft_size % (2 * bands) != 0:
        raise ParameterError(f"fft_size {fft_size} is not divisible by 2*bands={2 * bands}")
    spectrum = cepstrum_to_spectrum(frame, fft_size)
    half = fft_size // (2 * bands)
    sub = spectrum.bins[band * half : (band + 1) * half + 1]
    total = float(np.sum(spectrum.bins))
    if total <= 0 or float(np.sum(sub)) < 1e-12 * total:
        return LpcCoeffs(LPC_ORDER, np.zeros(LPC_ORDER), degenerate=True)
    autocorr = spectrum_to_autocorrelation(PowerSpectrum(sub))
    return levinson_durbin(autocorr, LPC_ORDER)


def mulaw_encode(sample: float) -> int:
    """Quantize a sample in [-1, 1] (clamped) to a mu-law index in [0, 255]."""
    x = min(1.0, max(-1.0, float(sample)))
    m = math.copysign(math.log1p(MULAW_MU * abs(x)) / _LOG_256, x)
    return min(255, int(math.floor(128.0 + 128.0 * m + 0.5)))


def mulaw_decode(index: int) -> float:
    """Inverse of :func:`mulaw_encode`; index 128 decodes to exactly 0.0."""
    if not 0 <= index <= 255:
        raise ParameterError(f"mu-law index must lie in [0, 255], got {index}")
    v = (index - MULAW_ZERO) / 128.0
    x = math.copysign((math.exp(_LOG_256 * abs(v)) - 1.0) / MULAW_MU, v)
    return min(1.0, max(-1.0, x))


def _check_fft_size(fft_size):
    if fft_size < 64 or fft_size & (fft_size - 1) != 0:
        raise ParameterError(f"fft_size must be a power of two >= 64, got {fft_size}")
