"""Resampling, median referencing and zero-phase band-pass filtering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..errors import ConfigError, UnsupportedRateError
from .recording import Recording


@dataclass(frozen=True)
class PreprocessConfig:
    target_rate_hz: float = 512.0
    band_low_hz: float = 0.5
    band_high_hz: float = 120.0
    filter_order: int = 4


def median_reference(rec: Recording) -> Recording:
    """Subtract the across-channel median from every channel, sample by sample."""
    data = np.asarray(rec.data, dtype=np.float64)
    return rec.with_data(data - np.median(data, axis=0, keepdims=True))


def butter_sos(fs: float, low: float = 0.5, high: float = 120.0, order: int = 4) -> np.ndarray:
    if not 0 < low < high:
        raise ConfigError(f"band edges must satisfy 0 < low < high, got ({low}, {high})")
    if high >= fs / 2.0:
        raise ConfigError(f"high edge {high} Hz is not below Nyquist {fs / 2.0} Hz")
    return sps.butter(order, [low, high], btype="bandpass", fs=fs, output="sos")


def pad_length(order: int) -> int:
    return 3 * order


def filtfilt_array(data: np.ndarray, fs: float, low: float = 0.5, high: float = 120.0, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass along the last axis (cascaded SOS, forward then backward)."""
    sos = butter_sos(fs, low, high, order)
    data = np.asarray(data, dtype=np.float64)
    padlen = min(pad_length(order), data.shape[-1] - 1)
    return sps.sosfiltfilt(sos, data, axis=-1, padtype="even", padlen=padlen)


def bandpass_filtfilt(rec: Recording, low: float = 0.5, high: float = 120.0, order: int = 4) -> Recording:
    return rec.with_data(filtfilt_array(rec.data, rec.sampling_rate, low, high, order))


def decimate_array(data: np.ndarray, factor: int) -> np.ndarray:
    """Anti-alias low-pass (half-band FIR for factor 2) then keep every ``factor``-th sample."""
    if factor == 1:
        return np.asarray(data, dtype=np.float64)
    return sps.resample_poly(np.asarray(data, dtype=np.float64), 1, factor, axis=-1, padtype="line")


def decimation_factor(fs: float, target: float) -> int:
    ratio = fs / target
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise UnsupportedRateError(f"sampling rate {fs} Hz is not an integer multiple of {target} Hz")
    return factor


def decimate_to(rec: Recording, target: float = 512.0) -> Recording:
    factor = decimation_factor(rec.sampling_rate, target)
    if factor == 1:
        return rec
    out = decimate_array(rec.data, factor)
    n_keep = rec.n_samples // factor
    return rec.with_data(out[:, :n_keep], sampling_rate=rec.sampling_rate / factor)


def preprocess(rec: Recording, config: PreprocessConfig = PreprocessConfig()) -> Recording:
    """Fixed chain: decimate -> median reference -> band-pass."""
    rec = decimate_to(rec, config.target_rate_hz)
    rec = median_reference(rec)
    return bandpass_filtfilt(rec, config.band_low_hz, config.band_high_hz, config.filter_order)
