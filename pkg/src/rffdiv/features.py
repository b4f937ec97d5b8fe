"""Frequency-domain division features.

All three extractors share one recipe: take per-field 64-point spectra from
a synchronized, CFO-compensated frame (averaging a field's repeated symbol
windows first), divide two spectra tone by tone on a fixed occupied-tone
set, divide out the known transmitted sequences, then keep magnitudes and
normalize to unit energy. What differs is the pair of spectra:

* reference-device division: the unknown device's field over a same-receiver
  capture of a reference device (same field). Receiver response and any flat
  channel gain cancel; the result is the unknown/reference transmit-response
  ratio. 12 tones from the short training field, 52 from the long one.
* HT-over-long division: a frame's HT long training field over its own long
  training field, on the 52 shared tones. The frame's channel response and
  the receiver response (common across the two fields) cancel, leaving the
  device's HT/long transmit-response ratio.
* short-over-long division (baseline): a frame's short training field over
  its long training field on the 12 shared tones.

Ratios are exact cancellations only for convolutional impairments; additive
DC, IQ image leakage, and PA curvature leave small residues.

The unit-energy normalization removes the constant factors the divisions
leave behind (flat gain ratios, sequence scale), and magnitudes discard the
phase that residual CFO and timing offsets corrupt.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .signals import ComplexSignal
from .waveform import (
    FIELD_WINDOWS,
    WINDOWS,
    Field,
    extract_window,
    ideal_symbol_spectrum,
    occupied_tones,
    tone_to_bin,
)


class Extractor(enum.Enum):
    RD_STF = "RD_STF"
    RD_LTF = "RD_LTF"
    HL = "HL"
    DV = "DV"


EXTRACTOR_DIM = {
    Extractor.RD_STF: 12,
    Extractor.RD_LTF: 52,
    Extractor.HL: 52,
    Extractor.DV: 12,
}

DENOMINATOR_EPS = 1e-6


class DegenerateModelError(ValueError):
    """A reference-capture bin is too small to divide by."""


class DegenerateDenominatorError(ValueError):
    """A same-frame denominator bin is too small to divide by."""


@dataclass(frozen=True)
class FieldSpectrum:
    """64-point spectrum of one preamble field, taken from averaged
    repeated windows of a synchronized, CFO-compensated frame."""

    field: Field
    bins: np.ndarray

    def occupied_bins(self) -> np.ndarray:
        return self.bins[tone_to_bin(occupied_tones(self.field))]


@dataclass(frozen=True)
class FeatureVector:
    """Normalized per-tone fingerprint magnitudes with provenance."""

    extractor: Extractor
    values: np.ndarray
    tone_indices: np.ndarray
    device_hint: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tone_indices", np.asarray(self.tone_indices, dtype=np.int64))
        if v.shape != self.tone_indices.shape:
            raise ValueError("values and tone_indices must align")
        if v.size != EXTRACTOR_DIM[self.extractor]:
            raise ValueError(
                f"{self.extractor.value} features have dimension "
                f"{EXTRACTOR_DIM[self.extractor]}, got {v.size}"
            )
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("feature values must be finite and nonnegative")
        energy = float(np.sum(v**2))
        if abs(energy - 1.0) > 1e-9:
            raise ValueError(f"feature vector must have unit energy, got {energy}")


def field_spectrum(signal: ComplexSignal, n1: int, field: Field) -> FieldSpectrum:
    """Average the field's repeated 64-sample windows and FFT.

    Propagates window bounds errors (e.g. asking for the HT field of a
    non-HT frame that ends at 320 samples).
    """
    windows = [extract_window(signal, n1, WINDOWS[name]) for name in FIELD_WINDOWS[field]]
    mean_window = np.mean(windows, axis=0)
    return FieldSpectrum(field=field, bins=np.fft.fft(mean_window))


def _guard_denominator(bins_occ: np.ndarray, exc: type, what: str) -> None:
    rms = float(np.sqrt(np.mean(np.abs(bins_occ) ** 2)))
    bad = np.abs(bins_occ) < DENOMINATOR_EPS * rms
    if rms == 0.0 or np.any(bad):
        raise exc(f"{what} has near-zero occupied bins (rms {rms:.3g})")


def _normalize(mag: np.ndarray, extractor: Extractor, tones: np.ndarray,
               device_hint: str | None) -> FeatureVector:
    norm = float(np.linalg.norm(mag))
    if norm == 0.0:
        raise DegenerateDenominatorError("all-zero feature magnitudes")
    return FeatureVector(extractor, mag / norm, tones, device_hint)


def extract_rd(unknown: FieldSpectrum, model: FieldSpectrum,
               device_hint: str | None = None) -> FeatureVector:
    """Reference-device division on the field's occupied tones.

    `model` must be a same-receiver capture of the reference device on the
    same field. Raises `DegenerateModelError` when a model bin falls below
    1e-6 of the model's occupied-tone RMS.
    """
    if unknown.field is not model.field:
        raise ValueError(
            f"field mismatch: unknown={unknown.field.value} model={model.field.value}"
        )
    if unknown.field is Field.HTLTF:
        raise ValueError("reference division uses the legacy fields only")
    tones = occupied_tones(unknown.field)
    bins = tone_to_bin(tones)
    model_occ = model.bins[bins]
    _guard_denominator(model_occ, DegenerateModelError, "model spectrum")
    ratio = unknown.bins[bins] / model_occ
    extractor = Extractor.RD_STF if unknown.field is Field.LSTF else Extractor.RD_LTF
    return _normalize(np.abs(ratio), extractor, tones, device_hint)


def extract_hl(lltf: FieldSpectrum, htltf: FieldSpectrum,
               device_hint: str | None = None) -> FeatureVector:
    """HT-over-long division on the 52 shared tones, with the transmitted
    sequence ratio divided out. Both spectra must come from the same frame
    so they share one channel realization."""
    if lltf.field is not Field.LLTF or htltf.field is not Field.HTLTF:
        raise ValueError("extract_hl takes (LLTF, HTLTF) spectra in that order")
    tones = occupied_tones(Field.LLTF)  # shared subset of the HT tones
    bins = tone_to_bin(tones)
    den = lltf.bins[bins]
    _guard_denominator(den, DegenerateDenominatorError, "long-training spectrum")
    x_ratio = ideal_symbol_spectrum(Field.HTLTF)[bins] / ideal_symbol_spectrum(Field.LLTF)[bins]
    ratio = (htltf.bins[bins] / den) / x_ratio
    return _normalize(np.abs(ratio), Extractor.HL, tones, device_hint)


def extract_dv(lstf: FieldSpectrum, lltf: FieldSpectrum,
               device_hint: str | None = None,
               compensate_sequences: bool = True) -> FeatureVector:
    """Short-over-long baseline division on the 12 shared tones.

    `compensate_sequences` divides out the transmitted sequence ratio
    (default); disable it to ratio the raw spectra instead.
    """
    if lstf.field is not Field.LSTF or lltf.field is not Field.LLTF:
        raise ValueError("extract_dv takes (LSTF, LLTF) spectra in that order")
    tones = occupied_tones(Field.LSTF)  # shared subset of the long-training tones
    bins = tone_to_bin(tones)
    den = lltf.bins[bins]
    _guard_denominator(den, DegenerateDenominatorError, "long-training spectrum")
    ratio = lstf.bins[bins] / den
    if compensate_sequences:
        x_ratio = ideal_symbol_spectrum(Field.LSTF)[bins] / ideal_symbol_spectrum(Field.LLTF)[bins]
        ratio = ratio / x_ratio
    return _normalize(np.abs(ratio), Extractor.DV, tones, device_hint)


def cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    """Plain cosine of two unit-energy feature vectors."""
    return float(np.dot(a.values, b.values))


def centered_cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    """Cosine after removing each vector's tone mean.

    The plain cosine of nonnegative normalized features is dominated by
    their shared flat component; centering compares the informative
    deviation, which is what separates a structured fingerprint from a
    noise-dominated flat one.
    """
    va = a.values - a.values.mean()
    vb = b.values - b.values.mean()
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))
