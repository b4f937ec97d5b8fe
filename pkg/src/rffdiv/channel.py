"""Flat and frequency-selective channels plus calibrated AWGN.

A flat channel multiplies by a single complex scalar; a selective channel
convolves with a short tap-delay line (integer sample delays). Noise is
added to meet a target SNR measured over the active samples of the signal
reaching the receiver, so zero padding around a frame does not dilute the
calibration. The channel is static within one frame; mobile scenarios are
approximated upstream by resampling the realization per frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import ComplexSignal


class ChannelKind(enum.Enum):
    FLAT = "Flat"
    SELECTIVE = "Selective"


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the channel: scalar gain (flat) or unit-energy taps at
    strictly increasing integer delays starting from 0 (selective), plus a
    noise level. `snr_db` may be `math.inf` for the noiseless case."""

    kind: ChannelKind
    alpha: complex = 1.0 + 0j
    taps: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j]))
    delays: np.ndarray = field(default_factory=lambda: np.array([0]))
    snr_db: float = math.inf
    seed: int = 0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        delays = np.asarray(self.delays, dtype=np.int64)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "delays", delays)
        if self.kind is ChannelKind.FLAT:
            if abs(self.alpha) == 0:
                raise ValueError("flat channel gain must be nonzero")
        else:
            if taps.size == 0 or taps.size != delays.size:
                raise ValueError("selective channel needs matching taps and delays")
            if delays[0] != 0 or np.any(np.diff(delays) <= 0):
                raise ValueError("delays must be strictly increasing from 0")
            energy = float(np.sum(np.abs(taps) ** 2))
            if not math.isclose(energy, 1.0, rel_tol=1e-9):
                raise ValueError(f"tap energies must be normalized to 1, got {energy}")

    def impulse_response(self) -> np.ndarray:
        """Dense impulse response (flat: the single scalar)."""
        if self.kind is ChannelKind.FLAT:
            return np.array([self.alpha])
        h = np.zeros(int(self.delays[-1]) + 1, dtype=np.complex128)
        h[self.delays] = self.taps
        return h


def apply_channel(
    ch: ChannelRealization,
    x: ComplexSignal,
    noise_rng: np.random.Generator | None = None,
) -> ComplexSignal:
    """Propagate through the channel, then add AWGN at the realization's SNR.

    Signal power for the SNR is measured over the active (nonzero) samples
    of the propagated signal. Noise covers the whole record. A separate
    `noise_rng` lets a static link reuse one realization across frames with
    fresh noise each time; by default noise derives from `ch.seed`.
    """
    if len(x) == 0:
        raise ValueError("input signal is empty")
    h = ch.impulse_response()
    if h.size == 1:
        y = h[0] * x.samples
    else:
        y = np.convolve(x.samples, h)[: len(x)]
    if math.isinf(ch.snr_db):
        return x.replace_samples(y)
    mag = np.abs(y)
    active = mag > mag.max() * 1e-12
    p_sig = float(np.mean(mag[active] ** 2)) if active.any() else 0.0
    if p_sig == 0.0:
        return x.replace_samples(y)
    p_noise = p_sig / 10.0 ** (ch.snr_db / 10.0)
    rng = noise_rng if noise_rng is not None else np.random.default_rng(ch.seed)
    noise = np.sqrt(p_noise / 2.0) * (
        rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size)
    )
    return x.replace_samples(y + noise)


def exponential_power_profile(n_taps: int, decay: float) -> np.ndarray:
    """Tap powers proportional to exp(-delay/decay), normalized to sum 1.
    Earlier taps carry more energy."""
    p = np.exp(-np.arange(n_taps) / decay)
    return p / p.sum()


def sample_channel(
    kind: ChannelKind,
    snr_db: float,
    seed: int,
    n_taps: int = 4,
    decay: float = 1.0,
    rice_k_db: float | None = None,
) -> ChannelRealization:
    """Draw a realization: Rayleigh-magnitude uniform-phase scalar (flat) or
    complex Gaussian taps with exponentially decaying expected powers at
    delays 0..n_taps-1, normalized to unit total energy (selective).

    `rice_k_db` adds a random-phase specular component on the first tap with
    the given specular-to-diffuse power ratio (line-of-sight links); None
    keeps all taps diffuse. With a specular tap the per-tone response keeps
    a gain floor, so deep fades are rare; all-diffuse taps fade per tone
    like Rayleigh regardless of the decay profile.
    """
    rng = np.random.default_rng(seed)
    if kind is ChannelKind.FLAT:
        alpha = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        return ChannelRealization(ChannelKind.FLAT, alpha=alpha, snr_db=snr_db, seed=seed)
    powers = exponential_power_profile(n_taps, decay)
    taps = np.sqrt(powers / 2.0) * (
        rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
    )
    if rice_k_db is not None:
        k_lin = 10.0 ** (rice_k_db / 10.0)
        diffuse = np.sqrt(1.0 / (k_lin + 1.0))
        specular = np.sqrt(k_lin / (k_lin + 1.0)) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        taps = diffuse * taps
        taps[0] = taps[0] + specular
    taps = taps / np.sqrt(np.sum(np.abs(taps) ** 2))
    return ChannelRealization(
        ChannelKind.SELECTIVE,
        taps=taps,
        delays=np.arange(n_taps),
        snr_db=snr_db,
        seed=seed,
    )
