"""Signal detection, frame synchronization, and two-stage CFO recovery.

Detection slides fixed windows over the capture and flags the first whose
summed magnitude crosses a threshold; the threshold is deployment-dependent,
so a helper derives one from the capture's leading (signal-free) window.

Synchronization correlates the capture against the locally generated pair
of 64-sample long training symbols (128 samples) and takes the magnitude
peak; the long training field start follows 32 samples earlier (its cyclic
prefix), and the frame start 160 samples before that.

The coarse frequency estimate uses the lag-16 autocorrelation across the
eight repeated short training symbols; its unambiguous range at 20 Msps is
+/-625 kHz. A fine stage repeats the trick at lag 64 across the duplicated
long training symbols (+/-156.25 kHz unambiguous) after coarse compensation.
Compensation derotates per sample; indices count from the start of the
array, and any constant phase left by a different origin is removed later
by feature normalization.

All indices in this module are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import ComplexSignal
from .waveform import lltf_sync_template


class NotDetectedError(RuntimeError):
    """No detection window crossed the threshold."""


class SyncFailedError(RuntimeError):
    """Correlation peak indistinguishable from the search floor."""


class EstimationFailedError(RuntimeError):
    """Degenerate (zero-energy) autocorrelation window."""


@dataclass(frozen=True)
class DetectionConfig:
    """Energy-detector settings. `metric` selects the summed statistic:
    "magnitude" (as written, sum |y|) or "energy" (sum |y|^2)."""

    window_w: int = 80
    threshold_t: float = 1.0
    metric: str = "magnitude"

    def __post_init__(self):
        if self.window_w < 16:
            raise ValueError("window_w must be at least 16")
        if self.threshold_t <= 0:
            raise ValueError("threshold_t must be positive")
        if self.metric not in ("magnitude", "energy"):
            raise ValueError(f"unknown detection metric {self.metric!r}")


@dataclass(frozen=True)
class SyncResult:
    coarse_start_n0: int
    lltf_start_k0: int
    frame_start_n1: int
    search_len_k: int


@dataclass(frozen=True)
class CfoEstimate:
    coarse_hz: float
    fine_hz: float
    total_hz: float
    symbol_len_d: int = 16
    start_offset_ns: int = 8
    sample_period: float = 5e-8


# Offset of the correlation template (the bare double symbol) from the frame
# start: 160 samples of short training plus the 32-sample cyclic prefix.
_TEMPLATE_OFFSET = 192
_LLTF_FIELD_OFFSET = 160
DEFAULT_SEARCH_LEN = 400
DEFAULT_THRESHOLD_MULTIPLIER = 6.0
# Skip the first half short symbol so detection-edge transients stay out of
# the autocorrelation sums.
CFO_START_OFFSET = 8


def noise_floor_threshold(
    y: ComplexSignal, cfg_w: int = 80, multiplier: float = DEFAULT_THRESHOLD_MULTIPLIER,
    metric: str = "magnitude",
) -> float:
    """Threshold from the first window of the capture, assumed signal-free."""
    head = np.abs(y.samples[:cfg_w])
    stat = float(np.sum(head if metric == "magnitude" else head**2))
    return multiplier * max(stat, np.finfo(float).tiny)


def detect_signal(y: ComplexSignal, cfg: DetectionConfig) -> int:
    """First window whose statistic exceeds the threshold; returns its start
    index (k-1)*W. Raises `NotDetectedError` when nothing crosses."""
    if len(y) < cfg.window_w:
        raise NotDetectedError("signal shorter than one detection window")
    w = cfg.window_w
    n_windows = len(y) // w
    mags = np.abs(y.samples[: n_windows * w]).reshape(n_windows, w)
    stats = mags.sum(axis=1) if cfg.metric == "magnitude" else (mags**2).sum(axis=1)
    hits = np.nonzero(stats > cfg.threshold_t)[0]
    if hits.size == 0:
        raise NotDetectedError(
            f"no window of {w} samples crossed threshold {cfg.threshold_t:.4g}"
        )
    return int(hits[0]) * w


def synchronize(
    y: ComplexSignal,
    n0: int,
    search_len: int = DEFAULT_SEARCH_LEN,
    peak_floor_ratio: float = 3.0,
) -> SyncResult:
    """Locate the frame by correlating against the ideal double long
    training symbol over offsets n0..n0+search_len-1.

    The complex correlation magnitude is the decision statistic. Raises
    `SyncFailedError` when peak/median falls below `peak_floor_ratio`.
    """
    template = lltf_sync_template()
    lt = template.size
    seg = y.samples[n0 : n0 + search_len + lt - 1]
    if seg.size < lt:
        raise SyncFailedError("search segment shorter than the sync template")
    corr = np.abs(np.correlate(seg, template, mode="valid"))
    floor = float(np.median(corr))
    peak_k = int(np.argmax(corr))
    peak = float(corr[peak_k])
    if floor > 0 and peak / floor < peak_floor_ratio:
        raise SyncFailedError(
            f"correlation peak {peak:.3g} below {peak_floor_ratio}x the "
            f"search floor {floor:.3g}"
        )
    k0 = n0 + peak_k - 32  # back up over the long training cyclic prefix
    return SyncResult(
        coarse_start_n0=n0,
        lltf_start_k0=k0,
        frame_start_n1=k0 - _LLTF_FIELD_OFFSET,
        search_len_k=search_len,
    )


def _lag_autocorr(y: np.ndarray, start: int, lag: int, count: int) -> complex:
    if start < 0 or start + count + lag > y.size:
        raise EstimationFailedError("autocorrelation window outside the signal")
    a = y[start : start + count]
    b = y[start + lag : start + lag + count]
    acc = complex(np.sum(np.conj(a) * b))
    if acc == 0:
        raise EstimationFailedError("zero-energy autocorrelation window")
    return acc


def estimate_cfo_coarse(y: ComplexSignal, n1: int, n_s: int = CFO_START_OFFSET) -> float:
    """Lag-16 phase estimate over the eight repeated short training symbols
    starting `n_s` samples into the frame (0 <= n_s <= 16)."""
    d = 16
    if not 0 <= n_s <= d:
        raise ValueError("n_s must lie in [0, 16]")
    acc = _lag_autocorr(y.samples, n1 + n_s, d, 8 * d)
    return float(np.angle(acc) / (2.0 * np.pi * y.sample_period * d))


def estimate_cfo_fine(y: ComplexSignal, n1: int) -> float:
    """Residual estimate from the lag-64 autocorrelation across the two long
    training symbols. Call after coarse compensation; the residual must lie
    within the +/-156.25 kHz unambiguous range."""
    d = 64
    acc = _lag_autocorr(y.samples, n1 + _TEMPLATE_OFFSET, d, d)
    return float(np.angle(acc) / (2.0 * np.pi * y.sample_period * d))


def apply_cfo(y: ComplexSignal, f_hz: float) -> ComplexSignal:
    """Rotate by exp(+j*2*pi*f*n*Ts); test helper and inverse of
    `compensate_cfo`."""
    if f_hz == 0.0:
        return y
    n = np.arange(len(y))
    return y.replace_samples(y.samples * np.exp(2j * np.pi * f_hz * n * y.sample_period))


def compensate_cfo(y: ComplexSignal, f_hat: float) -> ComplexSignal:
    """Derotate by the estimate: y(n) * exp(-j*2*pi*f_hat*n*Ts)."""
    return apply_cfo(y, -f_hat)


def synchronize_and_compensate(
    y: ComplexSignal,
    cfg: DetectionConfig,
    search_len: int = DEFAULT_SEARCH_LEN,
) -> tuple[ComplexSignal, SyncResult, CfoEstimate]:
    """Full acquisition: detect, synchronize, coarse-then-fine CFO, return
    the compensated capture with the sync and CFO results."""
    n0 = detect_signal(y, cfg)
    sync = synchronize(y, n0, search_len)
    coarse = estimate_cfo_coarse(y, sync.frame_start_n1)
    y1 = compensate_cfo(y, coarse)
    fine = estimate_cfo_fine(y1, sync.frame_start_n1)
    y2 = compensate_cfo(y1, fine)
    est = CfoEstimate(coarse_hz=coarse, fine_hz=fine, total_hz=coarse + fine)
    return y2, sync, est
