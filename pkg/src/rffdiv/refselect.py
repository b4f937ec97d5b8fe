"""Reference-device selection via the low-frequency energy ratio.

A candidate's normalized CSI amplitude is decomposed with the Daubechies
order-4 (db4) wavelet into four layers; the low-frequency component is the
part reproducible from the fourth-layer approximation coefficients, and the
score is the energy ratio of that component to the whole. Smooth amplitude
responses score near 1, rippled ones lower, and the candidate with the
highest score makes the best division reference.

Boundary handling uses symmetric (half-point) extension, which keeps edge
artifacts small on short inputs. One subtlety: the textbook
"zero the detail coefficients and run the synthesis bank" reconstruction is
an oblique projection under any finite-length extension; its operator norm
on length-52 inputs measures 1.0266, so it can *raise* energy (a smooth
raised-cosine input gains 7e-5), which would push the score past 1. The
low-frequency component is therefore computed as the orthogonal projection
onto the span of the fourth-layer synthesis (the subspace that
approximation-only reconstructions generate). That keeps the score in
(0, 1] for every input, makes the reconstruction exactly idempotent, and
differs from the filter-bank reconstruction by under a percent on interior-
dominated inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# db4 scaling coefficients from the standard spectral factorization,
# rounded once to float64. Validated on import against the filter-bank
# identities rather than trusted blindly.
DB4_SCALING = np.array([
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
])

LEVELS = 4
EXTENSION = "symmetric"


class LengthError(ValueError):
    """Input too short for the fixed four-level decomposition."""


class DegenerateInputError(ValueError):
    """Zero-energy input has no meaningful score."""


class EmptyCandidatesError(ValueError):
    """Reference selection needs at least one candidate."""


@dataclass(frozen=True)
class WaveletConfig:
    family: str = "db4"
    levels: int = LEVELS
    extension: str = EXTENSION

    def __post_init__(self):
        if self.family != "db4" or self.levels != LEVELS:
            raise ValueError("the decomposition is fixed at four db4 layers")
        if self.extension != EXTENSION:
            raise ValueError(f"unsupported extension mode {self.extension!r}")


@dataclass(frozen=True)
class RefScore:
    device_id: str
    eta_lf: float
    energy_before: float
    energy_after: float


def filter_bank(scaling: np.ndarray = DB4_SCALING):
    """(dec_lo, dec_hi, rec_lo, rec_hi) for an orthogonal scaling filter."""
    g = np.asarray(scaling, dtype=np.float64)
    k = np.arange(g.size)
    dec_lo = g[::-1]
    dec_hi = ((-1.0) ** (k + 1)) * g
    rec_lo = g
    rec_hi = dec_hi[::-1]
    return dec_lo, dec_hi, rec_lo, rec_hi


def _validate_filters() -> None:
    g = DB4_SCALING
    if abs(g.sum() - np.sqrt(2.0)) > 1e-12:
        raise AssertionError("db4 coefficients fail sum = sqrt(2)")
    if abs(np.dot(g, g) - 1.0) > 1e-12:
        raise AssertionError("db4 coefficients fail unit energy")
    for k in (1, 2, 3):
        if abs(np.dot(g[: -2 * k], g[2 * k :])) > 1e-12:
            raise AssertionError(f"db4 coefficients fail double-shift orthogonality k={k}")


_validate_filters()


def _extend_symmetric(x: np.ndarray, pad: int) -> np.ndarray:
    left = x[:pad][::-1]
    right = x[-pad:][::-1]
    return np.concatenate([left, x, right])


def dwt_level(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One analysis level: symmetric extension by L-1, valid convolution,
    downsample on the odd phase. Output length floor((n + L - 1)/2)."""
    dec_lo, dec_hi, _, _ = filter_bank()
    ext = _extend_symmetric(np.asarray(x, dtype=np.float64), dec_lo.size - 1)
    ca = np.convolve(ext, dec_lo, mode="valid")[1::2]
    cd = np.convolve(ext, dec_hi, mode="valid")[1::2]
    return ca, cd


def idwt_level(ca: np.ndarray, cd: np.ndarray, out_len: int) -> np.ndarray:
    """One synthesis level: upsample, filter, sum, trim L-2 from the left.
    Exactly inverts `dwt_level` for matching lengths."""
    _, _, rec_lo, rec_hi = filter_bank()
    up_a = np.zeros(2 * ca.size)
    up_a[::2] = ca
    up_d = np.zeros(2 * cd.size)
    up_d[::2] = cd
    rec = np.convolve(up_a, rec_lo) + np.convolve(up_d, rec_hi)
    return rec[rec_lo.size - 2 : rec_lo.size - 2 + out_len]


def wavedec(x: np.ndarray, levels: int = LEVELS):
    """Multilevel analysis: (approximation, [detail_deepest..detail_first],
    [input length per level])."""
    a = np.asarray(x, dtype=np.float64)
    details, lengths = [], []
    for _ in range(levels):
        lengths.append(a.size)
        a, d = dwt_level(a)
        details.append(d)
    return a, details[::-1], lengths[::-1]


def waverec(approx: np.ndarray, details, lengths) -> np.ndarray:
    """Inverse of `wavedec`: perfect reconstruction to rounding error."""
    a = approx
    for d, n in zip(details, lengths):
        a = idwt_level(a, d, n)
    return a


@lru_cache(maxsize=8)
def _lowpass_projector(n: int, levels: int) -> np.ndarray:
    """Orthonormal basis Q of the approximation subspace: the span of
    approximation-only synthesis outputs on length-n signals."""
    lengths = []
    m = n
    for _ in range(levels):
        lengths.append(m)
        m = (m + DB4_SCALING.size - 1) // 2
    cols = []
    for i in range(m):
        ca = np.zeros(m)
        ca[i] = 1.0
        a = ca
        for out_len in reversed(lengths):
            a = idwt_level(a, np.zeros((out_len + DB4_SCALING.size - 1) // 2), out_len)
        cols.append(a)
    basis = np.stack(cols, axis=1)
    q, _ = np.linalg.qr(basis)
    return q


def lowpass_reconstruct(csi_amplitude: np.ndarray, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Low-frequency component of the input: its orthogonal projection onto
    the fourth-layer approximation subspace. Same length as the input."""
    x = np.asarray(csi_amplitude, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D amplitude vector")
    if x.size < 2**cfg.levels:
        raise LengthError(
            f"need at least {2**cfg.levels} samples for {cfg.levels} levels, got {x.size}"
        )
    q = _lowpass_projector(x.size, cfg.levels)
    return q @ (q.T @ x)


def eta_lf(csi_amplitude: np.ndarray, device_id: str = "",
           cfg: WaveletConfig = WaveletConfig()) -> RefScore:
    """Low-frequency energy ratio of the unit-energy-normalized amplitude."""
    x = np.asarray(csi_amplitude, dtype=np.float64)
    energy = float(np.sum(x**2))
    if energy == 0.0 or not np.all(np.isfinite(x)):
        raise DegenerateInputError("zero-energy or non-finite input")
    xn = x / np.sqrt(energy)
    low = lowpass_reconstruct(xn, cfg)
    e_after = float(np.sum(low**2))
    return RefScore(device_id=device_id, eta_lf=e_after, energy_before=1.0, energy_after=e_after)


def select_reference(candidates) -> str:
    """Argmax of the score over (device_id, csi_amplitude) pairs; ties keep
    the first occurrence."""
    best_id, best = None, -1.0
    n = 0
    for device_id, csi in candidates:
        n += 1
        score = eta_lf(csi, device_id).eta_lf
        if score > best:
            best_id, best = device_id, score
    if n == 0:
        raise EmptyCandidatesError("no candidate reference devices given")
    return best_id
