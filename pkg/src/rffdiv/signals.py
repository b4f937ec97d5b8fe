"""Baseband sample container shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 20e6  # samples/second; the whole library operates at 20 Msps


@dataclass(frozen=True)
class ComplexSignal:
    """Time-domain complex baseband samples plus sample-rate metadata.

    Treated as immutable: processing stages return new instances instead of
    mutating `samples` in place.
    """

    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", arr)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate

    def replace_samples(self, samples: np.ndarray) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_rate)
