"""Spatial white noise and its Galerkin projections.

Under the enstrophy measure the real coefficients ``<ω, e_k>`` are i.i.d.
standard normals, so sampling ``Π_N ω`` is sampling ``|Λ_N|`` normals in
mode order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import RealSpectralField
from .lattice import mode_set

NORMAL_METHOD = "numpy Generator(PCG64).standard_normal (ziggurat)"
SEEDING = "numpy SeedSequence(master_seed, spawn_key=(stream_index,))"


@dataclass(frozen=True)
class SeededSampler:
    """Deterministic random stream identified by ``(master_seed, stream_index)``.

    Streams with different indices are statistically independent; the same
    pair always reproduces the same draws.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if int(self.master_seed) < 0 or int(self.stream_index) < 0:
            raise ValueError("seed and stream index must be non-negative integers")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(seq))

    def spawn(self, stream_index: int) -> "SeededSampler":
        return SeededSampler(self.master_seed, stream_index)

    def metadata(self) -> dict:
        return {"master_seed": int(self.master_seed), "stream_index": int(self.stream_index),
                "seeding": SEEDING, "normal_method": NORMAL_METHOD}


def sample_white_noise(N: int, sampler: SeededSampler) -> RealSpectralField:
    """One sample of ``Π_N ω`` with ``ω`` distributed as white noise."""
    n = len(mode_set(N))
    return RealSpectralField(N, sampler.generator().standard_normal(n))


def sample_white_noise_batch(N: int, sampler: SeededSampler, size: int) -> np.ndarray:
    """``size`` independent samples from one stream, as rows of a ``(size, |Λ_N|)`` array."""
    n = len(mode_set(N))
    return sampler.generator().standard_normal((size, n))


def sobolev_norm_sq(field_: RealSpectralField, s: float) -> float:
    """``||ω||_{H^s}^2 = sum_k (1 + |k|^2)^s <ω, e_k>^2``."""
    return float(np.sum(sobolev_weights(field_.cutoff, s) * field_.coeffs ** 2))


def sobolev_weights(N: int, s: float) -> np.ndarray:
    """``(1 + |k|^2)^s`` over ``Λ_N`` in mode order."""
    return (1.0 + mode_set(N).norms_sq) ** float(s)


def sobolev_norm(field_: RealSpectralField, s: float) -> float:
    return float(np.sqrt(sobolev_norm_sq(field_, s)))
