"""
VLD Navigation - Noise Stream Module

A per-episode random stream that turns a NoiseProfile into concrete draws.
Each episode owns its own stream, so concurrent episodes never share state and
identical (seed, query sequence) pairs reproduce identical answers.
"""

from typing import Optional, Sequence, TypeVar

import numpy as np

from vldnav.perception.types import NoiseProfile
from vldnav.utils.common import derive_seed

T = TypeVar('T')


class NoiseStream:
    """Seeded draws for one episode."""

    def __init__(self, profile: NoiseProfile, seed: Optional[int] = None):
        self.profile = profile
        self.seed = profile.seed if seed is None else int(seed)
        self._rng = np.random.default_rng(self.seed)
        self._offsets = np.array([k for k, _ in profile.floor_count_error_dist], dtype=int)
        probs = np.array([p for _, p in profile.floor_count_error_dist], dtype=float)
        self._probs = probs / probs.sum()
        self.draws = 0

    @classmethod
    def for_episode(cls, profile: NoiseProfile, task_id: str) -> 'NoiseStream':
        return cls(profile, derive_seed(profile.seed, f"noise:{task_id}"))

    def chance(self, rate: float) -> bool:
        """Bernoulli draw; rates of exactly 0 or 1 consume nothing."""
        if rate <= 0.0:
            return False
        if rate >= 1.0:
            return True
        self.draws += 1
        return bool(self._rng.random() < rate)

    def floor_offset(self) -> int:
        if len(self._offsets) == 1:
            return int(self._offsets[0])
        self.draws += 1
        return int(self._rng.choice(self._offsets, p=self._probs))

    def pick(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("Cannot pick from an empty sequence")
        if len(items) == 1:
            return items[0]
        self.draws += 1
        return items[int(self._rng.integers(len(items)))]
