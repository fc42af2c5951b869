"""Seeding and innovation samplers shared by simulation code."""

from __future__ import annotations

import math

import numpy as np


def replication_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for replication ``index``, independent of scheduling order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def standardized_student(rng: np.random.Generator, nu: float, size) -> np.ndarray:
    """Student-t(nu) draws rescaled to unit variance."""
    if not nu > 2:
        raise ValueError(f"standardized Student needs nu > 2, got {nu}")
    return rng.standard_t(nu, size) * math.sqrt((nu - 2) / nu)


class StandardizedStudentSampler:
    """Endless stream of unit-variance Student draws."""

    def __init__(self, nu: float, seed=None, chunk: int = 4096):
        if not nu > 2:
            raise ValueError(f"standardized Student needs nu > 2, got {nu}")
        self.nu = nu
        self._rng = as_rng(seed)
        self._chunk = chunk

    def sample(self, size) -> np.ndarray:
        return standardized_student(self._rng, self.nu, size)

    def __iter__(self):
        while True:
            yield from self.sample(self._chunk).tolist()


def standardized_student_sampler(nu: float, seed=None) -> StandardizedStudentSampler:
    return StandardizedStudentSampler(nu, seed)
