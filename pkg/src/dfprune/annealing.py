"""Sampling metrics over output-impact intervals and the annealed accept rule.

A candidate edit is scored by the interval vector of output changes it would
add to the running total: the L1 width of those intervals measures scale, the
entropy of their pairwise-similarity densities measures how unevenly the
change spreads over output units. Both are squashed through a logistic and
blended into a single energy in (0, 1); lower is better. Energy-increasing
candidates survive with probability exp(-gap/temperature), where the
temperature is the remaining fraction of the pruning job.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .intervals import Interval, IntervalVector


@dataclass(frozen=True)
class EnergyWeights:
    """Blend weights for the scale/entropy metrics; ``beta`` is pinned to 1 - alpha."""

    alpha: float
    beta: float = None
    phi: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 - self.alpha)
        elif abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ValueError(f"alpha + beta must equal 1, got {self.alpha + self.beta}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must be in [0, 1], got {self.phi}")


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def norm_metric(dv: IntervalVector) -> float:
    """Total L1 width of the interval vector."""
    return float(np.abs(dv.hi - dv.lo).sum())


def similarity(u_i: Interval, u_j: Interval, m_minus: float, m_plus: float) -> float:
    """Similarity of two intervals by relative bound difference, in [0, 1].

    ``m_minus``/``m_plus`` are the global min lower / max upper bound of the
    population the intervals belong to. A degenerate population (all bounds
    equal) makes every pair fully similar.
    """
    if m_plus < m_minus:
        raise ValueError(f"degenerate range: m_plus {m_plus} < m_minus {m_minus}")
    if m_plus == m_minus:
        return 1.0
    return 1.0 - 0.5 * (abs(u_i.lo - u_j.lo) + abs(u_i.hi - u_j.hi)) / (m_plus - m_minus)


def _similarities_to(dv: IntervalVector, i: int) -> np.ndarray:
    m_minus = float(dv.lo.min())
    m_plus = float(dv.hi.max())
    if m_plus == m_minus:
        return np.ones(len(dv))
    return 1.0 - 0.5 * (np.abs(dv.lo - dv.lo[i]) + np.abs(dv.hi - dv.hi[i])) / (m_plus - m_minus)


def density(dv: IntervalVector, i: int, phi: float) -> float:
    """Fraction of the population (self excluded, denominator included) that is
    phi-similar to interval ``i``."""
    n = len(dv)
    if n < 2:
        raise ValueError("density needs at least 2 intervals")
    if not 0 <= i < n:
        raise ValueError(f"index {i} out of range")
    sims = _similarities_to(dv, i)
    count = int(((sims >= phi) & (np.arange(n) != i)).sum())
    return count / n


def entropy_metric(dv: IntervalVector, phi: float) -> float:
    """Shannon entropy (natural log) of the similarity densities; 0 log 0 = 0."""
    if len(dv) < 2:
        raise ValueError("entropy needs at least 2 intervals")
    total = 0.0
    for i in range(len(dv)):
        rho = density(dv, i, phi)
        if rho > 0.0:
            total -= rho * math.log(rho)
    return total


def energy(dv: IntervalVector, weights: EnergyWeights) -> float:
    """Logistic-normalized blend of the scale and entropy metrics, in (0, 1)."""
    return weights.alpha * logistic(norm_metric(dv)) + weights.beta * logistic(
        entropy_metric(dv, weights.phi)
    )


def acceptance_rate(energy_new: float, energy_prev: float, temperature: float) -> float:
    """min(1, exp(-(energy_new - energy_prev) / temperature)); requires temperature > 0."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if energy_new <= energy_prev:
        return 1.0
    return math.exp(-(energy_new - energy_prev) / temperature)


@dataclass
class AnnealState:
    """Mutable state of one annealed pruning run."""

    temperature: float
    energy_prev: float
    cumulative_impact: IntervalVector
    rng: random.Random

    @classmethod
    def fresh(cls, seed: int, output_width: int) -> "AnnealState":
        return cls(
            temperature=1.0,
            energy_prev=0.0,
            cumulative_impact=IntervalVector.zeros(output_width),
            rng=random.Random(seed),
        )


@dataclass(frozen=True)
class Decision:
    accepted: bool
    acceptance_rate: float
    random_draw: Optional[float]


def decide(state: AnnealState, energy_new: float) -> Decision:
    """Accept or reject a candidate, mutating ``state`` accordingly.

    The first candidate after a reset (energy_prev == 0) and any candidate
    that does not increase the energy are accepted without touching the
    generator, so traces replay exactly.
    """
    if state.energy_prev == 0.0 or energy_new <= state.energy_prev:
        state.energy_prev = energy_new
        return Decision(True, 1.0, None)
    rate = acceptance_rate(energy_new, state.energy_prev, state.temperature)
    draw = state.rng.random()
    if draw < rate:
        state.energy_prev = energy_new
        return Decision(True, rate, draw)
    return Decision(False, rate, draw)
