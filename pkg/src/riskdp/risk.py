"""Entropic (exponential-utility) risk of finite cost distributions.

The risk of a random cost Z at aversion level theta < 0 is
``(-2/theta) * log E[exp((-theta/2) * Z)]``. Large costs are exaggerated by
the exponential, so the value is never below the plain expectation and grows
as theta moves away from zero. Evaluation is always done in shifted log
space so that large cost values cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

# Smallest admissible |theta|; below this the log/theta division is unreliable.
THETA_MIN_MAGNITUDE = 1e-12
PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RiskParam:
    """Strictly negative risk-aversion parameter."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError(f"theta must be finite, got {theta!r}")
        if theta >= 0.0:
            raise ValueError(f"theta must be strictly negative (risk-averse), got {theta!r}")
        if abs(theta) < THETA_MIN_MAGNITUDE:
            raise ValueError(f"|theta| must be at least {THETA_MIN_MAGNITUDE:g}, got {theta!r}")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True, eq=False)
class CostDistribution:
    """Finite list of (value, probability) atoms of a cost law."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        if not atoms:
            raise ValueError("cost distribution must have at least one atom")
        for i, (v, p) in enumerate(atoms):
            if not math.isfinite(v):
                raise ValueError(f"atom {i} has non-finite value {v!r}")
            if not (p >= 0.0 and math.isfinite(p)):
                raise ValueError(f"atom {i} has invalid probability {p!r}")
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"atom probabilities sum to {total!r}, expected 1 within {PROB_SUM_TOL:g}")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.atoms)

    @cached_property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.atoms)

    def shifted(self, c: float) -> "CostDistribution":
        """Distribution of Z + c."""
        return CostDistribution(tuple((v + float(c), p) for v, p in self.atoms))


def log_expected_exp(values: Sequence[float], probs: Sequence[float], theta: float) -> float:
    """``(-2/theta) * log sum_i p_i * exp((-theta/2) * v_i)`` for theta < 0.

    The shift constant is the largest value carried by a positive-probability
    atom, which makes every exponent non-positive. Zero-probability atoms are
    excluded from both the shift and the sum. Accumulation is sequential in
    ascending index order, so results are reproducible bit for bit.
    """
    if not theta < 0.0:
        raise ValueError(f"theta must be strictly negative, got {theta!r}")
    s = -0.5 * theta  # > 0
    shift = -math.inf
    for v, p in zip(values, probs):
        if p > 0.0 and v > shift:
            shift = v
    if shift == -math.inf:
        raise ValueError("distribution has no positive-probability atom")
    acc = 0.0
    for v, p in zip(values, probs):
        if p > 0.0:
            acc += p * math.exp(s * (v - shift))
    return shift + math.log(acc) / s


def entropic_risk(dist: CostDistribution, rp: RiskParam) -> float:
    """Exponential-utility risk of a finite cost law; finite for any finite atoms."""
    return log_expected_exp(dist.values, dist.probs, rp.theta)


def expectation(dist: CostDistribution) -> float:
    """Plain mean of the cost law, accumulated in ascending atom order."""
    total = 0.0
    for v, p in dist.atoms:
        total += p * v
    return total


def mean_variance_approx(dist: CostDistribution, rp: RiskParam) -> float:
    """Small-|theta| surrogate ``E(Z) - (theta/4) * Var(Z)``.

    The variance is the exact two-pass formula over the atoms; nothing is
    sampled or linearized beyond the quadratic term itself.
    """
    mean = expectation(dist)
    var = 0.0
    for v, p in dist.atoms:
        d = v - mean
        var += p * d * d
    return mean - 0.25 * rp.theta * var
