"""Exact and Monte Carlo evaluation of a fixed Markov policy.

Exact evaluation has two independent routes. The recursive route computes
conditional certainty-equivalent tables backward from the terminal stage; the
enumerative route expands the full trajectory tree, builds the finite cost
law, and applies the risk functional to it. On instances small enough to
enumerate, both routes agree to high precision, which the test suite uses as
a correctness oracle. Simulation draws disturbances by inverse CDF over
ascending disturbance index from a seeded PCG64 generator, so runs are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    FiniteModel,
    MarkovPolicy,
    ModelValidationError,
    Trajectory,
    check_policy,
    check_state,
    ensure_valid,
    pushforward,
)
from .risk import CostDistribution, RiskParam
from .solver import _stage_q_value

DEFAULT_LEAF_CAP = 10**6


class CapExceededError(RuntimeError):
    """An exact enumeration or brute-force sweep would exceed its configured cap."""


@dataclass(frozen=True, eq=False)
class TrajectoryDistribution:
    """Finite support of the trajectory law under a fixed policy and start state."""

    entries: tuple[tuple[Trajectory, float], ...]

    def __post_init__(self):
        entries = tuple((traj, float(p)) for traj, p in self.entries)
        if not entries:
            raise ModelValidationError("trajectory distribution must have at least one entry")
        for traj, p in entries:
            if not (p >= 0.0 and math.isfinite(p)):
                raise ModelValidationError(f"trajectory probability {p!r} invalid")
        total = math.fsum(p for _, p in entries)
        if abs(total - 1.0) > 1e-10:
            raise ModelValidationError(f"trajectory probabilities sum to {total!r}, expected 1 within 1e-10")
        paths = [traj.path for traj, _ in entries]
        if len(set(paths)) != len(paths):
            raise ModelValidationError("trajectory distribution contains duplicate trajectories")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True, eq=False)
class WTables:
    """Conditional expectation tables W[t][x] = E[exp((-theta/2) Z_t) | X_t = x].

    Stored in log space; ``w`` exponentiates on access and can overflow for
    extreme theta-times-cost scales, while ``log_w`` and the certainty
    equivalent remain finite whenever the costs are. Entries exist for every
    state, including states unreachable at stage t.
    """

    log_w: np.ndarray  # float, shape (N+1, S)
    theta: float

    def __post_init__(self):
        log_w = np.asarray(self.log_w, dtype=float)
        log_w.setflags(write=False)
        object.__setattr__(self, "log_w", log_w)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def w(self) -> np.ndarray:
        return np.exp(self.log_w)

    def certainty_equivalent(self) -> np.ndarray:
        """Table (-2/theta) * log W[t][x], the deterministic cost equivalent to Z_t."""
        return (-2.0 / self.theta) * self.log_w


def _policy_step_rows(m: FiniteModel, pi: MarkovPolicy) -> list[list[list[tuple[int, float]]]]:
    """Per (t, x): positive-probability successors [(x', prob)] under the policy."""
    q = pushforward(m).q
    rows: list[list[list[tuple[int, float]]]] = []
    for t in range(m.horizon):
        stage_rows = []
        for x in range(m.n_states):
            row = q[t, x, pi.action(t, x)]
            stage_rows.append([(j, float(row[j])) for j in range(m.n_states) if row[j] > 0.0])
        rows.append(stage_rows)
    return rows


def _enumerate_paths(
    m: FiniteModel, pi: MarkovPolicy, x0: int, start_stage: int, max_leaves: int
) -> list[tuple[tuple[int, ...], float]]:
    """All positive-probability state paths (x_t, ..., x_N) with their probabilities.

    Branches over distinct successor states, so duplicate disturbance branches
    that land in the same state are already merged, stage by stage, in
    ascending disturbance order. Paths come out in lexicographic state order.
    """
    n = m.horizon
    if m.n_disturbances ** (n - start_stage) > max_leaves:
        raise CapExceededError(
            "instance too large for exact enumeration: "
            f"|D|^{n - start_stage} = {m.n_disturbances ** (n - start_stage)} exceeds cap {max_leaves}"
        )
    rows = _policy_step_rows(m, pi)
    paths: list[tuple[tuple[int, ...], float]] = []

    def expand(t: int, x: int, prob: float, prefix: tuple[int, ...]) -> None:
        prefix = prefix + (x,)
        if t == n:
            paths.append((prefix, prob))
            return
        for x2, p2 in rows[t][x]:
            expand(t + 1, x2, prob * p2, prefix)

    expand(start_stage, x0, 1.0, ())
    return paths


def trajectory_distribution(
    m: FiniteModel, pi: MarkovPolicy, x0: int, *, max_leaves: int = DEFAULT_LEAF_CAP
) -> TrajectoryDistribution:
    """Exact law of the full trajectory under the policy, by tree enumeration."""
    ensure_valid(m)
    check_policy(m, pi)
    x0 = check_state(m, x0)
    paths = _enumerate_paths(m, pi, x0, 0, max_leaves)
    entries = []
    for states, prob in paths:
        path: list[int] = []
        for t, x in enumerate(states[:-1]):
            path.append(x)
            path.append(pi.action(t, x))
        path.append(states[-1])
        entries.append((Trajectory(tuple(path)), prob))
    return TrajectoryDistribution(tuple(entries))


# Cost values closer than this are merged into one atom.
COST_MERGE_TOL = 1e-12


def cost_law(
    m: FiniteModel,
    pi: MarkovPolicy,
    x0: int,
    *,
    start_stage: int = 0,
    max_leaves: int = DEFAULT_LEAF_CAP,
) -> CostDistribution:
    """Exact law of the cost-to-go from (start_stage, x0) under the policy.

    Path costs are accumulated backward from the terminal cost, matching
    :func:`riskdp.model.cost_to_go` exactly; atoms whose values coincide
    within ``COST_MERGE_TOL`` are merged.
    """
    ensure_valid(m)
    check_policy(m, pi)
    x0 = check_state(m, x0)
    if not 0 <= start_stage <= m.horizon:
        raise ModelValidationError(f"stage {start_stage} out of range for horizon {m.horizon}")
    c = m.stage_cost
    paths = _enumerate_paths(m, pi, x0, start_stage, max_leaves)
    weighted: list[tuple[float, float]] = []
    for states, prob in paths:
        total = float(m.terminal_cost[states[-1]])
        for i in range(m.horizon - 1, start_stage - 1, -1):
            x = states[i - start_stage]
            total = float(c[i, x, pi.action(i, x)]) + total
        weighted.append((total, prob))
    weighted.sort(key=lambda vp: vp[0])
    atoms: list[tuple[float, list[float]]] = []
    for value, prob in weighted:
        if atoms and value - atoms[-1][0] <= COST_MERGE_TOL:
            atoms[-1][1].append(prob)
        else:
            atoms.append((value, [prob]))
    return CostDistribution(tuple((v, math.fsum(ps)) for v, ps in atoms))


def _certainty_tables(m: FiniteModel, pi: MarkovPolicy, theta: float) -> np.ndarray:
    """Certainty-equivalent cost-to-go ce[t][x]; same arithmetic as the solver."""
    n, n_s = m.horizon, m.n_states
    f = m.dynamics.tolist()
    p = m.kernel.tolist()
    c = m.stage_cost.tolist()
    mu = pi.mu.tolist()
    ce = np.empty((n + 1, n_s))
    ce[n] = m.terminal_cost
    ce_next: list[float] = m.terminal_cost.tolist()
    for t in range(n - 1, -1, -1):
        ce_t = [0.0] * n_s
        for x in range(n_s):
            u = mu[t][x]
            ce_t[x] = _stage_q_value(c[t][x][u], f[t][x][u], p[t][x][u], ce_next, theta)
        ce[t] = ce_t
        ce_next = ce_t
    return ce


def w_tables(m: FiniteModel, pi: MarkovPolicy, rp: RiskParam) -> WTables:
    """Conditional tables of E[exp((-theta/2) Z_t) | X_t = x] under the policy.

    Computed via the backward certainty-equivalent recursion in log space;
    every entry is strictly positive and, for finite cost tables, finite.
    """
    ensure_valid(m)
    check_policy(m, pi)
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    ce = _certainty_tables(m, pi, rp.theta)
    return WTables(log_w=(-0.5 * rp.theta) * ce, theta=rp.theta)


def evaluate_policy(m: FiniteModel, pi: MarkovPolicy, rp: RiskParam, x0: int) -> float:
    """Entropic risk of the policy's total cost from ``x0``."""
    ensure_valid(m)
    check_policy(m, pi)
    x0 = check_state(m, x0)
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    ce = _certainty_tables(m, pi, rp.theta)
    return float(ce[0, x0])


def reachable_sets(m: FiniteModel, pi: MarkovPolicy, x0: int) -> tuple[frozenset[int], ...]:
    """States reachable with positive probability at each stage 0..N."""
    ensure_valid(m)
    check_policy(m, pi)
    x0 = check_state(m, x0)
    rows = _policy_step_rows(m, pi)
    reach: list[frozenset[int]] = [frozenset({x0})]
    for t in range(m.horizon):
        nxt: set[int] = set()
        for x in reach[t]:
            nxt.update(j for j, _ in rows[t][x])
        reach.append(frozenset(nxt))
    return tuple(reach)


def _simulate_arrays(
    m: FiniteModel, pi: MarkovPolicy, x0: int, seed: int, trials: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized rollout; returns (states, actions, costs) arrays.

    One uniform draw per (trial, stage), consumed stage-major within each
    trial. The disturbance index is the smallest w whose cumulative kernel
    probability exceeds the draw.
    """
    ensure_valid(m)
    check_policy(m, pi)
    x0 = check_state(m, x0)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n, n_d = m.horizon, m.n_disturbances
    gen = np.random.Generator(np.random.PCG64(seed))
    uniforms = gen.random((trials, n))

    states = np.empty((trials, n + 1), dtype=np.int64)
    actions = np.empty((trials, n), dtype=np.int64)
    costs = np.zeros(trials)
    states[:, 0] = x0
    x = states[:, 0]
    for t in range(n):
        u = pi.mu[t, x]
        cdf = np.cumsum(m.kernel[t], axis=-1)  # (S, A, D)
        rows = cdf[x, u]                       # (trials, D)
        # Row-wise searchsorted(side="right"): count of cumulative probs <= draw.
        w = (rows <= uniforms[:, t, None]).sum(axis=1)
        np.minimum(w, n_d - 1, out=w)
        costs += m.stage_cost[t, x, u]
        x = m.dynamics[t, x, u, w]
        actions[:, t] = u
        states[:, t + 1] = x
    costs += m.terminal_cost[x]
    return states, actions, costs


def simulate(m: FiniteModel, pi: MarkovPolicy, x0: int, seed: int, trials: int) -> list[Trajectory]:
    """Draw ``trials`` independent trajectories; identical output for identical seeds."""
    states, actions, _ = _simulate_arrays(m, pi, x0, seed, trials)
    n = m.horizon
    out = []
    for i in range(trials):
        path: list[int] = []
        for t in range(n):
            path.append(int(states[i, t]))
            path.append(int(actions[i, t]))
        path.append(int(states[i, n]))
        out.append(Trajectory(tuple(path)))
    return out


def monte_carlo_risk(
    m: FiniteModel, pi: MarkovPolicy, rp: RiskParam, x0: int, seed: int, trials: int
) -> tuple[float, float]:
    """Sampled entropic risk with a delta-method standard error.

    The exponential moments are averaged in log space, shifted by the largest
    sampled cost; the standard error maps the spread of the transformed
    samples back through the logarithm.
    """
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    if trials < 2:
        raise ValueError(f"monte_carlo_risk requires trials >= 2, got {trials}")
    _, _, costs = _simulate_arrays(m, pi, x0, seed, trials)
    s = -0.5 * rp.theta
    shift = float(costs.max())
    y = np.exp(s * (costs - shift))
    mean = float(y.mean())
    sd = float(y.std(ddof=1))
    estimate = shift + math.log(mean) / s
    stderr = sd / (mean * math.sqrt(trials)) / s
    return estimate, stderr
