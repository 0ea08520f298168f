"""Brute-force ground truth on tiny instances.

Enumerates every deterministic Markov policy, and separately every
deterministic history-dependent policy, evaluates each one exactly, and
certifies that the backward-induction solver attains the same optimum. The
history-dependent class strictly contains the Markov class, so agreement of
the two optima witnesses that conditioning on the current state alone loses
nothing on the instance at hand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .evaluator import CapExceededError
from .model import FiniteModel, MarkovPolicy, check_state, ensure_valid
from .risk import RiskParam, log_expected_exp
from .solver import SolveResult, _stage_q_value, solve_exputil

DEFAULT_POLICY_CAP = 10**6
DEFAULT_HISTORY_CAP = 10**5

# Policies whose value is within this of the minimum belong to the argmin set.
ARGMIN_GROUP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HistoryPolicy:
    """Deterministic policy fed by the full state history.

    ``tables[t]`` has one action entry per history (x_0, ..., x_t), indexed by
    the base-|S| encoding with x_0 most significant.
    """

    n_states: int
    tables: tuple[tuple[int, ...], ...]

    def action(self, history: tuple[int, ...]) -> int:
        idx = 0
        for x in history:
            idx = idx * self.n_states + x
        return self.tables[len(history) - 1][idx]


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    best_value: float
    optimal_policies: tuple[MarkovPolicy, ...]


@dataclass(frozen=True, eq=False)
class Certificate:
    """Side-by-side optima from the solver and both brute-force sweeps."""

    dp_value: float
    markov_value: float
    history_value: float
    max_gap: float
    dp_policy_in_argmin: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tolerance and self.dp_policy_in_argmin


def markov_policy_count(m: FiniteModel) -> int:
    return m.n_actions ** (m.n_states * m.horizon)


def history_policy_count(m: FiniteModel) -> int:
    count = 1
    for t in range(m.horizon):
        count *= m.n_actions ** (m.n_states ** (t + 1))
    return count


def brute_force_markov(
    m: FiniteModel, rp: RiskParam, x0: int, *, max_policies: int = DEFAULT_POLICY_CAP
) -> BruteForceResult:
    """Exact optimum over every deterministic Markov policy, with the full argmin set.

    Policies are enumerated lexicographically by flattened action table. All
    policies whose value lies within ``ARGMIN_GROUP_TOL`` of the minimum are
    returned, in enumeration order.
    """
    ensure_valid(m)
    x0 = check_state(m, x0)
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    count = markov_policy_count(m)
    if count > max_policies:
        raise CapExceededError(
            f"instance too large for Markov policy enumeration: {count} policies exceed cap {max_policies}"
        )
    n, n_s = m.horizon, m.n_states
    theta = rp.theta
    f = m.dynamics.tolist()
    p = m.kernel.tolist()
    c = m.stage_cost.tolist()
    terminal = m.terminal_cost.tolist()

    flats = []
    values = []
    for flat in itertools.product(range(m.n_actions), repeat=n * n_s):
        v_next = terminal
        for t in range(n - 1, -1, -1):
            base = t * n_s
            f_t, p_t, c_t = f[t], p[t], c[t]
            v_t = [0.0] * n_s
            for x in range(n_s):
                u = flat[base + x]
                v_t[x] = _stage_q_value(c_t[x][u], f_t[x][u], p_t[x][u], v_next, theta)
            v_next = v_t
        flats.append(flat)
        values.append(v_next[x0])

    best = min(values)
    optimal = tuple(
        MarkovPolicy(np.asarray(flat, dtype=np.int64).reshape(n, n_s))
        for flat, value in zip(flats, values)
        if value - best <= ARGMIN_GROUP_TOL
    )
    return BruteForceResult(best_value=best, optimal_policies=optimal)


def _history_policy_value(
    rows: list[list[list[tuple[int, float]]]],
    stage_cost: list,
    terminal: list[float],
    policy_tables: tuple[tuple[int, ...], ...],
    n: int,
    n_s: int,
    x0: int,
    theta: float,
) -> float:
    """Entropic risk of a history policy via full trajectory-tree expansion."""
    values: list[float] = []
    probs: list[float] = []

    def expand(t: int, x: int, hist_idx: int, prob: float, cost: float) -> None:
        if t == n:
            values.append(cost + terminal[x])
            probs.append(prob)
            return
        u = policy_tables[t][hist_idx]
        for x2, p2 in rows[t][x][u]:
            expand(t + 1, x2, hist_idx * n_s + x2, prob * p2, cost + stage_cost[t][x][u])

    expand(0, x0, x0, 1.0, 0.0)
    return log_expected_exp(values, probs, theta)


def brute_force_history(
    m: FiniteModel, rp: RiskParam, x0: int, *, max_policies: int = DEFAULT_HISTORY_CAP
) -> float:
    """Exact optimum over every deterministic history-dependent policy.

    This class contains the Markov class, so the returned value never exceeds
    the Markov brute-force optimum.
    """
    ensure_valid(m)
    x0 = check_state(m, x0)
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    count = history_policy_count(m)
    if count > max_policies:
        raise CapExceededError(
            f"instance too large for history policy enumeration: {count} policies exceed cap {max_policies}"
        )
    n, n_s, n_a = m.horizon, m.n_states, m.n_actions

    # rows[t][x][u]: positive-probability successors [(x', prob)], merged over disturbances.
    ker = m.kernel.tolist()
    dyn = m.dynamics.tolist()
    rows: list[list[list[list[tuple[int, float]]]]] = []
    for t in range(n):
        stage = []
        for x in range(n_s):
            per_action = []
            for u in range(n_a):
                acc: dict[int, float] = {}
                for w in range(m.n_disturbances):
                    pw = ker[t][x][u][w]
                    if pw > 0.0:
                        j = dyn[t][x][u][w]
                        acc[j] = acc.get(j, 0.0) + pw
                per_action.append(sorted(acc.items()))
            stage.append(per_action)
        rows.append(stage)

    stage_cost = m.stage_cost.tolist()
    terminal = m.terminal_cost.tolist()
    stage_tables = [
        list(itertools.product(range(n_a), repeat=n_s ** (t + 1))) for t in range(n)
    ]
    best = math.inf
    for tables in itertools.product(*stage_tables):
        value = _history_policy_value(rows, stage_cost, terminal, tables, n, n_s, x0, rp.theta)
        if value < best:
            best = value
    return best


def certify(
    m: FiniteModel,
    rp: RiskParam,
    x0: int,
    *,
    markov_cap: int = DEFAULT_POLICY_CAP,
    history_cap: int = DEFAULT_HISTORY_CAP,
    tolerance: float = 1e-9,
) -> Certificate:
    """Compare the solver against both brute-force optima on one instance.

    Passes when all three values agree within ``tolerance`` and the policy
    extracted by the solver is a member of the brute-force argmin set.
    """
    ensure_valid(m)
    x0 = check_state(m, x0)
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    dp: SolveResult = solve_exputil(m, rp, keep_stage_q=False)
    dp_value = dp.value_at(x0)
    markov = brute_force_markov(m, rp, x0, max_policies=markov_cap)
    history_value = brute_force_history(m, rp, x0, max_policies=history_cap)
    gaps = (
        abs(dp_value - markov.best_value),
        abs(dp_value - history_value),
        abs(markov.best_value - history_value),
    )
    member = any(dp.policy == cand for cand in markov.optimal_policies)
    return Certificate(
        dp_value=dp_value,
        markov_value=markov.best_value,
        history_value=history_value,
        max_gap=max(gaps),
        dp_policy_in_argmin=member,
        tolerance=tolerance,
    )
