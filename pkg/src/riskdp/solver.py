"""Backward induction for the risk-averse and risk-neutral control objectives.

Values are computed stage by stage from the terminal costs. In risk-averse
mode the expectation inside each Bellman step is replaced by the entropic
certainty equivalent of the successor values, evaluated in shifted log space
per state-action pair. Ties at the minimizing action always resolve to the
smallest action index, and every inner sum runs in ascending disturbance
order, so the output is deterministic bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import FiniteModel, MarkovPolicy, check_state, ensure_valid
from .risk import RiskParam, log_expected_exp


@dataclass(frozen=True, eq=False)
class ValueTables:
    """Per-stage value arrays v[t][x] for t in 0..N; row N equals the terminal costs."""

    v: np.ndarray  # float, shape (N+1, S)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Output of one backward-induction run.

    ``theta`` is None in risk-neutral mode. ``stage_q`` holds the minimand
    table q[t][x][u] (kept by default for auditability); the policy entry for
    each (t, x) attains the row minimum at the exact stored floating value.
    """

    values: ValueTables
    policy: MarkovPolicy
    theta: RiskParam | None
    stage_q: np.ndarray | None = None

    @property
    def is_risk_neutral(self) -> bool:
        return self.theta is None

    def value_at(self, x: int) -> float:
        return float(self.values.v[0, x])


def _stage_q_value(
    cost: float,
    row_f: Sequence[int],
    row_p: Sequence[float],
    v_next: Sequence[float],
    theta: float | None,
) -> float:
    """Minimand for one (stage, state, action): stage cost plus successor aggregate.

    Shared by the solver, the exact policy evaluator, and the brute-force
    oracles so that all of them perform identical floating-point operations.
    """
    nxt = [v_next[j] for j in row_f]
    if theta is None:
        acc = 0.0
        for w in range(len(nxt)):
            acc += row_p[w] * nxt[w]
        return cost + acc
    return cost + log_expected_exp(nxt, row_p, theta)


def _solve(m: FiniteModel, theta: float | None, keep_stage_q: bool) -> SolveResult:
    ensure_valid(m)
    n, n_s, n_a, n_d = m.dynamics.shape
    f = m.dynamics.tolist()
    p = m.kernel.tolist()
    c = m.stage_cost.tolist()

    v = np.empty((n + 1, n_s))
    v[n] = m.terminal_cost
    policy = np.zeros((n, n_s), dtype=np.int64)
    stage_q = np.empty((n, n_s, n_a)) if keep_stage_q else None

    v_next: list[float] = m.terminal_cost.tolist()
    for t in range(n - 1, -1, -1):
        f_t, p_t, c_t = f[t], p[t], c[t]
        v_t = [0.0] * n_s
        for x in range(n_s):
            f_x, p_x, c_x = f_t[x], p_t[x], c_t[x]
            best = None
            best_u = 0
            for u in range(n_a):
                q = _stage_q_value(c_x[u], f_x[u], p_x[u], v_next, theta)
                if stage_q is not None:
                    stage_q[t, x, u] = q
                if best is None or q < best:
                    best = q
                    best_u = u
            v_t[x] = best
            policy[t, x] = best_u
        v[t] = v_t
        v_next = v_t

    rp = None if theta is None else RiskParam(theta)
    return SolveResult(values=ValueTables(v), policy=MarkovPolicy(policy), theta=rp, stage_q=stage_q)


def solve_exputil(m: FiniteModel, rp: RiskParam, *, keep_stage_q: bool = True) -> SolveResult:
    """Minimize the entropic risk of the cumulative cost by backward induction.

    For each stage t from N-1 down to 0 and each state x, the candidate value
    of action u is ``c[t][x][u]`` plus the certainty equivalent of the
    successor values under the disturbance law at (t, x, u); the state value
    is the minimum over actions and the policy records the smallest minimizing
    action index.
    """
    if not isinstance(rp, RiskParam):
        rp = RiskParam(rp)
    return _solve(m, rp.theta, keep_stage_q)


def solve_risk_neutral(m: FiniteModel, *, keep_stage_q: bool = True) -> SolveResult:
    """Standard expected-cost backward induction with the same tie-breaking."""
    return _solve(m, None, keep_stage_q)


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    value: float
    policy: MarkovPolicy


def theta_sweep(m: FiniteModel, thetas: Sequence[RiskParam | float], x0: int) -> list[SweepPoint]:
    """Solve for each risk level in an ascending, strictly negative theta list.

    Returns one entry per theta with the optimal value at ``x0`` and the
    extracted policy. Values are non-increasing as theta increases toward 0.
    """
    ensure_valid(m)
    x0 = check_state(m, x0)
    params = [rp if isinstance(rp, RiskParam) else RiskParam(rp) for rp in thetas]
    if not params:
        raise ValueError("theta sweep requires at least one theta")
    for a, b in zip(params, params[1:]):
        if not a.theta < b.theta:
            raise ValueError(f"thetas must be strictly ascending, got {a.theta!r} before {b.theta!r}")
    points = []
    for rp in params:
        res = solve_exputil(m, rp, keep_stage_q=False)
        points.append(SweepPoint(theta=rp.theta, value=res.value_at(x0), policy=res.policy))
    return points
