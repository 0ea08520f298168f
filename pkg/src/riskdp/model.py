"""Finite-horizon controlled Markov model: tables, validation, kernels, path costs.

A model is a set of index-based tables over a horizon of N decision stages:
next-state dynamics ``f[t][x][u][w]``, a disturbance probability table
``p[t][x][u][w]``, stage costs ``c[t][x][u]`` and terminal costs ``cN[x]``.
State, action and disturbance labels are carried for reporting only; all
semantics are index-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

# Tolerance for kernel-row normalization checks.
KERNEL_ROW_SUM_TOL = 1e-12
# Rows whose sum drifts by at most this much may be repaired at load time.
RENORMALIZE_TOL = 1e-9


class ModelValidationError(ValueError):
    """An operation received a model, policy, or argument that fails validation."""


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a model validation pass. Violations are data, not failures."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _default_labels(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """Finite-horizon controlled Markov model over index sets.

    Tables are immutable after construction. Shape consistency is enforced
    here; value-level invariants (row sums, index ranges, finiteness) are
    checked by :func:`validate_model`, which reports rather than raises.
    """

    horizon: int
    dynamics: np.ndarray       # int, shape (N, S, A, D), entries are state indices
    kernel: np.ndarray         # float, shape (N, S, A, D), probability of each disturbance
    stage_cost: np.ndarray     # float, shape (N, S, A)
    terminal_cost: np.ndarray  # float, shape (S,)
    states: tuple[str, ...] = ()
    actions: tuple[str, ...] = ()
    disturbances: tuple[str, ...] = ()

    def __post_init__(self):
        dyn = np.asarray(self.dynamics)
        if dyn.dtype.kind == "f":
            if not np.all(dyn == np.floor(dyn)):
                raise ModelValidationError("dynamics entries must be integers")
            dyn = dyn.astype(np.int64)
        elif dyn.dtype.kind not in "iu":
            raise ModelValidationError("dynamics entries must be integers")
        else:
            dyn = dyn.astype(np.int64)
        if dyn.ndim != 4:
            raise ModelValidationError(f"dynamics table must be 4-dimensional [t][x][u][w], got ndim={dyn.ndim}")

        ker = np.asarray(self.kernel, dtype=float)
        cst = np.asarray(self.stage_cost, dtype=float)
        ter = np.asarray(self.terminal_cost, dtype=float)
        n = int(self.horizon)
        n_t, n_s, n_a, n_d = dyn.shape
        if n != n_t:
            raise ModelValidationError(f"horizon {n} does not match dynamics table with {n_t} stages")
        if ker.shape != dyn.shape:
            raise ModelValidationError(f"kernel shape {ker.shape} does not match dynamics shape {dyn.shape}")
        if cst.shape != (n_t, n_s, n_a):
            raise ModelValidationError(f"stage cost shape {cst.shape}, expected {(n_t, n_s, n_a)}")
        if ter.shape != (n_s,):
            raise ModelValidationError(f"terminal cost shape {ter.shape}, expected {(n_s,)}")

        states = tuple(self.states) or _default_labels("s", n_s)
        actions = tuple(self.actions) or _default_labels("a", n_a)
        disturbances = tuple(self.disturbances) or _default_labels("w", n_d)
        for name, labels, size in (
            ("states", states, n_s),
            ("actions", actions, n_a),
            ("disturbances", disturbances, n_d),
        ):
            if len(labels) != size:
                raise ModelValidationError(f"{name}: {len(labels)} labels for {size} indices")

        object.__setattr__(self, "horizon", n)
        object.__setattr__(self, "dynamics", _readonly(dyn))
        object.__setattr__(self, "kernel", _readonly(ker))
        object.__setattr__(self, "stage_cost", _readonly(cst))
        object.__setattr__(self, "terminal_cost", _readonly(ter))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "disturbances", disturbances)

    @property
    def n_states(self) -> int:
        return self.dynamics.shape[1]

    @property
    def n_actions(self) -> int:
        return self.dynamics.shape[2]

    @property
    def n_disturbances(self) -> int:
        return self.dynamics.shape[3]

    @cached_property
    def validation(self) -> ValidationReport:
        return _validate(self)

    def state_index(self, name: str | int) -> int:
        """Resolve a state label or integer index; labels take precedence."""
        if isinstance(name, str) and name in self.states:
            return self.states.index(name)
        try:
            idx = int(name)
        except (TypeError, ValueError):
            raise ModelValidationError(f"unknown state {name!r}") from None
        if not 0 <= idx < self.n_states:
            raise ModelValidationError(f"state index {idx} out of range for {self.n_states} states")
        return idx


@dataclass(frozen=True, eq=False)
class MarkovPolicy:
    """Per-stage state-to-action map mu[t][x], one row per decision stage."""

    mu: np.ndarray  # int, shape (N, S)

    def __post_init__(self):
        mu = np.asarray(self.mu)
        if mu.dtype.kind == "f":
            if not np.all(mu == np.floor(mu)):
                raise ModelValidationError("policy entries must be integers")
        mu = mu.astype(np.int64)
        if mu.ndim != 2:
            raise ModelValidationError(f"policy table must be 2-dimensional [t][x], got ndim={mu.ndim}")
        object.__setattr__(self, "mu", _readonly(mu))

    def action(self, t: int, x: int) -> int:
        return int(self.mu[t, x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkovPolicy):
            return NotImplemented
        return self.mu.shape == other.mu.shape and bool(np.array_equal(self.mu, other.mu))

    def __hash__(self) -> int:
        return hash((self.mu.shape, self.mu.tobytes()))


@dataclass(frozen=True)
class Trajectory:
    """Alternating state/action index path (x0, u0, x1, ..., u_{N-1}, xN)."""

    path: tuple[int, ...]

    def __post_init__(self):
        path = tuple(int(v) for v in self.path)
        if len(path) < 3 or len(path) % 2 == 0:
            raise ModelValidationError(f"trajectory path must have odd length 2N+1 >= 3, got {len(path)}")
        object.__setattr__(self, "path", path)

    @property
    def states(self) -> tuple[int, ...]:
        return self.path[0::2]

    @property
    def actions(self) -> tuple[int, ...]:
        return self.path[1::2]

    @property
    def horizon(self) -> int:
        return len(self.path) // 2


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Next-state probability table q[t][x][u][x'] induced by dynamics and noise."""

    q: np.ndarray  # float, shape (N, S, A, S)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 4:
            raise ModelValidationError("transition kernel must be 4-dimensional [t][x][u][x']")
        object.__setattr__(self, "q", _readonly(q))


def _validate(m: FiniteModel) -> ValidationReport:
    violations: list[str] = []
    n, n_s, n_a, n_d = m.dynamics.shape
    if n < 1:
        violations.append(f"horizon must be >= 1, got {n}")
    if n_s < 1 or n_a < 1 or n_d < 1:
        violations.append(f"index sets must be non-empty, got |S|={n_s}, |A|={n_a}, |D|={n_d}")

    bad_dyn = (m.dynamics < 0) | (m.dynamics >= n_s)
    for t, x, u, w in zip(*np.nonzero(bad_dyn)):
        violations.append(
            f"dynamics entry (t={t}, x={x}, u={u}, w={w}) = {m.dynamics[t, x, u, w]}: "
            f"state index out of range for {n_s} states"
        )

    neg = m.kernel < 0
    for t, x, u, w in zip(*np.nonzero(neg)):
        violations.append(f"kernel entry (t={t}, x={x}, u={u}, w={w}) = {m.kernel[t, x, u, w]!r} is negative")
    nonfin = ~np.isfinite(m.kernel)
    for t, x, u, w in zip(*np.nonzero(nonfin)):
        violations.append(f"kernel entry (t={t}, x={x}, u={u}, w={w}) is not finite")
    for t in range(n):
        for x in range(n_s):
            for u in range(n_a):
                row = m.kernel[t, x, u]
                if not np.all(np.isfinite(row)):
                    continue  # already reported
                s = math.fsum(row.tolist())
                if abs(s - 1.0) > KERNEL_ROW_SUM_TOL:
                    violations.append(
                        f"kernel row (t={t}, x={x}, u={u}) sums to {s!r}, "
                        f"expected 1 within {KERNEL_ROW_SUM_TOL:g}"
                    )

    for idx in zip(*np.nonzero(~np.isfinite(m.stage_cost))):
        t, x, u = (int(i) for i in idx)
        violations.append(f"stage cost entry (t={t}, x={x}, u={u}) is not finite")
    for x in np.nonzero(~np.isfinite(m.terminal_cost))[0]:
        violations.append(f"terminal cost entry (x={int(x)}) is not finite")

    return ValidationReport(tuple(violations))


def validate_model(m: FiniteModel) -> ValidationReport:
    """Check all value-level model invariants; pure and idempotent."""
    return m.validation


def ensure_valid(m: FiniteModel) -> None:
    """Raise :class:`ModelValidationError` listing violations unless the model is valid."""
    report = m.validation
    if not report.ok:
        raise ModelValidationError("invalid model:\n" + str(report))


def check_policy(m: FiniteModel, policy: MarkovPolicy) -> None:
    """Raise unless the policy has shape (N, S) with valid action indices."""
    expected = (m.horizon, m.n_states)
    if policy.mu.shape != expected:
        raise ModelValidationError(f"policy table shape {policy.mu.shape}, expected {expected}")
    bad = (policy.mu < 0) | (policy.mu >= m.n_actions)
    if np.any(bad):
        t, x = next(zip(*np.nonzero(bad)))
        raise ModelValidationError(
            f"policy entry (t={t}, x={x}) = {policy.mu[t, x]}: action index out of range for {m.n_actions} actions"
        )


def check_state(m: FiniteModel, x: int) -> int:
    x = int(x)
    if not 0 <= x < m.n_states:
        raise ModelValidationError(f"state index {x} out of range for {m.n_states} states")
    return x


def _check_trajectory(m: FiniteModel, traj: Trajectory) -> None:
    if traj.horizon != m.horizon:
        raise ModelValidationError(
            f"trajectory of horizon {traj.horizon} does not match model horizon {m.horizon}"
        )
    for i, x in enumerate(traj.states):
        if not 0 <= x < m.n_states:
            raise ModelValidationError(f"trajectory state x_{i} = {x} out of range for {m.n_states} states")
    for i, u in enumerate(traj.actions):
        if not 0 <= u < m.n_actions:
            raise ModelValidationError(f"trajectory action u_{i} = {u} out of range for {m.n_actions} actions")


def pushforward(m: FiniteModel) -> TransitionKernel:
    """Next-state law q[t][x][u][x'] obtained by pushing the noise law through the dynamics.

    For each (t, x, u), mass of every disturbance w is added to its successor
    state f[t][x][u][w], accumulating in ascending disturbance-index order.
    """
    ensure_valid(m)
    n, n_s, n_a, _ = m.dynamics.shape
    q = np.zeros((n, n_s, n_a, n_s))
    for t in range(n):
        for x in range(n_s):
            for u in range(n_a):
                np.add.at(q[t, x, u], m.dynamics[t, x, u], m.kernel[t, x, u])
    return TransitionKernel(q)


def cost_to_go(m: FiniteModel, traj: Trajectory, t: int) -> float:
    """Tail cost from stage t: cN(x_N) plus stage costs from t onward.

    Accumulated backward from the terminal stage, so the telescoping identity
    cost_to_go(t) == c[t][x_t][u_t] + cost_to_go(t+1) holds exactly in floating
    point (same additions in the same order), not merely to a tolerance.
    """
    _check_trajectory(m, traj)
    if not 0 <= t <= m.horizon:
        raise ModelValidationError(f"stage {t} out of range for horizon {m.horizon}")
    states, actions = traj.states, traj.actions
    total = float(m.terminal_cost[states[-1]])
    for i in range(m.horizon - 1, t - 1, -1):
        total = float(m.stage_cost[i, states[i], actions[i]]) + total
    return total


def trajectory_cost(m: FiniteModel, traj: Trajectory) -> float:
    """Total path cost: all stage costs plus the terminal cost."""
    return cost_to_go(m, traj, 0)


# ---------------------------------------------------------------------------
# Model file format (JSON)
# ---------------------------------------------------------------------------

def model_to_dict(m: FiniteModel) -> dict:
    return {
        "horizon": m.horizon,
        "states": list(m.states),
        "actions": list(m.actions),
        "disturbances": list(m.disturbances),
        "dynamics": m.dynamics.tolist(),
        "kernel": m.kernel.tolist(),
        "stage_cost": m.stage_cost.tolist(),
        "terminal_cost": m.terminal_cost.tolist(),
    }


def model_from_dict(data: dict, *, renormalize: bool = False) -> FiniteModel:
    """Build a model from its JSON document form.

    With ``renormalize=True``, kernel rows whose sum is within
    ``RENORMALIZE_TOL`` of 1 are divided by their sum. Rows further off are
    left untouched so that genuine modeling errors still fail validation.
    """
    try:
        horizon = int(data["horizon"])
        kernel = np.asarray(data["kernel"], dtype=float)
        fields = dict(
            horizon=horizon,
            dynamics=np.asarray(data["dynamics"]),
            kernel=kernel,
            stage_cost=np.asarray(data["stage_cost"], dtype=float),
            terminal_cost=np.asarray(data["terminal_cost"], dtype=float),
            states=tuple(data.get("states") or ()),
            actions=tuple(data.get("actions") or ()),
            disturbances=tuple(data.get("disturbances") or ()),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelValidationError(f"malformed model document: {exc}") from exc
    if renormalize and kernel.ndim == 4 and np.all(np.isfinite(kernel)):
        kernel = kernel.copy()
        sums = kernel.sum(axis=-1, keepdims=True)
        fixable = np.abs(sums - 1.0) <= RENORMALIZE_TOL
        np.divide(kernel, sums, out=kernel, where=fixable & (sums != 0))
        fields["kernel"] = kernel
    return FiniteModel(**fields)


def save_model(m: FiniteModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=1)
        fh.write("\n")


def load_model(path, *, renormalize: bool = False) -> FiniteModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelValidationError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelValidationError("model file must contain a JSON object")
    return model_from_dict(data, renormalize=renormalize)
