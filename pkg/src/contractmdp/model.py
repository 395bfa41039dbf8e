"""Problem instances, contracts, histories, and Markovian policies.

An instance is a time-inhomogeneous finite-horizon MDP in which a hidden-action
agent moves and a principal pays via per-next-state contracts.  Tensors are
indexed ``transition[h][s][a][s']``, ``principal_reward[h][s][s']``,
``agent_cost[h][s][a]`` with ``h`` zero-based internally (step ``h+1`` of the
model).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError

INSTANCE_SCHEMA_VERSION = 1
PROB_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    """A hidden-action principal-agent MDP with bounded payments."""

    horizon: int
    num_states: int
    num_actions: int
    initial: np.ndarray          # (S,)
    transition: np.ndarray       # (H, S, A, S)
    principal_reward: np.ndarray  # (H, S, S)
    agent_cost: np.ndarray       # (H, S, A)
    payment_bound: float

    def __post_init__(self):
        object.__setattr__(self, "initial", _readonly(self.initial))
        object.__setattr__(self, "transition", _readonly(self.transition))
        object.__setattr__(self, "principal_reward", _readonly(self.principal_reward))
        object.__setattr__(self, "agent_cost", _readonly(self.agent_cost))
        H, S, A = self.horizon, self.num_states, self.num_actions
        if H < 1 or S < 1 or A < 1:
            raise ValidationError("horizon, num_states and num_actions must be >= 1")
        shapes = {
            "initial": (self.initial.shape, (S,)),
            "transition": (self.transition.shape, (H, S, A, S)),
            "principal_reward": (self.principal_reward.shape, (H, S, S)),
            "agent_cost": (self.agent_cost.shape, (H, S, A)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise ValidationError(f"{name} has shape {got}, expected {want}")

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and self.num_states == other.num_states
            and self.num_actions == other.num_actions
            and self.payment_bound == other.payment_bound
            and np.array_equal(self.initial, other.initial)
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.principal_reward, other.principal_reward)
            and np.array_equal(self.agent_cost, other.agent_cost)
        )


@dataclass(frozen=True)
class Contract:
    """Payment vector over next states, entries in [0, B]."""

    pay: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pay", _readonly(self.pay))

    def __eq__(self, other):
        if not isinstance(other, Contract):
            return NotImplemented
        return np.array_equal(self.pay, other.pay)

    def __hash__(self):
        return hash(self.pay.tobytes())

    def within_bound(self, bound: float, tol: float = 1e-9) -> bool:
        return bool(np.all(self.pay >= -tol) and np.all(self.pay <= bound + tol))


def zero_contract(num_states: int) -> Contract:
    return Contract(np.zeros(num_states))


@dataclass(frozen=True)
class History:
    """Interaction prefix (s_1, p_1, a_1, ..., s_h).

    Holds recommended actions only; the agent's actually-played actions are
    unobservable and never part of a history.
    """

    states: tuple[int, ...]
    contracts: tuple[Contract, ...] = ()
    recommendations: tuple[int, ...] = ()

    def __post_init__(self):
        n = len(self.states)
        if n < 1:
            raise ValidationError("a history contains at least the initial state")
        if len(self.contracts) != n - 1 or len(self.recommendations) != n - 1:
            raise ValidationError(
                "history must alternate state, contract, recommendation: "
                f"{n} states need {n - 1} contracts and recommendations"
            )

    @property
    def step(self) -> int:
        """1-based step h of the history (number of states seen)."""
        return len(self.states)

    @property
    def last_state(self) -> int:
        return self.states[-1]

    def extend(self, contract: Contract, recommendation: int, next_state: int) -> "History":
        return History(
            self.states + (next_state,),
            self.contracts + (contract,),
            self.recommendations + (recommendation,),
        )

    def concat(self, other: "History") -> "History":
        """Concatenation glued at the shared state (tau ends where other starts)."""
        if self.last_state != other.states[0]:
            raise ValidationError("histories can only be concatenated at a shared state")
        return History(
            self.states + other.states[1:],
            self.contracts + other.contracts,
            self.recommendations + other.recommendations,
        )

    def prefix(self, step: int) -> "History":
        """The portion of the history up to its ``step``-th state."""
        if not 1 <= step <= self.step:
            raise ValidationError(f"prefix step {step} out of range 1..{self.step}")
        k = step - 1
        return History(self.states[:step], self.contracts[:k], self.recommendations[:k])

    def suffix(self, step: int) -> "History":
        if not 1 <= step <= self.step:
            raise ValidationError(f"suffix step {step} out of range 1..{self.step}")
        k = step - 1
        return History(self.states[k:], self.contracts[k:], self.recommendations[k:])


@dataclass(frozen=True)
class MarkovianPolicy:
    """One contract and one recommended action per (step, state)."""

    pay: np.ndarray     # (H, S, S)
    action: np.ndarray  # (H, S) integer

    def __post_init__(self):
        object.__setattr__(self, "pay", _readonly(self.pay))
        act = np.asarray(self.action, dtype=np.int64)
        act.setflags(write=False)
        object.__setattr__(self, "action", act)


@dataclass(frozen=True)
class Violation:
    rule: str
    location: tuple
    message: str


@dataclass
class ValidationReport:
    errors: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def lines(self) -> list[str]:
        out = [f"error: {v.rule} at {v.location}: {v.message}" for v in self.errors]
        out += [f"warning: {v.rule} at {v.location}: {v.message}" for v in self.warnings]
        return out


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every instance invariant; returns all violations, never raises."""
    rep = ValidationReport()
    H, S, A = inst.horizon, inst.num_states, inst.num_actions

    row_sums = inst.transition.sum(axis=3)
    bad = np.argwhere(np.abs(row_sums - 1.0) > PROB_TOL)
    for h, s, a in bad:
        rep.errors.append(Violation(
            "transition-row-sum", (int(h) + 1, int(s), int(a)),
            f"row sums to {row_sums[h, s, a]!r}, expected 1"))
    neg = np.argwhere(inst.transition < 0)
    for h, s, a, s2 in neg[:20]:
        rep.errors.append(Violation(
            "transition-nonnegative", (int(h) + 1, int(s), int(a), int(s2)),
            f"probability {inst.transition[h, s, a, s2]!r} is negative"))

    if abs(inst.initial.sum() - 1.0) > PROB_TOL:
        rep.errors.append(Violation(
            "initial-sum", (), f"initial distribution sums to {inst.initial.sum()!r}"))
    for s in np.flatnonzero(inst.initial < 0):
        rep.errors.append(Violation(
            "initial-nonnegative", (int(s),), f"mass {inst.initial[s]!r} is negative"))

    min_cost = inst.agent_cost.min(axis=2)
    for h, s in np.argwhere(min_cost > PROB_TOL):
        rep.errors.append(Violation(
            "zero-cost-action", (int(h) + 1, int(s)),
            f"no action with cost 0 (min cost {min_cost[h, s]!r})"))
    for h, s, a in np.argwhere((inst.agent_cost < -PROB_TOL) | (inst.agent_cost > 1 + PROB_TOL))[:20]:
        rep.errors.append(Violation(
            "cost-range", (int(h) + 1, int(s), int(a)),
            f"cost {inst.agent_cost[h, s, a]!r} outside [0, 1]"))

    for h, s, s2 in np.argwhere(inst.principal_reward < 0)[:20]:
        rep.errors.append(Violation(
            "reward-nonnegative", (int(h) + 1, int(s), int(s2)),
            f"reward {inst.principal_reward[h, s, s2]!r} is negative"))
    rmax = float(inst.principal_reward.max()) if inst.principal_reward.size else 0.0
    if rmax > 1 + PROB_TOL:
        h, s, s2 = np.unravel_index(int(np.argmax(inst.principal_reward)), inst.principal_reward.shape)
        rep.warnings.append(Violation(
            "reward-scale", (int(h) + 1, int(s), int(s2)),
            f"reward {rmax!r} exceeds 1 (rewards are not normalized)"))

    if inst.payment_bound < 1:
        rep.errors.append(Violation(
            "payment-bound", (), f"payment bound {inst.payment_bound!r} must be >= 1"))
    return rep


# ---------------------------------------------------------------------------
# serialization


def instance_to_dict(inst: Instance) -> dict:
    return {
        "schema_version": INSTANCE_SCHEMA_VERSION,
        "horizon": inst.horizon,
        "num_states": inst.num_states,
        "num_actions": inst.num_actions,
        "initial": inst.initial.tolist(),
        "transition": inst.transition.tolist(),
        "principal_reward": inst.principal_reward.tolist(),
        "agent_cost": inst.agent_cost.tolist(),
        "payment_bound": inst.payment_bound,
    }


def instance_from_dict(data: dict) -> Instance:
    required = ["schema_version", "horizon", "num_states", "num_actions", "initial",
                "transition", "principal_reward", "agent_cost", "payment_bound"]
    missing = [k for k in required if k not in data]
    if missing:
        raise ValidationError(f"instance file is missing fields: {missing}")
    if data["schema_version"] != INSTANCE_SCHEMA_VERSION:
        raise ValidationError(
            f"instance schema_version {data['schema_version']} unsupported "
            f"(expected {INSTANCE_SCHEMA_VERSION})")
    try:
        inst = Instance(
            horizon=int(data["horizon"]),
            num_states=int(data["num_states"]),
            num_actions=int(data["num_actions"]),
            initial=np.asarray(data["initial"], dtype=np.float64),
            transition=np.asarray(data["transition"], dtype=np.float64),
            principal_reward=np.asarray(data["principal_reward"], dtype=np.float64),
            agent_cost=np.asarray(data["agent_cost"], dtype=np.float64),
            payment_bound=float(data["payment_bound"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"instance file malformed: {exc}") from exc
    rep = validate_instance(inst)
    if not rep.valid:
        raise ValidationError("instance file invalid: " + "; ".join(rep.lines()[:5]))
    return inst


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(instance_to_dict(inst), f)
        f.write("\n")


def load_instance(path) -> Instance:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"instance file {path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"instance file {path}: top level must be an object")
    return instance_from_dict(data)
