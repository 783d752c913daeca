"""Non-stationary finite-horizon tabular MDPs and exact policy evaluation.

Array conventions (0-based time ``t = 0 .. H-1``):

* ``P[t, s, a, s']`` is the probability of moving from ``(s, a)`` at step ``t``
  to ``s'`` at step ``t + 1``; shape ``(H-1, S, A, S)``.
* ``r[t, s, a]`` is the mean reward, shape ``(H, S, A)``.
* ``d1[s]`` is the initial state distribution.
* ``Policy.probs[t, s, a]`` is the action distribution at ``(t, s)``.

The evaluation routines only read ``P``, ``r`` and ``d1`` (plus ``H``, ``S``,
``A``) and also accept sub-stochastic models, such as an empirical model
whose unvisited rows are all zero.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_TOL = 1e-12
IDENTITY_TOL = 1e-10

NOISE_KINDS = ("deterministic", "bernoulli")


class DimensionError(ValueError):
    """Shapes of an MDP and a policy (or two models) do not agree."""


def _frozen(x, dtype=np.float64):
    a = np.array(x, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """``M = (S, A, r, P, d1, H)`` with optional bounded reward noise.

    ``noise`` is ``"deterministic"`` (realised reward equals the mean) or
    ``"bernoulli"`` (realised reward is 1 with probability equal to the mean,
    else 0). Construction does not validate; call :func:`validate`.
    """

    P: np.ndarray
    r: np.ndarray
    d1: np.ndarray
    noise: str = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "r", _frozen(self.r))
        object.__setattr__(self, "d1", _frozen(self.d1))
        if self.r.ndim != 3:
            raise DimensionError(f"r must have shape (H, S, A), got {self.r.shape}")
        H, S, A = self.r.shape
        if self.P.shape != (H - 1, S, A, S):
            raise DimensionError(f"P must have shape {(H - 1, S, A, S)}, got {self.P.shape}")
        if self.d1.shape != (S,):
            raise DimensionError(f"d1 must have shape ({S},), got {self.d1.shape}")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise!r}; expected one of {NOISE_KINDS}")

    @property
    def H(self) -> int:
        return self.r.shape[0]

    @property
    def S(self) -> int:
        return self.r.shape[1]

    @property
    def A(self) -> int:
        return self.r.shape[2]

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "S": self.S,
            "A": self.A,
            "P": self.P.tolist(),
            "r": self.r.tolist(),
            "d1": self.d1.tolist(),
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularMDP":
        H, S, A = int(d["H"]), int(d["S"]), int(d["A"])
        P = np.array(d["P"], dtype=np.float64).reshape(H - 1, S, A, S)
        return cls(P=P, r=d["r"], d1=d["d1"], noise=d.get("noise", "deterministic"))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class Policy:
    """Non-stationary, possibly stochastic policy ``probs[t, s, a]``."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        if self.probs.ndim != 3:
            raise DimensionError(f"policy probs must have shape (H, S, A), got {self.probs.shape}")

    @property
    def H(self) -> int:
        return self.probs.shape[0]

    @property
    def S(self) -> int:
        return self.probs.shape[1]

    @property
    def A(self) -> int:
        return self.probs.shape[2]

    @property
    def deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)) and np.all(self.probs.sum(-1) == 1.0))

    @classmethod
    def from_actions(cls, actions, A: int) -> "Policy":
        """Deterministic policy from an ``(H, S)`` table of action indices."""
        actions = np.asarray(actions, dtype=np.int64)
        return cls(np.eye(A)[actions])

    @classmethod
    def uniform(cls, H: int, S: int, A: int) -> "Policy":
        return cls(np.full((H, S, A), 1.0 / A))

    def actions(self) -> np.ndarray:
        """``(H, S)`` action table; only meaningful for deterministic policies."""
        if not self.deterministic:
            raise ValueError("policy is not deterministic")
        return np.argmax(self.probs, axis=-1)

    def to_dict(self) -> dict:
        if self.deterministic:
            return {"H": self.H, "S": self.S, "A": self.A, "actions": self.actions().tolist()}
        return {"H": self.H, "S": self.S, "A": self.A, "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Policy":
        if "actions" in d:
            return cls.from_actions(d["actions"], int(d["A"]))
        return cls(d["probs"])


@dataclass(frozen=True, eq=False)
class OccupancyTable:
    """State-action occupancy ``d[t, s, a]``."""

    d: np.ndarray

    @property
    def state_marginal(self) -> np.ndarray:
        return self.d.sum(axis=-1)


@dataclass(frozen=True, eq=False)
class ValueFunctions:
    """``Q[t, s, a]``, ``V[t, s]`` and the scalar value ``v``.

    ``v`` is the occupancy-route value ``sum_t <d_t, r_t>``; ``v_bellman`` is
    ``sum_s d1(s) V[0, s]``. The two are checked against each other on
    construction by the evaluation routines.
    """

    Q: np.ndarray
    V: np.ndarray
    v: float
    v_bellman: float
    occupancy: OccupancyTable = field(repr=False)


def validate(mdp: TabularMDP) -> list[str]:
    """Return human-readable invariant violations; empty when ``mdp`` is well formed."""
    out = []
    P, r, d1 = mdp.P, mdp.r, mdp.d1
    for t, s, a, s2 in zip(*np.nonzero(P < 0)):
        out.append(f"negative-probability at (t={t}, s={s}, a={a}, s'={s2}): {P[t, s, a, s2]!r}")
    rows = P.sum(axis=-1)
    for t, s, a in zip(*np.nonzero(np.abs(rows - 1.0) > ROW_TOL)):
        out.append(f"row-sum at (t={t}, s={s}, a={a}): {rows[t, s, a]!r}")
    for t, s, a in zip(*np.nonzero((r < 0) | (r > 1) | ~np.isfinite(r))):
        out.append(f"reward-range at (t={t}, s={s}, a={a}): {r[t, s, a]!r}")
    if np.any(d1 < 0):
        out.append(f"initial-negative: {d1.tolist()}")
    if abs(d1.sum() - 1.0) > ROW_TOL:
        out.append(f"initial-sum: {d1.sum()!r}")
    return out


def validate_policy(pi: Policy) -> list[str]:
    out = []
    p = pi.probs
    for t, s, a in zip(*np.nonzero(p < 0)):
        out.append(f"negative-probability at (t={t}, s={s}, a={a})")
    rows = p.sum(axis=-1)
    for t, s in zip(*np.nonzero(np.abs(rows - 1.0) > ROW_TOL)):
        out.append(f"row-sum at (t={t}, s={s}): {rows[t, s]!r}")
    return out


def check_dims(model, pi: Policy) -> None:
    if (model.H, model.S, model.A) != (pi.H, pi.S, pi.A):
        raise DimensionError(
            f"model has (H, S, A) = {(model.H, model.S, model.A)}, policy has {(pi.H, pi.S, pi.A)}"
        )


def forward_occupancy(P, d1, probs) -> np.ndarray:
    """``d[t+1](s', a') = pi[t+1](a'|s') * sum_{s,a} P[t](s'|s,a) d[t](s,a)``."""
    H, S, A = probs.shape
    d = np.empty((H, S, A))
    d[0] = d1[:, None] * probs[0]
    for t in range(H - 1):
        nxt = np.einsum("sa,sax->x", d[t], P[t])
        d[t + 1] = nxt[:, None] * probs[t + 1]
    return d


def backward_values(P, r, probs) -> tuple[np.ndarray, np.ndarray]:
    """Bellman recursion ``Q_t = r_t + P_t V_{t+1}`` with ``V_H = 0``."""
    H, S, A = r.shape
    Q = np.empty((H, S, A))
    V = np.empty((H, S))
    nxt = np.zeros(S)
    for t in range(H - 1, -1, -1):
        Q[t] = r[t] + (P[t] @ nxt if t < H - 1 else 0.0)
        V[t] = (probs[t] * Q[t]).sum(axis=-1)
        nxt = V[t]
    return Q, V


def evaluate(model, pi: Policy) -> ValueFunctions:
    """Exact evaluation of ``pi`` on any ``(P, r, d1)`` model, both routes."""
    check_dims(model, pi)
    d = forward_occupancy(model.P, model.d1, pi.probs)
    Q, V = backward_values(model.P, model.r, pi.probs)
    v_occ = float(np.sum(d * model.r))
    v_bell = float(model.d1 @ V[0])
    scale = max(1.0, abs(v_occ))
    if abs(v_occ - v_bell) > IDENTITY_TOL * scale:
        raise ArithmeticError(f"occupancy and Bellman routes disagree: {v_occ!r} vs {v_bell!r}")
    return ValueFunctions(Q=Q, V=V, v=v_occ, v_bellman=v_bell, occupancy=OccupancyTable(d))


def occupancy(mdp: TabularMDP, pi: Policy) -> OccupancyTable:
    check_dims(mdp, pi)
    return OccupancyTable(forward_occupancy(mdp.P, mdp.d1, pi.probs))


def policy_value(mdp: TabularMDP, pi: Policy) -> ValueFunctions:
    return evaluate(mdp, pi)


def d_min(mdp: TabularMDP, mu: Policy) -> tuple[float, tuple[int, int, int]]:
    """Smallest strictly positive behaviour occupancy and its ``(t, s, a)``.

    Zero cells (unreachable states, actions ``mu`` never takes) are ignored.
    """
    d = occupancy(mdp, mu).d
    positive = d > 0
    if not positive.any():
        raise ValueError("every occupancy entry is zero; d_min is undefined")
    masked = np.where(positive, d, np.inf)
    flat = int(np.argmin(masked))
    t, s, a = np.unravel_index(flat, d.shape)
    return float(d[t, s, a]), (int(t), int(s), int(a))


def random_mdp(
    S: int,
    A: int,
    H: int,
    rng: np.random.Generator,
    *,
    noise: str = "deterministic",
    concentration: float = 1.0,
) -> TabularMDP:
    """Dirichlet transitions, uniform mean rewards and initial distribution."""
    P = rng.dirichlet(np.full(S, concentration), size=(H - 1, S, A))
    if H == 1:
        P = np.zeros((0, S, A, S))
    r = rng.uniform(0.0, 1.0, size=(H, S, A))
    d1 = rng.dirichlet(np.ones(S))
    return TabularMDP(P=P, r=r, d1=d1, noise=noise)


def random_policy(S: int, A: int, H: int, rng: np.random.Generator, *, floor: float = 0.0) -> Policy:
    """Random stochastic policy; ``floor`` mixes in the uniform policy for coverage."""
    p = rng.dirichlet(np.ones(A), size=(H, S))
    p = (1.0 - floor) * p + floor / A
    return Policy(p / p.sum(axis=-1, keepdims=True))


def save_mdp(mdp: TabularMDP, path, metadata: dict | None = None) -> None:
    doc = mdp.to_dict()
    if metadata is not None:
        doc["metadata"] = metadata
    Path(path).write_text(json.dumps(doc))


def load_mdp(path) -> tuple[TabularMDP, dict]:
    """Load an MDP document; returns ``(mdp, metadata)`` with ``{}`` if absent."""
    doc = json.loads(Path(path).read_text())
    return TabularMDP.from_dict(doc), doc.get("metadata", {})


def save_policy(pi: Policy, path) -> None:
    Path(path).write_text(json.dumps(pi.to_dict()))


def load_policy(path) -> Policy:
    return Policy.from_dict(json.loads(Path(path).read_text()))
