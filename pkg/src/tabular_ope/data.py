"""Offline episode datasets logged by a behaviour policy."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._rng import as_key
from .mdp import Policy, TabularMDP, check_dims, validate, validate_policy


@dataclass(frozen=True, eq=False)
class EpisodeDataset:
    """``n`` trajectories of length ``H``.

    ``states[i, t]``, ``actions[i, t]`` and ``rewards[i, t]`` are the logged
    ``(s_t, a_t, r_t)``; the next state of step ``t`` is ``states[i, t + 1]``
    and the last step has no successor.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    S: int
    A: int
    seed: int | None = None
    mdp_fingerprint: str | None = None

    def __post_init__(self):
        for name, dtype in (("states", np.int64), ("actions", np.int64), ("rewards", np.float64)):
            a = np.array(getattr(self, name), dtype=dtype, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.states.shape == self.actions.shape == self.rewards.shape) or self.states.ndim != 2:
            raise ValueError("states, actions and rewards must share one (n, H) shape")

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def H(self) -> int:
        return self.states.shape[1]

    def subset(self, idx) -> "EpisodeDataset":
        idx = np.asarray(idx)
        return EpisodeDataset(
            self.states[idx], self.actions[idx], self.rewards[idx], self.S, self.A,
            seed=self.seed, mdp_fingerprint=self.mdp_fingerprint,
        )

    def header(self) -> dict:
        return {
            "n": self.n, "H": self.H, "S": self.S, "A": self.A,
            "seed": self.seed, "fingerprint": self.mdp_fingerprint,
        }


@dataclass(frozen=True, eq=False)
class VisitCounts:
    """``n_sa[t, s, a]``, ``n_sas[t, s, a, s']`` (transitions out of step ``t``),
    reward sums per cell and initial-state counts."""

    n_sa: np.ndarray
    n_sas: np.ndarray
    reward_sum: np.ndarray
    n_init: np.ndarray


def _noise_code(noise: str) -> int:
    return _kernels.NOISE_BERNOULLI if noise == "bernoulli" else _kernels.NOISE_DETERMINISTIC


def rollout(mdp: TabularMDP, mu: Policy, n: int, seed: int, *, first: int = 0) -> EpisodeDataset:
    """Roll out ``n`` i.i.d. episodes of ``mu`` in ``mdp``.

    Episode ``first + i`` draws its randomness from the substream keyed by
    ``(seed, first + i)``, so ``rollout(..., n=a+b)`` equals the concatenation of
    ``rollout(..., n=a)`` and ``rollout(..., n=b, first=a)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    check_dims(mdp, mu)
    problems = validate(mdp) + validate_policy(mu)
    if problems:
        raise ValueError("invalid inputs: " + "; ".join(problems[:5]))
    states, actions, rewards = _kernels.rollout(
        _kernels.cumulative(mdp.P),
        _kernels.cumulative(mdp.d1),
        _kernels.cumulative(mu.probs),
        mdp.r,
        _noise_code(mdp.noise),
        as_key(seed),
        n,
        first,
    )
    return EpisodeDataset(states, actions, rewards, mdp.S, mdp.A, seed=int(seed), mdp_fingerprint=mdp.fingerprint())


def visit_counts(ds: EpisodeDataset) -> VisitCounts:
    n_sa, n_sas, r_sum, n_init = _kernels.tally(ds.states, ds.actions, ds.rewards, ds.S, ds.A)
    return VisitCounts(n_sa=n_sa, n_sas=n_sas, reward_sum=r_sum, n_init=n_init)


def save_dataset(ds: EpisodeDataset, path) -> None:
    """JSON-lines: a header object, then one ``{states, actions, rewards}`` object per episode."""
    with open(path, "w") as f:
        f.write(json.dumps(ds.header()) + "\n")
        for i in range(ds.n):
            rec = {
                "states": ds.states[i].tolist(),
                "actions": ds.actions[i].tolist(),
                "rewards": ds.rewards[i].tolist(),
            }
            f.write(json.dumps(rec) + "\n")


def load_dataset(path) -> EpisodeDataset:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    head = json.loads(lines[0])
    recs = [json.loads(line) for line in lines[1:] if line.strip()]
    if len(recs) != head["n"]:
        raise ValueError(f"{path}: header says n={head['n']} but found {len(recs)} episodes")
    H = int(head["H"])
    if recs:
        states = np.array([r["states"] for r in recs], dtype=np.int64)
        actions = np.array([r["actions"] for r in recs], dtype=np.int64)
        rewards = np.array([r["rewards"] for r in recs], dtype=np.float64)
    else:
        states = actions = np.zeros((0, H), dtype=np.int64)
        rewards = np.zeros((0, H))
    if states.shape[1:] != (H,):
        raise ValueError(f"{path}: episodes do not all have length H={H}")
    return EpisodeDataset(
        states, actions, rewards, int(head["S"]), int(head["A"]),
        seed=head.get("seed"), mdp_fingerprint=head.get("fingerprint"),
    )
