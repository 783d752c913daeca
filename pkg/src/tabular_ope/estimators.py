"""Model-based off-policy evaluation on the empirical MDP.

The empirical model uses the plain count ratios: ``P_hat = n_sas / n_sa`` and
``r_hat = reward_sum / n_sa`` where visited, and exactly zero rows where
``n_sa = 0``. Zero rows make the plug-in occupancies sub-stochastic; every
evaluation routine handles them as zero continuation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import EpisodeDataset, visit_counts
from .mdp import Policy, TabularMDP, ValueFunctions, check_dims, evaluate, occupancy


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    P: np.ndarray
    r: np.ndarray
    d1: np.ndarray
    n_sa: np.ndarray
    n_sas: np.ndarray
    n: int

    def __post_init__(self):
        for name in ("P", "r", "d1", "n_sa", "n_sas"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def H(self) -> int:
        return self.r.shape[0]

    @property
    def S(self) -> int:
        return self.r.shape[1]

    @property
    def A(self) -> int:
        return self.r.shape[2]

    @property
    def visited(self) -> np.ndarray:
        return self.n_sa > 0

    def to_dict(self) -> dict:
        return {
            "H": self.H, "S": self.S, "A": self.A,
            "P": self.P.tolist(), "r": self.r.tolist(), "d1": self.d1.tolist(),
            "noise": "deterministic",
            "counts": {"n": self.n, "sa": self.n_sa.tolist(), "sas": self.n_sas.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalModel":
        H, S, A = int(d["H"]), int(d["S"]), int(d["A"])
        c = d["counts"]
        return cls(
            P=np.array(d["P"], dtype=np.float64).reshape(H - 1, S, A, S),
            r=np.array(d["r"], dtype=np.float64),
            d1=np.array(d["d1"], dtype=np.float64),
            n_sa=np.array(c["sa"], dtype=np.int64),
            n_sas=np.array(c["sas"], dtype=np.int64).reshape(H - 1, S, A, S),
            n=int(c["n"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def estimate_model(ds: EpisodeDataset) -> EmpiricalModel:
    if ds.n < 1:
        raise ValueError("cannot estimate a model from an empty dataset")
    c = visit_counts(ds)
    n_sa = c.n_sa
    with np.errstate(invalid="ignore", divide="ignore"):
        r_hat = np.where(n_sa > 0, c.reward_sum / n_sa, 0.0)
        denom = n_sa[:-1, :, :, None]
        P_hat = np.where(denom > 0, c.n_sas / denom, 0.0)
    d1_hat = c.n_init / ds.n
    return EmpiricalModel(P=P_hat, r=r_hat, d1=d1_hat, n_sa=n_sa, n_sas=c.n_sas, n=ds.n)


def opema_value(model: EmpiricalModel, pi: Policy) -> ValueFunctions:
    """Plug-in value ``sum_t <d_hat_t, r_hat_t>`` plus the Bellman tables on the model.

    Raises ``ArithmeticError`` if the occupancy and Bellman routes disagree.
    """
    return evaluate(model, pi)


def fictitious_model(model: EmpiricalModel, truth: TabularMDP, mu: Policy) -> EmpiricalModel:
    """Copy of ``model`` with true ``(P, r)`` substituted at under-sampled cells.

    A cell ``(t, s, a)`` keeps its empirical row when
    ``n_sa >= n * d_mu[t, s, a] / 2`` and takes the truth otherwise. For test
    use only, since it needs the true MDP.
    """
    if truth is None:
        raise ValueError("the fictitious estimator needs the true MDP")
    check_dims(truth, mu)
    d_mu = occupancy(truth, mu).d
    keep = model.n_sa >= model.n * d_mu / 2.0
    r = np.where(keep, model.r, truth.r)
    P = np.where(keep[:-1, :, :, None], model.P, truth.P)
    return EmpiricalModel(P=P, r=r, d1=model.d1, n_sa=model.n_sa, n_sas=model.n_sas, n=model.n)


def fictitious_value(model: EmpiricalModel, truth: TabularMDP, mu: Policy, pi: Policy) -> ValueFunctions:
    return evaluate(fictitious_model(model, truth, mu), pi)


def split_tmis(ds: EpisodeDataset, pi: Policy, fold_size: int, *, seed: int | None = None) -> float:
    """Average of OPEMA estimates over ``n / fold_size`` disjoint folds.

    Folds are contiguous blocks of episode indices; pass ``seed`` to shuffle
    the assignment first.
    """
    if fold_size < 1 or ds.n % fold_size:
        raise ValueError(f"fold size {fold_size} does not divide n = {ds.n}")
    order = np.arange(ds.n)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(ds.n)
    folds = order.reshape(-1, fold_size)
    values = [opema_value(estimate_model(ds.subset(idx)), pi).v for idx in folds]
    return float(np.mean(values))
