"""Finite-horizon planning on true or empirical models.

All-zero rows of an empirical model contribute zero continuation value, the
same convention the estimators use. Ties between actions go to the lowest
action index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import Policy, backward_values, check_dims

# per-step slack on eps_opt comparisons, absorbs summation-order rounding
MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PlanResult:
    policy: Policy
    Qstar: np.ndarray
    Vstar: np.ndarray
    eps_opt_achieved: float

    def to_dict(self) -> dict:
        return {
            "H": self.policy.H, "S": self.policy.S, "A": self.policy.A,
            "actions": self.policy.actions().tolist(),
            "eps_opt_achieved": self.eps_opt_achieved,
            "value_table": self.Vstar.tolist(),
        }


def backward_induction(model) -> PlanResult:
    """Exact optimal deterministic policy in one backward sweep."""
    H, S, A = model.H, model.S, model.A
    Q = np.empty((H, S, A))
    V = np.empty((H, S))
    act = np.empty((H, S), dtype=np.int64)
    nxt = np.zeros(S)
    for t in range(H - 1, -1, -1):
        Q[t] = model.r[t] + (model.P[t] @ nxt if t < H - 1 else 0.0)
        act[t] = np.argmax(Q[t], axis=-1)
        V[t] = Q[t].max(axis=-1)
        nxt = V[t]
    return PlanResult(Policy.from_actions(act, A), Q, V, 0.0)


def value_gaps(model, pi: Policy, Vstar: np.ndarray) -> np.ndarray:
    """Per-step sup-norm gaps ``max_s |V^pi_t(s) - V*_t(s)|`` on ``model``."""
    check_dims(model, pi)
    _, V = backward_values(model.P, model.r, pi.probs)
    return np.abs(V - Vstar).max(axis=-1)


def local_membership(model, pi: Policy, eps_opt: float, *, plan: PlanResult | None = None) -> tuple[bool, np.ndarray]:
    """Whether ``pi`` lies within ``eps_opt`` of the model's optimal policy at every step.

    Returns ``(member, gaps)`` with ``gaps[t]`` the sup-norm value gap at step ``t``.
    """
    plan = plan or backward_induction(model)
    gaps = value_gaps(model, pi, plan.Vstar)
    return bool(np.all(gaps <= eps_opt + MEMBERSHIP_TOL * model.H)), gaps


def improve(model, pi: Policy) -> Policy:
    """One greedy improvement step with respect to ``Q^pi`` (lowest-index ties)."""
    Q, _ = backward_values(model.P, model.r, pi.probs)
    return Policy.from_actions(np.argmax(Q, axis=-1), model.A)


def policy_iteration(model, init: Policy | None = None, *, max_iter: int | None = None) -> PlanResult:
    """Howard policy iteration; converges in at most ``H`` sweeps for finite horizon.

    Kept as a cross-check on :func:`backward_induction`. A sweep keeps the
    current action whenever it attains the maximum, so the loop cannot cycle
    between tied policies. A stochastic ``init`` is first replaced by its greedy
    improvement.
    """
    H, S, A = model.H, model.S, model.A
    pi = init or Policy.from_actions(np.zeros((H, S), dtype=np.int64), A)
    if not pi.deterministic:
        pi = improve(model, pi)
    max_iter = max_iter or H + 1
    for _ in range(max_iter):
        Q, V = backward_values(model.P, model.r, pi.probs)
        cur = pi.actions()
        best = Q.max(axis=-1)
        cur_q = np.take_along_axis(Q, cur[..., None], axis=-1)[..., 0]
        new = np.where(cur_q >= best, cur, np.argmax(Q, axis=-1))
        if np.array_equal(new, cur):
            return PlanResult(pi, Q, V, 0.0)
        pi = Policy.from_actions(new, A)
    raise RuntimeError("policy iteration did not converge")


def approx_planner(model, eps_opt_target: float, seed: int = 0) -> PlanResult:
    """A deterministic policy within ``eps_opt_target`` of optimal at every step.

    Starts from the exact optimum and visits every ``(t, s)`` once in a seeded
    random order, switching to a random other action whenever the result stays
    inside the target neighbourhood. ``eps_opt_target == 0`` returns the exact
    optimum unchanged.
    """
    if eps_opt_target < 0:
        raise ValueError("eps_opt_target must be nonnegative")
    best = backward_induction(model)
    if eps_opt_target == 0:
        return best
    H, S, A = model.H, model.S, model.A
    rng = np.random.default_rng(seed)
    act = best.policy.actions().copy()
    for flat in rng.permutation(H * S):
        t, s = divmod(int(flat), S)
        if A < 2:
            break
        alt = int(rng.integers(A - 1))
        alt += alt >= act[t, s]
        trial = act.copy()
        trial[t, s] = alt
        g = value_gaps(model, Policy.from_actions(trial, A), best.Vstar)
        if g.max() <= eps_opt_target:
            act = trial
    pi = Policy.from_actions(act, A)
    achieved = float(value_gaps(model, pi, best.Vstar).max())
    return PlanResult(pi, best.Qstar, best.Vstar, achieved)
