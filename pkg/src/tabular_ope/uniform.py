"""Uniform-convergence measurements over enumerable policy classes.

Deterministic policies are enumerated as ``(H, S)`` action tables in
lexicographic order (row-major over ``(t, s)``, last cell varying fastest) and
evaluated in vectorised batches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .mdp import Policy, backward_values, check_dims, evaluate, forward_occupancy
from .planning import MEMBERSHIP_TOL, backward_induction

ENUMERATION_CAP = 10**7
_CHUNK = 1 << 15

GLOBAL = "global"
LOCAL = "local"
FIXED = "fixed"


class EnumerationCapExceeded(ValueError):
    pass


def class_count(S: int, A: int, H: int) -> int:
    return A ** (H * S)


def _check_cap(S, A, H, cap):
    count = class_count(S, A, H)
    if count > cap:
        raise EnumerationCapExceeded(
            f"A^(H*S) = {A}^{H * S} = {count} deterministic policies exceeds the cap of {cap}"
        )
    return count


def action_tables(S: int, A: int, H: int, *, cap: int = ENUMERATION_CAP, chunk: int = _CHUNK) -> Iterator[np.ndarray]:
    """Yield ``(m, H, S)`` blocks of action tables covering all ``A^(H*S)`` policies in order."""
    count = _check_cap(S, A, H, cap)
    L = H * S
    place = A ** np.arange(L - 1, -1, -1, dtype=np.int64)
    for start in range(0, count, chunk):
        k = np.arange(start, min(start + chunk, count), dtype=np.int64)
        yield ((k[:, None] // place) % A).reshape(-1, H, S)


def enumerate_deterministic(S: int, A: int, H: int, *, cap: int = ENUMERATION_CAP) -> Iterator[Policy]:
    for block in action_tables(S, A, H, cap=cap):
        for table in block:
            yield Policy.from_actions(table, A)


def batch_values(model, tables: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bellman evaluation of many deterministic policies at once.

    Returns ``(v, V, Q1)`` with shapes ``(m,)``, ``(m, H, S)``, ``(m, S, A)``.
    """
    m, H, S = tables.shape
    V = np.empty((m, H, S))
    nxt = np.zeros((m, S))
    Q = None
    for t in range(H - 1, -1, -1):
        if t < H - 1:
            # explicit last-axis sum: per-row rounding does not depend on the batch size
            Q = model.r[t][None] + (model.P[t][None] * nxt[:, None, None, :]).sum(axis=-1)
        else:
            Q = np.broadcast_to(model.r[t], (m, S, model.A))
        V[:, t] = np.take_along_axis(Q, tables[:, t, :, None], axis=-1)[..., 0]
        nxt = V[:, t]
    return (V[:, 0] * model.d1).sum(axis=-1), V, Q


@dataclass(frozen=True, eq=False)
class SupremumReport:
    policy_class: str
    eps_opt: float | None
    sup_value_gap: float
    sup_q_gap: float
    argmax_policy: Policy
    class_size: int

    def to_dict(self) -> dict:
        return {
            "policy_class": self.policy_class,
            "eps_opt": self.eps_opt,
            "sup_value_gap": self.sup_value_gap,
            "sup_q_gap": self.sup_q_gap,
            "argmax_policy": self.argmax_policy.to_dict(),
            "class_size": self.class_size,
        }


def sup_error(
    truth,
    model,
    policy_class: str = GLOBAL,
    *,
    eps_opt: float | None = None,
    pi: Policy | None = None,
    cap: int = ENUMERATION_CAP,
) -> SupremumReport:
    """Exact ``sup |v_hat - v|`` and ``sup ||Q_hat_1 - Q_1||_inf`` over a policy class.

    ``policy_class`` is ``"global"`` (all deterministic policies), ``"local"``
    (deterministic policies within ``eps_opt`` of the model's optimum at every
    step) or ``"fixed"`` (the single policy ``pi``). The first maximiser in
    lexicographic order wins ties.
    """
    if (truth.H, truth.S, truth.A) != (model.H, model.S, model.A):
        raise ValueError("truth and model dimensions differ")
    if policy_class == FIXED:
        if pi is None:
            raise ValueError("the fixed class needs a policy")
        check_dims(truth, pi)
        if pi.deterministic:
            # same arithmetic as the enumerated classes, so class sups compare exactly
            table = pi.actions()[None]
            v_hat, _, Q_hat = batch_values(model, table)
            v_true, _, Q_true = batch_values(truth, table)
            gap, qgap = abs(v_hat[0] - v_true[0]), np.abs(Q_hat[0] - Q_true[0]).max()
        else:
            est, tru = evaluate(model, pi), evaluate(truth, pi)
            gap, qgap = abs(est.v - tru.v), np.abs(est.Q[0] - tru.Q[0]).max()
        return SupremumReport(FIXED, None, float(gap), float(qgap), pi, 1)
    if policy_class == LOCAL:
        if eps_opt is None or eps_opt < 0:
            raise ValueError("the local class needs eps_opt >= 0")
        Vstar = backward_induction(model).Vstar
    elif policy_class != GLOBAL:
        raise ValueError(f"unknown policy class {policy_class!r}")

    H, S, A = truth.H, truth.S, truth.A
    best_v = best_q = -np.inf
    best_table = None
    size = 0
    for tables in action_tables(S, A, H, cap=cap):
        v_hat, V_hat, Q_hat = batch_values(model, tables)
        if policy_class == LOCAL:
            keep = np.abs(V_hat - Vstar[None]).max(axis=(1, 2)) <= eps_opt + MEMBERSHIP_TOL * H
            if not keep.any():
                continue
            tables, v_hat, Q_hat = tables[keep], v_hat[keep], Q_hat[keep]
        v_true, _, Q_true = batch_values(truth, tables)
        gap = np.abs(v_hat - v_true)
        qgap = np.abs(Q_hat - Q_true).max(axis=(1, 2))
        size += len(tables)
        k = int(np.argmax(gap))
        if gap[k] > best_v:
            best_v, best_table = float(gap[k]), tables[k]
        best_q = max(best_q, float(qgap.max()))
    if best_table is None:
        raise RuntimeError("policy class is empty")
    return SupremumReport(
        policy_class, eps_opt, best_v, best_q, Policy.from_actions(best_table, A), size
    )


@dataclass(frozen=True, eq=False)
class DecompositionCheck:
    terms: np.ndarray
    total: float
    lhs: float
    residual: float


def martingale_decomposition_check(truth, model, pi: Policy) -> DecompositionCheck:
    """Compare ``sum_t <d_hat_t - d_t, r_t>`` with its step-wise decomposition.

    ``terms[0] = <V_1, d_hat_1 - d_1>`` over states and, for ``h >= 1``,
    ``terms[h] = <V_{h+1}, (T_hat - T) d_hat_h>`` where ``T`` maps a
    state-action distribution at step ``h`` to the next-state distribution.
    ``V`` and ``r`` are the true ones; ``model`` may be the raw or the
    fictitious empirical model.
    """
    check_dims(truth, pi)
    check_dims(model, pi)
    d_hat = forward_occupancy(model.P, model.d1, pi.probs)
    d = forward_occupancy(truth.P, truth.d1, pi.probs)
    _, V = backward_values(truth.P, truth.r, pi.probs)
    H = truth.H
    terms = np.empty(H)
    terms[0] = V[0] @ (model.d1 - truth.d1)
    for h in range(1, H):
        push_hat = np.einsum("sax,sa->x", model.P[h - 1], d_hat[h - 1])
        push = np.einsum("sax,sa->x", truth.P[h - 1], d_hat[h - 1])
        terms[h] = V[h] @ (push_hat - push)
    lhs = float(np.sum((d_hat - d) * truth.r))
    total = float(terms.sum())
    return DecompositionCheck(terms=terms, total=total, lhs=lhs, residual=abs(total - lhs))


@dataclass(frozen=True, eq=False)
class ErmCheck:
    learning_gap: float
    bound: float
    holds: bool


def erm_check(truth, model, *, tol: float = 1e-10, cap: int = ENUMERATION_CAP) -> ErmCheck:
    """``v* - v^{pi_hat}`` on the truth against ``2 sup_pi |v_hat - v|`` (deterministic class).

    ``tol`` only absorbs floating-point rounding; the inequality is exact.
    """
    pi_hat = backward_induction(model).policy
    pi_star = backward_induction(truth).policy
    gap = evaluate(truth, pi_star).v - evaluate(truth, pi_hat).v
    bound = 2.0 * sup_error(truth, model, GLOBAL, cap=cap).sup_value_gap
    return ErmCheck(learning_gap=float(gap), bound=float(bound), holds=bool(gap <= bound + tol))


def transition_l1_error(truth, model) -> float:
    """``max`` L1 distance between model and true rows, initial distribution included.

    Unvisited (all-zero) empirical rows count at their full distance of 1.
    """
    eps = float(np.abs(model.d1 - truth.d1).sum())
    if truth.H > 1:
        eps = max(eps, float(np.abs(model.P - truth.P).sum(axis=-1).max()))
    return eps


def simulation_lemma_bound(truth, model) -> float:
    """Classical model-error bound ``H^2 eps_P + H eps_r`` on ``|v_hat^pi - v^pi|`` for every ``pi``.

    ``eps_r`` is the largest mean-reward error; it vanishes for deterministic
    rewards on fully visited models, leaving the familiar ``H^2 eps_P``.
    """
    H = truth.H
    eps_r = float(np.abs(model.r - truth.r).max())
    return H * H * transition_l1_error(truth, model) + H * eps_r
