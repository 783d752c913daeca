"""Bandit-embedded hard instances and their coverage-gated extension.

Bandit family (state indices ``0 = g``, ``1 = b``, ``2 .. S-1`` bandit states),
horizon ``2 * H_half``, levels ``t = 0 .. 2*H_half - 1``:

* levels ``t < H_half - 1``: a bandit state stays on its chain with
  probability ``1 - 1/H_half``; otherwise it moves to ``g`` or ``b``, with
  odds ``1/2 + tau`` against ``1/2 - tau`` under its best arm and even odds
  under any other arm. ``g`` and ``b`` are absorbing.
* later levels copy every state to itself.
* reward 1 at ``g`` on levels ``t >= H_half`` (exactly ``H_half`` rewarded
  levels), 0 everywhere else.

Reaching ``g`` from any bandit level therefore earns exactly ``H_half``, so a
wrong arm at bandit level ``h`` (1-based) loses
``(1/S) (1 - 1/H_half)^(h-1) tau``.

The gated variant prepends ``s0`` (index 0 at ``t = 0``) and ``s_yes``
(index 0 at ``t = 1``) and appends an absorbing zero-reward ``s_no`` (index
``S``). The behaviour policy reaches ``s_yes`` with probability
``d_m * S * A / 2`` and is uniform afterwards.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .mdp import Policy, TabularMDP, occupancy, validate
from .planning import backward_induction

TAU_MAX = math.sqrt(1.0 / 8.0)
G, B = 0, 1


@dataclass(frozen=True)
class BanditMDPSpec:
    H_half: int
    S: int
    A: int
    tau: float
    d_m: float | None = None

    @property
    def gated(self) -> bool:
        return self.d_m is not None

    def problems(self) -> list[str]:
        out = []
        if self.S < 3:
            out.append(f"S must be >= 3 (g, b and at least one bandit state), got {self.S}")
        if self.A < 2:
            out.append(f"A must be >= 2, got {self.A}")
        if self.H_half < 2:
            out.append(f"H_half must be >= 2, got {self.H_half}")
        if not 0.0 <= self.tau <= TAU_MAX:
            out.append(f"tau must lie in [0, sqrt(1/8)], got {self.tau}")
        if self.d_m is not None and not 0.0 < self.d_m <= 1.0 / (self.S * self.A):
            out.append(f"d_m must lie in (0, 1/(S*A)] = (0, {1.0 / (self.S * self.A)}], got {self.d_m}")
        return out

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))


def draw_best_arms(spec: BanditMDPSpec, seed: int) -> np.ndarray:
    """Best arm per ``(bandit level, bandit state)``, shape ``(H_half - 1, S - 2)``."""
    rng = np.random.default_rng(seed)
    return rng.integers(spec.A, size=(spec.H_half - 1, spec.S - 2))


def _bandit_tables(spec: BanditMDPSpec, best_arms: np.ndarray):
    Hh, S, A, tau = spec.H_half, spec.S, spec.A, spec.tau
    H = 2 * Hh
    eye = np.eye(S)
    P = np.broadcast_to(eye[None, :, None, :], (H - 1, S, A, S)).copy()
    stay = 1.0 - 1.0 / Hh
    for t in range(Hh - 1):
        for i in range(S - 2):
            s = 2 + i
            row = np.zeros(S)
            row[s] = stay
            row[G] = row[B] = 0.5 / Hh
            P[t, s, :] = row
            P[t, s, best_arms[t, i], G] = (0.5 + tau) / Hh
            P[t, s, best_arms[t, i], B] = (0.5 - tau) / Hh
    r = np.zeros((H, S, A))
    r[Hh:, G, :] = 1.0
    d1 = np.full(S, 1.0 / S)
    return P, r, d1


def build_bandit_mdp(spec: BanditMDPSpec, seed: int = 0) -> tuple[TabularMDP, dict]:
    spec.check()
    best = draw_best_arms(spec, seed)
    P, r, d1 = _bandit_tables(spec, best)
    meta = {
        "family": "bandit",
        "H_half": spec.H_half, "S": spec.S, "A": spec.A, "tau": spec.tau, "d_m": None,
        "offset": 0, "best_arms": best.tolist(), "seed": seed,
    }
    return TabularMDP(P=P, r=r, d1=d1), meta


def build_gated_mdp(spec: BanditMDPSpec, seed: int = 0) -> tuple[TabularMDP, Policy, dict]:
    """Gated instance with ``S + 1`` states and horizon ``2 * H_half + 2``, plus its behaviour policy."""
    spec.check()
    if not spec.gated:
        raise ValueError("build_gated_mdp needs spec.d_m")
    S, A, Hh = spec.S, spec.A, spec.H_half
    best = draw_best_arms(spec, seed)
    Pb, rb, d1b = _bandit_tables(spec, best)
    no = S
    S2, H2 = S + 1, 2 * Hh + 2
    P = np.broadcast_to(np.eye(S2)[None, :, None, :], (H2 - 1, S2, A, S2)).copy()
    # s0 -> s_yes under a_1, s_no otherwise
    P[0, 0, :] = 0.0
    P[0, 0, 0, 0] = 1.0
    P[0, 0, 1:, no] = 1.0
    # s_yes -> first level of the bandit family
    P[1, 0, :, :] = 0.0
    P[1, 0, :, :S] = d1b
    P[2:, :S, :, :S] = Pb
    r = np.zeros((H2, S2, A))
    r[2:, :S] = rb
    d1 = np.zeros(S2)
    d1[0] = 1.0
    gate = spec.d_m * S * A / 2.0
    mu = np.full((H2, S2, A), 1.0 / A)
    mu[0, 0] = 0.0
    mu[0, 0, 0] = gate
    mu[0, 0, 1] = 1.0 - gate
    meta = {
        "family": "gated",
        "H_half": Hh, "S": S, "A": A, "tau": spec.tau, "d_m": spec.d_m,
        "offset": 2, "best_arms": best.tolist(), "seed": seed,
        "mu": mu.tolist(),
    }
    return TabularMDP(P=P, r=r, d1=d1), Policy(mu), meta


def single_flip_loss(spec: BanditMDPSpec, h: int) -> float:
    """Closed-form value loss of playing a wrong arm at one bandit state on 1-based level ``h``."""
    Hh = spec.H_half
    return (1.0 / (Hh * spec.S)) * (1.0 - 1.0 / Hh) ** (h - 1) * spec.tau * Hh


@dataclass
class Check:
    status: str  # "pass", "fail" or "degenerate"
    detail: str = ""
    location: tuple | None = None


@dataclass
class HardInstanceReport:
    checks: dict[str, Check] = field(default_factory=dict)
    min_q_gap: float | None = None
    min_occupancy: float | None = None
    min_state_occupancy: float | None = None

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "min_q_gap": self.min_q_gap,
            "min_occupancy": self.min_occupancy,
            "min_state_occupancy": self.min_state_occupancy,
            "checks": {k: {"status": c.status, "detail": c.detail, "location": c.location} for k, c in self.checks.items()},
        }


def _structure(mdp: TabularMDP, meta: dict) -> Check:
    Hh, S, off = meta["H_half"], meta["S"], meta["offset"]
    P = mdp.P
    for t in range(off, mdp.H - 1):
        level = t - off
        for s in range(S) if level >= Hh - 1 else (G, B):
            for a in range(mdp.A):
                if P[t, s, a, s] != 1.0:
                    kind = "absorbing" if s in (G, B) else "copy"
                    return Check("fail", f"{kind} row broken", (t, s, a))
    if meta["family"] == "gated":
        no = S
        for t in range(1, mdp.H - 1):
            for a in range(mdp.A):
                if P[t, no, a, no] != 1.0:
                    return Check("fail", "s_no is not absorbing", (t, no, a))
    return Check("pass")


def verify_hard_instance(
    mdp: TabularMDP,
    mu: Policy | None,
    meta: dict,
    *,
    floor_fraction: float = 0.25,
) -> HardInstanceReport:
    """Structural checks on a built instance.

    ``row_stochastic``: transition rows and ``d1`` are distributions.
    ``structure``: ``g``, ``b`` (and ``s_no``) absorbing, copy levels identity.
    ``occupancy_floor``: every positive behaviour occupancy ``d_t(s, a)`` is at
    least ``floor_fraction * d_m`` (gated instances only).
    ``best_arms``: backward induction picks the recorded best arm at every
    bandit state with a strictly positive Q-gap; ``tau = 0`` is reported as
    degenerate instead.
    """
    rep = HardInstanceReport()
    problems = validate(mdp)
    rep.checks["row_stochastic"] = (
        Check("fail", problems[0], _location(problems[0])) if problems else Check("pass")
    )
    rep.checks["structure"] = _structure(mdp, meta)

    if mu is not None:
        d = occupancy(mdp, mu).d
        pos = d > 0
        rep.min_occupancy = float(d[pos].min())
        ds = d.sum(-1)
        rep.min_state_occupancy = float(ds[ds > 0].min())
        d_m = meta.get("d_m")
        if d_m:
            threshold = floor_fraction * d_m
            masked = np.where(pos, d, np.inf)
            t, s, a = np.unravel_index(int(np.argmin(masked)), d.shape)
            status = "pass" if rep.min_occupancy >= threshold else "fail"
            rep.checks["occupancy_floor"] = Check(
                status,
                f"min positive occupancy {rep.min_occupancy:.6g} = {rep.min_occupancy / d_m:.4f} d_m "
                f"(required {floor_fraction} d_m)",
                (int(t), int(s), int(a)),
            )

    plan = backward_induction(mdp)
    best = np.asarray(meta["best_arms"])
    off, Hh, A = meta["offset"], meta["H_half"], mdp.A
    gaps = []
    wrong = None
    for lvl in range(Hh - 1):
        t = off + lvl
        for i in range(best.shape[1]):
            s = 2 + i
            q = plan.Qstar[t, s]
            a_star = int(best[lvl, i])
            others = np.delete(q, a_star)
            gaps.append(q[a_star] - others.max())
            if wrong is None and plan.policy.actions()[t, s] != a_star:
                wrong = (t, s, a_star)
    rep.min_q_gap = float(min(gaps)) if gaps else None
    if meta["tau"] == 0:
        rep.checks["best_arms"] = Check("degenerate", "tau = 0: every arm is optimal, Q-gap is zero")
    elif wrong is not None or rep.min_q_gap <= 0:
        rep.checks["best_arms"] = Check("fail", f"optimal policy misses a best arm (min Q-gap {rep.min_q_gap})", wrong)
    else:
        rep.checks["best_arms"] = Check("pass", f"min Q-gap {rep.min_q_gap:.6g}")
    return rep


def _location(msg: str):
    nums = re.findall(r"=(\d+)", msg.split(":")[0])
    return tuple(int(x) for x in nums) or None
