import numpy as np
import pytest

from tabular_ope.hard import (
    BanditMDPSpec,
    build_bandit_mdp,
    build_gated_mdp,
    single_flip_loss,
    verify_hard_instance,
)
from tabular_ope.mdp import Policy, TabularMDP, evaluate, occupancy, validate
from tabular_ope.planning import backward_induction


def test_spec_validation():
    assert BanditMDPSpec(4, 4, 2, 0.1).problems() == []
    bad = BanditMDPSpec(1, 2, 1, 0.5, d_m=1.0)
    assert len(bad.problems()) == 5
    with pytest.raises(ValueError):
        build_bandit_mdp(BanditMDPSpec(4, 2, 2, 0.1))


def test_bandit_rows_and_structure():
    spec = BanditMDPSpec(5, 5, 3, 0.2)
    mdp, meta = build_bandit_mdp(spec, seed=3)
    assert mdp.H == 10 and validate(mdp) == []
    best = np.array(meta["best_arms"])
    assert best.shape == (4, 3)
    t, i = 1, 2
    s, a = 2 + i, best[t, i]
    assert mdp.P[t, s, a, s] == pytest.approx(1 - 1 / 5)
    assert mdp.P[t, s, a, 0] == pytest.approx(0.7 / 5)
    assert mdp.P[t, s, (a + 1) % 3, 1] == pytest.approx(0.5 / 5)
    # latter half copies every state
    for t in range(4, 9):
        assert np.array_equal(mdp.P[t], np.broadcast_to(np.eye(5)[:, None, :], (5, 3, 5)))
    assert mdp.r[5:, 0].min() == 1.0 and mdp.r[:5].max() == 0.0 and mdp.r[:, 1:].max() == 0.0
    assert np.allclose(mdp.d1, 0.2)


def test_tau_zero_is_symmetric():
    mdp, meta = build_bandit_mdp(BanditMDPSpec(3, 4, 2, 0.0), seed=0)
    assert np.array_equal(mdp.P[..., 0, :], mdp.P[..., 1, :])
    v_opt = evaluate(mdp, backward_induction(mdp).policy).v
    g = np.random.default_rng(0)
    pi = Policy.from_actions(g.integers(2, size=(6, 4)), 2)
    assert evaluate(mdp, pi).v == pytest.approx(v_opt, abs=1e-12)
    rep = verify_hard_instance(mdp, None, meta)
    assert rep.checks["best_arms"].status == "degenerate" and rep.ok


def test_single_flip_small_instance():
    spec = BanditMDPSpec(3, 3, 2, 0.25)
    mdp, meta = build_bandit_mdp(spec, seed=1)
    star = backward_induction(mdp).policy.actions()
    v = evaluate(mdp, Policy.from_actions(star, 2)).v
    for h in (1, 2):
        flipped = star.copy()
        flipped[h - 1, 2] = 1 - flipped[h - 1, 2]
        assert v - evaluate(mdp, Policy.from_actions(flipped, 2)).v == pytest.approx(
            single_flip_loss(spec, h), abs=1e-12
        )


def test_gated_policy_and_gate_occupancy():
    spec = BanditMDPSpec(3, 4, 2, 0.1, d_m=1 / 8)
    mdp, mu, meta = build_gated_mdp(spec, seed=0)
    assert mdp.S == 5 and mdp.H == 8 and validate(mdp) == []
    assert mu.probs[0, 0].tolist() == [0.5, 0.5]
    spec = BanditMDPSpec(3, 4, 2, 0.1, d_m=0.01)
    mdp, mu, meta = build_gated_mdp(spec, seed=0)
    d = occupancy(mdp, mu).d
    assert d[0, 0, 0] == pytest.approx(0.01 * 4 * 2 / 2)
    # s_no is absorbing and earns nothing
    assert np.all(mdp.P[1:, 4, :, 4] == 1.0) and mdp.r[:, 4].max() == 0.0
    assert np.allclose(mu.probs[2:], 0.5)


def test_gated_needs_d_m():
    with pytest.raises(ValueError):
        build_gated_mdp(BanditMDPSpec(3, 4, 2, 0.1))


def test_verify_passes_on_built_instances():
    spec = BanditMDPSpec(2, 4, 2, 0.1, d_m=0.01)
    mdp, mu, meta = build_gated_mdp(spec, seed=5)
    rep = verify_hard_instance(mdp, mu, meta)
    assert rep.ok, rep.to_dict()
    assert rep.min_q_gap > 0
    assert rep.min_state_occupancy >= 0.01 / np.e


def test_verify_names_a_broken_row():
    mdp, mu, meta = build_gated_mdp(BanditMDPSpec(2, 4, 2, 0.1, d_m=0.01), seed=0)
    P = mdp.P.copy()
    P[3, 1, 1, 1] = 0.9
    rep = verify_hard_instance(TabularMDP(P=P, r=mdp.r, d1=mdp.d1), mu, meta)
    chk = rep.checks["row_stochastic"]
    assert chk.status == "fail" and chk.location == (3, 1, 1)
    assert rep.checks["structure"].location == (3, 1, 1)
    assert not rep.ok


def test_occupancy_floor_failure_is_located():
    mdp, mu, meta = build_gated_mdp(BanditMDPSpec(4, 4, 2, 0.1, d_m=0.01), seed=0)
    rep = verify_hard_instance(mdp, mu, meta)
    chk = rep.checks["occupancy_floor"]
    # (d_m/2)(1 - 1/H_half)^(H_half-1) at the last bandit level, below d_m/4 for H_half = 4
    assert rep.min_occupancy == pytest.approx(0.005 * 0.75**3)
    assert chk.status == "fail" and chk.location[0] == 2 + 3
    assert verify_hard_instance(mdp, mu, meta, floor_fraction=0.2).ok
