import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabular_ope.mdp import (
    DimensionError,
    Policy,
    TabularMDP,
    d_min,
    evaluate,
    load_mdp,
    load_policy,
    occupancy,
    random_mdp,
    random_policy,
    save_mdp,
    save_policy,
    validate,
)


def tree_value(mdp, pi):
    """Expected return by enumerating every trajectory."""
    H, S, A = mdp.H, mdp.S, mdp.A
    total = 0.0
    for traj in itertools.product(range(S), range(A), repeat=H):
        s = traj[0::2]
        a = traj[1::2]
        p = mdp.d1[s[0]]
        for t in range(H):
            p *= pi.probs[t, s[t], a[t]]
            if t < H - 1:
                p *= mdp.P[t, s[t], a[t], s[t + 1]]
        if p:
            total += p * sum(mdp.r[t, s[t], a[t]] for t in range(H))
    return total


@pytest.mark.parametrize("seed", range(6))
def test_evaluate_matches_trajectory_tree(seed):
    g = np.random.default_rng(seed)
    S, A, H = [(2, 2, 3), (3, 2, 3), (2, 3, 4)][seed % 3]
    mdp = random_mdp(S, A, H, g)
    pi = random_policy(S, A, H, g)
    res = evaluate(mdp, pi)
    assert res.v == pytest.approx(tree_value(mdp, pi), abs=1e-12)
    assert res.v_bellman == pytest.approx(res.v, abs=1e-12)


def test_single_step_value():
    mdp = TabularMDP(P=np.zeros((0, 2, 2, 2)), r=[[[0.2, 0.8], [1.0, 0.0]]], d1=[0.25, 0.75])
    pi = Policy.from_actions([[1, 0]], 2)
    assert evaluate(mdp, pi).v == pytest.approx(0.25 * 0.8 + 0.75 * 1.0)


def test_validate_names_broken_cells():
    g = np.random.default_rng(0)
    m = random_mdp(2, 2, 3, g)
    P = m.P.copy()
    P[1, 0, 1, 0] += 0.1
    bad = TabularMDP(P=P, r=m.r, d1=m.d1)
    msgs = validate(bad)
    assert msgs == [f"row-sum at (t=1, s=0, a=1): {P[1, 0, 1].sum()!r}"]
    r = m.r.copy()
    r[2, 1, 0] = 1.5
    assert validate(TabularMDP(P=m.P, r=r, d1=m.d1))[0].startswith("reward-range at (t=2, s=1, a=0)")
    assert validate(TabularMDP(P=m.P, r=m.r, d1=[0.7, 0.7]))[0].startswith("initial-sum")


def test_shape_errors():
    with pytest.raises(DimensionError):
        TabularMDP(P=np.zeros((3, 2, 2, 2)), r=np.zeros((3, 2, 2)), d1=[0.5, 0.5])
    g = np.random.default_rng(0)
    with pytest.raises(DimensionError):
        evaluate(random_mdp(2, 2, 3, g), Policy.uniform(4, 2, 2))


def test_arrays_are_read_only(rng):
    m = random_mdp(2, 2, 2, rng)
    with pytest.raises(ValueError):
        m.P[0, 0, 0, 0] = 1.0


def test_d_min_location():
    P = np.zeros((1, 2, 2, 2))
    P[0, :, :, 0] = 1.0
    mdp = TabularMDP(P=P, r=np.zeros((2, 2, 2)), d1=[0.9, 0.1])
    mu = Policy(np.array([[[0.5, 0.5], [0.2, 0.8]], [[0.5, 0.5], [0.5, 0.5]]]))
    val, loc = d_min(mdp, mu)
    # step 1 never reaches state 1, so its zero mass is ignored
    assert loc == (0, 1, 0)
    assert val == pytest.approx(0.02)


def test_round_trip(tmp_path, rng):
    m = random_mdp(3, 2, 4, rng, noise="bernoulli")
    save_mdp(m, tmp_path / "m.json", {"tag": 1})
    m2, meta = load_mdp(tmp_path / "m.json")
    assert meta == {"tag": 1}
    assert m2.fingerprint() == m.fingerprint() and m2.noise == "bernoulli"
    assert np.array_equal(m2.P, m.P)
    for pi in (random_policy(3, 2, 4, rng), Policy.from_actions(rng.integers(2, size=(4, 3)), 2)):
        save_policy(pi, tmp_path / "p.json")
        assert np.array_equal(load_policy(tmp_path / "p.json").probs, pi.probs)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 4), st.integers(1, 6))
def test_occupancy_and_value_invariants(seed, S, A, H):
    g = np.random.default_rng(seed)
    mdp = random_mdp(S, A, H, g)
    pi = random_policy(S, A, H, g)
    d = occupancy(mdp, pi).d
    assert np.allclose(d.sum(axis=(1, 2)), 1.0, atol=1e-12)
    assert (d >= 0).all()
    res = evaluate(mdp, pi)
    assert -1e-12 <= res.v <= H + 1e-12
    assert np.all(res.V <= (H - np.arange(H))[:, None] + 1e-12)
