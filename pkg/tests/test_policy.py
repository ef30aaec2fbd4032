import json

import numpy as np
import pytest

from aoimfc.policy import (
    AlwaysSend,
    ConstantRate,
    DecisionRule,
    ObsModel,
    PolicyFormatError,
    ScriptedPolicy,
    Snapshot,
    Threshold,
    UpperPolicy,
    Variant,
    act,
    act_all,
    build_observation,
    evaluate_upper,
    fixed_act,
    load_policy,
    obs_dim,
    policy_from_dict,
    reward,
    save_policy,
)


def two_agent_snapshot(**kw):
    base = dict(aoi=np.array([1.0, 3.0]), m1=np.array([1.0, 0.0]), m2=np.array([0.0, 1.0]),
                unacked=np.array([1.0, 1.0]), load=1.0, observed_load=np.array([1.0, 0.5]))
    base.update(kw)
    return Snapshot(**base)


def test_pomfc_true_state_example():
    o = build_observation("pomfc", "true-state", two_agent_snapshot())
    np.testing.assert_allclose(o.payload, [2, 0.5, 0.5, 1, 0.5, 0.5, 1.0])


def test_identical_agents_have_zero_spread():
    snap = Snapshot(aoi=np.full(4, 2.0), m1=np.ones(4), m2=np.zeros(4), unacked=np.ones(4),
                    load=0.5, observed_load=np.full(4, 0.5))
    o = build_observation("pomfc", "true-state", snap).payload
    assert o[3] == o[4] == o[5] == 0.0


def test_exact_belief_reproduces_true_aoi_entries():
    snap = two_agent_snapshot(belief_mean=np.array([1.0, 3.0]), belief_std=np.zeros(2))
    t = build_observation("pomfc", "true-state", snap).payload
    b = build_observation("pomfc", "avg-belief", snap).payload
    assert (b[0], b[3]) == (t[0], t[3])
    np.testing.assert_allclose(b[[1, 2, 4, 5, 6]], [1, 1, 0, 0, 0.75])


@pytest.mark.parametrize("model,variant", [("na", "true-state"), ("na-dec", "true-state"),
                                           ("na", "avg-belief"), ("na-dec", "avg-belief")])
def test_layout_dimensions(model, variant):
    snap = two_agent_snapshot(belief_mean=np.array([1.5, 2.5]))
    o = build_observation(model, variant, snap)
    assert o.payload.shape == (obs_dim(model, 2),)


def test_na_dec_particles_layout():
    parts = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])
    o = build_observation("na-dec-particles", "avg-belief", two_agent_snapshot(particles=parts)).payload
    np.testing.assert_array_equal(o, [0, 1, 2, 1, 1.0, 3, 4, 5, 1, 0.5])
    assert o.size == obs_dim("na-dec-particles", 2, 3)


def test_belief_observation_requires_beliefs():
    with pytest.raises(ValueError):
        build_observation("pomfc", "avg-belief", two_agent_snapshot())


def test_pomfc_is_permutation_invariant():
    rng = np.random.default_rng(0)
    n = 30
    snap = Snapshot(aoi=rng.exponential(2, n), m1=rng.integers(0, 3, n).astype(float),
                    m2=rng.integers(0, 3, n).astype(float), unacked=rng.integers(0, 4, n).astype(float),
                    load=0.4, observed_load=rng.random(n), belief_mean=rng.exponential(2, n))
    perm = rng.permutation(n)
    shuffled = Snapshot(aoi=snap.aoi[perm], m1=snap.m1[perm], m2=snap.m2[perm], unacked=snap.unacked[perm],
                        load=0.4, observed_load=snap.observed_load[perm], belief_mean=snap.belief_mean[perm])
    for variant in Variant:
        np.testing.assert_allclose(build_observation("pomfc", variant, snap).payload,
                                   build_observation("pomfc", variant, shuffled).payload, rtol=1e-12)


@pytest.mark.parametrize("p,expected", [(1.0, 1), (0.0, 0)])
def test_act_deterministic_levels(p, expected):
    rule = DecisionRule(np.array([p, 0.5]))
    rng = np.random.default_rng(0)
    assert all(act(rule, 0, rng) == expected for _ in range(200))


def test_act_rate():
    rule = DecisionRule(np.full(16, 0.5))
    rng = np.random.default_rng(7)
    rate = np.mean([act(rule, 3, rng) for _ in range(10_000)])
    assert abs(rate - 0.5) <= 0.02
    assert abs(act_all(rule, np.full(10_000, 3), rng).mean() - 0.5) <= 0.02


def test_decision_rule_validates():
    with pytest.raises(ValueError):
        DecisionRule(np.array([0.5, 1.2]))


def test_static_zero_gives_half():
    rule = evaluate_upper(UpperPolicy.static(np.zeros(16)), None)
    np.testing.assert_array_equal(rule.probs, 0.5)


def test_linear_saturates_and_is_deterministic():
    pol = UpperPolicy.linear(np.zeros((16, 7)), np.full(16, 50.0))
    o = build_observation("pomfc", "true-state", two_agent_snapshot())
    h1, h2 = evaluate_upper(pol, o).probs, evaluate_upper(pol, o).probs
    np.testing.assert_array_equal(h1, h2)
    assert (h1 > 1 - 1e-12).all()
    with pytest.raises(ValueError):
        evaluate_upper(UpperPolicy.linear(np.zeros((16, 5)), np.zeros(16)), o)


def test_flat_round_trip():
    pol = UpperPolicy.linear(np.arange(14.0).reshape(2, 7), np.array([1.0, -1.0]))
    again = pol.with_flat(pol.flat())
    np.testing.assert_array_equal(again.weights, pol.weights)
    np.testing.assert_array_equal(again.bias, pol.bias)
    assert pol.n_params == 16
    with pytest.raises(ValueError):
        pol.with_flat(np.zeros(3))


def test_constant_rate_exact_senders():
    rng = np.random.default_rng(0)
    for epoch in range(50):
        a = fixed_act(ConstantRate(0.5), np.zeros(10), rng, epoch)
        assert a.sum() == 5
    assert ConstantRate(0.5).n_senders(7) == 4


def test_constant_rate_one_matches_always_send():
    x = np.arange(12.0)
    a = fixed_act(ConstantRate(1.0), x, np.random.default_rng(3))
    np.testing.assert_array_equal(a, fixed_act(AlwaysSend(), x, np.random.default_rng(3)))


def test_threshold():
    np.testing.assert_array_equal(fixed_act(Threshold(4), np.array([5.0, 3.0, 4.0]), None), [True, False, False])


def test_threshold_is_a_static_rule():
    # Threshold α on integer AoI levels is the 0/1 rule h[l] = [l > α]
    alpha, q = 3, 16
    rule = DecisionRule((np.arange(q) > alpha).astype(float))
    x = np.array([0.0, 2.0, 3.0, 3.0, 4.0, 7.0, 20.0])
    levels = np.minimum(np.floor(x), q - 1).astype(int)
    np.testing.assert_array_equal(act_all(rule, levels, np.random.default_rng(0)), fixed_act(Threshold(alpha), x, None))


def test_scripted_policy():
    pol = ScriptedPolicy(np.array([[1, 0], [0, 1]]))
    np.testing.assert_array_equal(fixed_act(pol, np.zeros(2), None, 1), [False, True])
    np.testing.assert_array_equal(fixed_act(pol, np.zeros(2), None, 5), [False, False])


@pytest.mark.parametrize("x,drops,expected", [([1, 3], 0, -2.0), ([1, 3], 2, -3.0), ([0, 0], 0, 0.0)])
def test_reward(x, drops, expected):
    assert reward(np.array(x, dtype=float), drops, 1.0) == expected


@pytest.mark.parametrize("policy", [
    UpperPolicy.static(np.linspace(-2, 2, 16)),
    UpperPolicy.linear(np.random.default_rng(0).normal(size=(16, 7)), np.zeros(16), variant="avg-belief"),
    ConstantRate(0.3), AlwaysSend(), Threshold(2.5),
])
def test_policy_file_round_trip(tmp_path, policy):
    path = tmp_path / "p.json"
    save_policy(policy, str(path))
    back = load_policy(str(path))
    if isinstance(policy, UpperPolicy):
        np.testing.assert_array_equal(back.flat(), policy.flat())
        assert (back.kind, back.model, back.variant) == (policy.kind, policy.model, policy.variant)
    else:
        assert back == policy


@pytest.mark.parametrize("doc", [{}, {"format": "aoimfc-policy", "version": 9, "kind": "static"},
                                 {"format": "aoimfc-policy", "version": 1, "kind": "mystery"},
                                 {"format": "aoimfc-policy", "version": 1, "kind": "static", "levels": 16}])
def test_bad_policy_documents(doc):
    with pytest.raises(PolicyFormatError):
        policy_from_dict(doc)


def test_policy_file_not_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("nope")
    with pytest.raises(PolicyFormatError):
        load_policy(str(p))
