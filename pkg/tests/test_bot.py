import numpy as np
import pytest

from playtrace import bot, oracle, world


def test_rollout_length_and_determinism():
    t1 = bot.rollout(np.random.default_rng(4))
    t2 = bot.rollout(np.random.default_rng(4))
    assert len(t1) == world.T_STEPS
    assert t1 == t2


def test_all_kinds_appear():
    kinds = set()
    for seed in range(400):
        _, sc = bot.rollout_with_scenario(np.random.default_rng(seed))
        kinds.add(sc.kind)
        if kinds == set(bot.SCENARIO_KINDS):
            break
    assert kinds == set(bot.SCENARIO_KINDS)


def test_past_flag_frequency():
    rng = np.random.default_rng(0)
    flags = []
    for _ in range(10000):
        state = world.init_world(rng)
        flags.append(bot.sample_scenario(state, rng).past_flag)
    freq = np.mean(flags)
    assert abs(freq - 0.5) < 0.02


def test_sample_scenario_feasibility_filter():
    rng = np.random.default_rng(1)
    state = world.init_world(rng, required=[("door", None), ("desk", None), ("sofa", None)])
    for _ in range(50):
        sc = bot.sample_scenario(state, rng)
        assert sc.kind in ("grasp", "shake")


def test_sample_scenario_deterministic():
    state = world.init_world(np.random.default_rng(2))
    a = bot.sample_scenario(state, np.random.default_rng(3))
    b = bot.sample_scenario(state, np.random.default_rng(3))
    assert a == b


def test_grow_pairs_respect_partner_rules():
    rng = np.random.default_rng(5)
    state = world.init_world(rng, required=[("bush", None), ("food", None), ("door", None)])
    assert bot._grow_pairs(state) == []  # food does not feed plants
    state = world.init_world(rng, required=[("bush", None), ("water", None), ("door", None)])
    assert (0, 1) in bot._grow_pairs(state)
    state = world.init_world(rng, required=[("cow", None), ("food", None), ("door", None)])
    assert (0, 1) in bot._grow_pairs(state)


@pytest.mark.parametrize("seed", range(40))
def test_scenario_contract(seed):
    trace, sc = bot.rollout_with_scenario(np.random.default_rng(1000 + seed))
    view = oracle.TraceView(trace)
    timeline = view.pred[oracle._PRED_INDEX[sc.kind], sc.target_index]
    if sc.past_flag:
        assert timeline[:-1].any() and not timeline[-1]
    else:
        assert timeline[-1]


@pytest.mark.parametrize("kind,type_name", [("grasp", "door"), ("shake", "cat"), ("grow", "cow"), ("grow", "algae")])
@pytest.mark.parametrize("past", [False, True])
def test_targeted_requests(kind, type_name, past):
    req = bot.ScenarioRequest(kind, type_name, "blue", past)
    trace, sc = bot.rollout_with_scenario(np.random.default_rng(9), req)
    first = trace.steps[0].objects[0]
    assert first.type_name == type_name
    assert world.color_word_of(first.rgb) == "blue"
    assert bot.scenario_satisfied(trace, sc)


def test_request_for_non_growable_fails():
    req = bot.ScenarioRequest("grow", "door", "red", False)
    with pytest.raises(bot.RolloutBudgetError):
        bot.rollout_with_scenario(np.random.default_rng(0), req, max_retries=3)
