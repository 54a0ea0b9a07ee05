"""Group advantages, filtering, the clipped surrogate and its toy-policy gradient."""

import numpy as np
import pytest

from arena import Role
from grpo import (
    EmptyBatch, TokenBatch, ZeroVariance, advantage_group, batch_objective, clipped_surrogate,
    dynamic_filter, group_advantages, is_degenerate, multi_group_objective, toy_policy_gradient,
    zero_advantage_group,
)
from policy import ToyPolicy, ToyPolicyParams, toy_vocabulary
from rollout import Group, run_episode, sample_group


def test_advantages_normalize():
    mu, sigma, adv = group_advantages([1, 0, 1, 0])
    assert mu == 0.5 and sigma == 0.5
    assert adv == [1.0, -1.0, 1.0, -1.0]

    _, _, adv = group_advantages([1, 0, 0, 0])
    assert sum(adv) == pytest.approx(0.0)
    assert np.std(adv) == pytest.approx(1.0)
    assert adv[0] == pytest.approx(np.sqrt(3))


def test_advantage_edge_cases():
    with pytest.raises(ZeroVariance):
        group_advantages([1, 1, 1])
    with pytest.raises(ValueError):
        group_advantages([1])


def test_advantage_invariances():
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = rng.random(8)
        _, _, base = group_advantages(r)
        _, _, shifted = group_advantages(r + 3.0)
        _, _, scaled = group_advantages(r * 5.0)
        np.testing.assert_allclose(base, shifted, atol=1e-12)
        np.testing.assert_allclose(base, scaled, atol=1e-12)
        assert sum(base) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("ratio, adv, expected", [
    (1.0, 2.0, 2.0),
    (1.5, 1.0, 1.2),
    (0.5, 1.0, 0.5),
    (1.5, -1.0, -1.5),
    (0.5, -1.0, -0.8),
])
def test_clipped_surrogate(ratio, adv, expected):
    assert clipped_surrogate(ratio, adv, 0.2) == pytest.approx(expected)


def test_clipped_surrogate_rejects_nonpositive_ratio():
    with pytest.raises(ValueError):
        clipped_surrogate([1.0, 0.0], [1.0, 1.0], 0.2)


def test_clipped_surrogate_never_exceeds_unclipped():
    rng = np.random.default_rng(1)
    ratio = rng.uniform(0.1, 3.0, 200)
    adv = rng.normal(size=200)
    out = clipped_surrogate(ratio, adv, 0.2)
    assert np.all(out <= ratio * adv + 1e-12)


def toy_group(env, task, policy, user, rewards):
    trajectories = [run_episode(env, task, policy, user, 8, seed=i) for i in range(len(rewards))]
    return Group(task_id=task.id, trajectories=trajectories, rewards=list(rewards))


@pytest.fixture
def toy_policy(toy_domain):
    vocab = toy_vocabulary(toy_domain.registry.names)
    return ToyPolicy(ToyPolicyParams.zeros(vocab, 64), max_len=3)


def test_dynamic_filter(toy_env, toy_tasks, toy_policy, toy_user):
    task = toy_tasks[0]
    flat = toy_group(toy_env, task, toy_policy, toy_user, [1.0, 1.0])
    mixed = toy_group(toy_env, task, toy_policy, toy_user, [1.0, 0.0])
    assert is_degenerate(flat) and not is_degenerate(mixed)
    assert dynamic_filter([flat, mixed]) == [mixed]
    with pytest.raises(EmptyBatch):
        dynamic_filter([flat])


def test_zero_advantage_group(toy_env, toy_tasks, toy_policy, toy_user):
    flat = toy_group(toy_env, toy_tasks[0], toy_policy, toy_user, [0.0, 0.0, 0.0])
    advantaged = zero_advantage_group(flat)
    assert advantaged.advantages == [0.0, 0.0, 0.0]
    assert flat.advantages == [0.0, 0.0, 0.0]


def test_token_batch_counts_agent_tokens_only(toy_env, toy_tasks, toy_policy, toy_user):
    group = toy_group(toy_env, toy_tasks[0], toy_policy, toy_user, [1.0, 0.0, 0.0, 1.0])
    advantaged = advantage_group(group)
    batch = TokenBatch.from_group(advantaged, toy_policy.params)
    assert batch.total_tokens == sum(t.agent_token_count() for t in group.trajectories)
    assert batch.total_tokens > 0
    for trajectory in group.trajectories:
        for record in trajectory.turns_by(Role.USER):
            assert not record.token_ids
    np.testing.assert_allclose(batch.ratios(), 1.0)
    assert set(batch.advantages) <= set(advantaged.advantages)
    rows = batch.records()
    assert set(rows[0]) == {"traj_id", "turn", "pos", "old_logprob", "advantage"}


def test_on_policy_objective_equals_mean_advantage_per_token(toy_env, toy_tasks, toy_policy, toy_user):
    group = toy_group(toy_env, toy_tasks[0], toy_policy, toy_user, [1.0, 0.0, 1.0, 0.0])
    batch = TokenBatch.from_group(advantage_group(group), toy_policy.params)
    expected = float(np.sum(batch.advantages)) / batch.total_tokens
    assert batch_objective(batch) == pytest.approx(expected)
    assert multi_group_objective([batch, TokenBatch()]) == pytest.approx(expected)


def test_empty_batches():
    with pytest.raises(EmptyBatch):
        batch_objective(TokenBatch())
    with pytest.raises(EmptyBatch):
        multi_group_objective([TokenBatch()])


def central_difference(batch, params, rows, step=1e-5):
    grad = np.zeros_like(params.logits)
    for row in rows:
        for col in range(params.size):
            saved = params.logits[row, col]
            params.logits[row, col] = saved + step
            up = batch_objective(batch.rescored(params))
            params.logits[row, col] = saved - step
            down = batch_objective(batch.rescored(params))
            params.logits[row, col] = saved
            grad[row, col] = (up - down) / (2 * step)
    return grad


def test_gradient_matches_finite_difference(toy_env, toy_tasks, toy_policy, toy_user):
    group = toy_group(toy_env, toy_tasks[0], toy_policy, toy_user, [1.0, 0.0, 0.0, 1.0, 0.0])
    batch = TokenBatch.from_group(advantage_group(group), toy_policy.params)
    rows = np.unique(batch.features)
    rng = np.random.default_rng(2)
    for _ in range(100):
        moved = toy_policy.params.copy()
        moved.logits[rows] += rng.normal(scale=0.02, size=(len(rows), moved.size))
        assert np.all(np.abs(batch.rescored(moved).ratios() - 1.0) < 0.2)
        analytic = toy_policy_gradient(batch, moved)
        numeric = central_difference(batch, moved, rows)
        error = np.linalg.norm(numeric[rows] - analytic[rows]) / np.linalg.norm(analytic[rows])
        assert error < 1e-4


def test_gradient_is_zero_outside_used_features(toy_env, toy_tasks, toy_policy, toy_user):
    group = toy_group(toy_env, toy_tasks[0], toy_policy, toy_user, [1.0, 0.0, 1.0])
    batch = TokenBatch.from_group(advantage_group(group), toy_policy.params)
    grad = toy_policy_gradient(batch, toy_policy.params)
    unused = np.setdiff1d(np.arange(toy_policy.params.n_features), batch.features)
    assert np.all(grad[unused] == 0.0)


def test_sampled_group_rewards_feed_advantages(toy_env, toy_tasks, alternating, toy_user, toy_verifier):
    task = toy_tasks[0]
    group = sample_group(toy_env, task, 4, alternating, toy_user, 0, 12,
                         toy_verifier.reward_fn(toy_verifier.spec_for(task.id)))
    advantaged = advantage_group(group)
    assert advantaged.advantages == [1.0, -1.0, 1.0, -1.0]
