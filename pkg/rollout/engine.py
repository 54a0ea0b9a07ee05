"""Turn-taking episode driver and group sampler."""

from typing import Callable, List, Optional

from arena.environment import Environment
from arena.task import TaskSpec
from arena.types import EMPTY, Role, Termination, ToolCall
from policy.base import Policy
from policy.parsing import to_action
from system.logs import get_logger, kv
from system.seeding import derive_seed
from system.workers import WorkerPool

from .trajectory import Group, Trajectory, TurnRecord

logger = get_logger(__name__)

RewardFn = Callable[[Trajectory], float]


def run_episode(env: Environment, task: TaskSpec, agent_policy: Policy, user_policy: Policy,
                max_turns: int, seed: int) -> Trajectory:
    """Run one episode to termination.

    The user opens. Exactly one party acts per turn; a tool call keeps control
    with its caller, any other action hands control to the other party.
    Policy and environment failures end the episode with reason ``error``.

    Args:
        env: Environment over the task's domain
        task: Task to run
        agent_policy, user_policy: Policies; each episode works on forks
        max_turns: Turn limit, >= 1
        seed: Episode seed

    Returns:
        Trajectory whose final state is terminal

    Raises:
        ValueError: max_turns < 1
        FixtureError, UnknownDomainEntity: the task does not fit the domain
    """
    if max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    agent = agent_policy.fork()
    user = user_policy.fork()
    agent.begin_episode(seed)
    user.begin_episode(seed)

    state = env.reset(task, seed)
    initial = state
    turns: List[TurnRecord] = []
    error: Optional[str] = None
    acting = Role.USER

    while not state.terminal:
        if state.turn >= max_turns:
            state = env.terminate(state, Termination.MAX_TURNS)
            break
        policy = user if acting is Role.USER else agent
        try:
            obs = env.observe(state, acting)
            output = policy.next_action(obs, derive_seed(seed, state.turn, acting.value))
            action = to_action(output.parsed, acting, output.raw_text)
            joint = (EMPTY, action) if acting is Role.USER else (action, EMPTY)
            turn = state.turn
            state, result = env.step(state, joint)
        except Exception as e:  # episodes are total: any failure ends the episode
            error = f"{type(e).__name__}: {e}"
            logger.warning("episode failed: %s %s", error, kv(task=task.id, seed=seed))
            state = env.terminate(state, Termination.ERROR)
            break
        turns.append(TurnRecord(
            turn=turn,
            actor=acting,
            raw_text=output.raw_text,
            parsed=output.parsed,
            token_ids=output.token_ids,
            token_logprobs=output.token_logprobs,
            tool_result=result,
            context=output.context,
        ))
        if not isinstance(action, ToolCall):
            acting = acting.other

    return Trajectory(
        task_id=task.id,
        seed=seed,
        turns=turns,
        initial_state=initial,
        final_state=state,
        termination=state.meta.reason,
        error=error,
        domain=env.domain.name,
        agent_id=agent.name,
        user_id=user.name,
    )


def sample_group(env: Environment, task: TaskSpec, group_size: int, agent_policy: Policy,
                 user_policy: Policy, base_seed: int, max_turns: int,
                 reward_fn: Optional[RewardFn] = None,
                 pool: Optional[WorkerPool] = None) -> Group:
    """Sample ``group_size`` independent episodes with seeds base_seed..base_seed+G-1.

    Args:
        reward_fn: Scores each trajectory, usually ``Verifier.reward``; errored
            episodes always score 0
        pool: Worker pool for running episodes concurrently

    Raises:
        ValueError: group_size < 2
    """
    if group_size < 2:
        raise ValueError("group_size must be >= 2")
    seeds = [base_seed + i for i in range(group_size)]

    def episode(seed: int) -> Trajectory:
        trajectory = run_episode(env, task, agent_policy, user_policy, max_turns, seed)
        if trajectory.termination == Termination.ERROR.value:
            trajectory.reward = 0.0
        elif reward_fn is not None:
            trajectory.reward = float(reward_fn(trajectory))
        return trajectory

    runner = pool or WorkerPool(1)
    trajectories = runner.map(episode, seeds)
    rewards = [t.reward if t.reward is not None else 0.0 for t in trajectories]
    logger.debug("sampled group %s", kv(task=task.id, base_seed=base_seed,
                                        mean_reward=round(sum(rewards) / len(rewards), 4)))
    return Group(task_id=task.id, trajectories=trajectories, rewards=rewards, base_seed=base_seed)
