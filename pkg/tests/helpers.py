"""Shared generators for randomized tests.

Everything takes an explicit Generator so each test controls its seed.
"""

from __future__ import annotations

import numpy as np

from prefgame import (
    GameInstance,
    PairwisePreference,
    ResponseSpace,
    RewardTable,
    TabularPolicy,
)


def random_policy(rng: np.random.Generator, sizes, interior: bool = True) -> TabularPolicy:
    """Random rows; interior keeps every entry at least ~0.05/k."""
    rows = []
    for k in sizes:
        row = rng.random(k) + (0.05 if interior else 0.0)
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))


def random_preference(rng: np.random.Generator, sizes) -> PairwisePreference:
    mats = []
    for k in sizes:
        m = np.full((k, k), 0.5)
        for a in range(k):
            for b in range(a + 1, k):
                p = rng.random()
                m[a, b] = p
                m[b, a] = 1.0 - p
        mats.append(m)
    return PairwisePreference(tuple(mats))


def fd_logit_gradient(problem, logits, step: float = 1e-5):
    """Central finite differences of a logit problem, one coordinate at a time."""
    from prefgame import PolicyLogits

    grads = []
    for x in range(len(logits.rows)):
        g = np.zeros(len(logits.rows[x]))
        for i in range(len(g)):
            plus = [r.copy() for r in logits.rows]
            minus = [r.copy() for r in logits.rows]
            plus[x][i] += step
            minus[x][i] -= step
            g[i] = (
                problem.value(PolicyLogits(tuple(plus)))
                - problem.value(PolicyLogits(tuple(minus)))
            ) / (2.0 * step)
        grads.append(g)
    return grads


def fd_reward_gradient(rewards, data, step: float = 1e-5):
    """Central finite differences of pl_nll over every reward entry."""
    from prefgame import RewardTable as RT
    from prefgame import pl_nll

    grads = []
    for x in range(len(rewards.rows)):
        g = np.zeros(len(rewards.rows[x]))
        for i in range(len(g)):
            plus = [r.copy() for r in rewards.rows]
            minus = [r.copy() for r in rewards.rows]
            plus[x][i] += step
            minus[x][i] -= step
            g[i] = (
                pl_nll(RT(tuple(plus)), data) - pl_nll(RT(tuple(minus)), data)
            ) / (2.0 * step)
        grads.append(g)
    return grads


def max_grad_rel_error(analytic, numeric) -> float:
    """Max-norm deviation over max-norm scale, floored so zero grads pass."""
    dev = max(float(np.max(np.abs(a - n))) for a, n in zip(analytic, numeric))
    scale = max(max(float(np.max(np.abs(a))) for a in analytic), 1e-12)
    return dev / scale


def random_instance(
    rng: np.random.Generator,
    num_prompts: int | None = None,
    max_responses: int = 5,
    with_rewards: bool = True,
) -> GameInstance:
    n = int(rng.integers(1, 4)) if num_prompts is None else num_prompts
    sizes = [int(rng.integers(2, max_responses + 1)) for _ in range(n)]
    labels = tuple(tuple(f"r{x}_{y}" for y in range(k)) for x, k in enumerate(sizes))
    weights = rng.random(n) + 0.1
    weights /= weights.sum()
    reward = None
    if with_rewards:
        reward = RewardTable(tuple(rng.normal(size=k) for k in sizes))
    return GameInstance(
        prompt_weights=weights,
        space=ResponseSpace(labels),
        reference=random_policy(rng, sizes),
        preference=random_preference(rng, sizes),
        reward=reward,
    )
