"""Preference objectives over tabular policies.

Win rates, KL terms, the two-player and n-player game values, and the
KL-regularized reward objectives with their closed-form optimum. All
expectations are exact sums; nothing here samples.

The n-player value of a policy against a set of opponents is

    J(pi) = E_x E_{y ~ pi, y_j ~ pi_j} [ P(y beats {y_j} | x) ] - tau * KL(pi || ref)

where the one-vs-many probability P is set by the aggregator: mean of
pairwise oracle wins, or a Plackett-Luce softmax over the pooled rewards.
The Plackett-Luce case needs the full product of opponent supports, so it
is guarded by an enumeration cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .instances import (
    GameInstance,
    RewardTable,
    PairwisePreference,
    SupportViolation,
    TabularPolicy,
)

# Upper bound on exact-enumeration work, in weighted tuples per call.
ENUMERATION_CAP = 10**7


class EnumerationCapExceeded(RuntimeError):
    """Exact enumeration would exceed the configured tuple cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(
            f"exact enumeration needs {size} weighted tuples, cap is {cap}"
        )


@dataclass(frozen=True)
class Aggregator:
    """How one response is scored against many opponents at once.

    kind "mean_pairwise" averages the pairwise oracle win probabilities;
    kind "plackett_luce" plays the response against the pooled opponent
    draws under a reward softmax and needs a reward table on the instance.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("mean_pairwise", "plackett_luce"):
            raise ValueError(f"unknown aggregator kind {self.kind!r}")


MEAN_PAIRWISE = Aggregator("mean_pairwise")
PLACKETT_LUCE = Aggregator("plackett_luce")


# ---------------------------------------------------------------------------
# elementary quantities


def win_rate_vs_policy(
    preference: PairwisePreference,
    prompt: int,
    response: int,
    policy: TabularPolicy,
) -> float:
    """Probability that `response` beats a draw from `policy` on `prompt`."""
    return float(preference.matrices[prompt][response] @ policy.rows[prompt])


def kl_divergence(
    policy: TabularPolicy, base: TabularPolicy, instance: GameInstance
) -> float:
    """Prompt-averaged KL(policy || base) with the 0 log 0 = 0 convention."""
    total = 0.0
    for x in range(instance.num_prompts):
        p = policy.rows[x]
        q = base.rows[x]
        on = p > 0.0
        if np.any(on & (q == 0.0)):
            y = int(np.argmax(on & (q == 0.0)))
            raise SupportViolation(x, y, "KL against a zero-probability response")
        total += instance.prompt_weights[x] * float(
            np.sum(p[on] * (np.log(p[on]) - np.log(q[on])))
        )
    return total


def pl_one_vs_many(
    rewards: RewardTable, prompt: int, response: int, others: Sequence[int]
) -> float:
    """Plackett-Luce win probability of `response` against a response pool.

    others is a nonempty multiset of response indices not containing
    `response`. Computed with a max shift so large rewards stay finite.
    """
    if len(others) == 0:
        raise ValueError("pl_one_vs_many needs a nonempty pool")
    if response in others:
        raise ValueError("pool must not contain the response itself")
    row = rewards.rows[prompt]
    scores = np.concatenate(([row[response]], row[list(others)]))
    scores = scores - scores.max()
    e = np.exp(scores)
    return float(e[0] / e.sum())


def mean_pairwise_one_vs_many(
    preference: PairwisePreference,
    prompt: int,
    response: int,
    opponents: Sequence[TabularPolicy],
) -> float:
    """Average pairwise win rate of `response` against each opponent policy."""
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    return float(
        np.mean([win_rate_vs_policy(preference, prompt, response, o) for o in opponents])
    )


# ---------------------------------------------------------------------------
# one-vs-many win tables


def _pl_win_row(
    rewards_row: np.ndarray, opponents_rows: list[np.ndarray]
) -> np.ndarray:
    """W[y] = E_{y_j ~ pi_j} [ e^{r_y} / (e^{r_y} + sum_j e^{r_{y_j}}) ]."""
    r = rewards_row - rewards_row.max()
    e = np.exp(r)
    k = len(r)
    supports = [np.flatnonzero(row > 0.0) for row in opponents_rows]
    w = np.zeros(k)
    for tup in product(*supports):
        weight = 1.0
        denom = 0.0
        for row, y in zip(opponents_rows, tup):
            weight *= row[y]
            denom += e[y]
        w += weight * (e / (e + denom))
    return w


def expected_win_rates(
    instance: GameInstance,
    opponents: Sequence[TabularPolicy],
    aggregator: Aggregator = MEAN_PAIRWISE,
    max_tuples: int = ENUMERATION_CAP,
) -> list[np.ndarray]:
    """Per-prompt vectors W[x][y] = one-vs-many win probability of y.

    mean_pairwise factorizes into matrix-vector products; plackett_luce
    enumerates the product of opponent supports and respects max_tuples.
    """
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    if aggregator.kind == "mean_pairwise":
        out = []
        for x in range(instance.num_prompts):
            m = instance.preference.matrices[x]
            out.append(
                np.mean([m @ o.rows[x] for o in opponents], axis=0)
            )
        return out

    if instance.reward is None:
        raise ValueError("plackett_luce aggregator needs a reward table")
    size = 0
    for x, k in enumerate(instance.space.sizes):
        tuples = 1
        for o in opponents:
            tuples *= int(np.count_nonzero(o.rows[x] > 0.0))
        size += tuples * k
    if size > max_tuples:
        raise EnumerationCapExceeded(size, max_tuples)
    return [
        _pl_win_row(instance.reward.rows[x], [o.rows[x] for o in opponents])
        for x in range(instance.num_prompts)
    ]


# ---------------------------------------------------------------------------
# game values


def two_player_objective(
    first: TabularPolicy,
    second: TabularPolicy,
    instance: GameInstance,
    tau: float = 0.0,
) -> float:
    """Zero-sum-plus-regularization value of `first` against `second`.

    E_x [ P(first beats second) ] - tau KL(first || ref) + tau KL(second || ref).
    Antisymmetric around 1/2: J(p, q) + J(q, p) = 1, and J(p, p) = 1/2.
    """
    total = 0.0
    for x in range(instance.num_prompts):
        m = instance.preference.matrices[x]
        total += instance.prompt_weights[x] * float(
            first.rows[x] @ m @ second.rows[x]
        )
    if tau != 0.0:
        total -= tau * kl_divergence(first, instance.reference, instance)
        total += tau * kl_divergence(second, instance.reference, instance)
    return total


def multiplayer_objective(
    policy: TabularPolicy,
    opponents: Sequence[TabularPolicy],
    instance: GameInstance,
    tau: float = 0.0,
    aggregator: Aggregator = MEAN_PAIRWISE,
    max_tuples: int = ENUMERATION_CAP,
) -> float:
    """n-player value of `policy` holding the opponents fixed.

    Only the player's own KL penalty appears; opponents' penalties belong
    to their own objectives.
    """
    win = expected_win_rates(instance, opponents, aggregator, max_tuples)
    total = 0.0
    for x in range(instance.num_prompts):
        total += instance.prompt_weights[x] * float(policy.rows[x] @ win[x])
    if tau != 0.0:
        total -= tau * kl_divergence(policy, instance.reference, instance)
    return total


# ---------------------------------------------------------------------------
# reward objectives


def regularized_reward_objective(
    policy: TabularPolicy,
    rewards: RewardTable,
    instance: GameInstance,
    tau: float,
) -> float:
    """E_x E_pi [ r(x, y) ] - tau KL(policy || ref)."""
    total = 0.0
    for x in range(instance.num_prompts):
        total += instance.prompt_weights[x] * float(
            policy.rows[x] @ rewards.rows[x]
        )
    return total - tau * kl_divergence(policy, instance.reference, instance)


def multi_teacher_objective(
    policy: TabularPolicy,
    rewards: RewardTable,
    reference: TabularPolicy,
    teachers: Sequence[TabularPolicy],
    tau_ref: float,
    taus: Sequence[float],
    instance: GameInstance,
) -> float:
    """Reward minus a KL anchor to the reference and to each teacher."""
    if len(teachers) != len(taus):
        raise ValueError("need one tau per teacher")
    total = 0.0
    for x in range(instance.num_prompts):
        total += instance.prompt_weights[x] * float(
            policy.rows[x] @ rewards.rows[x]
        )
    total -= tau_ref * kl_divergence(policy, reference, instance)
    for teacher, t in zip(teachers, taus):
        total -= t * kl_divergence(policy, teacher, instance)
    return total


def closed_form_multi_teacher_optimum(
    rewards: RewardTable,
    reference: TabularPolicy,
    teachers: Sequence[TabularPolicy],
    tau_ref: float,
    taus: Sequence[float],
) -> TabularPolicy:
    """Exact maximizer of multi_teacher_objective.

    pi*(y) is proportional to exp(r(y)/tau) ref(y)^(tau_ref/tau) times the
    product of teacher(y)^(tau_i/tau) with tau = tau_ref + sum tau_i > 0.
    Anchors with zero coefficient do not constrain the support; any anchor
    with positive coefficient excludes its zero-probability responses.
    """
    if len(teachers) != len(taus):
        raise ValueError("need one tau per teacher")
    if tau_ref < 0.0 or any(t < 0.0 for t in taus):
        raise ValueError("KL coefficients must be nonnegative")
    tau = tau_ref + float(np.sum(taus))
    if tau <= 0.0:
        raise ValueError("need a strictly positive total KL coefficient")

    anchors = [(tau_ref, reference)] + [(t, p) for t, p in zip(taus, teachers)]
    rows = []
    for x in range(reference.num_prompts):
        with np.errstate(divide="ignore"):
            logit = rewards.rows[x] / tau
            for coeff, anchor in anchors:
                if coeff > 0.0:
                    logit = logit + (coeff / tau) * np.log(anchor.rows[x])
        if not np.any(np.isfinite(logit)):
            raise ValueError(f"prompt {x}: anchors share no support")
        logit = logit - np.max(logit[np.isfinite(logit)])
        row = np.exp(logit)
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))
