"""Best responses and equilibrium-quality diagnostics.

Two best-response routines cover the two regularization regimes. Without
a KL term the best response concentrates on the argmax of the one-vs-many
win rates (ties split uniformly); with a KL term toward the reference it
is the softmax ref(y) * exp(W(y) / tau), which stays inside the reference
support by construction.

The diagnostics reduce a policy's equilibrium quality to a single number:
the two-player duality gap, and for n players the unilateral-deviation
exploitability against n - 1 copies of the policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instances import GameInstance, TabularPolicy
from .objectives import (
    Aggregator,
    ENUMERATION_CAP,
    MEAN_PAIRWISE,
    expected_win_rates,
    multiplayer_objective,
    two_player_objective,
)

# Win-rate differences below this count as a tie in the argmax set.
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BestResponseResult:
    policy: TabularPolicy
    value: float


def best_response_unregularized(
    instance: GameInstance,
    opponents: Sequence[TabularPolicy],
    aggregator: Aggregator = MEAN_PAIRWISE,
    tie_tol: float = TIE_TOL,
    max_tuples: int = ENUMERATION_CAP,
) -> BestResponseResult:
    """Best response with tau = 0, restricted to the reference support."""
    win = expected_win_rates(instance, opponents, aggregator, max_tuples)
    rows = []
    for x in range(instance.num_prompts):
        allowed = instance.reference.rows[x] > 0.0
        if not np.any(allowed):
            raise ValueError(f"reference support is empty on prompt {x}")
        w = np.where(allowed, win[x], -np.inf)
        top = np.max(w)
        ties = w >= top - tie_tol
        rows.append(ties / ties.sum())
    policy = TabularPolicy(tuple(rows))
    value = multiplayer_objective(
        policy, opponents, instance, 0.0, aggregator, max_tuples
    )
    return BestResponseResult(policy, value)


def best_response_kl(
    instance: GameInstance,
    opponents: Sequence[TabularPolicy],
    tau: float,
    aggregator: Aggregator = MEAN_PAIRWISE,
    max_tuples: int = ENUMERATION_CAP,
) -> BestResponseResult:
    """Best response with a KL(pi || ref) penalty, tau > 0."""
    if tau <= 0.0:
        raise ValueError("best_response_kl needs tau > 0")
    win = expected_win_rates(instance, opponents, aggregator, max_tuples)
    rows = []
    for x in range(instance.num_prompts):
        ref = instance.reference.rows[x]
        if not np.any(ref > 0.0):
            raise ValueError(f"reference support is empty on prompt {x}")
        with np.errstate(divide="ignore"):
            logit = np.log(ref) + win[x] / tau
        logit = logit - np.max(logit[np.isfinite(logit)])
        row = np.exp(logit)
        rows.append(row / row.sum())
    policy = TabularPolicy(tuple(rows))
    value = multiplayer_objective(
        policy, opponents, instance, tau, aggregator, max_tuples
    )
    return BestResponseResult(policy, value)


def _best_response(instance, opponents, tau, aggregator, max_tuples):
    if tau == 0.0:
        return best_response_unregularized(
            instance, opponents, aggregator, max_tuples=max_tuples
        )
    return best_response_kl(instance, opponents, tau, aggregator, max_tuples)


def dual_gap_two_player(
    policy: TabularPolicy, instance: GameInstance, tau: float = 0.0
) -> float:
    """max_p J(p, policy) - min_q J(policy, q), both sides exact.

    The game is symmetric, so the one best response to `policy` is both
    the strongest attacker and the opponent that hurts `policy` most.
    Zero exactly at an equilibrium; 1.0 at a point mass in an unregularized
    cycle, where the counter wins outright.
    """
    br = _best_response(instance, [policy], tau, MEAN_PAIRWISE, ENUMERATION_CAP)
    high = two_player_objective(br.policy, policy, instance, tau)
    low = two_player_objective(policy, br.policy, instance, tau)
    gap = high - low
    if gap < -1e-10:
        raise AssertionError(f"negative duality gap {gap}")
    return max(gap, 0.0)


def exploitability_multiplayer(
    policy: TabularPolicy,
    n_players: int,
    instance: GameInstance,
    tau: float = 0.0,
    aggregator: Aggregator = MEAN_PAIRWISE,
    max_tuples: int = ENUMERATION_CAP,
) -> float:
    """Gain of the best unilateral deviation against n - 1 copies of policy.

    max_dev J(dev, policy, ..., policy) - J(policy, policy, ..., policy),
    clipped at zero. At n = 2 this is the one-sided two-player gap.
    """
    if n_players < 2:
        raise ValueError("need at least two players")
    others = [policy] * (n_players - 1)
    br = _best_response(instance, others, tau, aggregator, max_tuples)
    held = multiplayer_objective(policy, others, instance, tau, aggregator, max_tuples)
    gap = br.value - held
    if gap < -1e-10:
        raise AssertionError(f"negative exploitability {gap}")
    return max(gap, 0.0)
