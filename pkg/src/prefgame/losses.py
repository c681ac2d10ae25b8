"""The unified pairwise-margin loss family.

Every loss here compares a log-ratio margin against a target under a
distance metric. For a winner/loser pair (y, y') the margin is

    m(y, y') = log pi(y)/pi(y') - sum_j lambda_j log pi_j(y)/pi_j(y')

with opponent policies pi_j drawn from an iterate history, the reference,
or explicit external policies. The metric is either the squared distance
or the backward Bernoulli KL

    bwd(a, b) = KL( Bernoulli(sigmoid(b)) || Bernoulli(sigmoid(a)) )

whose b -> +inf limit is -log sigmoid(a), the classic logistic preference
loss. Named presets (dpo, ipo, sppo, spin, dno, inpo, simpo, distill_dpo)
are nothing but particular (opponents, weights, metric, target) choices.

Two closed-form companions tie the family to the self-play solver: the
squared loss whose exact minimizer is the next multiplicative-weights
iterate (update_matching_loss), and its sampled-target simplification
with the constant winner target (winner_target_loss). With the constant
target 1/(2 eta) the two differ by a policy-independent constant exactly
at eta = 1 when the pair source equals the opponent mixture; tests pin
that configuration.

Losses are evaluated either in exact-expectation mode (ordered response
pairs (a, b) weighted by cur(a) * cur(b) * M[a, b], i.e. an iid draw from
the pair policy plus a Bernoulli winner; the diagonal stays in as a
constant) or on an explicit dataset of (prompt, winner, loser) triples.

Optimization works on per-prompt logits; the policy is the softmax over
the reference support, so iterates never touch the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .instances import GameInstance, SupportViolation, TabularPolicy

METRICS = ("sq", "bwd")
TARGET_RULES = ("win_rate_gap", "reward_gap")
PRESET_NAMES = (
    "dpo",
    "distill_dpo",
    "simpo",
    "dno",
    "spin",
    "sppo",
    "ipo",
    "inpo",
)

OpponentRef = Union[int, str, TabularPolicy]


def _softplus(x: float) -> float:
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def squared_distance(margin: float, target: float) -> float:
    return (margin - target) ** 2


def bernoulli_kl_distance(margin: float, target: float) -> float:
    """KL(Bernoulli(sigmoid(target)) || Bernoulli(sigmoid(margin)))."""
    if math.isinf(target):
        if target < 0:
            raise ValueError("target -inf is not supported")
        return _softplus(-margin)
    q = _sigmoid(target)
    log_p = -_softplus(-margin)
    log_1p = -_softplus(margin)
    log_q = -_softplus(-target)
    log_1q = -_softplus(target)
    return q * (log_q - log_p) + (1.0 - q) * (log_1q - log_1p)


def _distance(metric: str, margin: float, target: float) -> float:
    if metric == "sq":
        return squared_distance(margin, target)
    return bernoulli_kl_distance(margin, target)


def _distance_slope(metric: str, margin: float, target: float) -> float:
    """Derivative of the metric in its first argument."""
    if metric == "sq":
        return 2.0 * (margin - target)
    q = 1.0 if math.isinf(target) else _sigmoid(target)
    return _sigmoid(margin) - q


@dataclass(frozen=True, eq=False)
class LossConfig:
    """One member of the loss family.

    opponents entries are offsets into an iterate history (0 = current),
    the string "ref" for the reference policy, or explicit policies.
    target is a scalar (math.inf allowed for the bwd metric only), or one
    of the rules "win_rate_gap" (exact win-rate difference against the
    opponent mixture) and "reward_gap" (reward-table difference). The loss
    regresses the margin onto eta * target; beta rescales the margin for
    the bwd metric and is ignored by sq.
    """

    n_players: int
    opponents: tuple[OpponentRef, ...]
    weights: tuple[float, ...]
    metric: str
    target: float | str
    eta: float = 1.0
    tau: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "opponents", tuple(self.opponents))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.n_players < 1:
            raise ValueError("n_players must be at least 1")
        if len(self.opponents) != self.n_players - 1:
            raise ValueError("need exactly n_players - 1 opponents")
        if len(self.weights) != len(self.opponents):
            raise ValueError("need one weight per opponent")
        for ref in self.opponents:
            if isinstance(ref, bool) or not isinstance(
                ref, (int, str, TabularPolicy)
            ):
                raise ValueError(f"bad opponent reference {ref!r}")
            if isinstance(ref, int) and ref < 0:
                raise ValueError("history offsets must be nonnegative")
            if isinstance(ref, str) and ref != "ref":
                raise ValueError(f"unknown opponent name {ref!r}")
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) and (np.any(w < 0.0) or np.any(w > 1.0)):
            raise ValueError("weights must lie in [0, 1]")
        if len(w) and w.sum() > 1.0 + 1e-12:
            raise ValueError("weights must sum to at most 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if isinstance(self.target, str):
            if self.target not in TARGET_RULES:
                raise ValueError(f"unknown target rule {self.target!r}")
        else:
            t = float(self.target)
            if math.isnan(t) or t == -math.inf:
                raise ValueError(f"bad target {t}")
            if math.isinf(t) and self.metric == "sq":
                raise ValueError("the sq metric cannot chase an infinite target")
        if not (np.isfinite(self.eta) and self.eta > 0.0):
            raise ValueError("eta must be positive and finite")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError("beta must be positive and finite")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")


def preset(name: str, eta: float = 1.0, tau: float = 0.1, beta: float = 1.0) -> LossConfig:
    """Named members of the family.

    The scalar-target presets (ipo, inpo) and the reward-target preset
    (distill_dpo) store eta = 1 so the regression target is exactly the
    advertised constant; sppo keeps eta as the target scale. inpo needs
    0 < tau <= eta for its mixture weights to stay in [0, 1].
    """
    if name == "dpo":
        return LossConfig(2, ("ref",), (1.0,), "bwd", math.inf, tau=tau, beta=beta)
    if name == "distill_dpo":
        return LossConfig(2, ("ref",), (1.0,), "sq", "reward_gap", eta=1.0, tau=tau)
    if name == "simpo":
        return LossConfig(1, (), (), "bwd", math.inf, beta=beta)
    if name == "dno":
        return LossConfig(2, (0,), (1.0,), "bwd", math.inf, beta=beta)
    if name == "spin":
        # the weight column reads beta, but the published loss scales the
        # whole margin, which is what the bwd metric's beta already does
        return LossConfig(2, (0,), (1.0,), "bwd", math.inf, beta=beta)
    if name == "sppo":
        return LossConfig(2, (0,), (1.0,), "sq", "win_rate_gap", eta=eta)
    if name == "ipo":
        if tau <= 0.0:
            raise ValueError("ipo needs tau > 0")
        return LossConfig(2, ("ref",), (1.0,), "sq", 1.0 / (2.0 * tau), eta=1.0, tau=tau)
    if name == "inpo":
        if not 0.0 < tau <= eta:
            raise ValueError("inpo needs 0 < tau <= eta")
        return LossConfig(
            3,
            (0, "ref"),
            ((eta - tau) / eta, tau / eta),
            "sq",
            1.0 / (2.0 * tau),
            eta=1.0,
            tau=tau,
        )
    raise ValueError(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# margins


def _resolve_opponents(
    config: LossConfig, history: Sequence[TabularPolicy], instance: GameInstance
) -> list[TabularPolicy]:
    out = []
    for ref in config.opponents:
        if isinstance(ref, TabularPolicy):
            out.append(ref)
        elif ref == "ref":
            out.append(instance.reference)
        else:
            if ref >= len(history):
                raise ValueError(
                    f"opponent offset {ref} but history holds {len(history)} policies"
                )
            out.append(history[ref])
    return out


def _log_rows(policy, prompt, needed, who):
    """Log-probabilities restricted to `needed`; zero there is an error."""
    row = policy.rows[prompt]
    dead = needed & (row == 0.0)
    if np.any(dead):
        raise SupportViolation(prompt, int(np.argmax(dead)), f"{who} has zero mass")
    out = np.full(len(row), -np.inf)
    out[needed] = np.log(row[needed])
    return out


def log_ratio_margin(
    policy: TabularPolicy,
    opponents: Sequence[TabularPolicy],
    prompt: int,
    first: int,
    second: int,
) -> float:
    """Equal-weight margin log pi(y)/pi(y') - mean_j log pi_j(y)/pi_j(y')."""
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    weights = (1.0 / len(opponents),) * len(opponents)
    return _pair_margin(policy, list(opponents), weights, prompt, first, second)


def _pair_margin(policy, opponents, weights, prompt, first, second) -> float:
    needed = np.zeros(len(policy.rows[prompt]), dtype=bool)
    needed[[first, second]] = True
    lp = _log_rows(policy, prompt, needed, "policy")
    margin = lp[first] - lp[second]
    for w, opp in zip(weights, opponents):
        lo = _log_rows(opp, prompt, needed, "opponent")
        margin -= w * (lo[first] - lo[second])
    return float(margin)


def _margin_offsets(policy, opponents, weights, prompt, mask):
    """u(y) = log pi(y) - sum_j w_j log pi_j(y) on the masked responses."""
    u = _log_rows(policy, prompt, mask, "policy")[mask]
    for w, opp in zip(weights, opponents):
        u = u - w * _log_rows(opp, prompt, mask, "opponent")[mask]
    return u


# ---------------------------------------------------------------------------
# update-matching losses (exact solver companions)


def _prompt_pair_tables(instance, current, opponents, policy, prompt):
    """Shared scaffolding: support mask, winner-ordered pair weights, margins.

    pair_w[a, b] = cur(a) cur(b) M[a, b]: the probability of drawing the
    distinct ordered (winner, loser) pair (a, b). A judged pair is two
    different responses, so the diagonal is zeroed.
    """
    cur = current.rows[prompt]
    mask = cur > 0.0
    weights = (1.0 / len(opponents),) * len(opponents)
    u = _margin_offsets(policy, list(opponents), weights, prompt, mask)
    h = u[:, None] - u[None, :]
    pair_w = np.outer(cur[mask], cur[mask]) * (
        instance.preference.matrices[prompt][mask][:, mask]
    )
    np.fill_diagonal(pair_w, 0.0)
    return mask, pair_w, h


def _advantage_targets(instance, opponents, eta, prompt, mask):
    """Theta[a, b] = (eta / (n-1)) sum_j (P(a beats pi_j) - P(b beats pi_j))."""
    m = instance.preference.matrices[prompt]
    w = np.zeros(int(mask.sum()))
    for opp in opponents:
        w = w + (m @ opp.rows[prompt])[mask]
    w *= eta / len(opponents)
    return w[:, None] - w[None, :]


def update_matching_loss(
    policy: TabularPolicy,
    instance: GameInstance,
    current: TabularPolicy,
    opponents: Sequence[TabularPolicy],
    eta: float,
) -> float:
    """Exact squared loss whose unique minimizer is the next MWU iterate.

    E over winner-ordered pairs from `current` of (h(y_w, y_l) - Theta)^2
    where h is the equal-weight margin and Theta the scaled win-rate
    advantage. The residual is swap-symmetric, so the winner weighting
    only halves the plain iid-pair sum; it matters when this loss is
    compared against the winner-target variant, whose residual is not.
    """
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    total = 0.0
    for x in range(instance.num_prompts):
        mask, pair_w, h = _prompt_pair_tables(instance, current, opponents, policy, x)
        theta = _advantage_targets(instance, opponents, eta, x, mask)
        total += instance.prompt_weights[x] * float(np.sum(pair_w * (h - theta) ** 2))
    return total


def winner_target_loss(
    policy: TabularPolicy,
    instance: GameInstance,
    current: TabularPolicy,
    opponents: Sequence[TabularPolicy],
    eta: float,
) -> float:
    """Sampled-target variant: winner-ordered pairs against 1 / (2 eta).

    E over distinct pairs (y, y') from `current` and a Bernoulli winner
    draw of (h(y_w, y_l) - 1/(2 eta))^2. Ordered pair (a, b) carries
    weight cur(a) cur(b) M[a, b], the same distribution as the
    update-matching loss, so the two differ by a policy-independent
    constant whenever eta = 1.
    """
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    c = 1.0 / (2.0 * eta)
    total = 0.0
    for x in range(instance.num_prompts):
        mask, pair_w, h = _prompt_pair_tables(instance, current, opponents, policy, x)
        total += instance.prompt_weights[x] * float(np.sum(pair_w * (h - c) ** 2))
    return total


# ---------------------------------------------------------------------------
# the unified family


def _resolved_targets(config, instance, opponents, prompt, mask):
    """eta * delta* for every ordered masked pair, or a scalar (possibly inf)."""
    if isinstance(config.target, str):
        if config.target == "reward_gap":
            if instance.reward is None:
                raise ValueError("target rule 'reward_gap' needs a reward table")
            v = instance.reward.rows[prompt][mask]
        else:  # win_rate_gap
            if len(opponents) == 0:
                raise ValueError("target rule 'win_rate_gap' needs opponents")
            m = instance.preference.matrices[prompt]
            v = np.zeros(int(mask.sum()))
            for opp in opponents:
                v = v + (m @ opp.rows[prompt])[mask]
            v /= len(opponents)
        return config.eta * (v[:, None] - v[None, :])
    return config.eta * float(config.target)


def _pair_distance_tables(config, margins, targets):
    """Elementwise metric values and slopes for margin/target matrices."""
    scale = config.beta if config.metric == "bwd" else 1.0
    m = scale * margins
    if config.metric == "sq":
        values = (m - targets) ** 2
        slopes = 2.0 * (m - targets) * scale
        return values, slopes
    # bwd, vectorized; targets may be the scalar inf
    log_p = -np.logaddexp(0.0, -m)
    log_1p = -np.logaddexp(0.0, m)
    if np.isscalar(targets) and math.isinf(targets):
        values = -log_p
        slopes = -scale / (1.0 + np.exp(m))
        return values, slopes
    t = np.broadcast_to(np.asarray(targets, dtype=np.float64), m.shape)
    q = 1.0 / (1.0 + np.exp(-t))
    log_q = -np.logaddexp(0.0, -t)
    log_1q = -np.logaddexp(0.0, t)
    values = q * (log_q - log_p) + (1.0 - q) * (log_1q - log_1p)
    slopes = (1.0 / (1.0 + np.exp(-m)) - q) * scale
    return values, slopes


def pair_margin_loss(
    policy: TabularPolicy,
    history: Sequence[TabularPolicy],
    config: LossConfig,
    instance: GameInstance,
    data: Sequence[tuple[int, int, int]] | None = None,
) -> float:
    """Evaluate one family member.

    history[0] is the current policy; integer opponent references index
    into it. With data=None the loss is the exact expectation over
    distinct pairs from history[0] with Bernoulli winner weights (a
    judged pair is two different responses, so coincident draws carry no
    weight); otherwise it is the mean over the given (prompt, winner,
    loser) triples.
    """
    if len(history) == 0:
        raise ValueError("history must contain at least the current policy")
    opponents = _resolve_opponents(config, history, instance)

    if data is not None:
        if len(data) == 0:
            raise ValueError("empty preference dataset")
        total = 0.0
        for x, win, lose in data:
            margin = _pair_margin(policy, opponents, config.weights, x, win, lose)
            target = _triple_target(config, instance, opponents, x, win, lose)
            scale = config.beta if config.metric == "bwd" else 1.0
            total += _distance(config.metric, scale * margin, target)
        return total / len(data)

    current = history[0]
    total = 0.0
    for x in range(instance.num_prompts):
        cur = current.rows[x]
        mask = cur > 0.0
        u = _margin_offsets(policy, opponents, config.weights, x, mask)
        margins = u[:, None] - u[None, :]
        targets = _resolved_targets(config, instance, opponents, x, mask)
        values, _ = _pair_distance_tables(config, margins, targets)
        pair_w = np.outer(cur[mask], cur[mask]) * (
            instance.preference.matrices[x][mask][:, mask]
        )
        np.fill_diagonal(pair_w, 0.0)
        total += instance.prompt_weights[x] * float(np.sum(pair_w * values))
    return total


def _triple_target(config, instance, opponents, prompt, win, lose) -> float:
    if isinstance(config.target, str):
        if config.target == "reward_gap":
            if instance.reward is None:
                raise ValueError("target rule 'reward_gap' needs a reward table")
            row = instance.reward.rows[prompt]
            return config.eta * float(row[win] - row[lose])
        if len(opponents) == 0:
            raise ValueError("target rule 'win_rate_gap' needs opponents")
        m = instance.preference.matrices[prompt]
        gap = 0.0
        for opp in opponents:
            w = m @ opp.rows[prompt]
            gap += float(w[win] - w[lose])
        return config.eta * gap / len(opponents)
    return config.eta * float(config.target)


def external_margin_loss(
    policy: TabularPolicy,
    externals: Sequence[TabularPolicy],
    config: LossConfig,
    instance: GameInstance,
    data: Sequence[tuple[int, int, int]] | None = None,
    pair_policy: TabularPolicy | None = None,
) -> float:
    """Family variant with fixed external opponents and convex weights.

    The weights must sum to exactly one (within tolerance), so the margin
    is a proper mixture of anchored log ratios. Exact mode draws pairs
    from pair_policy, defaulting to the reference.
    """
    if len(externals) == 0:
        raise ValueError("need at least one external policy")
    if len(config.weights) != len(externals):
        raise ValueError("need one config weight per external policy")
    if abs(sum(config.weights) - 1.0) > 1e-12:
        raise ValueError("external-opponent weights must sum to one")
    anchored = LossConfig(
        n_players=len(externals) + 1,
        opponents=tuple(externals),
        weights=config.weights,
        metric=config.metric,
        target=config.target,
        eta=config.eta,
        tau=config.tau,
        beta=config.beta,
    )
    source = instance.reference if pair_policy is None else pair_policy
    return pair_margin_loss(policy, [source], anchored, instance, data)


# ---------------------------------------------------------------------------
# optimization over logits


@dataclass(frozen=True, eq=False)
class PolicyLogits:
    """Per-prompt real rows; the policy is softmax over the reference support."""

    rows: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "rows",
            tuple(np.array(r, dtype=np.float64) for r in self.rows),
        )
        for x, row in enumerate(self.rows):
            if row.ndim != 1 or not np.all(np.isfinite(row)):
                raise ValueError(f"logit row {x} must be finite and 1-d")


def logits_to_policy(logits: PolicyLogits, reference: TabularPolicy) -> TabularPolicy:
    """Softmax restricted to the reference support; excluded entries get 0."""
    if len(logits.rows) != reference.num_prompts:
        raise ValueError("logits and reference cover different prompt counts")
    rows = []
    for z, ref in zip(logits.rows, reference.rows):
        if len(z) != len(ref):
            raise ValueError("logit row length does not match the response count")
        mask = ref > 0.0
        row = np.zeros_like(ref)
        shifted = z[mask] - z[mask].max()
        row[mask] = np.exp(shifted)
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))


class _LogitProblem:
    """Value and analytic gradient of a loss as a function of logits."""

    def __init__(self, instance: GameInstance):
        self.instance = instance

    def policy(self, logits: PolicyLogits) -> TabularPolicy:
        return logits_to_policy(logits, self.instance.reference)

    def value(self, logits: PolicyLogits) -> float:
        raise NotImplementedError

    def gradient(self, logits: PolicyLogits) -> list[np.ndarray]:
        raise NotImplementedError

    def _pair_gradient_rows(self, slope_tables):
        """Turn per-prompt (mask, weighted slope matrix) into logit rows.

        The margin of the ordered pair (a, b) depends on logits as
        z_a - z_b, so each pair pushes its slope onto a and pulls it
        off b: row sums minus column sums.
        """
        grads = []
        for x, (mask, g) in enumerate(slope_tables):
            row = np.zeros(len(self.instance.reference.rows[x]))
            row[mask] = g.sum(axis=1) - g.sum(axis=0)
            row *= self.instance.prompt_weights[x]
            grads.append(row)
        return grads


class UpdateMatchingProblem(_LogitProblem):
    """update_matching_loss as a function of logits."""

    def __init__(self, instance, current, opponents, eta):
        super().__init__(instance)
        self.current = current
        self.opponents = list(opponents)
        self.eta = float(eta)

    def value(self, logits):
        return update_matching_loss(
            self.policy(logits), self.instance, self.current, self.opponents, self.eta
        )

    def gradient(self, logits):
        policy = self.policy(logits)
        tables = []
        for x in range(self.instance.num_prompts):
            mask, pair_w, h = _prompt_pair_tables(
                self.instance, self.current, self.opponents, policy, x
            )
            theta = _advantage_targets(
                self.instance, self.opponents, self.eta, x, mask
            )
            tables.append((mask, 2.0 * pair_w * (h - theta)))
        return self._pair_gradient_rows(tables)


class WinnerTargetProblem(_LogitProblem):
    """winner_target_loss as a function of logits."""

    def __init__(self, instance, current, opponents, eta):
        super().__init__(instance)
        self.current = current
        self.opponents = list(opponents)
        self.eta = float(eta)

    def value(self, logits):
        return winner_target_loss(
            self.policy(logits), self.instance, self.current, self.opponents, self.eta
        )

    def gradient(self, logits):
        policy = self.policy(logits)
        c = 1.0 / (2.0 * self.eta)
        tables = []
        for x in range(self.instance.num_prompts):
            mask, pair_w, h = _prompt_pair_tables(
                self.instance, self.current, self.opponents, policy, x
            )
            tables.append((mask, 2.0 * pair_w * (h - c)))
        return self._pair_gradient_rows(tables)


class PairMarginProblem(_LogitProblem):
    """pair_margin_loss (exact or sampled) as a function of logits."""

    def __init__(self, instance, history, config, data=None):
        super().__init__(instance)
        if len(history) == 0:
            raise ValueError("history must contain at least the current policy")
        self.history = list(history)
        self.config = config
        self.data = None if data is None else list(data)

    def value(self, logits):
        return pair_margin_loss(
            self.policy(logits), self.history, self.config, self.instance, self.data
        )

    def gradient(self, logits):
        policy = self.policy(logits)
        opponents = _resolve_opponents(self.config, self.history, self.instance)
        cfg = self.config
        scale = cfg.beta if cfg.metric == "bwd" else 1.0

        if self.data is not None:
            grads = [np.zeros(len(r)) for r in self.instance.reference.rows]
            inv = 1.0 / len(self.data)
            for x, win, lose in self.data:
                margin = _pair_margin(policy, opponents, cfg.weights, x, win, lose)
                target = _triple_target(cfg, self.instance, opponents, x, win, lose)
                s = _distance_slope(cfg.metric, scale * margin, target) * scale * inv
                grads[x][win] += s
                grads[x][lose] -= s
            return grads

        current = self.history[0]
        tables = []
        for x in range(self.instance.num_prompts):
            cur = current.rows[x]
            mask = cur > 0.0
            u = _margin_offsets(policy, opponents, cfg.weights, x, mask)
            margins = u[:, None] - u[None, :]
            targets = _resolved_targets(cfg, self.instance, opponents, x, mask)
            _, slopes = _pair_distance_tables(cfg, margins, targets)
            pair_w = np.outer(cur[mask], cur[mask]) * (
                self.instance.preference.matrices[x][mask][:, mask]
            )
            np.fill_diagonal(pair_w, 0.0)
            tables.append((mask, pair_w * slopes))
        return self._pair_gradient_rows(tables)


class ExternalMarginProblem(PairMarginProblem):
    """external_margin_loss as a function of logits."""

    def __init__(self, instance, externals, config, data=None, pair_policy=None):
        if len(config.weights) != len(externals):
            raise ValueError("need one config weight per external policy")
        if abs(sum(config.weights) - 1.0) > 1e-12:
            raise ValueError("external-opponent weights must sum to one")
        anchored = LossConfig(
            n_players=len(externals) + 1,
            opponents=tuple(externals),
            weights=config.weights,
            metric=config.metric,
            target=config.target,
            eta=config.eta,
            tau=config.tau,
            beta=config.beta,
        )
        source = instance.reference if pair_policy is None else pair_policy
        super().__init__(instance, [source], anchored, data)


def loss_gradient(problem: _LogitProblem, logits: PolicyLogits) -> list[np.ndarray]:
    """Analytic gradient with respect to the logits.

    Adding a per-prompt constant to the logits leaves it unchanged, since
    only logit differences enter any margin.
    """
    return problem.gradient(logits)


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    policy: TabularPolicy
    logits: PolicyLogits
    loss: float
    grad_max: float
    steps_taken: int


def minimize_loss(
    problem: _LogitProblem,
    init: PolicyLogits,
    steps: int = 4000,
    step_size: float = 0.5,
    trace: Callable[[int, float, float], None] | None = None,
) -> MinimizeResult:
    """Plain gradient descent with backtracking.

    A proposal that fails to decrease the loss halves the step and is
    retried; a success grows the step by 1.2x. Stops when the step
    underflows, the gradient is at machine floor, or steps run out.
    trace, when given, is called as trace(accepted_steps, loss, grad_max)
    at the start and after every accepted proposal.
    """
    rows = [row.copy() for row in init.rows]
    z = PolicyLogits(tuple(rows))
    val = problem.value(z)
    grad = problem.gradient(z)
    step = float(step_size)
    taken = 0
    accepted = 0
    if trace is not None:
        trace(0, val, max(float(np.max(np.abs(g))) for g in grad))
    for taken in range(1, steps + 1):
        gmax = max(float(np.max(np.abs(g))) for g in grad)
        if gmax < 1e-13 or step < 1e-18:
            break
        cand = PolicyLogits(
            tuple(r - step * g for r, g in zip(z.rows, grad))
        )
        cand_val = problem.value(cand)
        if cand_val < val:
            z, val = cand, cand_val
            grad = problem.gradient(z)
            step *= 1.2
            accepted += 1
            if trace is not None:
                trace(accepted, val, max(float(np.max(np.abs(g))) for g in grad))
        else:
            step *= 0.5
    gmax = max(float(np.max(np.abs(g))) for g in grad)
    return MinimizeResult(problem.policy(z), z, val, gmax, taken)
