"""Multiplicative-weights self-play.

One update step maps n - 1 opponent policies to the next iterate:

    pi'(y)  proportional to  prod_j pi_j(y)^(w_j) * exp(eta * sum_j w_j P(y beats pi_j))

with uniform weights w_j = 1/(n - 1) unless told otherwise. The update
always uses pairwise oracle win rates and is computed in log space, then
renormalized over the reference support; a response survives only if every
opponent and the reference give it positive probability.

self_play_run iterates this from the reference policy along one shared
trajectory (every player is the same policy) and tracks the uniformly
averaged iterate, which is the object that actually converges; metrics in
the run log describe that average. The loop itself is exact and needs no
randomness; the seed in the config exists so downstream consumers can
derive named sample streams from one root.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equilibrium import exploitability_multiplayer
from .instances import GameInstance, TabularPolicy
from .objectives import (
    Aggregator,
    MEAN_PAIRWISE,
    kl_divergence,
    multiplayer_objective,
)

OPPONENT_SCHEMES = ("self_play_copies", "history_window")


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Everything a self-play run depends on.

    history_weights only matter for the history_window scheme; they are
    renormalized to a proper mixture over the window. eta_schedule, when
    given, maps the 1-based iteration index to the step size and overrides
    the constant eta.
    """

    eta: float
    iterations: int
    n_players: int = 2
    tau: float = 0.0
    opponent_scheme: str = "self_play_copies"
    history_weights: tuple[float, ...] | None = None
    aggregator: Aggregator = MEAN_PAIRWISE
    metric_stride: int = 1
    seed: int = 0
    averaging: str = "uniform"
    eta_schedule: Callable[[int], float] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0.0):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.n_players < 2:
            raise ValueError("need at least two players")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if self.opponent_scheme not in OPPONENT_SCHEMES:
            raise ValueError(f"unknown opponent scheme {self.opponent_scheme!r}")
        if self.metric_stride < 1:
            raise ValueError("metric_stride must be at least 1")
        if self.averaging != "uniform":
            raise ValueError("only uniform averaging is implemented")
        if self.history_weights is not None:
            w = np.asarray(self.history_weights, dtype=np.float64)
            if len(w) != self.n_players - 1:
                raise ValueError("need one history weight per opponent slot")
            if np.any(w < 0.0) or np.any(w > 1.0):
                raise ValueError("history weights must lie in [0, 1]")
            if w.sum() > 1.0 + 1e-12 or w.sum() <= 0.0:
                raise ValueError("history weights must sum into (0, 1]")


@dataclass(frozen=True)
class RunRecord:
    iteration: int
    gap: float
    kl_ref: float
    self_play_value: float
    elapsed_ms: float


@dataclass(frozen=True)
class RunLog:
    """Metric rows recorded along a run, strictly increasing in iteration."""

    records: tuple[RunRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        iters = [r.iteration for r in self.records]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise ValueError("iteration indices must strictly increase")
        for r in self.records:
            for name in ("gap", "kl_ref", "self_play_value", "elapsed_ms"):
                if not np.isfinite(getattr(r, name)):
                    raise ValueError(f"non-finite {name} at iteration {r.iteration}")

    def to_csv(self, path, measured_timing: bool = False) -> None:
        """Write rows with 12 significant digits.

        elapsed_ms is written as 0 unless measured_timing is set: wall
        clock is the one column that would break byte-identical reruns.
        """
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iter", "gap", "kl_ref", "self_play_value", "elapsed_ms"])
            for r in self.records:
                ms = r.elapsed_ms if measured_timing else 0.0
                writer.writerow(
                    [r.iteration]
                    + [f"{v:.12g}" for v in (r.gap, r.kl_ref, r.self_play_value, ms)]
                )

    @staticmethod
    def from_csv(path) -> "RunLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["iter", "gap", "kl_ref", "self_play_value", "elapsed_ms"]:
                raise ValueError(f"unexpected run-log header {header}")
            records = tuple(
                RunRecord(int(row[0]), *(float(v) for v in row[1:5]))
                for row in reader
            )
        return RunLog(records)


@dataclass(frozen=True, eq=False)
class SelfPlayResult:
    final: TabularPolicy
    average: TabularPolicy
    log: RunLog


def mwu_step(
    opponents: Sequence[TabularPolicy],
    instance: GameInstance,
    eta: float,
    weights: Sequence[float] | None = None,
) -> TabularPolicy:
    """One multiplicative-weights update against fixed opponents."""
    if len(opponents) == 0:
        raise ValueError("need at least one opponent")
    if not (np.isfinite(eta) and eta > 0.0):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if weights is None:
        w = np.full(len(opponents), 1.0 / len(opponents))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != len(opponents):
            raise ValueError("need one weight per opponent")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("opponent weights must be a distribution")

    rows = []
    for x in range(instance.num_prompts):
        m = instance.preference.matrices[x]
        ref = instance.reference.rows[x]
        with np.errstate(divide="ignore"):
            logit = np.where(ref > 0.0, 0.0, -np.inf)
            for wj, opp in zip(w, opponents):
                if wj == 0.0:
                    continue  # 0 * log 0 would poison the row with NaN
                logit = logit + wj * np.log(opp.rows[x])
                logit = logit + eta * wj * (m @ opp.rows[x])
        if not np.any(np.isfinite(logit)):
            raise ValueError(
                f"prompt {x}: no response survives in every opponent's support"
            )
        logit = logit - np.max(logit[np.isfinite(logit)])
        row = np.exp(logit)
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))


def average_policy(
    policies: Sequence[TabularPolicy], weights: Sequence[float] | None = None
) -> TabularPolicy:
    """Arithmetic mixture of policies, uniform unless weighted."""
    if len(policies) == 0:
        raise ValueError("nothing to average")
    if weights is None:
        w = np.full(len(policies), 1.0 / len(policies))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != len(policies) or np.any(w < 0.0):
            raise ValueError("need one nonnegative weight per policy")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("averaging weights must sum to one")
    rows = []
    for x in range(policies[0].num_prompts):
        row = np.zeros_like(policies[0].rows[x])
        for wj, p in zip(w, policies):
            row = row + wj * p.rows[x]
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))


def _metrics(avg, instance, config, started, iteration) -> RunRecord:
    gap = exploitability_multiplayer(
        avg, config.n_players, instance, config.tau, config.aggregator
    )
    kl = kl_divergence(avg, instance.reference, instance)
    value = multiplayer_objective(
        avg,
        [avg] * (config.n_players - 1),
        instance,
        config.tau,
        config.aggregator,
    )
    elapsed = (time.perf_counter() - started) * 1e3
    return RunRecord(iteration, gap, kl, value, elapsed)


def self_play_run(instance: GameInstance, config: SolverConfig) -> SelfPlayResult:
    """Iterate mwu_step from the reference along one shared trajectory.

    self_play_copies pits the current iterate against n - 1 copies of
    itself; history_window uses the last n - 1 iterates (the window is
    padded with the start while shorter than that). Metrics are recorded
    for the running average at iteration 0, every metric_stride steps,
    and at the end.
    """
    started = time.perf_counter()
    current = instance.reference
    avg_rows = [row.copy() for row in current.rows]
    seen = 1
    window: list[TabularPolicy] = [current]

    records = [_metrics(current, instance, config, started, 0)]
    for t in range(1, config.iterations + 1):
        eta = config.eta if config.eta_schedule is None else config.eta_schedule(t)
        if config.opponent_scheme == "self_play_copies":
            opponents = [current] * (config.n_players - 1)
            weights = None
        else:
            opponents = [
                window[max(len(window) - 1 - j, 0)]
                for j in range(config.n_players - 1)
            ]
            if config.history_weights is None:
                weights = None
            else:
                w = np.asarray(config.history_weights, dtype=np.float64)
                weights = w / w.sum()
        current = mwu_step(opponents, instance, eta, weights)
        window.append(current)
        if len(window) > config.n_players:
            window.pop(0)

        seen += 1
        for x, row in enumerate(current.rows):
            avg_rows[x] += (row - avg_rows[x]) / seen
        if t % config.metric_stride == 0 or t == config.iterations:
            avg = TabularPolicy(tuple(r / r.sum() for r in avg_rows))
            records.append(_metrics(avg, instance, config, started, t))

    average = TabularPolicy(tuple(r / r.sum() for r in avg_rows))
    return SelfPlayResult(current, average, RunLog(tuple(records)))
