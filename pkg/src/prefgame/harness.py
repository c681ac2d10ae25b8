"""Experiment harness: configs, named RNG streams, end-to-end runs.

A run is described by one flat JSON config:

    mode        one of selfplay | lossmin | presets | rewardfit | gap
    instance    path to an instance file
    out_dir     directory for output files (created if missing)
    seed        root seed for every stream, default 0

plus mode-specific keys (defaults in brackets):

    selfplay    eta, iterations, n_players [2], tau [0.0],
                metric_stride [1], opponent_scheme [self_play_copies],
                history_weights [null], aggregator [mean_pairwise]
    lossmin     eta, n_players [2], steps [4000], step_size [0.5],
                inits [3]
    presets     samples [1000]
    rewardfit   comparisons, pool_size [2], steps [300], step_size [2.0]
    gap         policy ["uniform" or a policy file path], tau [0.0],
                n_players [2], aggregator [mean_pairwise]

Unknown or missing keys raise ConfigError naming the key. Reruns with an
identical config write byte-identical files: every random draw flows from
the root seed through named streams, floats are formatted the same way
every time, and wall-clock timing is never written.

Outputs per mode:

    selfplay    metrics.csv, policy_final.json, policy_average.json
    lossmin     descent.csv (trace of the first init), report.json
    presets     presets.csv (name, max_abs_deviation)
    rewardfit   rankings.csv, fitted.json, report.json
    gap         gap.json
"""

from __future__ import annotations

import json
import math
import os
import zlib
from dataclasses import dataclass

import numpy as np

from .instances import (
    GameInstance,
    SupportViolation,
    TabularPolicy,
    _policy_violations,
    load_instance,
    load_policy,
    policy_in_support,
    save_policy,
    uniform_policy,
    validate_instance,
)
from .losses import (
    PRESET_NAMES,
    PolicyLogits,
    UpdateMatchingProblem,
    minimize_loss,
    pair_margin_loss,
    preset,
)
from .objectives import Aggregator, MEAN_PAIRWISE, PLACKETT_LUCE
from .equilibrium import dual_gap_two_player, exploitability_multiplayer
from .solvers import OPPONENT_SCHEMES, SolverConfig, mwu_step, self_play_run
from .reward_learning import (
    fit_pl_reward,
    generate_rankings,
    rankings_to_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_ENUMERATION_CAP = 4
EXIT_INVALID = 5

MODES = ("selfplay", "lossmin", "presets", "rewardfit", "gap")

_AGGREGATORS = {"mean_pairwise": MEAN_PAIRWISE, "plackett_luce": PLACKETT_LUCE}


class ConfigError(ValueError):
    """A config violates the schema; the message names the offending key."""


class ValidationFailure(ValueError):
    """An instance or policy fails value-level validation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("validation failed:\n  " + "\n  ".join(self.problems))


def derive_rng(seed: int, *names: str) -> np.random.Generator:
    """Named child stream of one root seed.

    Streams with different names are independent; the same (seed, names)
    always yields the same stream. Names hash through crc32, so the
    derivation is stable across runs and platforms.
    """
    keys = tuple(zlib.crc32(n.encode("utf-8")) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=keys))


# ---------------------------------------------------------------------------
# config schema


def _number(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _integer(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return int(v)


def _string(v) -> str:
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _choice(options):
    def check(v):
        if v not in options:
            raise TypeError(f"expected one of {', '.join(options)}")
        return v

    return check


def _weights_or_null(v):
    if v is None:
        return None
    if not isinstance(v, list) or len(v) == 0:
        raise TypeError("expected null or a nonempty list of numbers")
    return tuple(_number(w) for w in v)


_REQUIRED = object()

# key -> (coercion, default); _REQUIRED means the mode insists on the key
_SCHEMAS = {
    "selfplay": {
        "eta": (_number, _REQUIRED),
        "iterations": (_integer, _REQUIRED),
        "n_players": (_integer, 2),
        "tau": (_number, 0.0),
        "metric_stride": (_integer, 1),
        "opponent_scheme": (_choice(OPPONENT_SCHEMES), "self_play_copies"),
        "history_weights": (_weights_or_null, None),
        "aggregator": (_choice(tuple(_AGGREGATORS)), "mean_pairwise"),
    },
    "lossmin": {
        "eta": (_number, _REQUIRED),
        "n_players": (_integer, 2),
        "steps": (_integer, 4000),
        "step_size": (_number, 0.5),
        "inits": (_integer, 3),
    },
    "presets": {
        "samples": (_integer, 1000),
    },
    "rewardfit": {
        "comparisons": (_integer, _REQUIRED),
        "pool_size": (_integer, 2),
        "steps": (_integer, 300),
        "step_size": (_number, 2.0),
    },
    "gap": {
        "policy": (_string, "uniform"),
        "tau": (_number, 0.0),
        "n_players": (_integer, 2),
        "aggregator": (_choice(tuple(_AGGREGATORS)), "mean_pairwise"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    instance: str
    out_dir: str
    seed: int
    params: dict

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(
                f"key 'mode' must be one of {', '.join(MODES)}, got {self.mode!r}"
            )


def load_config(path) -> ExperimentConfig:
    """Parse and fully validate a config file against the flat schema."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from err
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("mode", "instance", "out_dir"):
        if key not in doc:
            raise ConfigError(f"missing required key '{key}'")
    mode = doc["mode"]
    if mode not in MODES:
        raise ConfigError(
            f"key 'mode' must be one of {', '.join(MODES)}, got {mode!r}"
        )
    schema = _SCHEMAS[mode]

    common = {"mode", "instance", "out_dir", "seed"}
    for key in doc:
        if key not in common and key not in schema:
            raise ConfigError(f"unknown key '{key}' for mode '{mode}'")

    try:
        instance = _string(doc["instance"])
        out_dir = _string(doc["out_dir"])
        seed = _integer(doc.get("seed", 0))
    except TypeError as err:
        raise ConfigError(f"bad value for a common key: {err}") from err

    params = {}
    for key, (coerce, default) in schema.items():
        if key not in doc:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key '{key}' for mode '{mode}'")
            params[key] = default
            continue
        try:
            params[key] = coerce(doc[key])
        except TypeError as err:
            raise ConfigError(f"bad value for key '{key}': {err}") from err
    return ExperimentConfig(mode, instance, out_dir, seed, params)


# ---------------------------------------------------------------------------
# output helpers


def _write_json(doc, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_checked_instance(path) -> GameInstance:
    if not os.path.exists(path):
        raise FileNotFoundError(f"instance file not found: {path}")
    instance = load_instance(path)
    problems = validate_instance(instance)
    if problems:
        raise ValidationFailure(problems)
    return instance


def _random_interior_policy(rng, sizes) -> TabularPolicy:
    """Random policy bounded away from the simplex boundary."""
    rows = []
    for k in sizes:
        row = rng.random(k) + 0.05
        rows.append(row / row.sum())
    return TabularPolicy(tuple(rows))


# ---------------------------------------------------------------------------
# preset cross-check against hand-written formulas


def _softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def _log_ratio(policy: TabularPolicy, x: int, a: int, b: int) -> float:
    row = policy.rows[x]
    return math.log(row[a]) - math.log(row[b])


def _direct_formula(
    name, instance, policy, prev, x, a, b, eta, tau, beta
) -> float:
    """The published per-pair loss of each preset, written out by hand.

    Independent of the generic family evaluator on purpose: agreement of
    the two implementations is the point of compare_presets.
    """
    ref = instance.reference
    if name == "dpo":
        m = _log_ratio(policy, x, a, b) - _log_ratio(ref, x, a, b)
        return _softplus(-beta * m)
    if name == "distill_dpo":
        m = _log_ratio(policy, x, a, b) - _log_ratio(ref, x, a, b)
        r = instance.reward.rows[x]
        return (m - (r[a] - r[b])) ** 2
    if name == "simpo":
        return _softplus(-beta * _log_ratio(policy, x, a, b))
    if name in ("dno", "spin"):
        m = _log_ratio(policy, x, a, b) - _log_ratio(prev, x, a, b)
        return _softplus(-beta * m)
    if name == "sppo":
        m = _log_ratio(policy, x, a, b) - _log_ratio(prev, x, a, b)
        w = instance.preference.matrices[x] @ prev.rows[x]
        return (m - eta * (w[a] - w[b])) ** 2
    if name == "ipo":
        m = _log_ratio(policy, x, a, b) - _log_ratio(ref, x, a, b)
        return (m - 1.0 / (2.0 * tau)) ** 2
    if name == "inpo":
        m = (
            _log_ratio(policy, x, a, b)
            - ((eta - tau) / eta) * _log_ratio(prev, x, a, b)
            - (tau / eta) * _log_ratio(ref, x, a, b)
        )
        return (m - 1.0 / (2.0 * tau)) ** 2
    raise ValueError(f"unknown preset {name!r}")


def _draw_hypers(name, rng) -> tuple[float, float, float]:
    """(eta, tau, beta) for one comparison draw; unused slots stay at 1."""
    eta, tau, beta = 1.0, 1.0, 1.0
    if name in ("dpo", "simpo", "dno", "spin"):
        beta = rng.uniform(0.5, 3.0)
    elif name == "sppo":
        eta = rng.uniform(0.2, 2.0)
    elif name == "ipo":
        tau = rng.uniform(0.1, 1.0)
    elif name == "inpo":
        eta = rng.uniform(0.2, 2.0)
        tau = rng.uniform(0.1, 0.9) * eta
    return eta, tau, beta


def _preset_config(name, eta, tau, beta):
    if name == "ipo":
        return preset(name, tau=tau)
    if name == "inpo":
        return preset(name, eta=eta, tau=tau)
    if name == "sppo":
        return preset(name, eta=eta)
    return preset(name, beta=beta)


def compare_presets(
    instance: GameInstance, samples: int = 1000, seed: int = 0
) -> dict[str, float]:
    """Max |generic family loss - hand-written preset formula| per preset.

    Each sample draws fresh interior policies, a prompt, an ordered
    response pair, and fresh hyperparameters, then evaluates the family
    member on that single pair against the published formula. Every preset
    gets its own named stream from the seed.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    sizes = instance.space.sizes
    if instance.reward is None:
        raise ValueError("compare_presets needs an instance with a reward table")
    out = {}
    for name in PRESET_NAMES:
        rng = derive_rng(seed, "presets", name)
        worst = 0.0
        for _ in range(samples):
            policy = _random_interior_policy(rng, sizes)
            prev = _random_interior_policy(rng, sizes)
            x = int(rng.choice(instance.num_prompts, p=instance.prompt_weights))
            a, b = (int(v) for v in rng.choice(sizes[x], size=2, replace=False))
            eta, tau, beta = _draw_hypers(name, rng)
            cfg = _preset_config(name, eta, tau, beta)
            generic = pair_margin_loss(policy, [prev], cfg, instance, data=[(x, a, b)])
            direct = _direct_formula(
                name, instance, policy, prev, x, a, b, eta, tau, beta
            )
            worst = max(worst, abs(generic - direct))
        out[name] = worst
    return out


# ---------------------------------------------------------------------------
# mode runners


def _run_selfplay(instance, config: ExperimentConfig) -> dict:
    p = config.params
    solver = SolverConfig(
        eta=p["eta"],
        iterations=p["iterations"],
        n_players=p["n_players"],
        tau=p["tau"],
        opponent_scheme=p["opponent_scheme"],
        history_weights=p["history_weights"],
        aggregator=_AGGREGATORS[p["aggregator"]],
        metric_stride=p["metric_stride"],
        seed=config.seed,
    )
    result = self_play_run(instance, solver)
    metrics = os.path.join(config.out_dir, "metrics.csv")
    final = os.path.join(config.out_dir, "policy_final.json")
    average = os.path.join(config.out_dir, "policy_average.json")
    result.log.to_csv(metrics)
    save_policy(result.final, final)
    save_policy(result.average, average)
    last = result.log.records[-1]
    return {
        "outputs": [metrics, final, average],
        "final_gap": float(last.gap),
        "final_kl_ref": float(last.kl_ref),
        "iterations": last.iteration,
    }


def _run_lossmin(instance, config: ExperimentConfig) -> dict:
    import csv as _csv

    p = config.params
    current = instance.reference
    opponents = [current] * (p["n_players"] - 1)
    closed = mwu_step(opponents, instance, p["eta"])
    problem = UpdateMatchingProblem(instance, current, opponents, p["eta"])

    descent = os.path.join(config.out_dir, "descent.csv")
    report_path = os.path.join(config.out_dir, "report.json")
    rows = []
    reports = []
    for i in range(p["inits"]):
        rng = derive_rng(config.seed, "lossmin", f"init{i}")
        z0 = PolicyLogits(tuple(rng.standard_normal(k) for k in instance.space.sizes))
        trace = (lambda s, v, g: rows.append((s, v, g))) if i == 0 else None
        res = minimize_loss(
            problem, z0, steps=p["steps"], step_size=p["step_size"], trace=trace
        )
        linf = max(
            float(np.max(np.abs(res.policy.rows[x] - closed.rows[x])))
            for x in range(instance.num_prompts)
        )
        reports.append(
            {
                "init": i,
                "final_loss": res.loss,
                "grad_max": res.grad_max,
                "steps_taken": res.steps_taken,
                "max_abs_gap_to_update": linf,
            }
        )
    with open(descent, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "loss", "grad_norm"])
        for s, v, g in rows:
            writer.writerow([s, f"{v:.12g}", f"{g:.12g}"])
    worst = max(r["max_abs_gap_to_update"] for r in reports)
    _write_json(
        {"eta": p["eta"], "inits": reports, "worst_gap_to_update": worst},
        report_path,
    )
    return {"outputs": [descent, report_path], "worst_gap_to_update": worst}


def _run_presets(instance, config: ExperimentConfig) -> dict:
    import csv as _csv

    table = compare_presets(instance, config.params["samples"], config.seed)
    path = os.path.join(config.out_dir, "presets.csv")
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "max_abs_deviation"])
        for name, dev in table.items():
            writer.writerow([name, f"{dev:.17g}"])
    return {"outputs": [path], "max_deviation": max(table.values())}


def _run_rewardfit(instance, config: ExperimentConfig) -> dict:
    p = config.params
    if instance.reward is None:
        raise ValidationFailure(
            ["mode 'rewardfit' needs an instance with a reward table"]
        )
    rng = derive_rng(config.seed, "rewardfit")
    data = generate_rankings(
        instance.reward, instance, p["comparisons"], p["pool_size"], rng
    )
    rankings = os.path.join(config.out_dir, "rankings.csv")
    fitted_path = os.path.join(config.out_dir, "fitted.json")
    report_path = os.path.join(config.out_dir, "report.json")
    rankings_to_csv(data, rankings)
    fit = fit_pl_reward(
        data, instance, steps=p["steps"], step_size=p["step_size"]
    )
    _write_json({"rows": [r.tolist() for r in fit.rewards.rows]}, fitted_path)
    err = max(
        float(np.max(np.abs(fit.rewards.rows[x] - (true - true.mean()))))
        for x, true in enumerate(instance.reward.rows)
    )
    _write_json(
        {
            "comparisons": p["comparisons"],
            "converged": fit.converged,
            "final_nll": fit.final_nll,
            "grad_norm": fit.grad_norm,
            "max_abs_error": err,
            "steps_taken": fit.steps_taken,
        },
        report_path,
    )
    return {"outputs": [rankings, fitted_path, report_path], "max_abs_error": err}


def gap_report(
    instance: GameInstance,
    policy_spec: str,
    tau: float = 0.0,
    n_players: int = 2,
    aggregator_name: str = "mean_pairwise",
) -> dict:
    """Exploitability of a policy given as "uniform" or a policy file path.

    Adds the two-sided duality gap when the game is the plain two-player
    pairwise one. The policy must be valid and live on the reference
    support, else ValidationFailure.
    """
    if aggregator_name not in _AGGREGATORS:
        raise ConfigError(
            f"key 'aggregator' must be one of {', '.join(_AGGREGATORS)}"
        )
    if policy_spec == "uniform":
        policy = uniform_policy(instance.space)
    else:
        if not os.path.exists(policy_spec):
            raise FileNotFoundError(f"policy file not found: {policy_spec}")
        policy = load_policy(policy_spec)
        if tuple(len(r) for r in policy.rows) != instance.space.sizes:
            raise ValidationFailure(
                ["policy rows do not match the instance's response counts"]
            )
    problems = _policy_violations(policy, "policy")
    if problems:
        raise ValidationFailure(problems)
    try:
        policy_in_support(policy, instance.reference)
    except SupportViolation as err:
        raise ValidationFailure([str(err)]) from err

    expl = float(
        exploitability_multiplayer(
            policy, n_players, instance, tau, _AGGREGATORS[aggregator_name]
        )
    )
    doc = {
        "aggregator": aggregator_name,
        "exploitability": expl,
        "n_players": n_players,
        "policy": policy_spec,
        "tau": tau,
    }
    if n_players == 2 and aggregator_name == "mean_pairwise":
        doc["dual_gap"] = float(dual_gap_two_player(policy, instance, tau))
    return doc


def _run_gap(instance, config: ExperimentConfig) -> dict:
    p = config.params
    doc = gap_report(
        instance, p["policy"], p["tau"], p["n_players"], p["aggregator"]
    )
    path = os.path.join(config.out_dir, "gap.json")
    _write_json(doc, path)
    return {"outputs": [path], "exploitability": doc["exploitability"]}


_RUNNERS = {
    "selfplay": _run_selfplay,
    "lossmin": _run_lossmin,
    "presets": _run_presets,
    "rewardfit": _run_rewardfit,
    "gap": _run_gap,
}


def run_experiment(config) -> dict:
    """Run one experiment to completion; returns a summary dict.

    `config` is an ExperimentConfig or a path to a config file. Outputs
    land in the config's out_dir; rerunning with an identical config
    rewrites them byte for byte.
    """
    if not isinstance(config, ExperimentConfig):
        if not os.path.exists(config):
            raise FileNotFoundError(f"config file not found: {config}")
        config = load_config(config)
    instance = _load_checked_instance(config.instance)
    os.makedirs(config.out_dir, exist_ok=True)
    summary = _RUNNERS[config.mode](instance, config)
    summary["mode"] = config.mode
    return summary
