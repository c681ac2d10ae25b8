"""Tabular preference-game instances.

A game instance is a finite set of prompts, each with a finite response
list, together with a prompt distribution, a reference policy, a pairwise
preference oracle, and an optional scalar reward table. Everything is
dense float64 indexed by integer prompt/response ids; response labels are
carried only for display and serialization.

Instances are stored on disk as JSON with the following keys:

    prompt_weights  optional list of floats, uniform when omitted
    responses       list per prompt of response label lists
    reference       list per prompt of probability rows
    preference      {"kind": "matrix", "matrices": [...]} with one row-major
                    k_x by k_x matrix per prompt, or {"kind": "cyclic",
                    "strength": s}, or {"kind": "bradley_terry"} (built from
                    the reward rows)
    rewards         optional list per prompt of reward rows

Floats round-trip exactly: json uses shortest-repr decimal strings.
`save_instance` always writes the explicit matrix form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

# One shared tolerance for every "sums to one" check in the package.
NORMALIZATION_TOL = 1e-12


class SupportViolation(ValueError):
    """A policy puts mass on a response that its base policy excludes."""

    def __init__(self, prompt: int, response: int, detail: str = ""):
        self.prompt = prompt
        self.response = response
        msg = f"support violation at prompt {prompt}, response {response}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def _frozen_row(values) -> np.ndarray:
    row = np.array(values, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError(f"expected a 1-d row, got shape {row.shape}")
    row.setflags(write=False)
    return row


def _frozen_matrix(values) -> np.ndarray:
    mat = np.array(values, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class ResponseSpace:
    """Response labels per prompt. Labels must be unique within a prompt."""

    labels: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("instance needs at least one prompt")
        object.__setattr__(
            self, "labels", tuple(tuple(str(s) for s in row) for row in self.labels)
        )
        for x, row in enumerate(self.labels):
            if len(row) == 0:
                raise ValueError(f"prompt {x} has no responses")
            if len(set(row)) != len(row):
                raise ValueError(f"prompt {x} repeats a response label")

    @property
    def num_prompts(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.labels)


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """One probability row per prompt.

    Construction checks shapes only; numeric invariants (nonnegativity,
    normalization within NORMALIZATION_TOL) are reported by the validators
    so that files loaded from disk can be diagnosed instead of rejected
    half-parsed. Helper constructors always produce valid rows.
    """

    rows: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(_frozen_row(r) for r in self.rows))
        if len(self.rows) == 0:
            raise ValueError("policy needs at least one prompt row")

    @property
    def num_prompts(self) -> int:
        return len(self.rows)

    def prob(self, prompt: int, response: int) -> float:
        return float(self.rows[prompt][response])

    def support(self, prompt: int) -> np.ndarray:
        """Boolean mask of responses with strictly positive probability."""
        return self.rows[prompt] > 0.0


@dataclass(frozen=True, eq=False)
class PairwisePreference:
    """One k_x by k_x win-probability matrix per prompt.

    matrices[x][a, b] is the probability that response a beats response b
    on prompt x. Valid oracles satisfy M + M^T = 1 (within tolerance) with
    an exact 0.5 diagonal; entries of exactly 0 or 1 are allowed.
    """

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "matrices", tuple(_frozen_matrix(m) for m in self.matrices)
        )
        if len(self.matrices) == 0:
            raise ValueError("preference oracle needs at least one prompt")

    @property
    def num_prompts(self) -> int:
        return len(self.matrices)

    def win_prob(self, prompt: int, first: int, second: int) -> float:
        return float(self.matrices[prompt][first, second])


@dataclass(frozen=True, eq=False)
class RewardTable:
    """One finite scalar reward row per prompt."""

    rows: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(_frozen_row(r) for r in self.rows))
        if len(self.rows) == 0:
            raise ValueError("reward table needs at least one prompt row")

    @property
    def num_prompts(self) -> int:
        return len(self.rows)


@dataclass(frozen=True, eq=False)
class GameInstance:
    """A complete tabular preference game.

    Cross-component shape consistency is enforced here; value-level
    invariants are checked by validate_instance.
    """

    prompt_weights: np.ndarray
    space: ResponseSpace
    reference: TabularPolicy
    preference: PairwisePreference
    reward: RewardTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "prompt_weights", _frozen_row(self.prompt_weights))
        n = self.space.num_prompts
        if len(self.prompt_weights) != n:
            raise ValueError(
                f"prompt_weights has {len(self.prompt_weights)} entries "
                f"for {n} prompts"
            )
        for name, per_prompt in (
            ("reference", self.reference.rows),
            ("preference", self.preference.matrices),
        ):
            if len(per_prompt) != n:
                raise ValueError(f"{name} covers {len(per_prompt)} of {n} prompts")
        if self.reward is not None and self.reward.num_prompts != n:
            raise ValueError(
                f"reward covers {self.reward.num_prompts} of {n} prompts"
            )
        for x, k in enumerate(self.space.sizes):
            if len(self.reference.rows[x]) != k:
                raise ValueError(f"reference row {x} has wrong length")
            if self.preference.matrices[x].shape != (k, k):
                raise ValueError(f"preference matrix {x} has wrong shape")
            if self.reward is not None and len(self.reward.rows[x]) != k:
                raise ValueError(f"reward row {x} has wrong length")

    @property
    def num_prompts(self) -> int:
        return self.space.num_prompts


# ---------------------------------------------------------------------------
# policy constructors


def uniform_policy(space: ResponseSpace) -> TabularPolicy:
    return TabularPolicy(tuple(np.full(k, 1.0 / k) for k in space.sizes))


def point_mass_policy(space: ResponseSpace, picks: Sequence[int]) -> TabularPolicy:
    """Deterministic policy choosing picks[x] on prompt x."""
    if len(picks) != space.num_prompts:
        raise ValueError("need one pick per prompt")
    rows = []
    for x, k in enumerate(space.sizes):
        y = int(picks[x])
        if not 0 <= y < k:
            raise ValueError(f"pick {y} out of range for prompt {x}")
        row = np.zeros(k)
        row[y] = 1.0
        rows.append(row)
    return TabularPolicy(tuple(rows))


def policy_from_rows(rows: Sequence[Sequence[float]]) -> TabularPolicy:
    return TabularPolicy(tuple(np.asarray(r, dtype=np.float64) for r in rows))


# ---------------------------------------------------------------------------
# oracle constructors


def make_bt_oracle(rewards: RewardTable) -> PairwisePreference:
    """Bradley-Terry oracle: a beats b with probability sigmoid(r_a - r_b).

    The lower triangle is written as the exact complement of the upper one,
    so M + M^T = 1 holds exactly, not just within tolerance.
    """
    mats = []
    for row in rewards.rows:
        if not np.all(np.isfinite(row)):
            raise ValueError("rewards must be finite")
        k = len(row)
        m = np.full((k, k), 0.5)
        for a, b in combinations(range(k), 2):
            p = 1.0 / (1.0 + np.exp(-(row[a] - row[b])))
            m[a, b] = p
            m[b, a] = 1.0 - p
        mats.append(m)
    return PairwisePreference(tuple(mats))


def make_cyclic_oracle(k: int, strength: float) -> PairwisePreference:
    """Single-prompt cyclic oracle on k responses.

    Response i beats its successor (i + 1) mod k with probability
    `strength`, loses the mirror pairing, and ties (0.5) against everything
    else. strength = 1 with k = 3 is rock-paper-scissors; strength = 0.5 is
    the fully indifferent boundary.
    """
    if k < 3:
        raise ValueError(f"cyclic oracle needs k >= 3, got {k}")
    if not 0.5 <= strength <= 1.0:
        raise ValueError(f"strength must lie in [0.5, 1], got {strength}")
    m = np.full((k, k), 0.5)
    for i in range(k):
        j = (i + 1) % k
        m[i, j] = strength
        m[j, i] = 1.0 - strength
    return PairwisePreference((m,))


# ---------------------------------------------------------------------------
# sampling


def sample_preference(
    preference: PairwisePreference,
    prompt: int,
    first: int,
    second: int,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Draw one judgment, returning (winner, loser).

    Consumes exactly one uniform variate: first wins iff u < M[first, second].
    """
    if first == second:
        raise ValueError("cannot compare a response with itself")
    u = rng.random()
    if u < preference.win_prob(prompt, first, second):
        return first, second
    return second, first


def sample_preference_dataset(
    instance: GameInstance,
    policy: TabularPolicy,
    size: int,
    rng: np.random.Generator,
) -> list[tuple[int, int, int]]:
    """Draw (prompt, winner, loser) triples.

    Prompts follow the instance weights; the two candidates are iid draws
    from `policy` (they may coincide, in which case the winner label is a
    fair coin and the pair carries zero margin); the winner is the oracle's
    Bernoulli judgment.
    """
    out = []
    weights = instance.prompt_weights
    for _ in range(size):
        x = int(rng.choice(instance.num_prompts, p=weights))
        row = policy.rows[x]
        a = int(rng.choice(len(row), p=row))
        b = int(rng.choice(len(row), p=row))
        if a == b:
            w, l = (a, b) if rng.random() < 0.5 else (b, a)
        else:
            w, l = sample_preference(instance.preference, x, a, b, rng)
        out.append((x, w, l))
    return out


# ---------------------------------------------------------------------------
# validation


def _policy_violations(policy: TabularPolicy, tag: str) -> list[str]:
    bad = []
    for x, row in enumerate(policy.rows):
        if not np.all(np.isfinite(row)):
            bad.append(f"{tag} row {x} has non-finite entries")
            continue
        if np.any(row < 0.0):
            bad.append(f"{tag} row {x} has negative entries")
        if abs(row.sum() - 1.0) > NORMALIZATION_TOL:
            bad.append(f"{tag} row {x} normalization: sums to {float(row.sum())!r}")
        if not np.any(row > 0.0):
            bad.append(f"{tag} row {x} has empty support")
    return bad


def validate_instance(instance: GameInstance) -> list[str]:
    """Check every value-level invariant; returns violations, empty if ok."""
    bad = []

    w = instance.prompt_weights
    if not np.all(np.isfinite(w)):
        bad.append("prompt_weights has non-finite entries")
    else:
        if np.any(w < 0.0):
            bad.append("prompt_weights has negative entries")
        if abs(w.sum() - 1.0) > NORMALIZATION_TOL:
            bad.append(f"prompt_weights normalization: sums to {float(w.sum())!r}")

    for x, k in enumerate(instance.space.sizes):
        if k < 2:
            bad.append(f"prompt {x} has fewer than two responses")

    bad.extend(_policy_violations(instance.reference, "reference"))

    for x, m in enumerate(instance.preference.matrices):
        if not np.all(np.isfinite(m)):
            bad.append(f"preference matrix {x} has non-finite entries")
            continue
        if np.any(m < 0.0) or np.any(m > 1.0):
            bad.append(f"preference matrix {x} has entries outside [0, 1]")
        if np.max(np.abs(m + m.T - 1.0)) > NORMALIZATION_TOL:
            bad.append(f"preference matrix {x} breaks M + M^T = 1")
        if np.any(np.diag(m) != 0.5):
            bad.append(f"preference matrix {x} diagonal is not exactly 0.5")

    if instance.reward is not None:
        for x, row in enumerate(instance.reward.rows):
            if not np.all(np.isfinite(row)):
                bad.append(f"reward row {x} has non-finite entries")

    return bad


def require_valid(instance: GameInstance) -> GameInstance:
    """Raise ValueError listing all violations; returns the instance if clean."""
    bad = validate_instance(instance)
    if bad:
        raise ValueError("invalid instance:\n  " + "\n  ".join(bad))
    return instance


def policy_in_support(policy: TabularPolicy, base: TabularPolicy) -> None:
    """Raise SupportViolation if policy puts mass outside base's support."""
    for x, row in enumerate(policy.rows):
        outside = (row > 0.0) & (base.rows[x] == 0.0)
        if np.any(outside):
            y = int(np.argmax(outside))
            raise SupportViolation(x, y, "mass outside the base policy's support")


# ---------------------------------------------------------------------------
# disk format


def _instance_to_dict(instance: GameInstance) -> dict:
    doc = {
        "prompt_weights": instance.prompt_weights.tolist(),
        "responses": [list(row) for row in instance.space.labels],
        "reference": [r.tolist() for r in instance.reference.rows],
        "preference": {
            "kind": "matrix",
            "matrices": [m.tolist() for m in instance.preference.matrices],
        },
    }
    if instance.reward is not None:
        doc["rewards"] = [r.tolist() for r in instance.reward.rows]
    return doc


def save_instance(instance: GameInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(_instance_to_dict(instance), fh, indent=1)
        fh.write("\n")


def _build_preference(doc: dict, space: ResponseSpace, reward) -> PairwisePreference:
    kind = doc.get("kind")
    if kind == "matrix":
        if "matrices" not in doc:
            raise ValueError("preference kind 'matrix' needs key 'matrices'")
        return PairwisePreference(tuple(np.asarray(m) for m in doc["matrices"]))
    if kind == "cyclic":
        if "strength" not in doc:
            raise ValueError("preference kind 'cyclic' needs key 'strength'")
        if space.num_prompts != 1:
            raise ValueError("preference kind 'cyclic' covers single-prompt instances")
        return make_cyclic_oracle(space.sizes[0], float(doc["strength"]))
    if kind == "bradley_terry":
        if reward is None:
            raise ValueError("preference kind 'bradley_terry' needs key 'rewards'")
        return make_bt_oracle(reward)
    raise ValueError(f"unknown preference kind {kind!r}")


def load_instance(path) -> GameInstance:
    """Parse an instance file. Schema errors name the offending key."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("instance file must hold a JSON object")
    for key in ("responses", "reference", "preference"):
        if key not in doc:
            raise ValueError(f"instance file missing key '{key}'")

    space = ResponseSpace(tuple(tuple(row) for row in doc["responses"]))
    reference = policy_from_rows(doc["reference"])
    reward = None
    if "rewards" in doc:
        reward = RewardTable(tuple(np.asarray(r) for r in doc["rewards"]))
    if "prompt_weights" in doc:
        weights = np.asarray(doc["prompt_weights"], dtype=np.float64)
    else:
        n = space.num_prompts
        weights = np.full(n, 1.0 / n)
    preference = _build_preference(doc["preference"], space, reward)
    return GameInstance(weights, space, reference, preference, reward)


def save_policy(policy: TabularPolicy, path) -> None:
    with open(path, "w") as fh:
        json.dump({"rows": [r.tolist() for r in policy.rows]}, fh, indent=1)
        fh.write("\n")


def load_policy(path) -> TabularPolicy:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "rows" not in doc:
        raise ValueError("policy file missing key 'rows'")
    return policy_from_rows(doc["rows"])
