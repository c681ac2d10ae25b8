import math

import numpy as np
import pytest

from helpers import fd_reward_gradient, max_grad_rel_error, random_instance
from prefgame import (
    GameInstance,
    PairwisePreference,
    RankedComparison,
    ResponseSpace,
    RewardTable,
    fit_pl_reward,
    generate_rankings,
    make_bt_oracle,
    pl_nll,
    pl_nll_gradient,
    policy_from_rows,
    rankings_from_csv,
    rankings_to_csv,
)


def softplus(x):
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def two_response_instance(r0: float, r1: float) -> GameInstance:
    reward = RewardTable((np.array([r0, r1]),))
    return GameInstance(
        prompt_weights=np.array([1.0]),
        space=ResponseSpace((("a", "b"),)),
        reference=policy_from_rows([[0.5, 0.5]]),
        preference=make_bt_oracle(reward),
        reward=reward,
    )


def ladder_instance(rewards) -> GameInstance:
    row = np.asarray(rewards, dtype=np.float64)
    k = len(row)
    reward = RewardTable((row,))
    return GameInstance(
        prompt_weights=np.array([1.0]),
        space=ResponseSpace((tuple(f"r{i}" for i in range(k)),)),
        reference=policy_from_rows([np.full(k, 1.0 / k)]),
        preference=make_bt_oracle(reward),
        reward=reward,
    )


# ---------------------------------------------------------------------------
# comparisons


def test_ranked_comparison_validation():
    RankedComparison(0, 1, (0, 2))
    with pytest.raises(ValueError, match="nonempty"):
        RankedComparison(0, 1, ())
    with pytest.raises(ValueError, match="repeats"):
        RankedComparison(0, 1, (0, 0))
    with pytest.raises(ValueError, match="own pool"):
        RankedComparison(0, 1, (1, 2))


# ---------------------------------------------------------------------------
# likelihood


def test_nll_equal_rewards_pool_of_two():
    r = RewardTable((np.zeros(3),))
    data = [RankedComparison(0, 0, (1, 2))]
    assert pl_nll(r, data) == pytest.approx(math.log(3.0), abs=1e-12)


def test_nll_pairwise_is_logistic():
    r = RewardTable((np.array([1.0, 0.0]),))
    data = [RankedComparison(0, 0, (1,))]
    assert pl_nll(r, data) == pytest.approx(softplus(-1.0), abs=1e-12)
    assert pl_nll(r, data) == pytest.approx(0.31326168751822286, abs=1e-12)
    lose = [RankedComparison(0, 1, (0,))]
    assert pl_nll(r, lose) == pytest.approx(softplus(1.0), abs=1e-12)


def test_nll_decreases_in_the_winner_reward():
    data = [RankedComparison(0, 0, (1, 2))]
    lo = pl_nll(RewardTable((np.array([0.0, 0.0, 0.0]),)), data)
    hi = pl_nll(RewardTable((np.array([2.0, 0.0, 0.0]),)), data)
    assert hi < lo


def test_nll_gauge_invariance(rng):
    inst = random_instance(rng, max_responses=5)
    data = generate_rankings(inst.reward, inst, 100, 1, rng)
    base = pl_nll(inst.reward, data)
    shifted = RewardTable(tuple(r + 123.456 for r in inst.reward.rows))
    assert abs(pl_nll(shifted, data) - base) <= 1e-12


def test_nll_averages_over_comparisons():
    r = RewardTable((np.array([1.0, 0.0, -1.0]),))
    one = [RankedComparison(0, 0, (1,))]
    two = [RankedComparison(0, 0, (1,)), RankedComparison(0, 2, (1,))]
    want = 0.5 * (pl_nll(r, [two[0]]) + pl_nll(r, [two[1]]))
    assert pl_nll(r, two) == pytest.approx(want, rel=1e-14)
    assert pl_nll(r, one) == pytest.approx(softplus(-1.0), abs=1e-13)


def test_nll_mixed_pool_sizes_match_scalar_evaluation(rng):
    # bucketed vectorization over pool sizes against a direct per-row formula
    inst = random_instance(rng, num_prompts=2, max_responses=5)
    sizes = inst.space.sizes
    data = []
    for _ in range(60):
        x = int(rng.integers(0, 2))
        k = sizes[x]
        g = int(rng.integers(2, k + 1))
        picks = rng.choice(k, size=g, replace=False)
        data.append(RankedComparison(x, int(picks[0]), tuple(int(v) for v in picks[1:])))
    got = pl_nll(inst.reward, data)
    want = 0.0
    for c in data:
        row = inst.reward.rows[c.prompt]
        scores = np.array([row[c.winner]] + [row[y] for y in c.pool])
        want += float(np.log(np.exp(scores - scores[0]).sum()))
    want /= len(data)
    assert got == pytest.approx(want, rel=1e-12)


def test_nll_rejects_empty_dataset():
    with pytest.raises(ValueError, match="comparison"):
        pl_nll(RewardTable((np.zeros(2),)), [])


def test_nll_out_of_range_indices_name_the_comparison():
    r = RewardTable((np.zeros(2),))
    with pytest.raises(ValueError, match="comparison 0"):
        pl_nll(r, [RankedComparison(0, 0, (5,))])


# ---------------------------------------------------------------------------
# gradient


def test_nll_gradient_matches_finite_differences(rng):
    for _ in range(5):
        inst = random_instance(rng, max_responses=4)
        data = generate_rankings(inst.reward, inst, 50, 1, rng)
        probe = RewardTable(tuple(rng.normal(size=k) for k in inst.space.sizes))
        analytic = pl_nll_gradient(probe, data)
        numeric = fd_reward_gradient(probe, data, step=1e-6)
        assert max_grad_rel_error(analytic, numeric) <= 1e-7


def test_nll_gradient_sums_to_zero_per_touched_prompt(rng):
    # softmax shares minus the winner indicator sum to zero per comparison
    inst = random_instance(rng, max_responses=4)
    data = generate_rankings(inst.reward, inst, 40, 1, rng)
    grads = pl_nll_gradient(inst.reward, data)
    for g in grads:
        assert abs(float(g.sum())) <= 1e-12


# ---------------------------------------------------------------------------
# fitting


def test_fit_recovers_pairwise_gap():
    inst = two_response_instance(0.5, -0.5)
    rng = np.random.default_rng(11)
    data = generate_rankings(inst.reward, inst, 4000, 1, rng)
    fit = fit_pl_reward(data, inst)
    got_gap = float(fit.rewards.rows[0][0] - fit.rewards.rows[0][1])
    assert abs(got_gap - 1.0) < 0.15
    assert fit.converged


def test_fit_error_shrinks_with_more_data():
    inst = ladder_instance([1.0, 0.0, -1.0])
    errs = {}
    for m in (100, 10_000):
        rng = np.random.default_rng(202)
        data = generate_rankings(inst.reward, inst, m, 2, rng)
        fit = fit_pl_reward(data, inst)
        true = inst.reward.rows[0] - inst.reward.rows[0].mean()
        errs[m] = float(np.abs(fit.rewards.rows[0] - true).max())
    assert errs[10_000] < errs[100]
    assert errs[10_000] < 0.1


def test_fitted_pairwise_probability_matches_empirical_rate():
    inst = two_response_instance(0.4, -0.4)
    rng = np.random.default_rng(5)
    data = generate_rankings(inst.reward, inst, 10_000, 1, rng)
    fit = fit_pl_reward(data, inst)
    gap = float(fit.rewards.rows[0][0] - fit.rewards.rows[0][1])
    fitted_prob = 1.0 / (1.0 + math.exp(-gap))
    empirical = sum(c.winner == 0 for c in data) / len(data)
    assert abs(fitted_prob - empirical) < 0.02


def test_fit_centers_every_prompt(rng):
    inst = random_instance(rng, max_responses=4)
    data = generate_rankings(inst.reward, inst, 300, 1, rng)
    fit = fit_pl_reward(data, inst)
    for row in fit.rewards.rows:
        assert abs(float(row.mean())) <= 1e-12


def test_fit_respects_explicit_init(rng):
    inst = ladder_instance([0.5, -0.5])
    data = generate_rankings(inst.reward, inst, 500, 1, rng)
    init = RewardTable((np.array([5.0, -5.0]),))
    fit = fit_pl_reward(data, inst, init=init, steps=0)
    # zero steps: only the centering of the init is applied
    assert np.allclose(fit.rewards.rows[0], [5.0, -5.0], atol=1e-12)
    bad = RewardTable((np.zeros(3),))
    with pytest.raises(ValueError, match="init"):
        fit_pl_reward(data, inst, init=bad)


def test_fit_flags_separable_data_as_unconverged():
    # one response wins every recorded comparison: the MLE runs to infinity,
    # the fitted gap keeps growing with the step budget, and converged stays
    # False rather than pretending the optimum was reached
    inst = two_response_instance(0.0, 0.0)
    data = [RankedComparison(0, 0, (1,)) for _ in range(50)]
    short = fit_pl_reward(data, inst, steps=50)
    long = fit_pl_reward(data, inst, steps=400)
    assert not short.converged and not long.converged
    gap_short = float(short.rewards.rows[0][0] - short.rewards.rows[0][1])
    gap_long = float(long.rewards.rows[0][0] - long.rewards.rows[0][1])
    assert gap_long > gap_short > 0.0


def test_fit_reports_final_state_consistently(rng):
    inst = ladder_instance([0.8, 0.0, -0.8])
    data = generate_rankings(inst.reward, inst, 800, 2, rng)
    fit = fit_pl_reward(data, inst)
    assert fit.final_nll == pytest.approx(pl_nll(fit.rewards, data), rel=1e-12)
    grads = pl_nll_gradient(fit.rewards, data)
    gmax = max(float(np.max(np.abs(g))) for g in grads)
    assert fit.grad_norm == pytest.approx(gmax, rel=1e-12)
    assert fit.converged == (fit.grad_norm <= 1e-6)


# ---------------------------------------------------------------------------
# generation


def test_generate_rankings_shapes_and_ranges(bt, rng):
    data = generate_rankings(bt.reward, bt, 200, 2, rng)
    assert len(data) == 200
    for c in data:
        assert c.prompt == 0
        assert len(c.pool) == 2
        assert c.winner not in c.pool


def test_generate_rankings_zero_count(bt, rng):
    assert generate_rankings(bt.reward, bt, 0, 1, rng) == []


def test_generate_rankings_equal_rewards_are_uniform():
    inst = ladder_instance([0.0, 0.0, 0.0])
    rng = np.random.default_rng(17)
    data = generate_rankings(inst.reward, inst, 10_000, 2, rng)
    freq = np.bincount([c.winner for c in data], minlength=3) / len(data)
    assert np.abs(freq - 1.0 / 3.0).max() < 0.02


def test_generate_rankings_dominant_reward_always_wins():
    inst = ladder_instance([10.0, 0.0, 0.0])
    rng = np.random.default_rng(23)
    data = generate_rankings(inst.reward, inst, 2000, 2, rng)
    # every pool of 3 on a 3-response prompt contains the dominant response
    wins = sum(c.winner == 0 for c in data) / len(data)
    assert wins >= 0.999


def test_generate_rankings_pool_too_large():
    inst = ladder_instance([0.0, 1.0])
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="pool"):
        generate_rankings(inst.reward, inst, 10, 2, rng)


def test_generate_rankings_are_deterministic_per_seed(bt):
    a = generate_rankings(bt.reward, bt, 50, 2, np.random.default_rng(9))
    b = generate_rankings(bt.reward, bt, 50, 2, np.random.default_rng(9))
    assert a == b


# ---------------------------------------------------------------------------
# disk format


def test_rankings_csv_round_trip(tmp_path, bt, rng):
    data = generate_rankings(bt.reward, bt, 30, 2, rng)
    path = tmp_path / "rankings.csv"
    rankings_to_csv(data, path)
    assert rankings_from_csv(path) == data
    header = path.read_text().splitlines()[0]
    assert header == "prompt,winner,pool"


def test_rankings_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("prompt,chosen,rest\n0,0,1\n")
    with pytest.raises(ValueError, match="header"):
        rankings_from_csv(path)
