"""Tests for features, match scores, and the sequential matching process.

The distributional checks compare Monte Carlo placement frequencies to an
exact enumeration of the sequential process (opening order x candidate
choice), written independently in oracles.py.
"""

import numpy as np
import pytest

from facmarket import data, market
from facmarket.errors import DataError
from facmarket.ranking import PrestigeRanking
from facmarket.rng import substream

from conftest import make_institution, make_record
from oracles import enumerate_matchings


def ranking_of(ranks):
    return PrestigeRanking(rank=dict(ranks), min_violations=0,
                           violation_fraction=0.0)


@pytest.fixture
def inst4():
    return {"a": make_institution("a", "Northeast"),
            "b": make_institution("b", "Midwest"),
            "c": make_institution("c", "Northeast"),
            "d": make_institution("d", "West")}


@pytest.fixture
def rank4():
    return ranking_of({"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0})


class TestWeights:
    def test_masked_entry_must_be_zero(self):
        with pytest.raises(DataError):
            market.Weights(w=(1.0,) * 6,
                           active_mask=(True, False) + (True,) * 4)

    def test_from_active_round_trip(self):
        w = market.Weights.from_active([2.0, -1.0],
                                       [True, False, False, True,
                                        False, False])
        assert w.w == (2.0, 0.0, 0.0, -1.0, 0.0, 0.0)
        assert w.active_values() == [2.0, -1.0]

    def test_wrong_length_rejected(self):
        with pytest.raises(DataError):
            market.Weights(w=(1.0, 2.0))


class TestBuildFeatures:
    def test_fixture_pair(self, inst4, rank4):
        cand = make_record("f1", "a", "c", gender="F", postdoc=True,
                           productivity_z=1.5)
        x = market.build_features(cand, "c", rank4, inst4)
        # a(1) -> c(3), N=4: rank_diff = (3-1)/4; hiring_rank = 3/4.
        assert x == pytest.approx([0.5, 1.5, 0.75, 1.0, 1.0, 1.0])

    def test_self_hire_flags(self, inst4, rank4):
        cand = make_record("f1", "b", "b")
        x = market.build_features(cand, "b", rank4, inst4)
        assert x[0] == 0.0
        assert x[4] == 1.0

    def test_no_postdoc_other_region(self, inst4, rank4):
        cand = make_record("f1", "a", "b")
        x = market.build_features(cand, "b", rank4, inst4)
        assert x[3] == 0.0 and x[4] == 0.0

    def test_unset_z_treated_as_zero(self, inst4, rank4):
        cand = make_record("f1", "a", "b")
        assert market.build_features(cand, "b", rank4, inst4)[1] == 0.0

    def test_unranked_institution(self, inst4, rank4):
        cand = make_record("f1", "a", "b")
        with pytest.raises(DataError):
            market.build_features(cand, "zzz", rank4, inst4)


class TestScore:
    def test_logistic_zero_logit(self):
        model = market.MatchModel(market.LOGISTIC,
                                  market.Weights((0.0,) * 6))
        assert market.score(model, np.ones(6)) == pytest.approx(0.5)

    def test_logistic_ln3(self):
        w = market.Weights.from_active([np.log(3.0)],
                                       [True] + [False] * 5)
        model = market.MatchModel(market.LOGISTIC, w)
        x = np.array([1.0, 0, 0, 0, 0, 0])
        assert market.score(model, x) == pytest.approx(0.75)

    def test_uniform_is_one(self):
        assert market.score(market.MatchModel(market.UNIFORM),
                            np.full(6, 9.0)) == 1.0

    def test_step_strict_inequality(self):
        model = market.MatchModel(market.STEP)
        x = np.zeros(6)
        assert market.score(model, x, cand_doc_rank=1.0, opening_rank=2.0) == 1.0
        assert market.score(model, x, cand_doc_rank=2.0, opening_rank=2.0) == 0.0
        assert market.score(model, x, cand_doc_rank=3.0, opening_rank=2.0) == 0.0

    def test_step_needs_ranks(self):
        with pytest.raises(DataError):
            market.score(market.MatchModel(market.STEP), np.zeros(6))

    def test_bias_shifts_logit(self):
        w = market.Weights((0.0,) * 6)
        model = market.MatchModel(market.LOGISTIC, w, bias=np.log(3.0))
        assert market.score(model, np.zeros(6)) == pytest.approx(0.75)


class TestSelectOpening:
    def test_single_opening(self, rank4):
        rng = substream(0, "simulate")
        assert market.select_opening(["b"], rank4, rng) == "b"

    def test_rank_one_vs_three_probability(self, rank4):
        rng = substream(1, "simulate")
        n = 20_000
        hits = sum(market.select_opening(["a", "c"], rank4, rng) == "a"
                   for _ in range(n))
        p = 0.75   # (1/1) / (1/1 + 1/3)
        assert abs(hits - n * p) < 3 * np.sqrt(n * p * (1 - p))

    def test_equal_ranks_symmetric(self):
        pr = ranking_of({"a": 2.0, "b": 2.0})
        rng = substream(2, "simulate")
        n = 20_000
        hits = sum(market.select_opening(["a", "b"], pr, rng) == "a"
                   for _ in range(n))
        assert abs(hits - n / 2) < 3 * np.sqrt(n * 0.25)

    def test_empty_rejected(self, rank4):
        with pytest.raises(DataError):
            market.select_opening([], rank4, substream(0, "simulate"))


class TestSelectCandidate:
    def test_logistic_normalization(self, inst4, rank4):
        # Scores 0.5 and 0.25 -> probabilities 2/3 and 1/3.
        w = market.Weights.from_active([np.log(3.0)], [False, True] + [False] * 4)
        model = market.MatchModel(market.LOGISTIC, w)
        pool = [make_record("f1", "a", "c", productivity_z=0.0),
                make_record("f2", "a", "c", productivity_z=-1.0)]
        rng = substream(3, "simulate")
        n = 20_000
        hits = sum(market.select_candidate(model, pool, "c", rank4,
                                           inst4, rng).id == "f1"
                   for _ in range(n))
        p = 2.0 / 3.0
        assert abs(hits - n * p) < 3 * np.sqrt(n * p * (1 - p))

    def test_step_prefers_strictly_better(self, inst4, rank4):
        model = market.MatchModel(market.STEP)
        pool = [make_record("f1", "a", "x"),   # doc rank 1 < opening rank 3
                make_record("f2", "d", "x")]   # doc rank 4, scores 0
        rng = substream(4, "simulate")
        for _ in range(200):
            assert market.select_candidate(model, pool, "c", rank4,
                                           inst4, rng).id == "f1"

    def test_step_uniform_fallback(self, inst4, rank4):
        model = market.MatchModel(market.STEP)
        pool = [make_record("f1", "c", "x"), make_record("f2", "d", "x")]
        rng = substream(5, "simulate")
        n = 20_000
        hits = sum(market.select_candidate(model, pool, "a", rank4,
                                           inst4, rng).id == "f1"
                   for _ in range(n))
        assert abs(hits - n / 2) < 3 * np.sqrt(n * 0.25)

    def test_scale_invariance(self):
        # _weighted_draw: same u, scaled weights, same index.
        w = np.array([0.2, 0.5, 0.3])
        for u in np.linspace(0.0, 0.999, 97):
            assert market._weighted_draw(w, u) == \
                market._weighted_draw(17.0 * w, u)

    def test_zero_weight_never_drawn(self):
        w = np.array([0.0, 1.0, 0.0])
        for u in np.linspace(0.0, 0.999, 97):
            assert market._weighted_draw(w, u) == 1

    def test_empty_pool_rejected(self, inst4, rank4):
        with pytest.raises(DataError):
            market.select_candidate(market.MatchModel(market.UNIFORM), [],
                                    "a", rank4, inst4, substream(0, "simulate"))


# ---------------------------------------------------------------------------
# Sequential process distribution checks.

def build_tiny_market(records, inst, pr, year=2000):
    net = data.build_network(records, list(inst.values()))
    slices = data.year_slices(net)
    return market.build_market(records, slices, pr, inst)


def mc_distribution(ym, model, n_runs, seed):
    """Monte Carlo assignment distribution keyed like the oracle."""
    rng = substream(seed, "simulate")
    smat = market.score_matrix(ym, model)
    n = ym.n
    counts = {}
    out = np.empty(n, dtype=np.int64)
    for _ in range(n_runs):
        market._match_year(smat, ym.open_col, ym.open_w,
                           rng.random(n), rng.random(n), out)
        key = tuple(int(ym.open_col[out[i]]) for i in range(n))
        counts[key] = counts.get(key, 0) + 1
    return counts


def assert_within_3sigma(counts, dist, n_runs):
    for key, p in dist.items():
        obs = counts.get(key, 0)
        tol = 3 * np.sqrt(n_runs * p * (1 - p)) + 1
        assert abs(obs - n_runs * p) <= tol, (key, obs, n_runs * p)
    assert set(counts) <= set(dist)   # impossible outcomes never occur


class TestSimulateYear:
    def test_one_candidate_one_opening(self, inst4, rank4):
        recs = [make_record("f1", "a", "b")]
        mkt = build_tiny_market(recs, inst4, rank4)
        out = market.simulate_year(mkt.years[0], market.MatchModel(market.UNIFORM),
                                   substream(0, "simulate"))
        assert out == {"f1": "b"}

    def test_2x2_uniform_half_half(self, inst4, rank4):
        recs = [make_record("f1", "a", "b"), make_record("f2", "c", "d")]
        mkt = build_tiny_market(recs, inst4, rank4)
        ym = mkt.years[0]
        model = market.MatchModel(market.UNIFORM)
        dist = enumerate_matchings(market.score_matrix(ym, model),
                                   ym.open_col, ym.open_w)
        assert sorted(dist.values()) == pytest.approx([0.5, 0.5])
        counts = mc_distribution(ym, model, 20_000, seed=6)
        assert_within_3sigma(counts, dist, 20_000)

    def test_3x3_logistic_matches_enumeration(self, inst4, rank4):
        recs = [make_record("f1", "a", "b", gender="F", productivity_z=1.0),
                make_record("f2", "c", "d", postdoc=True, productivity_z=-0.5),
                make_record("f3", "d", "a", productivity_z=0.2)]
        mkt = build_tiny_market(recs, inst4, rank4)
        ym = mkt.years[0]
        w = market.Weights((1.2, 0.7, -0.4, 0.3, 0.2, -0.1))
        model = market.MatchModel(market.LOGISTIC, w)
        dist = enumerate_matchings(market.score_matrix(ym, model),
                                   ym.open_col, ym.open_w)
        counts = mc_distribution(ym, model, 20_000, seed=7)
        assert_within_3sigma(counts, dist, 20_000)

    def test_step_never_skips_better_candidate(self, inst4, rank4):
        recs = [make_record("f1", "a", "c"), make_record("f2", "d", "b"),
                make_record("f3", "b", "d")]
        mkt = build_tiny_market(recs, inst4, rank4)
        ym = mkt.years[0]
        model = market.MatchModel(market.STEP)
        dist = enumerate_matchings(market.score_matrix(ym, model),
                                   ym.open_col, ym.open_w)
        counts = mc_distribution(ym, model, 10_000, seed=8)
        assert_within_3sigma(counts, dist, 10_000)


class TestSimulateHistory:
    @pytest.fixture
    def two_year_market(self, inst4, rank4):
        recs = [make_record("f1", "a", "b", year=2000),
                make_record("f2", "c", "d", year=2000),
                make_record("f3", "b", "a", year=2001),
                make_record("f4", "d", "c", year=2001),
                make_record("f5", "a", "c", year=2001)]
        return build_tiny_market(recs, inst4, rank4), recs

    def test_deterministic_given_seed(self, two_year_market):
        mkt, _ = two_year_market
        model = market.MatchModel(market.UNIFORM)
        a = market.simulate_history(mkt, model, seed=42)
        b = market.simulate_history(mkt, model, seed=42)
        assert a.placements == b.placements

    def test_single_year_equals_simulate_year(self, inst4, rank4):
        recs = [make_record("f1", "a", "b"), make_record("f2", "c", "d")]
        mkt = build_tiny_market(recs, inst4, rank4)
        model = market.MatchModel(market.UNIFORM)
        run = market.simulate_history(mkt, model, seed=5)
        direct = market.simulate_year(mkt.years[0], model,
                                      substream(5, "simulate"))
        assert run.placements == direct

    def test_degree_conservation(self, two_year_market, inst4):
        mkt, recs = two_year_market
        w = market.Weights((2.0, 0.5, -0.3, 0.1, 0.1, 0.0))
        model = market.MatchModel(market.LOGISTIC, w)
        by_id = {r.id: r for r in recs}
        for seed in range(20):
            run = market.simulate_history(mkt, model, seed=seed)
            for year in (2000, 2001):
                obs = sorted(r.hiring_institution for r in recs
                             if r.hire_year == year)
                sim = sorted(inst for fid, inst in run.placements.items()
                             if by_id[fid].hire_year == year)
                assert sim == obs
                # Out-degrees are fixed by construction (candidates move).
                assert sorted(by_id[fid].doctoral_institution
                              for fid in run.placements
                              if by_id[fid].hire_year == year) == \
                    sorted(r.doctoral_institution for r in recs
                           if r.hire_year == year)

    def test_logistic_zero_weights_matches_uniform(self, inst4, rank4):
        recs = [make_record("f1", "a", "b"), make_record("f2", "c", "d"),
                make_record("f3", "d", "a")]
        mkt = build_tiny_market(recs, inst4, rank4)
        ym = mkt.years[0]
        w0 = market.MatchModel(market.LOGISTIC, market.Weights((0.0,) * 6))
        uni = market.MatchModel(market.UNIFORM)
        dist_w0 = enumerate_matchings(market.score_matrix(ym, w0),
                                      ym.open_col, ym.open_w)
        dist_uni = enumerate_matchings(market.score_matrix(ym, uni),
                                       ym.open_col, ym.open_w)
        assert set(dist_w0) == set(dist_uni)
        for k in dist_uni:
            assert dist_w0[k] == pytest.approx(dist_uni[k])

    def test_empty_market_rejected(self, rank4):
        mkt = market.Market(years=(), ranking=rank4, records_by_id={})
        with pytest.raises(DataError):
            market.simulate_history(mkt, market.MatchModel(market.UNIFORM), 0)

    def test_norm_rank_paths_agree(self, two_year_market):
        mkt, recs = two_year_market
        model = market.MatchModel(market.UNIFORM)
        fast = market.simulated_norm_ranks(mkt, model, seed=3)
        run = market.simulate_history(mkt, model, seed=3)
        slow = np.concatenate([
            [mkt.ranking.normalized(run.placements[fid])
             for fid in ym.cand_ids] for ym in mkt.years])
        assert np.allclose(fast, slow)
