"""List comparison metrics, temporal folds and next-page prediction."""

from fractions import Fraction

import pytest
from conftest import P1, P2, P3, P4, P5, P6, P7, frac, mk_sessions

from navchain.eval import (
    FoldPlan,
    PredictionOutcome,
    fold_partitions,
    footrule,
    mae,
    overlap,
    predict_next,
    prediction_eval,
    score_prediction,
    st_mae,
    summarisation_eval,
    temporal_folds,
)
from navchain.ingest import FINISH, Session
from navchain.model import BuildParams, build_vlmc
from navchain.ngram import RankedList
from navchain.trails import TrailQuery

F = FINISH


def ranked(m, items):
    return RankedList(m=m, entries=list(items))


# Two ways of ranking the same traffic, pinned by hand: the n-gram count
# ranking on the left, a model trail ranking on the right.
TRIGRAM_COUNTS = ranked(
    5,
    [
        ((P2, P3, P4), 8),
        ((P4, P6, F), 8),
        ((P1, P3, P5), 7),
        ((P3, P4, F), 7),
        ((P3, P5, F), 7),
    ],
)
TRIGRAM_TRAILS = ranked(
    5,
    [
        ((P4, P6, F), 0.061),
        ((P3, P4, F), 0.059),
        ((P2, P3, P4), 0.057),
        ((P2, P3, P5), 0.051),
        ((P6, P7, F), 0.050),
    ],
)
FOURGRAM_COUNTS = ranked(
    5,
    [
        ((P1, P3, P5, F), 7),
        ((P2, P3, P4, F), 5),
        ((P5, P6, P7, F), 4),
        ((P2, P3, P4, P6), 3),
        ((P3, P4, P6, F), 3),
    ],
)
FOURGRAM_TRAILS = ranked(
    5,
    [
        ((P2, P3, P4, F), 0.0334),
        ((P3, P5, P6, F), 0.0306),
        ((P3, P4, P6, F), 0.0278),
        ((P4, P6, P7, F), 0.0278),
        ((P2, P3, P5, P6), 0.0255),
    ],
)
FIVEGRAM_COUNTS = ranked(
    3,
    [
        ((P2, P3, P4, P6, F), 3),
        ((P1, P2, P3, P4, F), 2),
        ((P2, P3, P5, P6, F), 2),
    ],
)
FIVEGRAM_TRAILS = ranked(
    3,
    [
        ((P2, P3, P5, P6, F), 0.0175),
        ((P2, P3, P4, P6, F), 0.0159),
        ((P3, P5, P6, P7, F), 0.0139),
    ],
)


class TestFootrule:
    def test_pinned_trigram_lists(self):
        assert footrule(TRIGRAM_COUNTS, TRIGRAM_TRAILS) == pytest.approx(0.60)
        assert overlap(TRIGRAM_COUNTS, TRIGRAM_TRAILS) == pytest.approx(0.60)

    def test_pinned_fourgram_lists(self):
        assert footrule(FOURGRAM_COUNTS, FOURGRAM_TRAILS) == pytest.approx(1 - 20 / 30)
        assert overlap(FOURGRAM_COUNTS, FOURGRAM_TRAILS) == pytest.approx(0.40)

    def test_pinned_fivegram_lists(self):
        assert footrule(FIVEGRAM_COUNTS, FIVEGRAM_TRAILS) == pytest.approx(0.50)
        assert overlap(FIVEGRAM_COUNTS, FIVEGRAM_TRAILS) == pytest.approx(2 / 3)

    def test_identical_lists_score_one(self):
        assert footrule(TRIGRAM_COUNTS, TRIGRAM_COUNTS) == 1.0

    def test_disjoint_full_lists_score_zero(self):
        l1 = ranked(3, [((P1,), 3), ((P2,), 2), ((P3,), 1)])
        l2 = ranked(3, [((P4,), 3), ((P5,), 2), ((P6,), 1)])
        assert footrule(l1, l2) == 0.0

    def test_symmetry(self):
        assert footrule(TRIGRAM_COUNTS, TRIGRAM_TRAILS) == footrule(
            TRIGRAM_TRAILS, TRIGRAM_COUNTS
        )

    def test_requires_matching_m(self):
        with pytest.raises(ValueError):
            footrule(TRIGRAM_COUNTS, FIVEGRAM_TRAILS)

    def test_short_lists_still_compare(self):
        l1 = ranked(5, [((P1,), 2)])
        l2 = ranked(5, [((P1,), 2)])
        assert footrule(l1, l2) == 1.0


class TestOverlap:
    def test_counts_reference_items_found(self):
        reference = ranked(3, [((P1,), 3), ((P2,), 2), ((P3,), 1)])
        assessed = ranked(3, [((P3,), 9), ((P4,), 8), ((P1,), 7)])
        assert overlap(reference, assessed) == pytest.approx(2 / 3)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            overlap(ranked(3, []), TRIGRAM_TRAILS)


class TestSummarisationEval:
    def test_exact_model_reproduces_the_ngram_ranking(self, fixture_a):
        model = build_vlmc(fixture_a, BuildParams(target_order=2, gamma=0))
        query = TrailQuery(lam=Fraction(1, 2 * model.total_views), mtl=3, m=30)
        comparison = summarisation_eval(model, fixture_a, 3, query)
        assert comparison.footrule == 1.0
        assert comparison.overlap == 1.0

    def test_first_order_model_misses_history_effects(self, fixture_a):
        model = build_vlmc(fixture_a, BuildParams(target_order=1))
        query = TrailQuery(lam=Fraction(1, 2 * model.total_views), mtl=3, m=30)
        comparison = summarisation_eval(model, fixture_a, 3, query)
        assert comparison.footrule < 1.0

    def test_mtl_must_match_n(self, fixture_a):
        model = build_vlmc(fixture_a, BuildParams(target_order=1))
        with pytest.raises(ValueError):
            summarisation_eval(model, fixture_a, 3, TrailQuery(mtl=4))

    def test_reference_without_page_anchored_grams_rejected(self):
        sessions = mk_sessions([(2,)])
        model = build_vlmc(sessions, BuildParams(target_order=1))
        with pytest.raises(ValueError):
            summarisation_eval(model, sessions, 3, TrailQuery(lam="0.001", mtl=3))


class TestFolds:
    def test_fold_plan_validation(self):
        FoldPlan(k_total=5, train_upto=4)
        with pytest.raises(ValueError):
            FoldPlan(k_total=1, train_upto=1)
        with pytest.raises(ValueError):
            FoldPlan(k_total=5, train_upto=0)
        with pytest.raises(ValueError):
            FoldPlan(k_total=5, train_upto=5)

    def test_partitions_are_near_equal_with_leading_remainder(self, fixture_a):
        partitions = fold_partitions(fixture_a, 5)
        assert [len(p) for p in partitions] == [3, 3, 3, 3, 2]

    def test_time_order_sorts_by_first_timestamp(self):
        sessions = [
            Session(pages=(3,), first_timestamp=50.0),
            Session(pages=(2,), first_timestamp=10.0),
        ]
        partitions = fold_partitions(sessions, 2)
        assert partitions[0][0].pages == (2,)
        assert partitions[1][0].pages == (3,)

    def test_given_order_is_preserved(self):
        sessions = [
            Session(pages=(3,), first_timestamp=50.0),
            Session(pages=(2,), first_timestamp=10.0),
        ]
        partitions = fold_partitions(sessions, 2, order="given")
        assert partitions[0][0].pages == (3,)

    def test_equal_timestamps_keep_input_order(self):
        sessions = [Session(pages=(p,), first_timestamp=7.0) for p in (5, 4, 3)]
        partitions = fold_partitions(sessions, 3)
        assert [p[0].pages for p in partitions] == [(5,), (4,), (3,)]

    def test_validation(self, fixture_a):
        with pytest.raises(ValueError):
            fold_partitions(fixture_a, 1)
        with pytest.raises(ValueError):
            fold_partitions(fixture_a[:3], 5)
        with pytest.raises(ValueError):
            fold_partitions(fixture_a, 5, order="random")

    def test_temporal_folds_enumerate_all_plans(self, fixture_a):
        plans = temporal_folds(fixture_a, 5)
        assert [(p.k_total, p.train_upto) for p in plans] == [
            (5, 1),
            (5, 2),
            (5, 3),
            (5, 4),
        ]


class TestPredictNext:
    def test_first_order_walk(self, fixture_b_first):
        prediction = predict_next(fixture_b_first, (P1, P3))
        assert prediction.dropped == 0
        assert prediction.entries == (
            (P4, frac(10, 21)),
            (P5, frac(9, 21)),
            (F, frac(2, 21)),
        )

    def test_second_order_walk_follows_the_refined_clone(self, fixture_b_second):
        prediction = predict_next(fixture_b_second, (P1, P3))
        assert prediction.entries == ((P5, frac(7, 9)), (P4, frac(2, 9)))

    def test_walk_starts_at_the_heaviest_clone(self, fixture_b_second):
        # page 3 alone is ambiguous; clone 1 carries 12/101 > 9/101
        prediction = predict_next(fixture_b_second, (P3,))
        assert prediction.entries == (
            (P4, frac(2, 3)),
            (P5, frac(1, 6)),
            (F, frac(1, 6)),
        )

    def test_tied_pages_sort_before_the_finish_token(self, fixture_b_first):
        prediction = predict_next(fixture_b_first, (P2, P3, P5))
        assert prediction.entries == ((P6, frac(1, 2)), (F, frac(1, 2)))

    def test_untraversable_prefix_drops_leading_pages(self, fixture_b_first):
        prediction = predict_next(fixture_b_first, (P7, P1))
        assert prediction.dropped == 1
        assert prediction.entries[0] == (P3, frac(9, 11))

    def test_unknown_prefix_falls_back_to_initial_probabilities(self, fixture_b_first):
        prediction = predict_next(fixture_b_first, (99,))
        assert prediction.dropped == 1
        assert prediction.entries[0] == (P4, frac(22, 101))
        assert prediction.entries[1] == (P3, frac(21, 101))

    def test_empty_prefix_rejected(self, fixture_b_first):
        with pytest.raises(ValueError):
            predict_next(fixture_b_first, ())


class TestScorePrediction:
    def test_competition_ranking_with_ties(self):
        entries = ((P4, frac(1, 2)), (P5, frac(1, 4)), (P6, frac(1, 4)))
        assert score_prediction(entries, P4) == (1, 0, 2)
        assert score_prediction(entries, P5) == (2, 1, 0)
        assert score_prediction(entries, P6) == (2, 1, 0)

    def test_tie_at_the_top_shares_rank_one(self):
        entries = ((P6, frac(1, 2)), (F, frac(1, 2)))
        assert score_prediction(entries, P6) == (1, 0, 0)
        assert score_prediction(entries, F) == (1, 0, 0)

    def test_absent_target_scores_one_past_the_end(self):
        entries = ((P4, frac(2, 3)), (P5, frac(1, 3)))
        assert score_prediction(entries, 99) == (3, 2, 2)


def outcome(ae, ae_c):
    return PredictionOutcome(
        prefix=(P1,), target=P2, reachable=(), rank=ae + 1, ae=ae, ae_c=ae_c
    )


class TestErrorAggregates:
    def test_mae_of_known_walks(self):
        assert mae([outcome(1, 1), outcome(0, 0), outcome(1, 0)]) == pytest.approx(2 / 3)
        assert mae([outcome(0, 1), outcome(1, 0), outcome(0, 1)]) == pytest.approx(1 / 3)

    def test_st_mae_normalises_by_both_directions(self):
        outcomes = [outcome(1, 1), outcome(0, 0), outcome(1, 0)]
        assert st_mae(outcomes) == pytest.approx(2 / 3)

    def test_st_mae_of_perfect_predictions_is_zero(self):
        assert st_mae([outcome(0, 0), outcome(0, 0)]) == 0.0

    def test_empty_outcomes_rejected(self):
        with pytest.raises(ValueError):
            mae([])
        with pytest.raises(ValueError):
            st_mae([])


class TestPredictionEval:
    def test_second_order_context_fixes_the_last_fold(self, fixture_a):
        # the final two sessions are (P6, P2, P5); the first-order model
        # prefers P3 after P2, the second-order clone knows better
        plan = FoldPlan(k_total=7, train_upto=6)
        first = prediction_eval(fixture_a, BuildParams(target_order=1), plan)
        assert first.mae == pytest.approx(1.0)
        assert first.n_test == 2
        second = prediction_eval(fixture_a, BuildParams(target_order=2, gamma=0), plan)
        assert second.mae == 0.0
        assert second.st_mae == 0.0
        assert second.n_test == 2
        assert second.n_skipped == 0
        assert second.n_fallback == 0

    def test_short_sessions_are_skipped(self):
        sessions = mk_sessions([(2, 3), (2, 3), (2, 3), (2, 3), (4,), (2, 3)])
        plan = FoldPlan(k_total=3, train_upto=2)
        report = prediction_eval(sessions, BuildParams(target_order=1), plan)
        assert report.n_skipped == 1
        assert report.n_test == 1

    def test_all_short_test_folds_are_an_error(self):
        sessions = mk_sessions([(2, 3), (2, 3), (4,), (5,)])
        plan = FoldPlan(k_total=2, train_upto=1)
        with pytest.raises(ValueError):
            prediction_eval(sessions, BuildParams(target_order=1), plan)

    def test_report_carries_the_plan_and_model_shape(self, fixture_a):
        plan = FoldPlan(k_total=5, train_upto=4)
        report = prediction_eval(fixture_a, BuildParams(target_order=2, gamma=0), plan)
        assert report.k_total == 5
        assert report.train_upto == 4
        assert report.order == 2
        assert report.states >= 8
