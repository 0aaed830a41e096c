"""Augmented n-gram counting and top-m ranking."""

import io
from fractions import Fraction

import pytest
from conftest import P1, P2, P3, P4, P5, P6

from navchain.ingest import FINISH, START, Session
from navchain.ngram import (
    NGramTable,
    augment,
    count_ngrams,
    ngram_tables,
    rank_items,
    render_sequence,
    render_token,
    sequence_sort_key,
    token_sort_key,
    top_m_ngrams,
    write_ngram_csv,
    write_ranked_csv,
)


class TestAugment:
    def test_brackets_with_artificial_tokens(self):
        assert augment((5, 6)) == (START, 5, 6, FINISH)

    def test_accepts_session_objects(self):
        session = Session(pages=(7,), first_timestamp=0.0)
        assert augment(session) == (START, 7, FINISH)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            augment(())


class TestTokenOrdering:
    def test_start_before_pages_before_finish(self):
        tokens = [FINISH, 9, START, 2]
        assert sorted(tokens, key=token_sort_key) == [START, 2, 9, FINISH]

    def test_sequence_key_is_elementwise(self):
        seqs = [(2, FINISH), (2, 3), (START, 9)]
        assert sorted(seqs, key=sequence_sort_key) == [(START, 9), (2, 3), (2, FINISH)]

    def test_rendering(self):
        assert render_token(START) == "S"
        assert render_token(FINISH) == "F"
        assert render_token(42) == "42"
        assert render_sequence((START, 42, FINISH)) == "S 42 F"


class TestCountNgrams:
    def test_unigram_counts_include_artificial_tokens(self, fixture_a):
        table = count_ngrams(fixture_a, 1)
        assert table.count((START,)) == 14
        assert table.count((FINISH,)) == 14
        assert table.count((P2,)) == 14
        assert table.count((P1,)) == 4
        # 14 sessions of length 3, augmented to 5 tokens each
        assert table.total() == 14 * 5

    def test_bigram_counts(self, fixture_a):
        table = count_ngrams(fixture_a, 2)
        assert table.count((P2, P3)) == 8
        assert table.count((P2, P5)) == 6
        assert table.count((START, P1)) == 4
        assert table.count((P3, FINISH)) == 8
        assert table.count((P3, P5)) == 0

    def test_trigram_counts(self, fixture_a):
        table = count_ngrams(fixture_a, 3)
        assert table.count((P1, P2, P3)) == 3
        assert table.count((P4, P2, P3)) == 4
        assert table.count((P6, P2, P5)) == 3
        assert table.count((START, P1, P2)) == 4

    def test_windows_longer_than_sessions_vanish(self):
        table = count_ngrams([(2,)], 4)
        assert len(table) == 0

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValueError):
            count_ngrams([], 0)

    def test_ngram_tables_covers_all_lengths(self, fixture_a):
        tables = ngram_tables(fixture_a, 3)
        assert sorted(tables) == [1, 2, 3]
        assert all(tables[n].n == n for n in tables)


class TestFollowers:
    def test_followers_listed_in_token_order(self, fixture_a):
        table = count_ngrams(fixture_a, 2)
        assert table.followers((P2,)) == [(P3, 8), (P5, 6)]
        assert table.followers((START,)) == [(P1, 4), (P4, 6), (P6, 4)]

    def test_followers_of_unknown_prefix(self, fixture_a):
        table = count_ngrams(fixture_a, 2)
        assert table.followers((99,)) == []


class TestRankItems:
    def test_score_descending_then_lexicographic(self):
        scored = [((3, 4), 2), ((2, 9), 5), ((2, 4), 2), ((5,), 7)]
        ranked = rank_items(scored, 10)
        assert ranked.items() == [(5,), (2, 9), (2, 4), (3, 4)]

    def test_finish_token_sorts_after_pages(self):
        scored = [((2, FINISH), 1), ((2, 3), 1)]
        ranked = rank_items(scored, 2)
        assert ranked.items() == [(2, 3), (2, FINISH)]

    def test_m_caps_the_list(self):
        scored = [((i,), i) for i in range(2, 12)]
        ranked = rank_items(scored, 3)
        assert len(ranked) == 3
        assert ranked.m == 3

    def test_mixed_score_types_compare(self):
        scored = [((2,), Fraction(1, 2)), ((3,), 0.6), ((4,), 1)]
        assert rank_items(scored, 3).items() == [(4,), (3,), (2,)]

    def test_ranks_are_one_based(self):
        ranked = rank_items([((2,), 5), ((3,), 1)], 2)
        assert ranked.ranks() == {(2,): 1, (3,): 2}

    def test_rejects_nonpositive_m(self):
        with pytest.raises(ValueError):
            rank_items([], 0)


class TestTopMNgrams:
    def test_top_trigrams(self, fixture_a):
        table = count_ngrams(fixture_a, 3)
        ranked = top_m_ngrams(table, 3)
        # (S, P4, P2) ties with (P2, P5, F) at 6 and wins lexicographically
        # because the start token sorts before every page.
        assert ranked.items() == [
            (P2, P3, FINISH),
            (START, P4, P2),
            (P2, P5, FINISH),
        ]


class TestCsvWriters:
    def test_ngram_csv(self):
        table = NGramTable(n=2, counts={(2, 3): 4, (2, FINISH): 4, (3, 2): 1})
        buffer = io.StringIO()
        write_ngram_csv(table, buffer)
        assert buffer.getvalue() == "n,tokens,count\n2,2 3,4\n2,2 F,4\n2,3 2,1\n"

    def test_ranked_csv_with_format(self):
        ranked = rank_items([((2, 3), 0.125)], 1)
        buffer = io.StringIO()
        write_ranked_csv(ranked, buffer, score_format="{:.3f}")
        assert buffer.getvalue() == "rank,tokens,score\n1,2 3,0.125\n"
