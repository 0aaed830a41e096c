"""Shared fixtures: two small corpora exercised throughout the suite.

Corpus A is a 14-session multiset with one hub page whose out-distribution
depends on the referrer, so a second-order pass must clone it. Corpus B is a
pair of hand-assembled graphs (first-order and a refined second-order variant
of the same traffic) with 101 page views, used to pin down trail and
prediction arithmetic independently of the builder.

Page ids start at 11 so they cannot be confused with list indices or the
reserved tokens.
"""

from fractions import Fraction

import pytest

from navchain.ingest import Session
from navchain.model import F_KEY, S_KEY, ModelGraph

P1, P2, P3, P4, P5, P6, P7 = 11, 12, 13, 14, 15, 16, 17


def mk_sessions(seqs, start=0.0, step=1.0):
    return [
        Session(pages=tuple(seq), first_timestamp=start + i * step)
        for i, seq in enumerate(seqs)
    ]


FIXTURE_A_SEQS = (
    [(P1, P2, P3)] * 3
    + [(P1, P2, P5)] * 1
    + [(P4, P2, P3)] * 4
    + [(P4, P2, P5)] * 2
    + [(P6, P2, P3)] * 1
    + [(P6, P2, P5)] * 3
)


@pytest.fixture
def fixture_a():
    return mk_sessions(FIXTURE_A_SEQS)


def build_fixture_b_first() -> ModelGraph:
    states = {
        S_KEY: 16,
        (P1, 0): 11,
        (P2, 0): 12,
        (P3, 0): 21,
        (P4, 0): 22,
        (P5, 0): 14,
        (P6, 0): 16,
        (P7, 0): 5,
        F_KEY: 0,
    }
    out = {
        S_KEY: {(P1, 0): 6, (P2, 0): 5, (P5, 0): 5},
        (P1, 0): {(P3, 0): 9, F_KEY: 2},
        (P2, 0): {(P3, 0): 6, F_KEY: 6},
        (P3, 0): {(P4, 0): 10, (P5, 0): 9, F_KEY: 2},
        (P4, 0): {(P6, 0): 12, F_KEY: 10},
        (P5, 0): {(P6, 0): 7, F_KEY: 7},
        (P6, 0): {(P7, 0): 5, F_KEY: 11},
        (P7, 0): {F_KEY: 5},
    }
    page_views = {P1: 11, P2: 12, P3: 21, P4: 22, P5: 14, P6: 16, P7: 5}
    model = ModelGraph(
        order=1,
        ctx_len=0,
        states=states,
        out=out,
        contexts=None,
        page_views=page_views,
        total_views=101,
    )
    model.validate()
    return model


def build_fixture_b_second() -> ModelGraph:
    # Same traffic after cloning pages 3, 5 and 6; clone 0 of page 3 receives
    # visitors arriving from page 1, clone 1 those from page 2, and the splits
    # of 5 and 6 follow from there.
    states = {
        S_KEY: 16,
        (P1, 0): 11,
        (P2, 0): 12,
        (P3, 0): 9,
        (P3, 1): 12,
        (P4, 0): 22,
        (P5, 0): 9,
        (P5, 1): 5,
        (P6, 0): 7,
        (P6, 1): 9,
        (P7, 0): 5,
        F_KEY: 0,
    }
    out = {
        S_KEY: {(P1, 0): 6, (P2, 0): 5, (P5, 1): 5},
        (P1, 0): {(P3, 0): 9, F_KEY: 2},
        (P2, 0): {(P3, 1): 6, F_KEY: 6},
        (P3, 0): {(P4, 0): 2, (P5, 0): 7},
        (P3, 1): {(P4, 0): 8, (P5, 0): 2, F_KEY: 2},
        (P4, 0): {(P6, 1): 12, F_KEY: 10},
        (P5, 0): {(P6, 0): 2, F_KEY: 7},
        (P5, 1): {(P6, 1): 5},
        (P6, 0): {(P7, 0): 4, F_KEY: 3},
        (P6, 1): {(P7, 0): 1, F_KEY: 8},
        (P7, 0): {F_KEY: 5},
    }
    page_views = {P1: 11, P2: 12, P3: 21, P4: 22, P5: 14, P6: 16, P7: 5}
    model = ModelGraph(
        order=2,
        ctx_len=1,
        states=states,
        out=out,
        contexts=None,
        page_views=page_views,
        total_views=101,
    )
    model.validate()
    return model


@pytest.fixture
def fixture_b_first():
    return build_fixture_b_first()


@pytest.fixture
def fixture_b_second():
    return build_fixture_b_second()


def frac(a, b=None) -> Fraction:
    return Fraction(a) if b is None else Fraction(a, b)
