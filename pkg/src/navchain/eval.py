"""Summarisation and prediction quality metrics.

Summarisation ability compares the model's top-m trail ranking against the
n-gram frequency ranking of the input sessions (Spearman footrule with a
location parameter, plus plain list overlap). Predictive power scores
next-page predictions under temporal cross-validation with MAE and the
normalised st_MAE.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from navchain.ingest import FINISH, START, Session
from navchain.model import (
    F_KEY,
    S_KEY,
    BuildParams,
    ModelGraph,
    State,
    build_vlmc,
)
from navchain.ngram import RankedList, Tokens, count_ngrams, rank_items, token_sort_key
from navchain.trails import TrailQuery, extract_trails, top_m_trails


# -- ranked list comparison ---------------------------------------------------


@dataclass(frozen=True)
class ListComparison:
    footrule: float
    overlap: float
    m: int
    union_size: int


def footrule(l1: RankedList, l2: RankedList) -> float:
    """Spearman footrule proximity with location parameter m + 1.

    Items absent from a list take rank m + 1; the summed rank displacement
    over the union is normalised by m(m + 1) and subtracted from 1.
    """
    if l1.m != l2.m:
        raise ValueError("footrule requires lists built with the same m")
    m = l1.m
    if m < 1:
        raise ValueError("m must be at least 1")
    f = l1.ranks()
    g = l2.ranks()
    absent = m + 1
    union = set(f) | set(g)
    displacement = sum(abs(f.get(i, absent) - g.get(i, absent)) for i in union)
    return float(1 - Fraction(displacement, m * (m + 1)))


def overlap(reference: RankedList, assessed: RankedList) -> float:
    """Fraction of reference items that also occur in the assessed list."""
    ref_items = set(reference.items())
    if not ref_items:
        raise ValueError("the reference list must be non-empty")
    return float(Fraction(len(ref_items & set(assessed.items())), len(ref_items)))


def summarisation_eval(
    model: ModelGraph,
    sessions: Sequence[Session],
    n: int,
    query: TrailQuery,
) -> ListComparison:
    """Compare the model's trail ranking against the n-gram count ranking.

    The reference ranking keeps only grams that start at a real page: trails
    never contain the artificial start token, so start-anchored grams (and the
    bare finish unigram) have no counterpart on the model side.
    """
    if query.mtl != n:
        raise ValueError("query.mtl must equal the n-gram length under comparison")
    table = count_ngrams(sessions, n)
    scored = [(gram, count) for gram, count in table.counts.items() if gram[0] not in (START, FINISH)]
    reference = rank_items(scored, query.m)
    if not reference.entries:
        raise ValueError("no n-grams to rank at this length")
    assessed = top_m_trails(extract_trails(model, query), query.m)
    union = set(reference.items()) | set(assessed.items())
    return ListComparison(
        footrule=footrule(reference, assessed),
        overlap=overlap(reference, assessed),
        m=query.m,
        union_size=len(union),
    )


# -- temporal cross-validation ------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Train on partitions 1..train_upto, test on partition train_upto + 1."""

    k_total: int
    train_upto: int

    def __post_init__(self) -> None:
        if self.k_total < 2:
            raise ValueError("k_total must be at least 2")
        if not (1 <= self.train_upto < self.k_total):
            raise ValueError("train_upto must lie in [1, k_total)")


def fold_partitions(sessions: Sequence[Session], k_total: int, order: str = "time") -> list[list[Session]]:
    """Split sessions into k contiguous near-equal partitions.

    ``order="time"`` sorts by first_timestamp first (stable, so equal
    timestamps keep input order); ``order="given"`` partitions the sequence as
    passed, which supports a seeded shuffle upstream.
    """
    if k_total < 2:
        raise ValueError("k_total must be at least 2")
    if len(sessions) < k_total:
        raise ValueError("fewer sessions than partitions")
    if order == "time":
        ordered = sorted(sessions, key=lambda s: s.first_timestamp)
    elif order == "given":
        ordered = list(sessions)
    else:
        raise ValueError("order must be 'time' or 'given'")
    n = len(ordered)
    base, extra = divmod(n, k_total)
    partitions = []
    pos = 0
    for i in range(k_total):
        size = base + (1 if i < extra else 0)
        partitions.append(ordered[pos : pos + size])
        pos += size
    return partitions


def temporal_folds(sessions: Sequence[Session], k_total: int) -> list[FoldPlan]:
    """All train/test plans over k temporally ordered partitions."""
    if len(sessions) < k_total:
        raise ValueError("fewer sessions than partitions")
    if k_total < 2:
        raise ValueError("k_total must be at least 2")
    return [FoldPlan(k_total=k_total, train_upto=i) for i in range(1, k_total)]


# -- next-page prediction -----------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    """Ranked reachable pages from the tip of a prefix.

    ``dropped`` counts prefix pages discarded before the walk succeeded; when
    it equals the full prefix length the entries are the unconditional
    initial-probability ranking.
    """

    entries: tuple[tuple[int, Fraction], ...]
    dropped: int


def _best_tip(model: ModelGraph, pages: Sequence[int]) -> Optional[State]:
    # Maximum-probability clone path matching the page sequence; ties resolve
    # to the smallest state key.
    paths: dict[State, Fraction] = {
        key: Fraction(visits, model.total_views)
        for key, visits in model.states.items()
        if key[0] == pages[0] and key not in (S_KEY, F_KEY) and visits > 0
    }
    if not paths:
        return None
    for token in pages[1:]:
        extended: dict[State, Fraction] = {}
        for key, mass in paths.items():
            visits = model.states[key]
            for target, weight in model.out.get(key, {}).items():
                if target[0] == token and weight > 0:
                    candidate = mass * Fraction(weight, visits)
                    if candidate > extended.get(target, Fraction(-1)):
                        extended[target] = candidate
        if not extended:
            return None
        paths = extended
    return min(paths.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def _ranked_entries(scored: dict[int, Fraction]) -> tuple[tuple[int, Fraction], ...]:
    ordered = sorted(scored.items(), key=lambda kv: (-kv[1], token_sort_key(kv[0])))
    return tuple(ordered)


def predict_next(model: ModelGraph, prefix: Sequence[int]) -> Prediction:
    """Reachable pages (and the finish token) after following the prefix.

    An untraversable prefix falls back by dropping its earliest page until a
    walk succeeds; with nothing left, the unconditional page ranking by
    initial probability is returned.
    """
    prefix = tuple(prefix)
    if not prefix:
        raise ValueError("prefix must contain at least one page")
    working = prefix
    while working:
        tip = _best_tip(model, working)
        if tip is not None:
            by_page: dict[int, Fraction] = {}
            for target, probability in model.out_probabilities(tip).items():
                token = FINISH if target == F_KEY else target[0]
                by_page[token] = by_page.get(token, Fraction(0)) + probability
            if by_page:
                return Prediction(entries=_ranked_entries(by_page), dropped=len(prefix) - len(working))
        working = working[1:]
    unconditional = {
        page: Fraction(views, model.total_views) for page, views in model.page_views.items()
    }
    return Prediction(entries=_ranked_entries(unconditional), dropped=len(prefix))


@dataclass(frozen=True)
class PredictionOutcome:
    prefix: Tokens
    target: int
    reachable: tuple[tuple[int, Fraction], ...]
    rank: int
    ae: int
    ae_c: int


def score_prediction(entries: Sequence[tuple[int, Fraction]], target: int) -> tuple[int, int, int]:
    """Competition rank of the target plus both absolute errors.

    Ties share the best rank ("1224" ranking), in both the probability-
    descending direction (ae) and the ascending one (ae_c). A target absent
    from the entries scores one past the end in both directions.
    """
    probs = dict(entries)
    if target not in probs:
        n = len(entries)
        return n + 1, n, n
    p = probs[target]
    greater = sum(1 for _, q in entries if q > p)
    less = sum(1 for _, q in entries if q < p)
    return greater + 1, greater, less


def mae(outcomes: Sequence[PredictionOutcome]) -> float:
    if not outcomes:
        raise ValueError("outcomes must be non-empty")
    return float(Fraction(sum(o.ae for o in outcomes), len(outcomes)))


def st_mae(outcomes: Sequence[PredictionOutcome]) -> float:
    if not outcomes:
        raise ValueError("outcomes must be non-empty")
    total_ae = sum(o.ae for o in outcomes)
    total_ae_c = sum(o.ae_c for o in outcomes)
    if total_ae == 0 and total_ae_c == 0:
        return 0.0
    return float(Fraction(total_ae, total_ae + total_ae_c))


@dataclass(frozen=True)
class PredictionReport:
    train_upto: int
    k_total: int
    order: int
    states: int
    mae: float
    st_mae: float
    n_test: int
    n_skipped: int
    n_fallback: int


def prediction_eval(
    sessions: Sequence[Session],
    params: BuildParams,
    fold_plan: FoldPlan,
    order: str = "time",
) -> PredictionReport:
    """Train on the plan's leading partitions, predict the last page of every
    test session of length at least 2 from its prefix."""
    partitions = fold_partitions(sessions, fold_plan.k_total, order=order)
    train = [s for part in partitions[: fold_plan.train_upto] for s in part]
    test = partitions[fold_plan.train_upto]
    model = build_vlmc(train, params)
    outcomes: list[PredictionOutcome] = []
    skipped = 0
    fallbacks = 0
    for session in test:
        if len(session.pages) < 2:
            skipped += 1
            continue
        prefix, target = session.pages[:-1], session.pages[-1]
        prediction = predict_next(model, prefix)
        if prediction.dropped > 0:
            fallbacks += 1
        rank, ae, ae_c = score_prediction(prediction.entries, target)
        outcomes.append(
            PredictionOutcome(
                prefix=prefix,
                target=target,
                reachable=prediction.entries,
                rank=rank,
                ae=ae,
                ae_c=ae_c,
            )
        )
    if not outcomes:
        raise ValueError("no test session of length at least 2")
    return PredictionReport(
        train_upto=fold_plan.train_upto,
        k_total=fold_plan.k_total,
        order=params.target_order,
        states=len(model.states),
        mae=mae(outcomes),
        st_mae=st_mae(outcomes),
        n_test=len(outcomes),
        n_skipped=skipped,
        n_fallback=fallbacks,
    )
