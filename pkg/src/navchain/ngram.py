"""N-gram counting over start/finish-augmented sessions, plus top-m ranking.

The n-gram tables are the ground truth that model construction and the
summarisation metrics are checked against. Token tuples may start with the
artificial start token and end with the finish token, never the other way
around, because windows are cut from augmented sessions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

from navchain.ingest import FINISH, START, Session

Tokens = tuple[int, ...]
Score = Union[int, float, Fraction]


def augment(session: Union[Session, Sequence[int]]) -> Tokens:
    """Bracket a session's pages with the start and finish tokens."""
    pages = session.pages if isinstance(session, Session) else tuple(session)
    if len(pages) == 0:
        raise ValueError("cannot augment an empty session")
    return (START,) + tuple(pages) + (FINISH,)


def token_sort_key(token: int) -> tuple[int, int]:
    # Start sorts before every page, finish after; pages by id.
    if token == START:
        return (0, 0)
    if token == FINISH:
        return (2, 0)
    return (1, token)


def sequence_sort_key(tokens: Sequence[int]) -> tuple[tuple[int, int], ...]:
    return tuple(token_sort_key(t) for t in tokens)


def render_token(token: int) -> str:
    if token == START:
        return "S"
    if token == FINISH:
        return "F"
    return str(token)


def render_sequence(tokens: Sequence[int]) -> str:
    return " ".join(render_token(t) for t in tokens)


@dataclass
class NGramTable:
    """Frequency counts of all length-``n`` windows of augmented sessions."""

    n: int
    counts: dict[Tokens, int] = field(default_factory=dict)

    def count(self, tokens: Sequence[int]) -> int:
        return self.counts.get(tuple(tokens), 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.counts)

    def followers(self, prefix: Sequence[int]) -> list[tuple[int, int]]:
        """All ``(last_token, count)`` of grams extending ``prefix`` by one."""
        index = self._follower_index()
        return index.get(tuple(prefix), [])

    def _follower_index(self) -> dict[Tokens, list[tuple[int, int]]]:
        cached = getattr(self, "_followers_cache", None)
        if cached is None:
            cached = {}
            for gram, count in self.counts.items():
                cached.setdefault(gram[:-1], []).append((gram[-1], count))
            for entry in cached.values():
                entry.sort(key=lambda pair: token_sort_key(pair[0]))
            self._followers_cache = cached
        return cached


def count_ngrams(sessions: Iterable[Union[Session, Sequence[int]]], n: int) -> NGramTable:
    """Count every length-``n`` window across all augmented sessions.

    Session multiplicity is expressed by repetition in the input iterable.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    counts: Counter[Tokens] = Counter()
    for session in sessions:
        tokens = augment(session)
        for i in range(len(tokens) - n + 1):
            counts[tokens[i : i + n]] += 1
    return NGramTable(n=n, counts=dict(counts))


def ngram_tables(sessions: Sequence[Union[Session, Sequence[int]]], max_n: int) -> dict[int, NGramTable]:
    return {n: count_ngrams(sessions, n) for n in range(1, max_n + 1)}


@dataclass
class RankedList:
    """A top-m list: scores non-increasing, lexicographic among equal scores."""

    m: int
    entries: list[tuple[Tokens, Score]]

    def items(self) -> list[Tokens]:
        return [tokens for tokens, _ in self.entries]

    def ranks(self) -> dict[Tokens, int]:
        return {tokens: i + 1 for i, (tokens, _) in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)


def rank_items(scored: Iterable[tuple[Tokens, Score]], m: int) -> RankedList:
    """Order items score-descending with lexicographic tie-breaking, keep m."""
    if m < 1:
        raise ValueError("m must be at least 1")
    ordered = sorted(scored, key=lambda pair: (-pair[1], sequence_sort_key(pair[0])))
    return RankedList(m=m, entries=ordered[:m])


def top_m_ngrams(table: NGramTable, m: int) -> RankedList:
    return rank_items(table.counts.items(), m)


def write_ngram_csv(table: NGramTable, stream) -> None:
    """Audit dump: ``n,tokens,count`` rows in ranked order."""
    stream.write("n,tokens,count\n")
    ranked = rank_items(table.counts.items(), max(1, len(table.counts)))
    for tokens, count in ranked.entries:
        stream.write(f"{table.n},{render_sequence(tokens)},{count}\n")


def write_ranked_csv(ranked: RankedList, stream, score_format: str = "{}") -> None:
    stream.write("rank,tokens,score\n")
    for i, (tokens, score) in enumerate(ranked.entries, start=1):
        stream.write(f"{i},{render_sequence(tokens)},{score_format.format(score)}\n")
