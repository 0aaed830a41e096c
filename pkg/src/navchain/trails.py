"""Probable-trail extraction by pruned breadth-first search.

A trail is a page sequence, optionally terminated by the finish token. Its
probability sums over every state path projecting onto it, so the frontier is
keyed by page sequence and carries per-state mass; a branch is pruned as soon
as its total mass no longer exceeds the cut-point, which is sound because a
prefix always holds at least the mass of any of its extensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from navchain.ingest import FINISH
from navchain.model import F_KEY, S_KEY, ModelGraph, State
from navchain.ngram import RankedList, Tokens, rank_items

CutPoint = Union[int, float, str, Fraction]


def _as_fraction(value: CutPoint) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class TrailQuery:
    lam: CutPoint = Fraction(1, 10000)
    mtl: int = 4
    length_mode: str = "strict"
    m: int = 250

    def __post_init__(self) -> None:
        lam = _as_fraction(self.lam)
        if not (0 < lam <= 1):
            raise ValueError("the cut-point must lie in (0, 1]")
        object.__setattr__(self, "lam", lam)
        if self.mtl < 1:
            raise ValueError("mtl must be at least 1")
        if self.length_mode not in ("strict", "nonstrict"):
            raise ValueError("length_mode must be 'strict' or 'nonstrict'")
        if self.m < 1:
            raise ValueError("m must be at least 1")


@dataclass(frozen=True)
class Trail:
    pages: Tokens
    probability: Fraction


def extract_trails(model: ModelGraph, query: TrailQuery) -> list[Trail]:
    """All trails with probability above the cut-point, up to length mtl.

    Level-by-level expansion from every page state, weighted by initial
    probability. The finish token ends a trail and counts towards its length.
    Strict mode keeps only trails of exactly mtl page views; nonstrict mode
    keeps all lengths up to mtl and then drops any trail that is a proper
    prefix of another kept trail.
    """
    lam: Fraction = query.lam
    frontier: dict[Tokens, dict[State, Fraction]] = {}
    for key, visits in model.states.items():
        if key in (S_KEY, F_KEY) or visits == 0:
            continue
        mass = Fraction(visits, model.total_views)
        frontier.setdefault((key[0],), {})[key] = mass
    frontier = {
        seq: masses
        for seq, masses in frontier.items()
        if sum(masses.values()) > lam
    }

    kept: dict[Tokens, Fraction] = {}
    level = 1
    while frontier and level <= query.mtl:
        for seq, masses in frontier.items():
            kept[seq] = sum(masses.values(), Fraction(0))
        if level == query.mtl:
            break
        next_frontier: dict[Tokens, dict[State, Fraction]] = {}
        for seq, masses in frontier.items():
            if seq[-1] == FINISH:
                continue
            for key, mass in masses.items():
                visits = model.states[key]
                for target, weight in model.out.get(key, {}).items():
                    if weight == 0:
                        continue
                    gain = mass * Fraction(weight, visits)
                    bucket = next_frontier.setdefault(seq + (target[0],), {})
                    bucket[target] = bucket.get(target, Fraction(0)) + gain
        frontier = {
            seq: masses
            for seq, masses in next_frontier.items()
            if sum(masses.values()) > lam
        }
        level += 1

    if query.length_mode == "strict":
        selected = {seq: p for seq, p in kept.items() if len(seq) == query.mtl}
    else:
        prefixes = set()
        for seq in kept:
            for cut in range(1, len(seq)):
                prefixes.add(seq[:cut])
        selected = {seq: p for seq, p in kept.items() if seq not in prefixes}
    return [Trail(pages=seq, probability=selected[seq]) for seq in sorted(selected)]


def top_m_trails(trails: list[Trail], m: int) -> RankedList:
    """Probability-descending top-m list with lexicographic tie-breaking."""
    return rank_items([(t.pages, t.probability) for t in trails], m)
