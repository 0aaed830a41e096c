"""First-order and variable-length Markov chain models of navigation sessions.

A model is a weighted directed graph over (page, clone_index) states plus the
artificial start S = (0, 0) and finish F = (1, 0). Cloning duplicates a page's
state so that in-paths inducing different higher-order conditional
probabilities land on different copies; every copy keeps the set of in-path
contexts it is responsible for, which is what lets transition weights be
recomputed exactly from the n-gram tables after any split.

All probability arithmetic is exact (integer weights, Fraction ratios).
Floats appear only in reporting-oriented return values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence, Union

from navchain.ingest import FINISH, START, Session
from navchain.ngram import (
    NGramTable,
    Tokens,
    augment,
    ngram_tables,
    sequence_sort_key,
)

State = tuple[int, int]
StateKey = State

S_KEY: State = (START, 0)
F_KEY: State = (FINISH, 0)

GammaLike = Union[int, float, str, Fraction]


def _as_fraction(value: GammaLike) -> Fraction:
    # str(float) round-trips the decimal literal the caller wrote, so 0.07
    # becomes exactly 7/100 rather than its binary approximation.
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class BuildParams:
    target_order: int = 1
    gamma: GammaLike = 0
    gamma_mode: str = "avg"
    num_visits: int = 0

    def __post_init__(self) -> None:
        if self.target_order < 1:
            raise ValueError("target_order must be at least 1")
        if self.gamma_mode not in ("max", "avg"):
            raise ValueError("gamma_mode must be 'max' or 'avg'")
        if self.num_visits < 0:
            raise ValueError("num_visits must be non-negative")
        gamma = _as_fraction(self.gamma)
        if not (0 <= gamma <= 1):
            raise ValueError("gamma must lie in [0, 1]")
        object.__setattr__(self, "gamma", gamma)


@dataclass(eq=False)
class ModelGraph:
    order: int = 1
    ctx_len: int = 0
    states: dict[State, int] = field(default_factory=dict)
    out: dict[State, dict[State, int]] = field(default_factory=dict)
    # Context sets are the refinement metadata: for each page state, the set
    # of in-path token windows routed to it. None on hand-built or
    # deserialized models, which then cannot be extended further.
    contexts: Optional[dict[State, frozenset[Tokens]]] = None
    page_views: dict[int, int] = field(default_factory=dict)
    total_views: int = 0
    gamma: Fraction = Fraction(0)
    gamma_mode: str = "avg"
    num_visits: int = 0
    order_state_counts: list[int] = field(default_factory=list)

    # -- basic accessors -------------------------------------------------

    @property
    def n_sessions(self) -> int:
        return self.states.get(S_KEY, 0)

    def visits(self, key: State) -> int:
        return self.states[key]

    def pages(self) -> list[int]:
        return sorted({p for (p, _) in self.states} - {START, FINISH})

    def clones_of(self, page: int) -> list[State]:
        return sorted(key for key in self.states if key[0] == page)

    def prob(self, u: State, v: State) -> Fraction:
        """Exact transition probability between two states (0 if no edge)."""
        weight = self.out.get(u, {}).get(v, 0)
        if weight == 0:
            return Fraction(0)
        return Fraction(weight, self.states[u])

    def out_probabilities(self, u: State) -> dict[State, Fraction]:
        visits = self.states.get(u, 0)
        if visits == 0:
            return {}
        return {v: Fraction(w, visits) for v, w in self.out.get(u, {}).items() if w > 0}

    # -- context routing -------------------------------------------------

    def _context_index(self) -> dict[tuple[int, Tokens], State]:
        index = getattr(self, "_ctx_cache", None)
        if index is None:
            if self.contexts is None:
                raise ValueError("model carries no context metadata")
            index = {}
            for key, ctxs in self.contexts.items():
                for ctx in ctxs:
                    index[(key[0], ctx)] = key
            self._ctx_cache = index
        return index

    def _invalidate_context_index(self) -> None:
        self._ctx_cache = None

    def _context_owner(self, page: int, ctx: Tokens) -> State:
        try:
            return self._context_index()[(page, ctx)]
        except KeyError:
            raise ValueError(f"no state of page {page} owns in-path context {ctx}") from None

    # -- invariants -------------------------------------------------------

    def validate(self) -> None:
        if S_KEY not in self.states or F_KEY not in self.states:
            raise ValueError("model must contain the artificial start and finish states")
        if self.out.get(F_KEY):
            raise ValueError("the finish state must have no outgoing transitions")
        for key in self.states:
            if key[0] in (START, FINISH) and key != S_KEY and key != F_KEY:
                raise ValueError("artificial states are never cloned")
        for u, edges in self.out.items():
            if u not in self.states:
                raise ValueError(f"transition source {u} is not a state")
            for v, w in edges.items():
                if v not in self.states:
                    raise ValueError(f"transition target {v} is not a state")
                if w < 0:
                    raise ValueError("transition weights must be non-negative")
        for u in self.states:
            if u == F_KEY:
                continue
            total = sum(self.out.get(u, {}).values())
            if total != self.states[u]:
                raise ValueError(
                    f"outgoing weight of {u} is {total}, expected visits {self.states[u]}"
                )
        views = {}
        for (p, _), visits in self.states.items():
            if p not in (START, FINISH):
                views[p] = views.get(p, 0) + visits
        if views != self.page_views:
            raise ValueError("clone visits do not partition the page view counts")
        if sum(views.values()) != self.total_views:
            raise ValueError("total_views does not match the page view counts")
        self._check_reachability()

    def _check_reachability(self) -> None:
        seen = {S_KEY}
        stack = [S_KEY]
        while stack:
            u = stack.pop()
            for v in self.out.get(u, {}):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        missing = set(self.states) - seen
        if missing:
            raise ValueError(f"states unreachable from the start state: {sorted(missing)}")
        reaches_finish = {F_KEY}
        # iterate to a fixpoint over the reversed edges
        changed = True
        while changed:
            changed = False
            for u, edges in self.out.items():
                if u not in reaches_finish and any(v in reaches_finish for v in edges):
                    reaches_finish.add(u)
                    changed = True
        stranded = set(self.states) - reaches_finish
        if stranded:
            raise ValueError(f"states that cannot reach the finish state: {sorted(stranded)}")

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"order {self.order}",
            f"gamma {self.gamma}",
            f"gamma_mode {self.gamma_mode}",
            f"num_visits {self.num_visits}",
            f"total_views {self.total_views}",
        ]
        for key in sorted(self.states):
            lines.append(f"{key[0]} {key[1]} {self.states[key]}")
        for u in sorted(self.out):
            for v in sorted(self.out[u]):
                w = self.out[u][v]
                if w > 0:
                    lines.append(f"{u[0]} {u[1]} {v[0]} {v[1]} {w}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelGraph":
        headers: dict[str, str] = {}
        states: dict[State, int] = {}
        out: dict[State, dict[State, int]] = {}
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 2:
                headers[parts[0]] = parts[1]
            elif len(parts) == 3:
                states[(int(parts[0]), int(parts[1]))] = int(parts[2])
            elif len(parts) == 5:
                u = (int(parts[0]), int(parts[1]))
                v = (int(parts[2]), int(parts[3]))
                out.setdefault(u, {})[v] = int(parts[4])
            else:
                raise ValueError(f"unparsable model line: {line!r}")
        required = ("order", "gamma", "gamma_mode", "num_visits", "total_views")
        for name in required:
            if name not in headers:
                raise ValueError(f"model text is missing the {name!r} header")
        page_views: dict[int, int] = {}
        for (p, _), visits in states.items():
            if p not in (START, FINISH):
                page_views[p] = page_views.get(p, 0) + visits
        model = cls(
            order=int(headers["order"]),
            ctx_len=0,
            states=states,
            out=out,
            contexts=None,
            page_views=page_views,
            total_views=int(headers["total_views"]),
            gamma=Fraction(headers["gamma"]),
            gamma_mode=headers["gamma_mode"],
            num_visits=int(headers["num_visits"]),
        )
        if sum(page_views.values()) != model.total_views:
            raise ValueError("total_views header disagrees with the state visit counts")
        return model


# -- construction ----------------------------------------------------------


def _session_pages(session: Union[Session, Sequence[int]]) -> tuple[int, ...]:
    return augment(session)[1:-1]


def _ctx_extend(context: Tokens, page: int, cap: int) -> Tokens:
    """The in-path context of the state reached after leaving ``context`` + page."""
    if cap == 0:
        return ()
    t = context + (page,)
    if t[0] == START and len(t) <= cap:
        return t
    return t[-cap:]


def _rebuild(model: ModelGraph, tables: dict[int, NGramTable]) -> None:
    """Recompute all visits and transition weights from the context sets.

    Every (context, follower) pair contributes its n-gram count to the edge
    towards the follower's owning clone, so weights stay exact integers and
    the first-order marginals are conserved by construction.
    """
    if model.contexts is None:
        raise ValueError("model carries no context metadata")
    states: dict[State, int] = {}
    out: dict[State, dict[State, int]] = {}
    for key in model.states:
        if key == F_KEY:
            states[key] = 0
            continue
        page = key[0]
        visits = 0
        edges: dict[State, int] = {}
        for ctx in model.contexts[key]:
            base = ctx + (page,)
            count = tables[len(base)].count(base)
            if count == 0:
                continue
            visits += count
            arrival = _ctx_extend(ctx, page, model.ctx_len)
            for token, n in tables[len(base) + 1].followers(base):
                target = F_KEY if token == FINISH else model._context_owner(token, arrival)
                edges[target] = edges.get(target, 0) + n
        states[key] = visits
        out[key] = edges
    model.states = states
    model.out = out
    unigrams = tables[1]
    model.page_views = {p: unigrams.count((p,)) for p in model.pages()}
    model.total_views = sum(model.page_views.values())


def _extend_contexts(model: ModelGraph, tables: dict[int, NGramTable], new_cap: int) -> None:
    """Lengthen every in-path context by one predecessor token.

    Contexts anchored at the start state are already complete histories and
    stay as they are; every other context fans out over its observed
    predecessors, which keeps the context sets a partition of all page
    occurrences.
    """
    if model.contexts is None:
        raise ValueError("model carries no context metadata")
    if new_cap != model.ctx_len + 1:
        raise ValueError("contexts can only be extended one token at a time")
    predecessors: dict[Tokens, list[int]] = {}
    for gram in tables[new_cap + 1].counts:
        predecessors.setdefault(gram[1:], []).append(gram[0])
    for key in list(model.contexts):
        if key in (S_KEY, F_KEY):
            continue
        page = key[0]
        extended: set[Tokens] = set()
        for ctx in model.contexts[key]:
            if ctx and ctx[0] == START:
                extended.add(ctx)
                continue
            base = ctx + (page,)
            for w in predecessors.get(base, ()):
                extended.add((w,) + ctx)
        model.contexts[key] = frozenset(extended)
    model.ctx_len = new_cap
    model._invalidate_context_index()


def build_first_order(sessions: Iterable[Union[Session, Sequence[int]]]) -> ModelGraph:
    """One state per distinct page plus S and F, weights from bigram counts."""
    sessions = list(sessions)
    if not sessions:
        raise ValueError("sessions must be non-empty")
    pages = sorted({p for s in sessions for p in _session_pages(s)})
    if any(p in (START, FINISH) for p in pages):
        raise ValueError("sessions must not contain the reserved artificial ids")
    tables = ngram_tables(sessions, 2)
    model = ModelGraph(order=1, ctx_len=0)
    model.states = {S_KEY: 0, F_KEY: 0}
    model.states.update({(p, 0): 0 for p in pages})
    model.contexts = {key: frozenset({()}) for key in model.states if key != F_KEY}
    model._invalidate_context_index()
    _rebuild(model, tables)
    return model


# -- divergence assessment ---------------------------------------------------


class DivergenceRow(NamedTuple):
    higher: Fraction
    current: Fraction
    diff: Fraction


@dataclass
class DivergenceTable:
    """Per-(in-path, out-target) comparison of higher-order conditionals
    against the state's current transition probabilities."""

    state: State
    rows: dict[tuple[Tokens, State], DivergenceRow]
    in_path_counts: dict[Tokens, int]

    def max_diff(self) -> Fraction:
        return max((row.diff for row in self.rows.values()), default=Fraction(0))

    def avg_diff(self) -> Fraction:
        if not self.rows:
            return Fraction(0)
        return sum(row.diff for row in self.rows.values()) / len(self.rows)

    def summary(self, gamma_mode: str) -> Fraction:
        if gamma_mode == "max":
            return self.max_diff()
        if gamma_mode == "avg":
            return self.avg_diff()
        raise ValueError("gamma_mode must be 'max' or 'avg'")

    def vectors(self) -> dict[Tokens, tuple[int, dict[State, Fraction]]]:
        """Per in-path: its traversal count and sparse conditional vector."""
        result: dict[Tokens, tuple[int, dict[State, Fraction]]] = {}
        for ctx, count in self.in_path_counts.items():
            vector = {
                target: row.higher
                for (c, target), row in self.rows.items()
                if c == ctx and row.higher > 0
            }
            result[ctx] = (count, vector)
        return result


def _inpaths_from_tables(model: ModelGraph, tables: dict[int, NGramTable], page: int, order: int):
    """In-paths of ``page`` at ``order`` read off the n-gram tables directly.

    Only valid while every involved page has a single state, because there is
    no context metadata to say which clone an in-path belongs to.
    """
    inpaths: set[Tokens] = set()
    for gram in tables[order].counts:
        if gram[-1] == page:
            inpaths.add(gram[:-1])
    for length in range(2, order):
        for gram in tables[length].counts:
            if gram[-1] == page and gram[0] == START:
                inpaths.add(gram[:-1])
    return inpaths


def divergence(
    model: ModelGraph,
    tables: dict[int, NGramTable],
    state: State,
    order: int,
) -> DivergenceTable:
    """Assess how well ``state`` represents order-``order`` conditionals.

    One row per (in-path, out-target): the order-k conditional estimate from
    the n-gram tables versus the state's current transition probability. An
    out-target the in-path never reaches gets a zero higher-order entry, so
    that in-paths routed to different clones of a successor page register as
    divergent.
    """
    if order < 2:
        raise ValueError("divergence is defined for order >= 2")
    if state in (S_KEY, F_KEY):
        raise ValueError("artificial states are not assessed")
    page = state[0]
    cap = order - 1

    if model.contexts is not None and model.ctx_len == cap:
        inpaths = model.contexts[state]

        def owner(ctx: Tokens, token: int) -> State:
            return model._context_owner(token, _ctx_extend(ctx, page, cap))

    else:
        single: dict[int, State] = {}
        for key in model.states:
            if key[0] in single:
                raise ValueError(
                    "divergence on an under-extended model requires a single state per page"
                )
            single[key[0]] = key
        inpaths = _inpaths_from_tables(model, tables, page, order)

        def owner(ctx: Tokens, token: int) -> State:
            return single[token]

    current = model.out_probabilities(state)
    rows: dict[tuple[Tokens, State], DivergenceRow] = {}
    in_path_counts: dict[Tokens, int] = {}
    for ctx in sorted(inpaths, key=sequence_sort_key):
        base = ctx + (page,)
        denom = tables[len(base)].count(base)
        if denom == 0:
            continue
        in_path_counts[ctx] = denom
        reached: dict[State, int] = {}
        for token, count in tables[len(base) + 1].followers(base):
            target = F_KEY if token == FINISH else owner(ctx, token)
            reached[target] = reached.get(target, 0) + count
        for target, count in reached.items():
            higher = Fraction(count, denom)
            cur = current.get(target, Fraction(0))
            rows[(ctx, target)] = DivergenceRow(higher, cur, abs(higher - cur))
        for target, cur in current.items():
            if target not in reached:
                rows[(ctx, target)] = DivergenceRow(Fraction(0), cur, cur)
    return DivergenceTable(state=state, rows=rows, in_path_counts=in_path_counts)


# -- in-path clustering ------------------------------------------------------

VectorMap = dict[Tokens, tuple[int, dict[State, Fraction]]]


def _pooled_vector(members: Sequence[Tokens], vectors: VectorMap) -> dict[State, Fraction]:
    total = sum(vectors[ip][0] for ip in members)
    sums: dict[State, Fraction] = {}
    for ip in members:
        count, vector = vectors[ip]
        for target, prob in vector.items():
            sums[target] = sums.get(target, Fraction(0)) + count * prob
    return {target: value / total for target, value in sums.items()}


def _member_score(member: Tokens, pooled: dict[State, Fraction], vectors: VectorMap, gamma_mode: str) -> Fraction:
    if not pooled:
        return Fraction(0)
    vector = vectors[member][1]
    diffs = [abs(pooled[t] - vector.get(t, Fraction(0))) for t in pooled]
    if gamma_mode == "max":
        return max(diffs)
    return sum(diffs, Fraction(0)) / len(diffs)


def _merge_score(members: Sequence[Tokens], vectors: VectorMap, gamma_mode: str) -> Fraction:
    pooled = _pooled_vector(members, vectors)
    return max(_member_score(ip, pooled, vectors, gamma_mode) for ip in members)


def _order_groups(groups: list[list[Tokens]], vectors: VectorMap) -> list[list[Tokens]]:
    for group in groups:
        group.sort(key=sequence_sort_key)
    groups.sort(key=lambda g: (-sum(vectors[ip][0] for ip in g), sequence_sort_key(g[0])))
    return groups


def _equality_groups(vectors: VectorMap) -> list[list[Tokens]]:
    buckets: dict[tuple, list[Tokens]] = {}
    for ip, (_, vector) in vectors.items():
        signature = tuple(sorted(vector.items()))
        buckets.setdefault(signature, []).append(ip)
    return _order_groups(list(buckets.values()), vectors)


def cluster_inpaths(vectors: VectorMap, gamma: GammaLike, gamma_mode: str) -> list[list[Tokens]]:
    """Partition in-paths so every member stays close to its group's pooled
    conditional vector.

    Greedy count-weighted agglomeration: starting from singletons, repeatedly
    apply the admissible merge with the smallest score, where a merge is
    admissible only if every member's gamma_mode summary of its distance to
    the pooled vector stays strictly below gamma. With gamma = 0 the partition
    degenerates to grouping exactly equal vectors.
    """
    if gamma_mode not in ("max", "avg"):
        raise ValueError("gamma_mode must be 'max' or 'avg'")
    gamma = _as_fraction(gamma)
    if gamma == 0:
        return _equality_groups(vectors)
    groups = [[ip] for ip in sorted(vectors, key=lambda ip: (-vectors[ip][0], sequence_sort_key(ip)))]
    while len(groups) > 1:
        best: Optional[tuple[Fraction, int, int]] = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                score = _merge_score(groups[i] + groups[j], vectors, gamma_mode)
                if score < gamma and (best is None or (score, i, j) < best):
                    best = (score, i, j)
        if best is None:
            break
        _, i, j = best
        groups[i] = groups[i] + groups[j]
        del groups[j]
    return _order_groups(groups, vectors)


# -- cloning -----------------------------------------------------------------


def clone_state(
    model: ModelGraph,
    state: State,
    partition: Sequence[Iterable[Tokens]],
    tables: dict[int, NGramTable],
) -> ModelGraph:
    """Split ``state`` into one state per partition group of its in-paths.

    The first group keeps the existing clone index, the rest get fresh ones.
    All weights are recomputed from the n-gram tables so that out-weights of
    each new state are the summed higher-order gram counts over its in-paths
    and the page view marginals stay intact.
    """
    if state in (S_KEY, F_KEY):
        raise ValueError("artificial states are never cloned")
    if state not in model.states:
        raise ValueError(f"{state} is not a state of the model")
    if model.contexts is None:
        raise ValueError("model carries no context metadata")
    groups = [tuple(sorted(set(g), key=sequence_sort_key)) for g in partition]
    if len(groups) < 2:
        raise ValueError("partition must contain at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("partition groups must be non-empty")
    flat = [ip for g in groups for ip in g]
    if len(flat) != len(set(flat)):
        raise ValueError("partition groups overlap")
    cap = max(len(ip) for ip in flat)
    if cap < model.ctx_len:
        raise ValueError("partition in-paths are shorter than the model's context length")
    while model.ctx_len < cap:
        _extend_contexts(model, tables, model.ctx_len + 1)
    if set(flat) != set(model.contexts[state]):
        unknown = set(flat) - set(model.contexts[state])
        if unknown:
            raise ValueError(f"partition references unknown in-paths: {sorted(unknown)}")
        raise ValueError("partition must cover every in-path of the state")
    page = state[0]
    next_index = max(i for (p, i) in model.states if p == page) + 1
    keys = [state] + [(page, next_index + t) for t in range(len(groups) - 1)]
    for key, group in zip(keys, groups):
        model.states.setdefault(key, 0)
        model.contexts[key] = frozenset(group)
    model._invalidate_context_index()
    _rebuild(model, tables)
    return model


def build_vlmc(sessions: Iterable[Union[Session, Sequence[int]]], params: BuildParams) -> ModelGraph:
    """Extend a first-order model order by order through gamma-gated cloning.

    At each order every eligible state is assessed; a state whose divergence
    summary exceeds gamma has its in-paths partitioned (clustered for
    gamma > 0 with three or more in-paths, grouped by exact vector equality
    otherwise) and is cloned. Sweeps repeat until no state splits, because a
    split can re-route in-paths of neighbouring states and expose new
    divergence. Visitation order is ascending (page, clone_index), which makes
    the construction deterministic.
    """
    sessions = list(sessions)
    tables = ngram_tables(sessions, params.target_order + 1)
    model = build_first_order(sessions)
    model.gamma = _as_fraction(params.gamma)
    model.gamma_mode = params.gamma_mode
    model.num_visits = params.num_visits
    model.order_state_counts = [len(model.states)]
    for k in range(2, params.target_order + 1):
        _extend_contexts(model, tables, k - 1)
        _rebuild(model, tables)
        while True:
            changed = False
            for key in sorted(key for key in model.states if key not in (S_KEY, F_KEY)):
                page = key[0]
                if model.page_views.get(page, 0) < params.num_visits:
                    continue
                assessment = divergence(model, tables, key, k)
                if assessment.summary(params.gamma_mode) <= model.gamma:
                    continue
                vectors = assessment.vectors()
                if model.gamma > 0 and len(vectors) >= 3:
                    partition = cluster_inpaths(vectors, model.gamma, params.gamma_mode)
                else:
                    partition = _equality_groups(vectors)
                if len(partition) >= 2:
                    clone_state(model, key, partition, tables)
                    changed = True
            if not changed:
                break
        model.order = k
        model.order_state_counts.append(len(model.states))
    return model


# -- probability queries -----------------------------------------------------


def initial_probability(model: ModelGraph, page: int, clone_index: Optional[int] = None) -> float:
    """The page's share of all page views; a clone's share if one is named."""
    if page not in model.page_views:
        raise ValueError(f"unknown page {page}")
    if clone_index is None:
        return float(Fraction(model.page_views[page], model.total_views))
    key = (page, clone_index)
    if key not in model.states:
        raise ValueError(f"unknown state {key}")
    return float(Fraction(model.states[key], model.total_views))


def _trail_mass(model: ModelGraph, trail: Sequence[int]) -> Fraction:
    trail = tuple(trail)
    if not trail:
        raise ValueError("trail must be non-empty")
    first = trail[0]
    frontier: dict[State, Fraction] = {
        key: Fraction(visits, model.total_views)
        for key, visits in model.states.items()
        if key[0] == first and key not in (S_KEY, F_KEY) and visits > 0
    }
    for token in trail[1:]:
        if not frontier:
            return Fraction(0)
        new_frontier: dict[State, Fraction] = {}
        for key, mass in frontier.items():
            visits = model.states[key]
            for target, weight in model.out.get(key, {}).items():
                if target[0] == token and weight > 0:
                    gain = mass * Fraction(weight, visits)
                    new_frontier[target] = new_frontier.get(target, Fraction(0)) + gain
        frontier = new_frontier
    return sum(frontier.values(), Fraction(0))


def trail_probability(model: ModelGraph, trail: Sequence[int]) -> float:
    """Probability of a page trail: summed over all state paths projecting
    onto it, each weighted by initial probability times link probabilities."""
    return float(_trail_mass(model, trail))
