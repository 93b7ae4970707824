"""Candidate weights, improving/best responses and best-response dynamics.

Deviation costs are evaluated without re-running all-pairs shortest paths:
a shortest path from the deviating node ``v`` never revisits ``v``, so with
``D_H`` the distances of the graph after deleting ``v``,

    d'(v, u) = min_w (a_w + D_H[w, u])

where ``a_w`` is the effective weight of the edge {v, w} after the deviation.
``D_H`` and the edges other nodes bought towards ``v`` do not depend on the
strategy of ``v`` and are computed once per node.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LimitExceeded, ValidationError
from .game import (EPS, INF, GameKind, Strategy, StrategyProfile, apply_deviation,
                   effective_weights, floyd_warshall, improves)
from .price import minimize_scaled, minimize_tradeoff

EXHAUSTIVE_LIMIT = 8
DEFAULT_GRID = 64
# Strategies whose costs differ by at most this much are ordered by the tie key.
TIE_TOL = 1e-12
# RemoveOnly enumerates all subsets of own edges up to this many edges.
REMOVE_SUBSET_LIMIT = 12


class DeviationFamily(str, Enum):
    REMOVE_ONLY = "remove-only"
    SINGLE_ADD = "single-add"
    SINGLE_REWEIGHT = "single-reweight"
    STAR_COLLAPSE = "star-collapse"
    EXHAUSTIVE = "exhaustive"

    @classmethod
    def parse(cls, text):
        text = str(text).lower().replace("_", "-")
        aliases = {"exhaustive-subset": "exhaustive", "removeonly": "remove-only",
                   "singleadd": "single-add", "singlereweight": "single-reweight",
                   "starcollapse": "star-collapse"}
        try:
            return cls(aliases.get(text, text))
        except ValueError:
            raise ValidationError(f"unknown deviation family {text!r}") from None


# Cheap families used to certify profiles that are too large for exhaustive search.
RESTRICTED = (DeviationFamily.REMOVE_ONLY, DeviationFamily.SINGLE_ADD,
              DeviationFamily.SINGLE_REWEIGHT, DeviationFamily.STAR_COLLAPSE)


@dataclass(frozen=True)
class CandidateWeights:
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(sorted(set(float(w) for w in self.weights))))

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def array(self):
        return np.array(self.weights)


def candidate_weights(p, n, grid=DEFAULT_GRID) -> CandidateWeights:
    """Endpoints, every tradeoff minimizer for k = 1..n-1 in both shapes, and a uniform grid."""
    if n < 2 or grid < 2:
        raise ValueError("candidate_weights needs n >= 2 and grid >= 2")
    ws = {p.lo, p.hi}
    for k in range(1, n):
        ws.add(minimize_tradeoff(p, k).argmin)
        ws.add(minimize_scaled(p, k).argmin)
    ws.update(float(x) for x in np.linspace(p.lo, p.hi, grid))
    return CandidateWeights(tuple(ws))


@dataclass(frozen=True)
class Response:
    """A strategy for ``node`` together with its evaluated cost."""

    node: int
    strategy: Strategy
    cost: float
    current_cost: float
    examined: int = 0

    @property
    def gain(self):
        return self.current_cost - self.cost


class DeviationEvaluator:
    """Private cost of node ``v`` under any strategy, all else fixed."""

    def __init__(self, profile: StrategyProfile, v: int):
        n = profile.n
        self.profile, self.v, self.n = profile, v, n
        self.others = [u for u in range(n) if u != v]
        rest = [(o, t, w) for o, t, w in profile.edges() if o != v and t != v]
        D_H = floyd_warshall(effective_weights(n, rest))
        # rows: first hop w, columns: destinations u != v
        self.D = D_H[:, self.others]
        self.incoming = np.full(n, INF)
        for o, t, w in profile.edges():
            if t == v and w < self.incoming[o]:
                self.incoming[o] = w
        self.agg = np.sum if profile.kind is GameKind.SUM else np.max
        self.price = profile.price
        self.current = profile.strategies[v]
        self.evaluations = 0

    def _hops(self, edges):
        a = self.incoming.copy()
        for t, w in edges:
            if w < a[t]:
                a[t] = w
        return a

    def distance_cost(self, edges) -> float:
        a = self._hops(edges)
        dist = np.min(a[:, None] + self.D, axis=0)
        return float(self.agg(dist))

    def cost(self, edges) -> float:
        """``edges`` is an iterable of (target, weight) sorted by target."""
        self.evaluations += 1
        edges = list(edges)
        d = self.distance_cost(edges)
        if math.isinf(d):
            return INF
        return sum(self.price(w) for _, w in edges) + d

    def current_cost(self) -> float:
        return self.cost(self.current.edges)

    def strategy(self, edges) -> Strategy:
        return Strategy(self.v, tuple(edges))


def _tie_key(cost, edges):
    return (len(edges), sum(w for _, w in edges), tuple(t for t, _ in edges))


def _better(cost, edges, best_cost, best_edges):
    if best_edges is None:
        return True
    if math.isinf(cost) and math.isinf(best_cost):
        return _tie_key(cost, edges) < _tie_key(best_cost, best_edges)
    if cost < best_cost - TIE_TOL:
        return True
    if cost <= best_cost + TIE_TOL:
        return _tie_key(cost, edges) < _tie_key(best_cost, best_edges)
    return False


class _SubsetOptimizer:
    """Coordinate descent over candidate weights for a fixed target subset."""

    def __init__(self, ev: DeviationEvaluator, cands: CandidateWeights):
        self.ev = ev
        self.C = cands.array()
        self.pC = ev.price.prices(self.C)
        self.axis_agg = np.sum if ev.profile.kind is GameKind.SUM else np.max

    def _sweep(self, targets, idx, R):
        """One pass of single-coordinate moves; updates ``idx`` and ``R`` in place."""
        C, pC, D, a_in = self.C, self.pC, self.ev.D, self.ev.incoming
        changed = False
        for j, t in enumerate(targets):
            R[t] = a_in[t] + D[t]
            base = R.min(axis=0)
            hop = np.minimum(a_in[t], C)
            dist = np.minimum(base[None, :], hop[:, None] + D[t][None, :])
            obj = pC + self.axis_agg(dist, axis=1)
            best = int(np.argmin(obj))
            if obj[best] < obj[idx[j]]:
                idx[j] = best
                changed = True
            R[t] = min(a_in[t], C[idx[j]]) + D[t]
        return changed, len(targets) * len(C)

    def _block_move(self, targets, idx):
        """Best move that caps all weights above, or lifts all weights below, one candidate.

        Single-coordinate moves stall when several edges tie for the binding
        distance (typical in the MAX game); these joint moves shift them together.
        """
        C, pC, D, a_in = self.C, self.pC, self.ev.D, self.ev.incoming
        cur = np.array(idx)
        levels = np.arange(len(C))
        options = np.concatenate([np.minimum(cur[None, :], levels[:, None]),
                                  np.maximum(cur[None, :], levels[:, None])])
        T = list(targets)
        hops = np.tile(a_in, (len(options), 1))
        hops[:, T] = np.minimum(a_in[T][None, :], C[options])
        dist = np.min(hops[:, :, None] + D[None, :, :], axis=1)
        obj = pC[options].sum(axis=1) + self.axis_agg(dist, axis=1)
        current = pC[cur].sum() + self.axis_agg(np.min(self._hop(T, cur)[:, None] + D, axis=0))
        best = int(np.argmin(obj))
        if obj[best] < current:
            return [int(i) for i in options[best]], len(options)
        return None, len(options)

    def _hop(self, T, cur):
        a = self.ev.incoming.copy()
        a[T] = np.minimum(a[T], self.C[cur])
        return a

    def optimize(self, targets, max_sweeps=None):
        C, D = self.C, self.ev.D
        k = len(targets)
        idx = [len(C) - 1] * k
        sweeps = max_sweeps or max(self.ev.n, 2)
        examined = 0
        while True:
            R = self._hop(list(targets), np.array(idx, dtype=int))[:, None] + D
            for _ in range(sweeps):
                changed, used = self._sweep(targets, idx, R)
                examined += used
                if not changed:
                    break
            if k < 2:
                break
            moved, used = self._block_move(targets, idx)
            examined += used
            if moved is None:
                break
            idx = moved
        edges = [(t, float(C[i])) for t, i in zip(targets, idx)]
        return edges, examined


def _require_exhaustive(n, limit):
    if n > limit:
        raise LimitExceeded(f"exhaustive search limited to n <= {limit}, got n = {n}")


def best_response(profile: StrategyProfile, v: int, cands: CandidateWeights,
                  exhaustive_limit=EXHAUSTIVE_LIMIT, evaluator=None) -> Response:
    """Cost-minimal strategy of ``v`` over all target subsets and candidate weights.

    Weights inside a subset are chosen by coordinate descent.  Ties are broken
    by fewer edges, then smaller total weight, then lexicographic targets.
    """
    _require_exhaustive(profile.n, exhaustive_limit)
    ev = evaluator or DeviationEvaluator(profile, v)
    opt = _SubsetOptimizer(ev, cands)
    current = ev.current_cost()
    best_edges, best_cost, examined = None, INF, 0
    for r in range(len(ev.others) + 1):
        for targets in itertools.combinations(ev.others, r):
            edges, used = opt.optimize(targets)
            examined += used + 1
            cost = ev.cost(edges)
            if _better(cost, edges, best_cost, best_edges):
                best_edges, best_cost = edges, cost
    return Response(v, ev.strategy(best_edges), best_cost, current, examined)


def _moves(family, ev: DeviationEvaluator, cands):
    """Yield candidate edge lists for ``family`` in deterministic order."""
    own = list(ev.current.edges)
    own_targets = {t for t, _ in own}
    if family is DeviationFamily.REMOVE_ONLY:
        if len(own) <= REMOVE_SUBSET_LIMIT:
            for r in range(1, len(own) + 1):
                for drop in itertools.combinations(range(len(own)), r):
                    yield [e for i, e in enumerate(own) if i not in drop]
        else:
            for i in range(len(own)):
                yield own[:i] + own[i + 1:]
            yield []
    elif family is DeviationFamily.SINGLE_ADD:
        for t in ev.others:
            if t in own_targets:
                continue
            for x in cands:
                yield sorted(own + [(t, x)])
    elif family is DeviationFamily.SINGLE_REWEIGHT:
        for i, (t, w) in enumerate(own):
            for x in cands:
                if x != w:
                    yield own[:i] + [(t, x)] + own[i + 1:]
    elif family is DeviationFamily.STAR_COLLAPSE:
        if own:
            yield []
        for t in ev.others:
            for x in cands:
                yield [(t, x)]
        for x in cands:
            yield [(t, x) for t in ev.others]
    else:
        raise ValueError(f"no move generator for {family}")


def search_family(profile: StrategyProfile, v: int, family: DeviationFamily,
                  cands: CandidateWeights, eps=EPS, exhaustive_limit=EXHAUSTIVE_LIMIT):
    """Return ``(response or None, deviations examined)`` for one node and family."""
    family = DeviationFamily.parse(family) if not isinstance(family, DeviationFamily) else family
    if family is DeviationFamily.EXHAUSTIVE:
        br = best_response(profile, v, cands, exhaustive_limit=exhaustive_limit)
        return (br if improves(br.cost, br.current_cost, eps) else None), br.examined
    ev = DeviationEvaluator(profile, v)
    current = ev.current_cost()
    count = 0
    for count, edges in enumerate(_moves(family, ev, cands), 1):
        cost = ev.cost(edges)
        if improves(cost, current, eps):
            return Response(v, ev.strategy(edges), cost, current, count), count
    return None, count


def improving_response(profile: StrategyProfile, v: int, family: DeviationFamily,
                       cands: CandidateWeights, eps=EPS,
                       exhaustive_limit=EXHAUSTIVE_LIMIT) -> Response | None:
    """First strategy in ``family`` lowering the cost of ``v`` by more than ``eps``.

    For the exhaustive family this is the best response, if it improves.
    """
    return search_family(profile, v, family, cands, eps, exhaustive_limit)[0]


def count_moves(profile, v, family, cands):
    """Number of deviations ``family`` offers node ``v`` (for reporting)."""
    family = DeviationFamily.parse(family) if not isinstance(family, DeviationFamily) else family
    return sum(1 for _ in _moves(family, DeviationEvaluator(profile, v), cands))


# -- dynamics ----------------------------------------------------------------

@dataclass(frozen=True)
class Scheduler:
    kind: str = "round-robin"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("round-robin", "random"):
            raise ValidationError(f"unknown scheduler {self.kind!r}")
        if (self.kind == "random") != (self.seed is not None):
            raise ValidationError("a seed is required for (and only for) the random scheduler")

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        if text in ("round-robin", "roundrobin", "rr"):
            return cls()
        name, _, seed = text.partition(":")
        if name in ("random", "random-permutation") and seed:
            return cls("random", int(seed))
        raise ValidationError(f"bad scheduler {text!r}; use round-robin or random:<seed>")

    def __str__(self):
        return self.kind if self.seed is None else f"random:{self.seed}"


@dataclass(frozen=True)
class Step:
    round: int
    node: int
    old_cost: float
    new_cost: float
    strategy: Strategy

    def as_json(self):
        return {"round": self.round, "node": self.node, "old_cost": self.old_cost,
                "new_cost": self.new_cost, "edges": [[t, w] for t, w in self.strategy.edges]}


@dataclass
class DynamicsTrace:
    steps: list
    converged: bool
    final: StrategyProfile
    rounds: int
    scheduler: Scheduler
    family: DeviationFamily
    initial: StrategyProfile = field(repr=False, default=None)


def run_dynamics(initial: StrategyProfile, cands: CandidateWeights, scheduler=Scheduler(),
                 family=DeviationFamily.EXHAUSTIVE, max_rounds=100, eps=EPS,
                 exhaustive_limit=EXHAUSTIVE_LIMIT) -> DynamicsTrace:
    """Sequential improving-response dynamics; one round activates every node once.

    Stops when a whole round makes no move (converged) or after ``max_rounds``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if isinstance(scheduler, str):
        scheduler = Scheduler.parse(scheduler)
    family = DeviationFamily.parse(family) if not isinstance(family, DeviationFamily) else family
    if family is DeviationFamily.EXHAUSTIVE:
        _require_exhaustive(initial.n, exhaustive_limit)
    rng = np.random.default_rng(scheduler.seed) if scheduler.kind == "random" else None
    profile, steps, converged, rounds = initial, [], False, 0
    while rounds < max_rounds:
        rounds += 1
        order = list(range(profile.n)) if rng is None else [int(v) for v in rng.permutation(profile.n)]
        moved = False
        for v in order:
            resp = improving_response(profile, v, family, cands, eps=eps,
                                      exhaustive_limit=exhaustive_limit)
            if resp is None:
                continue
            profile = apply_deviation(profile, v, resp.strategy)
            steps.append(Step(rounds, v, resp.current_cost, resp.cost, resp.strategy))
            moved = True
        if not moved:
            converged = True
            break
    return DynamicsTrace(steps, converged, profile, rounds, scheduler, family, initial)


def random_profile(n, price, kind, cands: CandidateWeights, seed, density=0.4) -> StrategyProfile:
    """Each ordered pair buys an edge with probability ``density`` at a random candidate weight."""
    rng = np.random.default_rng(seed)
    ws = cands.weights
    edges = []
    for v in range(n):
        for u in range(n):
            if u != v and rng.random() < density:
                edges.append((v, u, ws[int(rng.integers(len(ws)))]))
    return StrategyProfile.from_edges(n, price, kind, edges)
