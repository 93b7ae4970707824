"""Strategy profiles, the realized weighted graph and SUM/MAX costs."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidProfile, ValidationError
from .price import PriceFunction, evaluate, parse_price, validate

# Central comparator for cost comparisons across the package.
EPS = 1e-9
INF = math.inf


class GameKind(str, Enum):
    SUM = "sum"
    MAX = "max"

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValidationError(f"unknown game kind {text!r} (expected sum or max)") from None


def improves(new_cost: float, old_cost: float, eps: float = EPS) -> bool:
    """True if ``new_cost`` beats ``old_cost`` by more than ``eps``."""
    if math.isinf(new_cost):
        return False
    if math.isinf(old_cost):
        return True
    return new_cost < old_cost - eps


@dataclass(frozen=True)
class Strategy:
    """Edges bought by ``owner`` as ``(target, weight)`` pairs, kept sorted by target."""

    owner: int
    edges: tuple = ()

    def __post_init__(self):
        edges = tuple(sorted((int(t), float(w)) for t, w in self.edges))
        targets = [t for t, _ in edges]
        if self.owner in targets:
            raise InvalidProfile("strategy contains a self-loop", self.owner)
        if len(set(targets)) != len(targets):
            raise InvalidProfile("strategy buys two edges to the same target", self.owner)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def of(cls, owner, edges=()):
        if isinstance(edges, dict):
            edges = edges.items()
        return cls(owner, tuple(edges))

    @property
    def targets(self):
        return tuple(t for t, _ in self.edges)

    def as_dict(self):
        return dict(self.edges)

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class StrategyProfile:
    n: int
    strategies: tuple
    price: PriceFunction
    kind: GameKind = GameKind.SUM

    def __post_init__(self):
        object.__setattr__(self, "kind", GameKind.parse(self.kind) if not isinstance(self.kind, GameKind) else self.kind)
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.n < 2:
            raise InvalidProfile(f"need at least 2 nodes, got {self.n}")
        if len(self.strategies) != self.n:
            raise InvalidProfile(f"expected {self.n} strategies, got {len(self.strategies)}")
        validate(self.price)
        iv = self.price.interval
        for v, s in enumerate(self.strategies):
            if s.owner != v:
                raise InvalidProfile(f"strategy at index {v} belongs to node {s.owner}", v)
            for t, w in s.edges:
                if not 0 <= t < self.n:
                    raise InvalidProfile(f"target {t} is not a node", v)
                if not iv.contains(w):
                    raise InvalidProfile(f"weight {w!r} outside [{iv.lo!r}, {iv.hi!r}]", v)

    @classmethod
    def empty(cls, n, price, kind=GameKind.SUM):
        return cls(n, tuple(Strategy(v) for v in range(n)), price, kind)

    @classmethod
    def from_edges(cls, n, price, kind, edges: Iterable):
        """Build a profile from ``(owner, target, weight)`` triples."""
        owned = [[] for _ in range(n)]
        for owner, target, weight in edges:
            if not 0 <= owner < n:
                raise InvalidProfile(f"owner {owner} is not a node")
            owned[owner].append((target, weight))
        return cls(n, tuple(Strategy(v, tuple(e)) for v, e in enumerate(owned)), price, kind)

    def edges(self):
        for s in self.strategies:
            for t, w in s.edges:
                yield s.owner, t, w

    @property
    def num_purchases(self):
        return sum(len(s) for s in self.strategies)

    def with_strategy(self, v, strategy):
        return apply_deviation(self, v, strategy)

    def fingerprint(self):
        return hashlib.sha256(dumps(self).encode()).hexdigest()


def apply_deviation(profile: StrategyProfile, v: int, new_strategy: Strategy) -> StrategyProfile:
    """Return a copy of ``profile`` where node ``v`` plays ``new_strategy``."""
    if not 0 <= v < profile.n:
        raise InvalidProfile(f"node {v} out of range")
    if new_strategy.owner != v:
        raise InvalidProfile(f"strategy owner {new_strategy.owner} differs from deviating node", v)
    strategies = list(profile.strategies)
    strategies[v] = new_strategy
    return StrategyProfile(profile.n, tuple(strategies), profile.price, profile.kind)


def effective_weights(n, edges) -> np.ndarray:
    """Symmetric matrix of the cheapest-to-use weight per pair (inf when absent)."""
    W = np.full((n, n), INF)
    for u, v, w in edges:
        if w < W[u, v]:
            W[u, v] = W[v, u] = w
    np.fill_diagonal(W, 0.0)
    return W


def floyd_warshall(W: np.ndarray) -> np.ndarray:
    D = np.array(W, dtype=float, copy=True)
    for k in range(D.shape[0]):
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return D


@dataclass(frozen=True)
class CostBreakdown:
    node: int
    edge_cost: float
    distance_cost: float

    @property
    def total(self):
        return self.edge_cost + self.distance_cost


@dataclass(frozen=True)
class RealizedGame:
    profile: StrategyProfile
    weights: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    edge_costs: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.profile.n

    @property
    def kind(self):
        return self.profile.kind

    @property
    def connected(self):
        return bool(np.all(np.isfinite(self.distances)))

    @property
    def diameter(self):
        return float(self.distances.max())

    @property
    def sum_distances(self) -> np.ndarray:
        """Per-node sum of distances (the SUM-game distance cost)."""
        return self.distances.sum(axis=1)

    @property
    def eccentricities(self) -> np.ndarray:
        return self.distances.max(axis=1)

    @property
    def distance_costs(self) -> np.ndarray:
        return self.sum_distances if self.kind is GameKind.SUM else self.eccentricities

    def private_cost(self, v) -> CostBreakdown:
        return private_cost(self, v)

    def social_cost(self) -> float:
        return social_cost(self)

    def edge_weights(self):
        """Effective weights of all present edges, one per node pair."""
        iu = np.triu_indices(self.n, 1)
        w = self.weights[iu]
        return w[np.isfinite(w)]


def realize(profile: StrategyProfile) -> RealizedGame:
    n = profile.n
    W = effective_weights(n, profile.edges())
    D = floyd_warshall(W)
    p = profile.price
    edge_costs = np.array([sum(evaluate(p, w) for _, w in s.edges) for s in profile.strategies])
    return RealizedGame(profile, W, D, edge_costs)


def private_cost(game: RealizedGame, v: int) -> CostBreakdown:
    row = game.distances[v]
    dist = float(row.sum()) if game.kind is GameKind.SUM else float(row.max())
    return CostBreakdown(v, float(game.edge_costs[v]), dist)


def social_cost(game: RealizedGame) -> float:
    if not game.connected:
        return INF
    return float(sum(private_cost(game, v).total for v in range(game.n)))


# -- serialization -----------------------------------------------------------

def dumps(profile: StrategyProfile) -> str:
    lines = [f"ncg {profile.n} {profile.kind.value} {profile.price.spec()}"]
    lines += [f"{o} {t} {w!r}" for o, t, w in profile.edges()]
    return "\n".join(lines) + "\n"


def loads(text: str, base_dir=None) -> StrategyProfile:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "ncg" or len(rows[0]) != 4:
        raise ValidationError("profile must start with 'ncg <n> <kind> <price-spec>'")
    _, n, kind, spec = rows[0]
    try:
        n = int(n)
        edges = [(int(o), int(t), float(w)) for o, t, w in rows[1:]]
    except ValueError as exc:
        raise ValidationError(f"malformed profile line: {exc}") from exc
    return StrategyProfile.from_edges(n, parse_price(spec, base_dir=base_dir), GameKind.parse(kind), edges)


def save_profile(profile, path):
    Path(path).write_text(dumps(profile))


def load_profile(path):
    path = Path(path)
    return loads(path.read_text(), base_dir=path.parent)
