import heapq
import math

import numpy as np
import pytest

from qosncg.price import Constant, Reciprocal


def dijkstra_all_pairs(n, edges):
    """Independent oracle: heapq Dijkstra over the min-weight undirected multigraph."""
    adj = [dict() for _ in range(n)]
    for o, t, w in edges:
        for a, b in ((o, t), (t, o)):
            adj[a][b] = min(adj[a].get(b, math.inf), w)
    out = np.full((n, n), math.inf)
    for s in range(n):
        dist = {s: 0.0}
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf):
                continue
            for v, w in adj[u].items():
                if d + w < dist.get(v, math.inf):
                    dist[v] = d + w
                    heapq.heappush(heap, (d + w, v))
        for v, d in dist.items():
            out[s, v] = d
    return out


@pytest.fixture
def unit():
    return Constant(1.0, 1.0, 1.0)


@pytest.fixture
def recip4():
    return Reciprocal(4.0, 1.0, 10.0)


def joint_best_cost(profile, v, cands):
    """Oracle: min private cost of v over every target subset and every joint weight assignment,
    each evaluated by a full re-realization."""
    import itertools

    from qosncg.game import Strategy, apply_deviation, realize

    others = [u for u in range(profile.n) if u != v]
    best = math.inf
    for r in range(len(others) + 1):
        for targets in itertools.combinations(others, r):
            for ws in itertools.product(list(cands), repeat=r):
                s = Strategy(v, tuple(zip(targets, ws)))
                best = min(best, realize(apply_deviation(profile, v, s)).private_cost(v).total)
    return best
