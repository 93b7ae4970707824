"""Nash certification by deviation search and executable checks of the cost bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constructions import (Family, max_ne, max_opt_star, opt_sum, sum_clique_cost, sum_ne,
                            sum_star_cost, worst_clique_preconditions, worst_clique_ratio)
from .dynamics import (EXHAUSTIVE_LIMIT, RESTRICTED, CandidateWeights, DeviationFamily,
                       search_family)
from .errors import CapExceeded, Disconnected, LimitExceeded, NotCertified, OutOfDomain
from .game import (EPS, GameKind, RealizedGame, Strategy, StrategyProfile, apply_deviation,
                   realize)
from .price import Reciprocal, evaluate, minimize_scaled, minimize_tradeoff

BOUND_TOL = 1e-9


# -- certification -----------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    profile_hash: str
    family: str
    stable: bool
    eps: float
    examined: int
    node: int | None = None
    strategy: Strategy | None = None
    gain: float | None = None

    @property
    def verdict(self):
        return "Stable" if self.stable else "Unstable"

    def as_json(self):
        out = {"verdict": self.verdict, "family": self.family, "eps": self.eps,
               "examined": self.examined, "profile_hash": self.profile_hash}
        if not self.stable:
            out.update(node=self.node, gain=self.gain,
                       edges=[[t, w] for t, w in self.strategy.edges])
        return out


def families_for(n, exhaustive_limit=EXHAUSTIVE_LIMIT):
    """Exhaustive search where feasible, the restricted families otherwise."""
    return (DeviationFamily.EXHAUSTIVE,) if n <= exhaustive_limit else RESTRICTED


def _family_label(families):
    return "+".join(f.value for f in families)


def replay_gain(profile: StrategyProfile, v: int, strategy: Strategy) -> float:
    """Cost decrease of ``v`` when switching to ``strategy``, via a full re-realization."""
    before = realize(profile).private_cost(v).total
    after = realize(apply_deviation(profile, v, strategy)).private_cost(v).total
    return before - after


def certify_ne(profile: StrategyProfile, family, cands: CandidateWeights, eps=EPS,
               exhaustive_limit=EXHAUSTIVE_LIMIT) -> StabilityReport:
    """Stable iff no node has an improving response in ``family`` over ``cands``.

    ``family`` may be one DeviationFamily or a sequence tried in order.  The
    first counterexample in (node, family, move) order is returned.
    """
    if isinstance(family, (str, DeviationFamily)):
        family = (family,)
    families = tuple(DeviationFamily.parse(f) if not isinstance(f, DeviationFamily) else f
                     for f in family)
    if DeviationFamily.EXHAUSTIVE in families and profile.n > exhaustive_limit:
        raise LimitExceeded(f"exhaustive certification limited to n <= {exhaustive_limit}")
    examined = 0
    for v in range(profile.n):
        for fam in families:
            resp, used = search_family(profile, v, fam, cands, eps, exhaustive_limit)
            examined += used
            if resp is not None:
                return StabilityReport(profile.fingerprint(), _family_label(families), False,
                                       eps, examined, v, resp.strategy,
                                       replay_gain(profile, v, resp.strategy))
    return StabilityReport(profile.fingerprint(), _family_label(families), True, eps, examined)


def _require_certified(game: RealizedGame, report: StabilityReport | None):
    if report is None or not report.stable:
        raise NotCertified("bound applies to certified equilibria only")
    if report.profile_hash != game.profile.fingerprint():
        raise NotCertified("stability report belongs to a different profile")


def _require_kind(game, kind):
    if game.kind is not kind:
        raise ValueError(f"check applies to the {kind.value.upper()} game, profile is {game.kind.value}")


# -- bound checks ------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    """``lhs`` compared with ``rhs``; ``direction`` is "<=" (upper bound) or ">=" (lower bound)."""

    name: str
    lhs: float
    rhs: float
    direction: str
    tol: float = BOUND_TOL
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.rhs - self.lhs if self.direction == "<=" else self.lhs - self.rhs

    @property
    def satisfied(self):
        extra = self.details.get("extra_slack")
        ok = self.slack >= -self.tol
        return ok and (extra is None or extra >= -self.tol)


def sum_lower_bound(game: RealizedGame) -> BoundCheck:
    """c(S) >= 2 x_min n(n-1) + m (p(x*) + x* - 4 x_min)."""
    if not game.connected:
        raise Disconnected("lower bound needs a connected graph")
    p, n = game.profile.price, game.n
    x_min = float(game.edge_weights().min())
    # bought edges, identical (pair, weight) purchases counted once
    m = len({(min(o, t), max(o, t), w) for o, t, w in game.profile.edges()})
    xs = minimize_tradeoff(p, 1).argmin
    rhs = 2 * x_min * n * (n - 1) + m * (evaluate(p, xs) + xs - 4 * x_min)
    return BoundCheck("Lemma1-lower", game.social_cost(), rhs, ">=",
                      details={"x_min": x_min, "m": m, "x_star": xs})


def _min_node(values):
    v = int(np.argmin(values))
    return v, float(values[v])


def sum_cost_upper_check(game: RealizedGame, report: StabilityReport) -> BoundCheck:
    """c(S) <= n delta(v) + x*(n-1)^2 + 2(p(x*)+x*) n(n-1) at the node with least distance sum."""
    _require_certified(game, report)
    _require_kind(game, GameKind.SUM)
    p, n = game.profile.price, game.n
    xs = minimize_tradeoff(p, 1).argmin
    v, delta = _min_node(game.sum_distances)
    rhs = n * delta + xs * (n - 1) ** 2 + 2 * (evaluate(p, xs) + xs) * n * (n - 1)
    return BoundCheck("Lemma6-upper", game.social_cost(), rhs, "<=",
                      details={"node": v, "delta": delta, "x_star": xs})


def sum_diameter_bound(p):
    """Explicit diameter bound for SUM equilibria and the weight used to derive it."""
    xs = minimize_tradeoff(p, 1).argmin
    q = evaluate(p, xs) + xs
    if p.hi <= q:
        x = p.hi
        k_bound = evaluate(p, x) + x
    else:
        x = xs if evaluate(p, xs) <= xs else p._clamp(evaluate(p, xs))
        k_bound = q * evaluate(p, x) / x + x
    # a longest shortest path of length 2k; a one-edge path is covered by the weight bound
    return max(2 * k_bound, q), x


def sum_diameter_check(game: RealizedGame, report: StabilityReport) -> BoundCheck:
    """Diameter bound plus the cap p(x*)+x* on every edge weight."""
    _require_certified(game, report)
    _require_kind(game, GameKind.SUM)
    p = game.profile.price
    xs = minimize_tradeoff(p, 1).argmin
    weight_cap = evaluate(p, xs) + xs
    max_weight = float(game.edge_weights().max()) if game.n > 1 else 0.0
    bound, x = sum_diameter_bound(p)
    return BoundCheck("Lemma5-diameter", game.diameter, bound, "<=",
                      details={"x": x, "max_weight": max_weight, "weight_cap": weight_cap,
                               "extra_slack": weight_cap - max_weight})


def max_lower_bound(n, p) -> float:
    """(x* + p(x*)/2) n with x* minimizing x + p(x)/2."""
    if n < 2:
        raise ValueError("n must be at least 2")
    x = minimize_tradeoff(p, 2).argmin
    return (x + evaluate(p, x) / 2) * n


def max_lower_check(game: RealizedGame) -> BoundCheck:
    _require_kind(game, GameKind.MAX)
    return BoundCheck("Lemma11-lower", game.social_cost(), max_lower_bound(game.n, game.profile.price),
                      ">=")


def max_cost_upper_check(game: RealizedGame, report: StabilityReport) -> BoundCheck:
    """c(S) <= n ecc(v) + x*(n-1) + 2(p(x*)+x*)(n-1), x* minimizing x + p(x)/2."""
    _require_certified(game, report)
    _require_kind(game, GameKind.MAX)
    p, n = game.profile.price, game.n
    xs = minimize_tradeoff(p, 2).argmin
    v, delta = _min_node(game.eccentricities)
    rhs = n * delta + xs * (n - 1) + 2 * (evaluate(p, xs) + xs) * (n - 1)
    return BoundCheck("Lemma13-upper", game.social_cost(), rhs, "<=",
                      details={"node": v, "delta": delta, "x_star": xs})


def max_diameter_check(game: RealizedGame, report: StabilityReport, x=None) -> BoundCheck:
    """k^3 - 3k^2 + 2k <= p(x)^2 n / x^2 at k = (diam - x) / (4x)."""
    _require_certified(game, report)
    _require_kind(game, GameKind.MAX)
    p, n = game.profile.price, game.n
    if x is None:
        x = minimize_tradeoff(p, 2).argmin
    if not p.interval.contains(x):
        raise OutOfDomain(f"x = {x!r} outside the weight interval")
    k = (game.diameter - x) / (4 * x)
    lhs = k ** 3 - 3 * k ** 2 + 2 * k
    rhs = evaluate(p, x) ** 2 * n / x ** 2
    return BoundCheck("Lemma14-diameter", lhs, rhs, "<=", details={"k": k, "x": x})


def bound_suite(game: RealizedGame, report: StabilityReport | None, tol=BOUND_TOL) -> list:
    """Every bound check applicable to ``game``; upper bounds need a Stable report."""
    if game.kind is GameKind.SUM:
        checks = [sum_lower_bound(game)] if game.connected else []
        if report is not None and report.stable:
            checks += [sum_cost_upper_check(game, report), sum_diameter_check(game, report)]
    else:
        checks = [max_lower_check(game)]
        if report is not None and report.stable:
            checks += [max_cost_upper_check(game, report), max_diameter_check(game, report)]
    return [c if c.tol == tol else replace(c, tol=tol) for c in checks]


# -- ratios ------------------------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    kind: GameKind
    n: int
    ne_cost: float
    opt_cost: float
    opt_label: str
    bounds: dict = field(default_factory=dict)
    case: str = ""
    ceiling: float | None = None

    @property
    def ratio(self):
        if math.isinf(self.ne_cost) or math.isinf(self.opt_cost):
            return math.inf
        return self.ne_cost / self.opt_cost


def sum_poa_bounds(n, p) -> dict:
    xs = minimize_tradeoff(p, 1).argmin
    thm7 = (evaluate(p, xs) + xs) / p.lo
    out = {"n": float(n), "price_ratio": thm7, "thm7": float(min(n, thm7))}
    if isinstance(p, Reciprocal):
        out["cor10"] = float(min(n, math.sqrt(p.alpha) / p.lo))
    if not worst_clique_preconditions(p):
        out["thm9_ratio"] = worst_clique_ratio(n, p)
    return out


def max_poa_bounds(n, p) -> dict:
    """Cube-root bound and the explicit proof quantity under both minimizer readings."""
    out = {"cube_root": 1 + n ** (1 / 3)}
    readings = {"half_price": minimize_tradeoff(p, 2).argmin,    # x + p(x)/2
                "half_weight": minimize_scaled(p, 2).argmin}     # p(x) + x/2
    for name, x in readings.items():
        px = evaluate(p, x)
        out[f"explicit_{name}"] = (px + 2 * x + (px ** 2 * x * n) ** (1 / 3)) / (x + px)
        out[f"x_{name}"] = x
    return out


def _opt_reference(kind, n, p):
    if kind is GameKind.SUM:
        opt = opt_sum(n, p)
        return opt.predicted_cost, opt.case
    return max_lower_bound(n, p), "max-lower-bound"


def poa_report(kind, n, p, equilibria) -> RatioReport:
    """Worst certified equilibrium cost over the optimum reference.

    ``equilibria`` holds ``(profile, StabilityReport)`` pairs; each must be Stable.
    """
    kind = GameKind.parse(kind) if not isinstance(kind, GameKind) else kind
    if not equilibria:
        raise NotCertified("no equilibria given")
    costs = []
    for profile, report in equilibria:
        game = realize(profile)
        _require_certified(game, report)
        costs.append(game.social_cost())
    opt_cost, label = _opt_reference(kind, n, p)
    bounds = sum_poa_bounds(n, p) if kind is GameKind.SUM else max_poa_bounds(n, p)
    if kind is GameKind.MAX:
        bounds["opt_star_cost"] = max_opt_star(n, p).predicted_cost
    return RatioReport(kind, n, max(costs), opt_cost, label, bounds)


def pos_report(kind, n, p) -> RatioReport:
    """Constructed equilibrium over the optimum reference, with the proof's ceiling."""
    kind = GameKind.parse(kind) if not isinstance(kind, GameKind) else kind
    if kind is GameKind.SUM:
        ne, opt = sum_ne(n, p), opt_sum(n, p)
        ne_star = ne.family is Family.STAR_SATELLITES_OWN
        opt_star = opt.family is Family.STAR_SATELLITES_OWN
        if ne_star == opt_star:
            ceiling = 2.0
        elif ne_star:
            ceiling = 6.0
        else:
            ceiling = 2 + 2 * ne.details["x_star"] / ne.details["x_bar"]
        return RatioReport(kind, n, ne.predicted_cost, opt.predicted_cost, opt.case,
                           {"x_star": ne.details["x_star"], "x_bar": ne.details["x_bar"]},
                           ne.case, ceiling)
    ne = max_ne(n, p)
    ceiling = 8.0 if ne.family is Family.STAR_CENTER_OWNS else 4.0
    return RatioReport(kind, n, ne.predicted_cost, max_lower_bound(n, p), "max-lower-bound",
                       {"opt_star_cost": max_opt_star(n, p).predicted_cost}, ne.case, ceiling)


# -- brute-force enumeration -------------------------------------------------

ENUMERATION_MAX_N = 4


def count_profiles(n, cands, parallel=False):
    c = len(cands)
    per_pair = 1 + 2 * c + (c * c if parallel else 0)
    return per_pair ** (n * (n - 1) // 2)


def enumerate_profiles(n, cands: CandidateWeights, cap, price, kind=GameKind.SUM, parallel=False):
    """Yield every profile whose purchases use weights from ``cands``.

    Each pair is unbought, bought by either endpoint, or (with ``parallel``)
    bought by both.  Without ``parallel`` this covers every realized graph
    exactly once per ownership pattern, which suffices for optimum search since
    a double purchase is never cheaper.
    """
    if n > ENUMERATION_MAX_N:
        raise LimitExceeded(f"enumeration limited to n <= {ENUMERATION_MAX_N}")
    total = count_profiles(n, cands, parallel)
    if total > cap:
        raise CapExceeded(f"{total} profiles exceed cap {cap}")
    pairs = list(itertools.combinations(range(n), 2))
    options = [()]
    options += [((0, w),) for w in cands] + [((1, w),) for w in cands]
    if parallel:
        options += [((0, w1), (1, w2)) for w1 in cands for w2 in cands]
    for choice in itertools.product(options, repeat=len(pairs)):
        edges = []
        for (u, v), buys in zip(pairs, choice):
            for side, w in buys:
                edges.append((u, v, w) if side == 0 else (v, u, w))
        yield StrategyProfile.from_edges(n, price, kind, edges)


def brute_force_opt(n, p, cands, kind=GameKind.SUM, cap=10 ** 6):
    """Minimum social cost over :func:`enumerate_profiles`; returns ``(cost, profile)``."""
    best, arg = math.inf, None
    for profile in enumerate_profiles(n, cands, cap, p, kind):
        c = realize(profile).social_cost()
        if c < best:
            best, arg = c, profile
    return best, arg


def worst_clique_realized_ratio(n, p):
    """Clique-at-hi SUM cost over the star at the lower weight bound."""
    return sum_clique_cost(n, p, p.hi) / sum_star_cost(n, p, p.lo)
