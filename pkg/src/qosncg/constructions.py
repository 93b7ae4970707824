"""Explicit optimal and equilibrium graphs with closed-form social costs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import PreconditionFailed
from .game import EPS, GameKind, StrategyProfile
from .price import evaluate, minimize_scaled, minimize_tradeoff


class Family(str, Enum):
    STAR_SATELLITES_OWN = "star-satellites-own"
    STAR_CENTER_OWNS = "star-center-owns"
    CLIQUE = "clique"
    CLIQUE_ONE_OWNER = "clique-one-owner"


@dataclass(frozen=True)
class ConstructionOutcome:
    profile: StrategyProfile
    family: Family
    weight: float
    case: str
    predicted_cost: float
    # named minimizers and derived quantities behind the case decision
    details: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.profile.n

    def sidecar(self):
        return {"family": self.family.value, "case": self.case, "weight": self.weight,
                "predicted_cost": self.predicted_cost, "n": self.n,
                "game": self.profile.kind.value, "price": self.profile.price.spec(),
                "details": self.details}


# -- graph builders ----------------------------------------------------------

def star(n, weight, price, kind, center_owns=False, center=0):
    edges = []
    for s in range(n):
        if s == center:
            continue
        edges.append((center, s, weight) if center_owns else (s, center, weight))
    return StrategyProfile.from_edges(n, price, kind, edges)


def clique(n, weight, price, kind, hub=None):
    """Complete graph; the lower id owns each edge unless ``hub`` owns all of its edges."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            owner, target = (v, u) if v == hub else (u, v)
            edges.append((owner, target, weight))
    return StrategyProfile.from_edges(n, price, kind, edges)


# -- closed-form social costs ------------------------------------------------

def sum_star_cost(n, p, x):
    return (n - 1) * (2 * (n - 1) * x + evaluate(p, x))


def sum_clique_cost(n, p, x):
    return n * (n - 1) * (x + evaluate(p, x) / 2)


def max_star_cost(n, p, x):
    if n == 2:
        return evaluate(p, x) + 2 * x
    return (n - 1) * evaluate(p, x) + x + 2 * (n - 1) * x


def max_clique_cost(n, p, x):
    return n * (n - 1) / 2 * evaluate(p, x) + n * x


# -- constructions -----------------------------------------------------------

def opt_sum(n, p) -> ConstructionOutcome:
    """Cheaper of the star at the (2(n-1))-tradeoff weight and the clique at the 2-tradeoff weight."""
    if n < 2:
        raise ValueError("n must be at least 2")
    chi_bar = minimize_tradeoff(p, 2 * (n - 1)).argmin
    chi_star = minimize_tradeoff(p, 2).argmin
    star_cost = sum_star_cost(n, p, chi_bar)
    clique_cost = sum_clique_cost(n, p, chi_star)
    details = {"chi_bar": chi_bar, "chi_star": chi_star,
               "star_cost": star_cost, "clique_cost": clique_cost}
    if star_cost <= clique_cost:
        return ConstructionOutcome(star(n, chi_bar, p, GameKind.SUM), Family.STAR_SATELLITES_OWN,
                                   chi_bar, "opt-star", star_cost, details)
    return ConstructionOutcome(clique(n, chi_star, p, GameKind.SUM), Family.CLIQUE,
                               chi_star, "opt-clique", clique_cost, details)


def sum_ne(n, p) -> ConstructionOutcome:
    """SUM equilibrium: star at x_bar when x_bar < p(x*), else clique at x* or star at x_bar.

    The clique is used when removing all own edges and rebuying a single one
    does not pay off: p(x_bar) - x* + (n-1)(x_bar - p(x*)) >= 0.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    xs = minimize_tradeoff(p, 1).argmin
    xb = minimize_tradeoff(p, n - 1).argmin
    p_xs, p_xb = evaluate(p, xs), evaluate(p, xb)
    collapse_change = p_xb - xs + (n - 1) * (xb - p_xs)
    details = {"x_star": xs, "x_bar": xb, "p_x_star": p_xs, "p_x_bar": p_xb,
               "collapse_change": collapse_change}
    if xb < p_xs:
        return ConstructionOutcome(star(n, xb, p, GameKind.SUM), Family.STAR_SATELLITES_OWN, xb,
                                   "star: x_bar < p(x*)", sum_star_cost(n, p, xb), details)
    if collapse_change >= -EPS:
        return ConstructionOutcome(clique(n, xs, p, GameKind.SUM), Family.CLIQUE, xs,
                                   "clique: collapse does not pay", sum_clique_cost(n, p, xs), details)
    return ConstructionOutcome(star(n, xb, p, GameKind.SUM), Family.STAR_SATELLITES_OWN, xb,
                               "star: collapse pays", sum_star_cost(n, p, xb), details)


def worst_clique_preconditions(p, tol=EPS):
    """Names of the failed conditions for the high-weight clique equilibrium (empty if all hold)."""
    lo, hi = p.lo, p.hi
    failed = []
    if not evaluate(p, hi) <= lo + tol:
        failed.append("p(hi) <= lo")
    if not evaluate(p, lo) <= hi + tol:
        failed.append("p(lo) <= hi")
    if abs(minimize_tradeoff(p, 1).argmin - hi) > tol:
        failed.append("argmin p(x)+x == hi")
    return failed


def worst_clique_ratio(n, p):
    lo, hi = p.lo, p.hi
    return n * (evaluate(p, hi) + hi) / (evaluate(p, lo) + 2 * lo * (n - 1))


def sum_worst_clique(n, p) -> ConstructionOutcome:
    """Clique with every edge at the upper weight bound, an expensive SUM equilibrium."""
    if n < 2:
        raise ValueError("n must be at least 2")
    failed = worst_clique_preconditions(p)
    if failed:
        raise PreconditionFailed(failed)
    hi = p.hi
    details = {"ratio": worst_clique_ratio(n, p), "lo_star_cost": sum_star_cost(n, p, p.lo)}
    return ConstructionOutcome(clique(n, hi, p, GameKind.SUM), Family.CLIQUE, hi,
                               "worst-clique", sum_clique_cost(n, p, hi), details)


def max_ne(n, p) -> ConstructionOutcome:
    """MAX equilibrium: satellite-owned star, center-owned star, or clique around a hub."""
    if n < 2:
        raise ValueError("n must be at least 2")
    cs = minimize_scaled(p, n - 1).argmin       # minimizes (n-1)p(x) + x
    cb = minimize_tradeoff(p, 1).argmin         # minimizes p(x) + x
    p_cs, p_cb = evaluate(p, cs), evaluate(p, cb)
    hub_value = (n - 1) * p_cs + cs
    star_value = p_cb + 2 * cb
    details = {"chi_star": cs, "chi_bar": cb, "hub_value": hub_value, "star_value": star_value}
    if hub_value >= star_value - EPS:
        return ConstructionOutcome(star(n, cb, p, GameKind.MAX), Family.STAR_SATELLITES_OWN, cb,
                                   "star-satellites-own", max_star_cost(n, p, cb), details)
    if cs <= (n - 2) * p_cs + EPS:
        return ConstructionOutcome(star(n, cs, p, GameKind.MAX, center_owns=True),
                                   Family.STAR_CENTER_OWNS, cs, "star-center-owns",
                                   max_star_cost(n, p, cs), details)
    return ConstructionOutcome(clique(n, cs, p, GameKind.MAX, hub=0), Family.CLIQUE_ONE_OWNER, cs,
                               "clique-one-owner", max_clique_cost(n, p, cs), details)


def max_opt_star(n, p) -> ConstructionOutcome:
    """Star at the weight minimizing x + p(x)/2; reference optimum for MAX ratios."""
    if n < 2:
        raise ValueError("n must be at least 2")
    x = minimize_tradeoff(p, 2).argmin
    return ConstructionOutcome(star(n, x, p, GameKind.MAX), Family.STAR_SATELLITES_OWN, x,
                               "max-opt-star", max_star_cost(n, p, x), {"x_star": x})
