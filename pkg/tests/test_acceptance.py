"""Acceptance criteria, one test each.  Run with ``pytest -v tests/test_acceptance.py``."""

import math
import time

import numpy as np
import pytest

from conftest import joint_best_cost
from qosncg.constructions import Family, max_ne, opt_sum, sum_ne, sum_worst_clique, worst_clique_preconditions
from qosncg.dynamics import (DeviationFamily, RESTRICTED, CandidateWeights, Scheduler, best_response,
                             candidate_weights, random_profile, run_dynamics, search_family)
from qosncg.errors import NCGError
from qosncg.game import GameKind, realize
from qosncg.price import Constant, Linear, Reciprocal
from qosncg.verifier import (bound_suite, certify_ne, enumerate_profiles, pos_report, replay_gain)

TOL = 1e-9          # comparisons in criteria 2, 3 and 5
REPLAY_TOL = 1e-12  # criteria 7 and 8
GRID = 64
LIMIT = 8

CRIT1_PRICES = ([Reciprocal(a, 1, 10) for a in (1, 4, 16, 64)]
                + [Constant(a, 1, 1) for a in (0.5, 1, 2)])
CRIT3_PRICES = [Constant(1e-3, 1, 1), Constant(1, 1, 1), Reciprocal(0.01, 1, 2), Reciprocal(100, 1, 10)]
SIZES = range(3, 9)


def _certify(profile, cands=None, grid=GRID):
    if cands is None:
        cands = candidate_weights(profile.price, profile.n, grid)
    fams = (DeviationFamily.EXHAUSTIVE,) if profile.n <= LIMIT else RESTRICTED
    return certify_ne(profile, fams, cands, exhaustive_limit=LIMIT)


@pytest.fixture(scope="module")
def certified():
    """Certified equilibria gathered by criteria 1-3, consumed by criterion 5."""
    return []


def test_criterion_1_sum_ne_stable(certified):
    start = time.perf_counter()
    unstable = []
    for p in CRIT1_PRICES:
        for n in SIZES:
            prof = sum_ne(n, p).profile
            rep = _certify(prof)
            if rep.stable:
                certified.append((prof, rep))
            else:
                unstable.append((p.spec(), n, rep.as_json()))
    elapsed = time.perf_counter() - start
    assert not unstable, unstable
    assert elapsed < 300, f"{elapsed:.1f}s"


def test_criterion_2_worst_clique(certified):
    problems = []
    for p in (Linear(3, 0.25, 1, 2.5), Constant(1, 1, 1)):
        failed = worst_clique_preconditions(p)
        if failed:
            problems.append(f"{p.spec()}: preconditions not detected: {failed}")
            continue
        for n in SIZES:
            try:
                out = sum_worst_clique(n, p)
            except NCGError as exc:
                problems.append(f"{p.spec()} n={n}: {type(exc).__name__}: {exc}")
                continue
            rep = _certify(out.profile)
            if not rep.stable:
                problems.append(f"{p.spec()} n={n}: clique(hi) Unstable {rep.as_json()}")
            else:
                certified.append((out.profile, rep))
            lo, hi = p.lo, p.hi
            expected = n * (p(hi) + hi) / (p(lo) + 2 * lo * (n - 1))
            if abs(out.details["ratio"] - expected) > TOL:
                problems.append(f"{p.spec()} n={n}: ratio {out.details['ratio']} != {expected}")
    assert not problems, problems


def test_criterion_3_max_ne(certified):
    problems = []
    for p in CRIT3_PRICES:
        for n in SIZES:
            out = max_ne(n, p)
            rep = _certify(out.profile)
            if not rep.stable:
                problems.append(f"{p.spec()} n={n}: Unstable {rep.as_json()}")
            else:
                certified.append((out.profile, rep))
            ratio = pos_report(GameKind.MAX, n, p).ratio
            ceiling = 4.0 if out.family in (Family.STAR_SATELLITES_OWN, Family.CLIQUE_ONE_OWNER) else 8.0
            if not ratio <= ceiling + TOL:
                problems.append(f"{p.spec()} n={n} {out.family.value}: PoS {ratio} > {ceiling}")
    assert not problems, problems


def test_criterion_4_opt_matches_enumeration():
    problems = []
    for alpha in (0.5, 1, 2, 5):
        p = Constant(alpha, 1, 1)
        cands = CandidateWeights((1.0,))
        for n in (2, 3):
            brute = min(realize(prof).social_cost()
                        for prof in enumerate_profiles(n, cands, 10 ** 4, p, GameKind.SUM))
            opt = opt_sum(n, p)
            if opt.predicted_cost != brute or realize(opt.profile).social_cost() != brute:
                problems.append(f"alpha={alpha} n={n}: opt_sum {opt.predicted_cost} vs brute {brute}")
            if n == 3:
                star_wins = alpha >= 2
                if (opt.family is Family.STAR_SATELLITES_OWN) != star_wins:
                    problems.append(f"alpha={alpha}: expected {'star' if star_wins else 'clique'}")
                if opt.details["star_cost"] != 2 * alpha + 8 or opt.details["clique_cost"] != 3 * alpha + 6:
                    problems.append(f"alpha={alpha}: closed forms {opt.details}")
    if opt_sum(3, Constant(1, 1, 1)).predicted_cost != 9:
        problems.append("OPT(n=3, alpha=1) != 9")
    assert not problems, problems


def _dynamics_equilibria(count, seed0=1000):
    """Certified final profiles of ``count`` converged seeded runs from random starts."""
    found, seed = [], seed0
    while len(found) < count:
        rng = np.random.default_rng(seed)
        kind = GameKind.SUM if seed % 2 else GameKind.MAX
        p = [Reciprocal(float(rng.uniform(0.05, 100)), 1, float(rng.uniform(1, 10))),
             Constant(float(rng.uniform(0.05, 5)), 1, 1)][int(rng.integers(2))]
        n = int(rng.integers(3, 7))
        cands = candidate_weights(p, n, 8)
        init = random_profile(n, p, kind, cands, seed=seed)
        trace = run_dynamics(init, cands, Scheduler("random", seed), DeviationFamily.EXHAUSTIVE,
                             max_rounds=50)
        seed += 1
        if trace.converged:
            found.append((trace.final, certify_ne(trace.final, DeviationFamily.EXHAUSTIVE, cands)))
        assert seed - seed0 < 3 * count, "too few converged runs"
    return found


def test_criterion_5_bound_suite(certified):
    assert len(certified) >= 42 + 6 + 24, "criteria 1-3 must run first in this module"
    pool = certified + _dynamics_equilibria(100)
    violations, not_stable, names = [], 0, set()
    for prof, rep in pool:
        if not rep.stable:
            not_stable += 1
            continue
        for c in bound_suite(realize(prof), rep, tol=TOL):
            names.add(c.name)
            if not c.satisfied:
                violations.append((prof.price.spec(), prof.kind.value, prof.n, c.name, c.lhs, c.rhs))
    assert not_stable == 0
    assert names == {"Lemma1-lower", "Lemma6-upper", "Lemma5-diameter",
                     "Lemma11-lower", "Lemma13-upper", "Lemma14-diameter"}
    assert not violations, violations


def test_criterion_6_corollary10_regime():
    exceed, checked = [], 0
    for alpha in (1, 4, 16, 64, 256):
        p = Reciprocal(alpha, 1, 10)
        for n in range(4, 11):
            cands = candidate_weights(p, n, 16)
            family = DeviationFamily.EXHAUSTIVE if n <= LIMIT else DeviationFamily.SINGLE_ADD
            profiles = [sum_ne(n, p).profile]
            if not worst_clique_preconditions(p):
                profiles.append(sum_worst_clique(n, p).profile)
            for seed in range(2):
                init = random_profile(n, p, GameKind.SUM, cands, seed=100 * alpha + 10 * n + seed)
                trace = run_dynamics(init, cands, Scheduler("random", seed), family, max_rounds=30)
                if trace.converged:
                    profiles.append(trace.final)
            opt = opt_sum(n, p).predicted_cost
            bound = 8 * min(n, math.sqrt(alpha) / p.lo)
            for prof in profiles:
                if not _certify(prof, cands).stable:
                    continue
                checked += 1
                ratio = realize(prof).social_cost() / opt
                if ratio > bound:
                    exceed.append((alpha, n, ratio, bound))
    assert checked >= 35, checked
    assert not exceed, exceed


def test_criterion_7_dynamics_verifier_consistency():
    families = list(DeviationFamily)
    problems, converged, unstable_checked = [], 0, 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        kind = GameKind.SUM if rng.random() < 0.5 else GameKind.MAX
        p = [Reciprocal(float(rng.uniform(0.1, 50)), 1, float(rng.uniform(1.5, 8))),
             Constant(float(rng.uniform(0.2, 3)), 1, 1)][int(rng.integers(2))]
        n = int(rng.integers(2, 7))
        family = families[int(rng.integers(len(families)))]
        cands = candidate_weights(p, n, 6)
        init = random_profile(n, p, kind, cands, seed=seed)
        # an Unstable verdict on the start profile must replay exactly
        rep = certify_ne(init, family, cands)
        if not rep.stable:
            unstable_checked += 1
            resp, _ = search_family(init, rep.node, family, cands)
            replayed = replay_gain(init, rep.node, rep.strategy)
            if not (math.isinf(resp.current_cost) and math.isinf(replayed)) and \
                    abs(resp.gain - replayed) > REPLAY_TOL:
                problems.append(f"seed {seed}: gain {resp.gain} replays to {replayed}")
        trace = run_dynamics(init, cands, Scheduler("random", seed), family, max_rounds=40)
        if trace.converged:
            converged += 1
            final = certify_ne(trace.final, family, cands)
            if not final.stable:
                problems.append(f"seed {seed}: converged under {family.value} but Unstable {final.as_json()}")
    assert converged >= 100 and unstable_checked >= 100, (converged, unstable_checked)
    assert not problems, problems


def test_criterion_8_best_response_oracle():
    mismatches = []
    for kind in (GameKind.SUM, GameKind.MAX):
        for seed in range(50):
            rng = np.random.default_rng(seed + (0 if kind is GameKind.SUM else 10_000))
            hi = float(rng.uniform(2, 10))
            p = Reciprocal(float(rng.uniform(0.1, 60)), 1, hi)
            n = int(rng.integers(2, 5))
            k = int(rng.integers(1, 7))
            cands = CandidateWeights(tuple(rng.uniform(1, hi, k)))
            prof = random_profile(n, p, kind, cands, seed=seed, density=float(rng.uniform(0.2, 0.7)))
            for v in range(n):
                got = best_response(prof, v, cands).cost
                want = joint_best_cost(prof, v, cands)
                if not (got == want or abs(got - want) <= REPLAY_TOL):
                    mismatches.append((kind.value, seed, v, got, want))
    assert not mismatches, mismatches
