import math

import numpy as np
import pytest

from conftest import joint_best_cost
from qosncg.constructions import sum_ne
from qosncg.dynamics import (CandidateWeights, DeviationFamily, Scheduler, best_response,
                             candidate_weights, count_moves, improving_response, random_profile,
                             run_dynamics)
from qosncg.errors import LimitExceeded, ValidationError
from qosncg.game import GameKind, StrategyProfile, realize
from qosncg.price import Constant, Reciprocal
from qosncg.verifier import certify_ne

UNIT = Constant(1, 1, 1)


def test_candidates_degenerate():
    assert candidate_weights(UNIT, 5, 8).weights == (1.0,)


def test_candidates_reciprocal():
    ws = candidate_weights(Reciprocal(4, 1, 10), 3, 2).weights
    for x in (1, 10, 2, math.sqrt(2), math.sqrt(8)):
        assert any(abs(w - x) < 1e-12 for w in ws)
    assert len(ws) == len(set(ws)) and list(ws) == sorted(ws)
    assert len(ws) <= 2 * 2 + 2 + 2


def test_candidates_reject_bad_args():
    with pytest.raises(ValueError):
        candidate_weights(UNIT, 1, 8)


def test_remove_only_boundary():
    prof = StrategyProfile.from_edges(3, UNIT, "sum", [(0, 1, 1), (0, 2, 1), (1, 2, 1)])
    assert improving_response(prof, 0, "remove-only", CandidateWeights((1,))) is None


def test_single_add_escapes_disconnection():
    p = Reciprocal(4, 1, 10)
    resp = improving_response(StrategyProfile.empty(2, p), 0, DeviationFamily.SINGLE_ADD,
                              candidate_weights(p, 2, 4))
    assert resp is not None and math.isinf(resp.current_cost)
    # first improving add is the smallest candidate; the exhaustive family finds argmin p(x)+x
    br = improving_response(StrategyProfile.empty(2, p), 0, "exhaustive", candidate_weights(p, 2, 4))
    assert br.strategy.edges == ((1, 2.0),)


def test_single_add_on_path():
    p = Constant(0.5, 1, 1)
    prof = StrategyProfile.from_edges(3, p, "sum", [(0, 1, 1), (1, 2, 1)])
    resp = improving_response(prof, 0, "single-add", CandidateWeights((1,)))
    assert resp.strategy.edges == ((1, 1.0), (2, 1.0))
    assert resp.gain == pytest.approx(0.5)


def test_best_response_free_ride():
    prof = StrategyProfile.from_edges(2, UNIT, "sum", [(1, 0, 1)])
    br = best_response(prof, 0, CandidateWeights((1,)))
    assert br.strategy.edges == ()


def test_best_response_empty_n3():
    br = best_response(StrategyProfile.empty(3, UNIT), 0, CandidateWeights((1,)))
    assert br.strategy.targets == (1, 2) and br.cost == 4


def test_best_response_at_sum_ne_keeps_cost():
    p = Reciprocal(4, 1, 10)
    ne = sum_ne(4, p).profile
    cands = candidate_weights(p, 4, 16)
    for v in range(4):
        br = best_response(ne, v, cands)
        assert br.cost >= br.current_cost - 1e-9


def test_best_response_limit():
    with pytest.raises(LimitExceeded):
        best_response(StrategyProfile.empty(5, UNIT), 0, CandidateWeights((1,)), exhaustive_limit=4)


@pytest.mark.parametrize("kind", ["sum", "max"])
@pytest.mark.parametrize("seed", range(8))
def test_best_response_matches_joint_oracle(kind, seed):
    rng = np.random.default_rng(seed)
    p = Reciprocal(float(rng.uniform(0.5, 30)), 1, 6)
    n = int(rng.integers(2, 5))
    cands = CandidateWeights(tuple(rng.uniform(1, 6, 4)) + (1.0, 6.0))
    prof = random_profile(n, p, kind, cands, seed=seed, density=0.5)
    for v in range(n):
        assert best_response(prof, v, cands).cost == pytest.approx(joint_best_cost(prof, v, cands),
                                                                   abs=1e-12, rel=1e-12)


def test_converges_from_ne_without_moves():
    p = Reciprocal(4, 1, 10)
    trace = run_dynamics(sum_ne(4, p).profile, candidate_weights(p, 4, 16))
    assert trace.converged and trace.rounds == 1 and trace.steps == []


def test_dynamics_from_empty_n3():
    cands = CandidateWeights((1,))
    trace = run_dynamics(StrategyProfile.empty(3, UNIT), cands)
    assert trace.converged
    assert certify_ne(trace.final, "exhaustive", cands).stable
    assert realize(trace.final).connected


def test_dynamics_steps_strictly_improve_and_replay():
    p = Reciprocal(9, 1, 5)
    cands = candidate_weights(p, 5, 6)
    init = random_profile(5, p, "max", cands, seed=4)
    trace = run_dynamics(init, cands, Scheduler.parse("random:7"), "single-add", max_rounds=30)
    prof = init
    for step in trace.steps:
        assert step.new_cost < step.old_cost - 1e-9
        assert realize(prof).private_cost(step.node).total == pytest.approx(step.old_cost, rel=1e-12)
        prof = prof.with_strategy(step.node, step.strategy)
    assert prof == trace.final


def test_dynamics_deterministic():
    p = Reciprocal(9, 1, 5)
    cands = candidate_weights(p, 4, 6)
    init = random_profile(4, p, "sum", cands, seed=1)
    a = run_dynamics(init, cands, Scheduler.parse("random:3"))
    b = run_dynamics(init, cands, Scheduler.parse("random:3"))
    assert [s.as_json() for s in a.steps] == [s.as_json() for s in b.steps]


def test_max_rounds_validation():
    with pytest.raises(ValueError):
        run_dynamics(StrategyProfile.empty(3, UNIT), CandidateWeights((1,)), max_rounds=0)


def test_scheduler_parse():
    assert str(Scheduler.parse("random:5")) == "random:5"
    assert Scheduler.parse("rr").kind == "round-robin"
    with pytest.raises(ValidationError):
        Scheduler.parse("random")
    with pytest.raises(ValidationError):
        Scheduler("round-robin", 3)


def test_family_parse_and_counts():
    assert DeviationFamily.parse("single-add") is DeviationFamily.SINGLE_ADD
    prof = StrategyProfile.from_edges(3, UNIT, "sum", [(0, 1, 1)])
    assert count_moves(prof, 0, "remove-only", CandidateWeights((1,))) == 1
    assert count_moves(prof, 0, DeviationFamily.SINGLE_ADD, CandidateWeights((1,))) == 1
