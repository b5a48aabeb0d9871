import math

import numpy as np
import pytest

from conftest import single_task, two_task
from mccoffload.model import CallGraph, Decision, Mode, SystemParams, TaskSpec, build_scenario
from mccoffload.planner import (
    INFEASIBLE,
    MAX_TASKS,
    OPTIMAL,
    Solution,
    SweepResult,
    all_decisions,
    compare_modes,
    plan,
    solve_decision,
    sweep,
)

# exact single-task TD optima at d = 2, from the closed-form reduction
SINGLE_TD = {0.5: 2.00638799409, 1.0: 1.42986913333, 1.5: 1.38026436064}


def test_enumeration():
    decs = all_decisions(2)
    assert [d.bitstring() for d in decs] == ["00", "01", "10", "11"]
    assert len(all_decisions(5)) == 32


@pytest.mark.parametrize("l_max", sorted(SINGLE_TD))
def test_single_task_optima(l_max):
    sol = plan(single_task(diversity=2, latency_max=l_max), "td")
    assert sol.status == OPTIMAL
    assert sol.decision == Decision((1,))
    assert sol.energy == pytest.approx(SINGLE_TD[l_max], rel=1e-6)


def test_local_wins_when_budget_allows():
    sol = plan(single_task(diversity=2, latency_max=3.0), "td")
    assert sol.decision == Decision((0,))
    assert sol.energy == pytest.approx(0.8)
    assert sol.report.feasible


def test_infeasible_everywhere():
    sol = plan(single_task(diversity=2, latency_max=0.1), "td")
    assert sol.status == INFEASIBLE and math.isinf(sol.energy)
    assert sol.decision is None and not sol.found


def test_order_independent():
    sc = two_task(diversity=2, latency_max=2.5)
    forward = plan(sc, "td")
    shuffled = list(all_decisions(2))
    np.random.default_rng(3).shuffle(shuffled)
    backward = plan(sc, "td", decisions=shuffled)
    assert forward.decision == backward.decision
    assert forward.energy == backward.energy


def test_tie_break_prefers_fewer_offloads():
    # a free link and instant cloud make every decision cost the same zero energy
    graph = CallGraph((TaskSpec(1e-3, 0.0, 0.0), TaskSpec(1e-3, 0.0, 0.0)))
    sc = build_scenario(graph, [0.99, 0.98], SystemParams(p_mobile_compute=1e-300,
                                                          latency_max=10.0))
    sol = plan(sc, "td")
    assert sol.decision == Decision((0, 0))


def test_task_limit():
    graph = CallGraph(tuple(TaskSpec(1e9, 1e3, 1e3) for _ in range(MAX_TASKS + 1)))
    sc = build_scenario(graph, [0.99] * (MAX_TASKS + 1), SystemParams())
    with pytest.raises(ValueError, match="limited"):
        plan(sc, "td")


def test_relaxed_targets_never_cost_more():
    base = single_task(diversity=2, latency_max=1.0)
    energies = []
    for r in (0.999, 0.99, 0.9, 0.6):
        sc = build_scenario(base.graph, [r], base.params)
        energies.append(plan(sc, "td").energy)
    assert all(b <= a * (1 + 1e-6) for a, b in zip(energies, energies[1:]))


def test_restarts_deterministic():
    sc = two_task(diversity=2, latency_max=2.0)
    a = solve_decision(sc, Decision((1, 1)), "td", seed=5)
    b = solve_decision(sc, Decision((1, 1)), "td", seed=5)
    assert a.energy == b.energy
    with pytest.raises(ValueError):
        solve_decision(sc, Decision((1, 1)), "td", restarts=0)


def test_sweep_shapes():
    res = sweep(single_task(diversity=2), ["td", "sc"], [1.0, 1.5])
    assert res.axis == (1.0, 1.5)
    assert set(res.modes) == {Mode.TD, Mode.SC}
    assert res.energies("td").shape == (2,)
    with pytest.raises(ValueError):
        sweep(single_task(), "td", [])
    with pytest.raises(ValueError):
        sweep(single_task(), "td", [1.0, 1.0])


def test_compare_modes_single_task_agree():
    res = compare_modes(single_task(diversity=2), [1.0, 2.0])
    assert np.allclose(res.energies("td"), res.energies("sc"), rtol=1e-6)


def test_solution_guards():
    sol = Solution.infeasible(Mode.TD)
    assert sol.status == INFEASIBLE
    with pytest.raises(ValueError):
        Solution(None, Mode.TD, None, 1.0, None, OPTIMAL)
    with pytest.raises(ValueError):
        SweepResult((1.0, 0.5), {})
