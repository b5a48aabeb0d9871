import math

import pytest

from conftest import single_task, two_task
from mccoffload.channel import LinkParams, min_power_td
from mccoffload.model import (
    Allocation,
    CallGraph,
    Decision,
    Mode,
    ServiceReliability,
    SystemParams,
    TaskSpec,
    ValidationError,
    build_compound_hypergraph,
    build_scenario,
    evaluate,
)


def test_task_validation():
    with pytest.raises(ValidationError) as err:
        TaskSpec(0.0, 1.0, 1.0)
    assert err.value.field == "cycles"
    with pytest.raises(ValidationError):
        TaskSpec(1.0, -1.0, 1.0)
    with pytest.raises(ValidationError):
        CallGraph(())


def test_reliability_conditional():
    rel = ServiceReliability((0.99, 0.891))
    assert rel.conditional[0] == 0.99
    assert rel.conditional[1] == pytest.approx(0.9, rel=1e-15)
    with pytest.raises(ValidationError) as err:
        ServiceReliability((0.9, 0.95))
    assert err.value.field == "reliability[2]"
    with pytest.raises(ValidationError) as err:
        ServiceReliability((1.2,))
    assert err.value.field == "reliability[1]"


@pytest.mark.parametrize("name", ["f_mobile", "bw_ul", "snr_dl", "latency_max", "p_max_dl"])
def test_params_positive(name):
    with pytest.raises(ValidationError) as err:
        SystemParams(**{name: 0.0})
    assert err.value.field == name


def test_params_misc():
    with pytest.raises(ValidationError):
        SystemParams(diversity=0)
    with pytest.raises(ValidationError):
        SystemParams(sc_latency="twice")
    graph = CallGraph((TaskSpec(1e9, 1.0, 1.0),))
    with pytest.raises(ValidationError):
        build_scenario(graph, [0.9, 0.8], SystemParams())


def test_local_checkpoints():
    one = single_task()
    assert one.compute_floor(Decision((0,))) == 2.0
    assert one.local_energy(Decision((0,))) == pytest.approx(0.8, abs=1e-15)
    two = two_task()
    assert two.compute_floor(Decision((0, 0))) == pytest.approx(3.6, abs=1e-15)
    assert two.local_energy(Decision((0, 0))) == pytest.approx(1.44, abs=1e-15)
    assert two.compute_floor(Decision((1, 1))) == pytest.approx(0.36, abs=1e-15)
    assert two.local_energy(Decision((1, 0))) == pytest.approx(0.64, abs=1e-15)


def test_all_local_evaluation():
    rep = evaluate(two_task(latency_max=3.6), Decision((0, 0)), Allocation.empty("td"))
    assert rep.feasible
    assert rep.energy == pytest.approx(1.44, abs=1e-15)
    assert rep.sl_prob == (1.0, 1.0)
    assert not evaluate(two_task(latency_max=3.5), Decision((0, 0)),
                        Allocation.empty("td")).feasible


def test_decision_helpers():
    d = Decision((1, 0, 1))
    assert d.offloaded_set == (0, 2)
    assert d.bitstring() == "101"
    with pytest.raises(ValidationError):
        Decision((2,))


def test_allocation_shapes():
    with pytest.raises(ValidationError):
        Allocation(Mode.SC, (1.0, 1.0), (1.0, 1.0), (0.1, 0.1), (0.1, 0.1))
    with pytest.raises(ValidationError):
        Allocation(Mode.TD, (1.0,), (1.0,), (0.1, 0.2), (0.1,))
    with pytest.raises(ValidationError):
        Allocation(Mode.TD, (-1.0,), (1.0,), (0.1,), (0.1,))
    sc = Allocation(Mode.SC, (1.0, 2.0), (3.0, 4.0), (0.1,), (0.2,))
    assert sc.slots() == ((0.1, 0.1), (0.2, 0.2))


def test_hypergraph():
    g = build_compound_hypergraph(two_task().graph)
    assert g.output_nodes == ("SL(1)", "SL(2)")
    assert g.hyperedges[0] == (0, ("SL(1)", "SL(2)"), 1.4e5)
    assert g.hyperedges[1] == (1, ("SL(2)",), 2.8e5)
    assert [e[2] for e in g.input_edges] == [1.4e5, 2.8e5]


def test_evaluate_offloaded_td():
    sc = single_task(diversity=2, latency_max=2.0)
    lk = LinkParams(1.4e5, 0.5, 1e6, 1.0, 2)
    p = min_power_td(lk, 0.99) * 1.001
    rep = evaluate(sc, Decision((1,)), Allocation(Mode.TD, (p,), (p,), (0.5,), (0.5,)))
    assert rep.feasible
    assert rep.latency == pytest.approx(1.2)
    assert rep.energy == pytest.approx(0.5 * p)
    assert rep.sl_prob[0] == pytest.approx(rep.rho_ul[0] * rep.rho_dl[0])
    assert rep.sl_prob[0] > 0.99
    assert rep.min_slack >= 0
    # exceeding the cap is flagged by name
    rep = evaluate(sc.with_params(p_max_dl=0.5 * p), Decision((1,)),
                   Allocation(Mode.TD, (p,), (p,), (0.5,), (0.5,)))
    assert not rep.feasible and rep.violations["p_dl[1]"] < 0


def test_evaluate_sc_latency_modes():
    sc = two_task(diversity=2, latency_max=2.0)
    alloc = Allocation(Mode.SC, (5.0, 1.0), (5.0, 1.0), (0.3,), (0.4,))
    once = evaluate(sc, Decision((1, 1)), alloc)
    literal = evaluate(sc.with_params(sc_latency="literal"), Decision((1, 1)), alloc)
    assert once.latency == pytest.approx(0.36 + 0.7)
    assert literal.latency == pytest.approx(0.36 + 1.4)
    assert once.energy == pytest.approx(0.3 * 6.0)


def test_evaluate_shape_errors():
    with pytest.raises(ValidationError):
        evaluate(two_task(), Decision((1,)), Allocation.empty("td"))
    with pytest.raises(ValidationError):
        evaluate(two_task(), Decision((1, 1)), Allocation(Mode.TD, (1.0,), (1.0,), (1.0,), (1.0,)))


def test_sl_probability_only_counts_offloaded():
    sc = two_task(diversity=2, latency_max=3.0)
    lk = LinkParams(2.8e5, 0.6, 1e6, 1.0, 2)
    p = min_power_td(lk, 0.9) * 1.01
    rep = evaluate(sc, Decision((0, 1)), Allocation(Mode.TD, (p,), (p,), (0.6,), (0.6,)))
    assert rep.sl_prob[0] == 1.0
    assert rep.sl_prob[1] == pytest.approx(rep.rho_ul[0] * rep.rho_dl[0])
    assert "rho_ul[2]" in rep.violations and "rho_ul[1]" not in rep.violations
    assert math.isclose(rep.latency, 2.0 + 0.16 + 1.2)
