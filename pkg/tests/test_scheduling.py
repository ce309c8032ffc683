import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimoswitch.combinatorics import Permutation, enumerate_condensed_sets, enumerate_derangements
from mimoswitch.errors import DemandInfeasibleError, DomainError, ParseError
from mimoswitch.scheduling import (
    Flow,
    TrafficDemand,
    compile_schedule,
    fair_throughput,
    fair_weights,
    parse_demand,
)

FIG1 = """\
# source destinations label
1 2,3 a
2 1 b
2 3 c
3 1 d
3 2 e
"""
D1 = Permutation.from_one_based((2, 3, 1))
D2 = Permutation.from_one_based((3, 1, 2))


def test_fair_weights():
    assert np.allclose(fair_weights([1, 2, 4], c=4), [4, 2, 1])
    assert np.allclose(fair_weights([0.7] * 3, c=0.7), [1, 1, 1])
    with pytest.raises(DomainError):
        fair_weights([1, 0])
    with pytest.raises(DomainError):
        fair_weights([1, 2], c=0)


def test_fair_throughput_values():
    assert fair_throughput([2.5, 2.5, 2.5]) == pytest.approx(2.5)
    assert fair_throughput([1, 2, 2]) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        fair_throughput([])


rates_st = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=8)


@given(rates_st, st.floats(0.1, 10.0))
def test_fair_properties(rates, c):
    t = fair_throughput(rates)
    assert min(rates) * (1 - 1e-12) <= t <= max(rates) * (1 + 1e-12)
    assert fair_throughput(rates[::-1]) == pytest.approx(t, rel=1e-12)
    assert fair_throughput([3 * r for r in rates]) == pytest.approx(3 * t, rel=1e-12)
    k = fair_weights(rates, c)
    assert np.allclose(k * np.array(rates), c)
    assert t * k.sum() == pytest.approx(len(rates) * c, rel=1e-12)


def test_three_station_example():
    sched = compile_schedule(parse_demand(FIG1), [D1, D2])
    assert [s.payload for s in sched.slots] == [("a", "b", "e"), ("a", "c", "d")]
    assert [s.weight for s in sched.slots] == [1.0, 1.0]


def test_broadcast_constant_payload():
    demand = TrafficDemand.broadcast(3)
    sched = compile_schedule(demand, enumerate_condensed_sets(3)[0])
    for i in range(3):
        assert len({s.payload[i] for s in sched.slots}) == 1


@pytest.mark.parametrize("n", [4, 5])
def test_full_unicast_coverage(n):
    demand = TrafficDemand.full_unicast(n)
    everything = sorted((i, j) for i in range(n) for j in range(n) if i != j)
    for cs in enumerate_condensed_sets(n):
        sched = compile_schedule(demand, cs)
        served = sched.served_pairs()
        assert sorted((i, j) for i, j, _ in served) == everything
        for i, j, label in served:
            assert label == f"{i + 1}>{j + 1}"
        assert len(sched.slots) == n - 1
        for i in range(n):
            assert len({s.payload[i] for s in sched.slots}) == n - 1


def test_weights_from_rates_and_amounts():
    demand = TrafficDemand(3, (Flow(0, frozenset({1, 2}), "a", 2.0), Flow(1, frozenset({2}), "b", 1.0)))
    sched = compile_schedule(demand, [D1, D2], rates=[2.0, 4.0])
    # D1: 1->3 (a, 2 units), 2->1 idle, 3->2 idle; D2: 1->2 (a), 2->3 (b)
    assert [s.payload for s in sched.slots] == [("a", None, None), ("a", "b", None)]
    assert [s.weight for s in sched.slots] == [1.0, 0.5]


def test_two_messages_same_destination():
    demand = TrafficDemand(3, (Flow(0, frozenset({1}), "x"), Flow(0, frozenset({1}), "y")))
    with pytest.raises(DemandInfeasibleError) as err:
        compile_schedule(demand, [D1, D2])
    assert err.value.flow.label == "y"


def test_unreached_destination():
    demand = TrafficDemand.full_unicast(4)
    with pytest.raises(DemandInfeasibleError):
        compile_schedule(demand, enumerate_derangements(4)[:2])


def test_demand_validation():
    with pytest.raises(DomainError):
        TrafficDemand(3, (Flow(0, frozenset({0}), "x"),))
    with pytest.raises(DomainError):
        TrafficDemand(3, (Flow(0, frozenset({5}), "x"),))
    with pytest.raises(DomainError):
        TrafficDemand(3, (Flow(0, frozenset(), "x"),))
    with pytest.raises(DomainError):
        compile_schedule(TrafficDemand.full_unicast(3), enumerate_condensed_sets(4)[0])


def test_parse_demand():
    d = parse_demand("n = 4\n1 2 x 2.5  # comment\n")
    assert d.n == 4 and d.flows[0].amount == 2.5 and d.flows[0].destinations == frozenset({1})
    assert parse_demand(FIG1).n == 3
    with pytest.raises(ParseError):
        parse_demand("1 2\n")
    with pytest.raises(ParseError):
        parse_demand("1 two x\n")
