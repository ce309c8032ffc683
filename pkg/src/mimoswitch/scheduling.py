"""Fair-switching weights and slot tables for general traffic demands."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .combinatorics import CondensedSet, Permutation
from .errors import DemandInfeasibleError, DomainError, ParseError


def _positive_rates(rates) -> np.ndarray:
    r = np.asarray(rates, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise DomainError("need a non-empty vector of rates")
    if not np.all(r > 0):
        raise DomainError(f"rates must be > 0, got {r.tolist()}")
    return r


def fair_weights(rates, c: float = 1.0) -> np.ndarray:
    """Slots per derangement so that each carries the same traffic ``c``."""
    if not c > 0:
        raise DomainError(f"c must be > 0, got {c}")
    return c / _positive_rates(rates)


def fair_throughput(rates) -> float:
    """Per-station throughput of a weighted round over ``len(rates)`` derangements."""
    r = _positive_rates(rates)
    return float(r.size / np.sum(1.0 / r))


@dataclass(frozen=True)
class Flow:
    source: int
    destinations: frozenset[int]
    label: str
    amount: float = 1.0


@dataclass(frozen=True)
class TrafficDemand:
    n: int
    flows: tuple[Flow, ...]

    def __post_init__(self):
        for f in self.flows:
            if not f.destinations:
                raise DomainError(f"flow {f.label!r} has no destinations")
            if f.source in f.destinations:
                raise DomainError(f"flow {f.label!r} sends to its own source")
            if not all(0 <= s < self.n for s in (f.source, *f.destinations)):
                raise DomainError(f"flow {f.label!r} names a station outside 1..{self.n}")
            if not f.amount > 0:
                raise DomainError(f"flow {f.label!r} has non-positive amount")

    @classmethod
    def full_unicast(cls, n: int, amount: float = 1.0):
        flows = tuple(
            Flow(i, frozenset({j}), f"{i + 1}>{j + 1}", amount) for i in range(n) for j in range(n) if i != j
        )
        return cls(n, flows)

    @classmethod
    def broadcast(cls, n: int, amount: float = 1.0):
        flows = tuple(Flow(i, frozenset(set(range(n)) - {i}), f"m{i + 1}", amount) for i in range(n))
        return cls(n, flows)


@dataclass(frozen=True)
class Slot:
    derangement: Permutation
    payload: tuple[str | None, ...]  # label transmitted by each station, None when idle
    weight: float


@dataclass(frozen=True)
class Schedule:
    slots: tuple[Slot, ...]

    def served_pairs(self) -> list[tuple[int, int, str]]:
        """(source, destination, label) for every non-idle transmission."""
        out = []
        for slot in self.slots:
            for j, i in enumerate(slot.derangement.source_of):
                if slot.payload[i] is not None:
                    out.append((i, j, slot.payload[i]))
        return out


def compile_schedule(demand: TrafficDemand, cset: CondensedSet | Sequence[Permutation], rates=None) -> Schedule:
    """Assign each station's message to the slot whose derangement reaches its destination.

    A multicast message is repeated in every slot that reaches one of its
    destinations. Slot weights are ``max payload amount / rate``.
    """
    ders = list(cset)
    if not ders:
        raise DomainError("empty derangement set")
    n = ders[0].n
    if demand.n != n:
        raise DomainError(f"demand has {demand.n} stations, set has {n}")
    rates = np.ones(len(ders)) if rates is None else _positive_rates(rates)
    if rates.size != len(ders):
        raise DomainError(f"{rates.size} rates for {len(ders)} derangements")

    by_dest: list[dict[int, Flow]] = [dict() for _ in range(n)]
    for f in demand.flows:
        for dst in f.destinations:
            other = by_dest[f.source].get(dst)
            if other is not None and other.label != f.label:
                raise DemandInfeasibleError(
                    f"station {f.source + 1} has both {other.label!r} and {f.label!r} for station {dst + 1}",
                    flow=f,
                )
            by_dest[f.source][dst] = f

    slots = []
    served = set()
    for d, r in zip(ders, rates):
        target = d.target_of()
        flows = [by_dest[i].get(target[i]) for i in range(n)]
        for i, f in enumerate(flows):
            if f is not None:
                served.add((i, target[i]))
        amount = max((f.amount for f in flows if f is not None), default=0.0)
        slots.append(Slot(d, tuple(None if f is None else f.label for f in flows), float(amount / r)))

    for f in demand.flows:
        missing = [dst for dst in f.destinations if (f.source, dst) not in served]
        if missing:
            raise DemandInfeasibleError(
                f"flow {f.label!r} from station {f.source + 1} never reaches station {missing[0] + 1}", flow=f
            )
    return Schedule(tuple(slots))


def parse_demand(text: str) -> TrafficDemand:
    """Line format: ``source destinations label [amount]``, 1-based stations.

    ``destinations`` is comma-separated; ``#`` starts a comment. An optional
    ``n = <stations>`` line fixes the station count, otherwise the largest
    station mentioned is used.
    """
    flows = []
    n = None
    highest = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.replace(" ", "").startswith("n="):
            n = int(line.split("=", 1)[1])
            continue
        fields = line.split()
        if len(fields) not in (3, 4):
            raise ParseError(f"line {lineno}: expected 'source destinations label [amount]'")
        try:
            src = int(fields[0])
            dsts = frozenset(int(x) for x in fields[1].split(",") if x)
            amount = float(fields[3]) if len(fields) == 4 else 1.0
        except ValueError:
            raise ParseError(f"line {lineno}: malformed number in {raw.strip()!r}") from None
        highest = max(highest, src, *dsts)
        flows.append(Flow(src - 1, frozenset(d - 1 for d in dsts), fields[2], amount))
    return TrafficDemand(n if n is not None else highest, tuple(flows))


def load_demand(path) -> TrafficDemand:
    return parse_demand(Path(path).read_text())
