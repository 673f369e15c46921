"""Reserve of feasible routes collected across solver runs."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Iterator, Mapping

from .model import Period
from .routing import Route


def route_signature(route: Route) -> tuple:
    """(period, vehicle type, action list, pickup times).

    Pickup times are part of the key: the same stop order served at other
    times is a different candidate for the consistency master.
    """
    times = route.pickup_times()
    return (
        route.period.name,
        route.vehicle.id,
        tuple((a.kind, a.user) for a in route.actions),
        tuple(times[a.user] for a in route.actions if a.kind == "pickup"),
    )


@dataclass(frozen=True, eq=False)
class PoolRoute:
    id: str
    period: Period
    route: Route
    cost: Decimal
    served: frozenset[tuple[str, Period]]
    pickup_time: Mapping[str, int]
    signature: tuple

    @classmethod
    def from_route(cls, route: Route) -> "PoolRoute":
        sig = route_signature(route)
        rid = hashlib.sha1(repr(sig).encode()).hexdigest()[:12]
        return cls(rid, route.period, route, route.cost,
                   frozenset((u, route.period) for u in route.users), route.pickup_times(), sig)

    @property
    def users(self) -> frozenset[str]:
        return self.route.users

    def __eq__(self, other):
        return isinstance(other, PoolRoute) and (self.signature, self.cost) == (other.signature, other.cost)

    def __hash__(self):
        return hash(self.signature)


class RoutePool:
    """Routes deduplicated by signature, keeping the cheapest per signature.

    Merging is associative and order-insensitive.
    """

    def __init__(self, routes: Iterable[PoolRoute] = ()):
        self._by_sig: dict[tuple, PoolRoute] = {}
        for r in routes:
            self.add(r)

    def add(self, pr: PoolRoute) -> bool:
        old = self._by_sig.get(pr.signature)
        if old is None or pr.cost < old.cost:
            self._by_sig[pr.signature] = pr
            return old is None
        return False

    def add_route(self, route: Route) -> PoolRoute:
        pr = PoolRoute.from_route(route)
        self.add(pr)
        return self._by_sig[pr.signature]

    def merge(self, other: Iterable[PoolRoute]) -> "RoutePool":
        for pr in other:
            self.add(pr)
        return self

    def __len__(self) -> int:
        return len(self._by_sig)

    def __iter__(self) -> Iterator[PoolRoute]:
        return iter(sorted(self._by_sig.values(), key=lambda r: r.signature))

    def __contains__(self, pr: PoolRoute) -> bool:
        return pr.signature in self._by_sig

    def by_period(self, period: Period) -> list[PoolRoute]:
        return [r for r in self if r.period == period]

    def signatures(self) -> list[tuple]:
        return sorted(self._by_sig)
