"""Core domain types: game parameters, prices, networks and supply draws.

All types are immutable. Network mutations return new values and keep the
degree view up to date incrementally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .errors import DuplicateLink, IndexOutOfRange, MissingLink, ShapeMismatch


@dataclass(frozen=True)
class GameParams:
    """Parameters of the supply-chain formation game.

    Per-supplier moments are always stored as tuples; the homogeneous case is
    a tuple of equal entries.

    Attributes:
        n: number of retailers.
        m: number of suppliers.
        s_max: per-supplier capacity, upper end of the supply support.
        delta: demand intercept; the market price is ``delta - total supply``.
        mu: mean supply of each supplier.
        sigma2: supply variance of each supplier.
        c: cost of maintaining one retailer-supplier link.
    """

    n: int
    m: int
    s_max: float
    delta: float
    mu: tuple[float, ...]
    sigma2: tuple[float, ...]
    c: float

    def __post_init__(self):
        if self.n < 0 or self.m < 1:
            raise ShapeMismatch(f"need n >= 0 and m >= 1, got n={self.n}, m={self.m}")
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        object.__setattr__(self, "sigma2", tuple(float(x) for x in self.sigma2))
        if len(self.mu) != self.m or len(self.sigma2) != self.m:
            raise ShapeMismatch(
                f"mu and sigma2 must have length m={self.m}, "
                f"got {len(self.mu)} and {len(self.sigma2)}"
            )

    @classmethod
    def create(
        cls,
        n: int,
        m: int,
        mu,
        sigma2,
        c: float,
        delta: Optional[float] = None,
        s_max: Optional[float] = None,
    ) -> "GameParams":
        """Build parameters, broadcasting scalar moments to all suppliers.

        ``s_max`` defaults to twice the largest mean (mean at the centre of the
        support) and ``delta`` defaults to ``m * s_max``.
        """
        mu_t = _broadcast(mu, m)
        s2_t = _broadcast(sigma2, m)
        if s_max is None:
            s_max = 2.0 * max(mu_t)
        if delta is None:
            delta = m * s_max
        return cls(n=n, m=m, s_max=float(s_max), delta=float(delta),
                   mu=mu_t, sigma2=s2_t, c=float(c))

    @property
    def homogeneous(self) -> bool:
        return len(set(self.mu)) == 1 and len(set(self.sigma2)) == 1

    @property
    def equal_means(self) -> bool:
        return len(set(self.mu)) == 1

    @property
    def case(self) -> str:
        """One of ``homogeneous``, ``hetero_variance`` or ``hetero_mean``."""
        if self.homogeneous:
            return "homogeneous"
        if self.equal_means:
            return "hetero_variance"
        return "hetero_mean"

    def supplier_value(self, j: int, active: Iterable[int]) -> float:
        """Value of supplier ``j`` when ``active`` is the set of active suppliers."""
        total_mu = sum(self.mu[k] for k in active)
        return (self.delta - total_mu) * self.mu[j] - self.sigma2[j]

    def price_bound(self, j: int) -> float:
        """Largest price at which supplier ``j`` can still attract a first link."""
        mu = self.mu[j]
        return self.delta - mu - (self.sigma2[j] + self.c) / mu

    def replace(self, **changes) -> "GameParams":
        data = self.to_dict()
        data.update(changes)
        return GameParams.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "s_max": self.s_max,
            "delta": self.delta,
            "mu": list(self.mu),
            "sigma2": list(self.sigma2),
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GameParams":
        m = int(data["m"])
        return cls.create(
            n=int(data["n"]),
            m=m,
            mu=data["mu"],
            sigma2=data["sigma2"],
            c=data["c"],
            delta=data.get("delta"),
            s_max=data.get("s_max"),
        )


def _broadcast(x, m: int) -> tuple[float, ...]:
    if isinstance(x, (int, float)):
        return (float(x),) * m
    t = tuple(float(v) for v in x)
    if len(t) == 1:
        return t * m
    return t


@dataclass(frozen=True)
class PriceVector:
    """Wholesale prices, one per supplier.

    ``epsilon[j]`` marks a strategic left-limit price ``w[j] - eps`` with
    ``eps -> 0+``. Arithmetic always uses ``w[j]``; the flag only matters when
    ranking suppliers, where a left-limit price beats an equal plain price.
    """

    w: tuple[float, ...]
    epsilon: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))
        eps = tuple(bool(e) for e in self.epsilon) or (False,) * len(self.w)
        if len(eps) != len(self.w):
            raise ShapeMismatch("epsilon flags must match the number of prices")
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def of(cls, w, m: Optional[int] = None) -> "PriceVector":
        if isinstance(w, PriceVector):
            return w
        if isinstance(w, (int, float)):
            if m is None:
                raise ShapeMismatch("scalar price needs m")
            return cls((float(w),) * m)
        t = tuple(float(x) for x in w)
        if m is not None and len(t) == 1 and m > 1:
            t = t * m
        return cls(t)

    @classmethod
    def zeros(cls, m: int) -> "PriceVector":
        return cls((0.0,) * m)

    def __len__(self) -> int:
        return len(self.w)

    def __getitem__(self, j: int) -> float:
        return self.w[j]

    def with_price(self, j: int, price: float, epsilon: bool = False) -> "PriceVector":
        w = list(self.w)
        eps = list(self.epsilon)
        w[j] = float(price)
        eps[j] = epsilon
        return PriceVector(tuple(w), tuple(eps))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed


def validate_params(
    p: GameParams, w: Optional[PriceVector] = None, sampling: bool = False
) -> ValidationReport:
    """Check the standing assumptions on costs, prices and supply moments.

    The link cost must satisfy ``0 < c <= v_j(1)`` for every supplier so that
    each one can attract a link in the best case. If prices are given, each
    must lie in ``[0, price_bound(j)]``. With ``sampling=True`` the moments
    must also be attainable by a distribution on ``[0, s_max]``.
    """
    v = []
    if p.c <= 0:
        v.append(f"c-bound: link cost c={p.c} must be positive")
    for j in range(p.m):
        mu, s2 = p.mu[j], p.sigma2[j]
        if not 0 < mu <= p.s_max:
            v.append(f"mean-range: mu[{j}]={mu} outside (0, s_max={p.s_max}]")
            continue
        if s2 < 0:
            v.append(f"variance-sign: sigma2[{j}]={s2} is negative")
        v1 = p.supplier_value(j, [j])
        if p.c > v1:
            v.append(f"c-bound: c={p.c} exceeds v_{j}(1)={v1}")
        if sampling and s2 > mu * (p.s_max - mu):
            v.append(
                f"moments: sigma2[{j}]={s2} exceeds mu(s_max - mu)={mu * (p.s_max - mu)}"
            )
    if w is not None:
        if len(w) != p.m:
            v.append(f"price-shape: {len(w)} prices for m={p.m} suppliers")
        else:
            for j, wj in enumerate(w.w):
                if wj < 0:
                    v.append(f"price-sign: w[{j}]={wj} is negative")
                elif wj > p.price_bound(j):
                    v.append(f"price-bound: w[{j}]={wj} exceeds {p.price_bound(j)}")
    return ValidationReport(tuple(v))


@dataclass(frozen=True)
class Network:
    """Bipartite links between retailers ``0..n-1`` and suppliers ``0..m-1``.

    ``degrees`` is maintained alongside ``links``; use :func:`build_network`,
    :func:`add_link` and :func:`remove_link` rather than the constructor.
    """

    n: int
    m: int
    links: frozenset
    degrees: tuple[int, ...] = field(compare=False)

    @cached_property
    def _by_retailer(self) -> dict:
        out: dict = {}
        for i, j in self.links:
            out.setdefault(i, []).append(j)
        return {i: tuple(sorted(js)) for i, js in out.items()}

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Suppliers linked to retailer ``i``."""
        return self._by_retailer.get(i, ())

    def retailers_of(self, j: int) -> tuple[int, ...]:
        return tuple(sorted(i for i, k in self.links if k == j))

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(j for j, d in enumerate(self.degrees) if d > 0)

    @property
    def vacant(self) -> tuple[int, ...]:
        return tuple(j for j, d in enumerate(self.degrees) if d == 0)

    @property
    def K(self) -> int:
        return sum(1 for d in self.degrees if d > 0)

    @property
    def size(self) -> int:
        return len(self.links)

    @property
    def vacant_retailers(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self._by_retailer)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "links": [list(e) for e in sorted(self.links)]}

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        return build_network(data["n"], data["m"], [tuple(e) for e in data["links"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check(n: int, m: int, i: int, j: int) -> None:
    if not (0 <= i < n and 0 <= j < m):
        raise IndexOutOfRange(f"link ({i}, {j}) out of range for n={n}, m={m}")


def build_network(n: int, m: int, links: Iterable[Sequence[int]] = ()) -> Network:
    seen = set()
    deg = [0] * m
    for i, j in links:
        i, j = int(i), int(j)
        _check(n, m, i, j)
        if (i, j) in seen:
            raise DuplicateLink(f"link ({i}, {j}) listed twice")
        seen.add((i, j))
        deg[j] += 1
    return Network(n, m, frozenset(seen), tuple(deg))


def add_link(g: Network, i: int, j: int) -> Network:
    _check(g.n, g.m, i, j)
    if (i, j) in g.links:
        raise DuplicateLink(f"link ({i}, {j}) already present")
    deg = list(g.degrees)
    deg[j] += 1
    return Network(g.n, g.m, g.links | {(i, j)}, tuple(deg))


def remove_link(g: Network, i: int, j: int) -> Network:
    if (i, j) not in g.links:
        raise MissingLink(f"link ({i}, {j}) not present")
    deg = list(g.degrees)
    deg[j] -= 1
    return Network(g.n, g.m, g.links - {(i, j)}, tuple(deg))


@dataclass(frozen=True)
class SupplyRealization:
    """One draw of every supplier's realized supply."""

    s: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(float(x) for x in self.s))

    def total_active(self, g: Network) -> float:
        """Total realized supply of the suppliers active in ``g``."""
        return sum(self.s[j] for j in g.active)
