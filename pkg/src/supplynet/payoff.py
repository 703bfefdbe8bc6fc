"""Retailer and supplier payoffs and the welfare decomposition.

Realized quantities take one supply draw; expected quantities use only the
first two moments of each supplier's supply. All functions accept
heterogeneous means and variances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import GameParams, Network, PriceVector, SupplyRealization


@dataclass(frozen=True)
class WelfareBreakdown:
    """Welfare split into retailer, supplier and consumer parts.

    ``kind`` is ``expected``, ``realized`` or ``delta`` (a difference of two
    breakdowns). ``total`` is always the sum of the three parts, in that order.
    """

    retailer_total: float
    supplier_total: float
    consumer_surplus: float
    kind: str = "expected"

    @property
    def total(self) -> float:
        return self.retailer_total + self.supplier_total + self.consumer_surplus

    def __sub__(self, other: "WelfareBreakdown") -> "WelfareBreakdown":
        return WelfareBreakdown(
            self.retailer_total - other.retailer_total,
            self.supplier_total - other.supplier_total,
            self.consumer_surplus - other.consumer_surplus,
            kind="delta",
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "retailer": self.retailer_total,
            "supplier": self.supplier_total,
            "consumer": self.consumer_surplus,
            "total": self.total,
        }


def supplier_value(p: GameParams, j: int, active: Iterable[int]) -> float:
    """Expected margin of supplier ``j`` before prices and link costs.

    ``(delta - sum of active means) * mu_j - sigma2_j``; decreasing in the
    active set, and equal to ``mu (delta - mu K) - sigma2`` when suppliers are
    identical.
    """
    return p.supplier_value(j, active)


def homogeneous_value(mu: float, sigma2: float, delta: float, K: int) -> float:
    return mu * (delta - mu * K) - sigma2


def retailer_realized_payoff(
    g: Network, w: PriceVector, s: SupplyRealization, i: int, p: GameParams
) -> float:
    """Payoff of retailer ``i`` for one supply realization.

    Each linked supplier's output is split evenly across its ``d(j)`` retailers
    and sold at the market price ``delta - T(S)``.
    """
    t = s.total_active(g)
    total = 0.0
    for j in g.neighbors(i):
        total += (p.delta - t - w[j]) * s.s[j] / g.degrees[j] - p.c
    return total


def retailer_expected_payoff(g: Network, w: PriceVector, p: GameParams, i: int) -> float:
    active = g.active
    total = 0.0
    for j in g.neighbors(i):
        v = p.supplier_value(j, active)
        total += (v - p.mu[j] * w[j]) / g.degrees[j] - p.c
    return total


def supplier_expected_payoff(mu_j: float, w_j: float, a_j: float) -> float:
    if not 0.0 <= a_j <= 1.0:
        raise ValueError(f"activation likelihood must be in [0, 1], got {a_j}")
    return a_j * mu_j * w_j


def expected_welfare(g: Network, p: GameParams, w: PriceVector) -> WelfareBreakdown:
    """Expected welfare of network ``g`` at prices ``w``.

    Active suppliers are paid with certainty (activation likelihood 1 in a
    fixed network), so prices only move money between retailers and suppliers.
    """
    active = g.active
    retail = 0.0
    supply = 0.0
    for j in active:
        mw = p.mu[j] * w[j]
        retail += p.supplier_value(j, active) - mw - p.c * g.degrees[j]
        supply += mw
    tm = sum(p.mu[j] for j in active)
    var = sum(p.sigma2[j] for j in active)
    consumer = 0.5 * (tm * tm + var)
    return WelfareBreakdown(retail, supply, consumer, kind="expected")


def expected_welfare_homogeneous(
    mu: float, sigma2: float, delta: float, c: float, K: int, links: int
) -> float:
    """Closed-form expected welfare for identical suppliers with zero net transfers."""
    return mu * K * (delta - mu * K / 2.0) - K * sigma2 / 2.0 - c * links


def realized_welfare(
    g: Network, w: PriceVector, s: SupplyRealization, p: GameParams
) -> WelfareBreakdown:
    active = g.active
    t = s.total_active(g)
    retail = 0.0
    supply = 0.0
    for j in active:
        retail += (p.delta - t - w[j]) * s.s[j] - p.c * g.degrees[j]
        supply += s.s[j] * w[j]
    # area under inverse demand above the clearing price: t^2 / 2
    consumer = 0.5 * t * t
    return WelfareBreakdown(retail, supply, consumer, kind="realized")
