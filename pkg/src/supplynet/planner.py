"""Central planner's optimum and the price of stability."""

from __future__ import annotations

from dataclasses import dataclass

from . import tolerance as tol
from .errors import BoundaryOptimum
from .model import GameParams, Network, build_network
from .payoff import expected_welfare_homogeneous
from .pricing import _scalars, zero_price_welfare


@dataclass(frozen=True)
class PlannerSolution:
    K_opt: int
    y: float
    welfare_opt: float
    network: Network

    def to_dict(self) -> dict:
        return {
            "K_opt": self.K_opt,
            "y": self.y,
            "welfare_opt": self.welfare_opt,
            "links": self.network.size,
        }


def planner_y(mu: float, sigma2: float, delta: float, c: float) -> float:
    return delta / mu - 0.5 * sigma2 / mu**2 - c / mu**2


def planner_welfare_closed(mu: float, sigma2: float, delta: float, c: float) -> float:
    """Closed-form planner welfare with ``floor(y)`` single-link suppliers."""
    y = planner_y(mu, sigma2, delta, c)
    if tol.floor(y) <= 0:
        return 0.0
    f = tol.frac(y)
    return ((delta * mu - sigma2 / 2 - c) ** 2 - (mu**2 * f) ** 2) / (2 * mu**2)


def planner_optimum(p: GameParams) -> PlannerSolution:
    """Planner network: ``floor(y)`` active suppliers with one link each.

    The witness links supplier ``j`` to retailer ``j mod n``.

    Raises:
        BoundaryOptimum: if ``floor(y)`` exceeds ``n`` or ``m``.
    """
    mu, s2 = _scalars(p)
    y = planner_y(mu, s2, p.delta, p.c)
    K = max(tol.floor(y), 0)
    if K > p.m or K > p.n:
        raise BoundaryOptimum(f"K_opt={K} exceeds n={p.n} or m={p.m}")
    g = build_network(p.n, p.m, [(j % p.n, j) for j in range(K)])
    return PlannerSolution(K, y, planner_welfare_closed(mu, s2, p.delta, p.c), g)


def planner_enumerate(p: GameParams) -> tuple[int, float]:
    """Brute-force maximum of expected welfare over single-link networks.

    Evaluates the welfare of ``K`` single-link suppliers for every
    ``0 <= K <= min(n, m)`` and returns the first maximizer. Welfare is a
    concave quadratic in ``K`` peaking at ``y``, so the maximizer is the
    integer nearest to ``y``, which is ``floor(y) + 1`` whenever the fractional
    part of ``y`` exceeds 1/2.
    """
    mu, s2 = _scalars(p)
    best_K, best = 0, 0.0
    for K in range(1, min(p.n, p.m) + 1):
        val = expected_welfare_homogeneous(mu, s2, p.delta, p.c, K, K)
        if val > best + tol.REL_TOL * max(1.0, abs(best)):
            best_K, best = K, val
    return best_K, best


def pos_closed(mu: float, sigma2: float, delta: float, c: float) -> float:
    """Equilibrium over planner welfare from the closed forms.

    Ratios within the snap tolerance of 1 are reported as exactly 1.

    Raises:
        ValueError: if the planner welfare is not positive.
    """
    opt = planner_welfare_closed(mu, sigma2, delta, c)
    if opt <= 0:
        raise ValueError("price of stability needs positive planner welfare")
    return tol.snap(zero_price_welfare(mu, sigma2, delta, c) / opt)


def price_of_stability(p: GameParams) -> float:
    """Equilibrium welfare over planner welfare, both in closed form.

    Raises:
        BoundaryOptimum: propagated from :func:`planner_optimum`.
        ValueError: if the planner welfare is not positive.
    """
    planner_optimum(p)
    mu, s2 = _scalars(p)
    return pos_closed(mu, s2, p.delta, p.c)
