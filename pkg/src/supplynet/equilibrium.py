"""Pure-strategy Nash equilibria of the network formation game at fixed prices.

Suppliers with equal means are ranked by the activation key
``sigma2_j + mu_j * w_j`` (lower is better); with identical suppliers this is
the price order. Suppliers with different means have no static ranking and are
selected through best-supplier sets (see :mod:`supplynet.pricing`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import tolerance as tol
from .errors import InsufficientRetailers, SizeLimit
from .model import GameParams, Network, PriceVector, build_network

EXHAUSTIVE_MAX_M = 20
_MASK_CHUNK = 1 << 15


@dataclass(frozen=True)
class KStar:
    K_star: int
    may_drop_one: bool


@dataclass(frozen=True)
class EquilibriumSummary:
    """A constructed equilibrium and the quantities derived from it."""

    network: Network
    prices: PriceVector
    K: int
    degrees: dict
    a: tuple[float, ...]
    selected: bool
    steps: int = 0

    @property
    def links(self) -> int:
        return self.network.size

    def to_dict(self) -> dict:
        degs = sorted(set(self.degrees.values()))
        return {
            "K": self.K,
            "d": degs[0] if len(degs) == 1 else None,
            "degrees": {str(j): d for j, d in sorted(self.degrees.items())},
            "links": self.links,
            "a": list(self.a),
            "selected": self.selected,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class RetailerCheck:
    retailer: int
    current: float
    best: float
    best_links: tuple[int, ...]

    @property
    def gain(self) -> float:
        return self.best - self.current


@dataclass(frozen=True)
class VerificationReport:
    certified: bool
    mode: str
    checks: tuple[RetailerCheck, ...] = ()
    failures: tuple[str, ...] = ()

    @property
    def max_gain(self) -> float:
        return max((c.gain for c in self.checks), default=0.0)

    def to_dict(self) -> dict:
        out = {"certified": self.certified, "mode": self.mode}
        if self.checks:
            worst = max(self.checks, key=lambda c: c.gain)
            out["max_gain"] = worst.gain
            out["worst_retailer"] = worst.retailer
            out["worst_deviation"] = list(worst.best_links)
        out["failures"] = list(self.failures)
        return out


# ---------------------------------------------------------------- ranking


def activation_keys(p: GameParams, w: PriceVector) -> list[float]:
    return [p.sigma2[j] + p.mu[j] * w[j] for j in range(p.m)]


def ranked_groups(keys: Sequence[float], eps: Sequence[bool]) -> list[list[int]]:
    """Group suppliers into tie classes, best (lowest key) first.

    A left-limit price sorts strictly ahead of an equal plain key. Within a
    class suppliers keep index order.
    """
    order = sorted(range(len(keys)), key=lambda j: (keys[j], not eps[j], j))
    groups: list[list[int]] = []
    for j in order:
        if groups:
            h = groups[-1][0]
            if tol.close(keys[h], keys[j]) and eps[h] == eps[j]:
                groups[-1].append(j)
                continue
        groups.append([j])
    return groups


def activation_order(p: GameParams, w: PriceVector) -> list[int]:
    return [j for grp in ranked_groups(activation_keys(p, w), w.epsilon) for j in grp]


def _margin(p: GameParams, w: PriceVector, j: int, active: Sequence[int]) -> tuple[float, float]:
    """Marginal payoff of a single fresh link to ``j`` and its magnitude scale."""
    v = p.supplier_value(j, active)
    mw = p.mu[j] * w[j]
    return v - mw - p.c, max(abs(v), abs(mw), p.c)


# ---------------------------------------------------------------- K* and degrees


def active_supplier_count(p: GameParams, w: PriceVector) -> KStar:
    """Number of active suppliers in the greedy equilibrium.

    ``K_star`` is the smallest K for which activating the (K+1)-th best
    supplier has negative marginal payoff. ``may_drop_one`` is set when the
    K*-th supplier's marginal payoff is exactly zero, in which case equilibria
    with K* - 1 active suppliers also exist.
    """
    if p.case == "hetero_mean":
        from .pricing import best_supplier_sets, k_max

        K = k_max(p, w)
        if K == 0:
            return KStar(0, False)
        s = best_supplier_sets(p, w, K).sets[0]
        margins = [_margin(p, w, j, s) for j in s]
        return KStar(K, any(tol.sign(x, sc) == 0 for x, sc in margins))

    order = np.array(activation_order(p, w))
    mu = np.array(p.mu)[order]
    s2 = np.array(p.sigma2)[order]
    ww = np.array(w.w)[order]
    cum_mu = np.cumsum(mu)
    v = (p.delta - cum_mu) * mu - s2
    margin = v - mu * ww - p.c
    scale = np.maximum.reduce([np.abs(v), np.abs(mu * ww), np.full_like(v, p.c), np.ones_like(v)])
    negative = margin < -tol.REL_TOL * scale
    K = int(np.argmax(negative)) if negative.any() else p.m
    drop = K >= 1 and abs(margin[K - 1]) <= tol.REL_TOL * scale[K - 1]
    return KStar(K, bool(drop))


def default_active_set(p: GameParams, w: PriceVector, K: int) -> tuple[int, ...]:
    if p.case == "hetero_mean":
        from .pricing import best_supplier_sets

        if K == 0:
            return ()
        return best_supplier_sets(p, w, K).sets[0]
    return tuple(sorted(activation_order(p, w)[:K]))


def equilibrium_degrees(
    p: GameParams, w: PriceVector, K: int, active: Optional[Sequence[int]] = None
) -> dict:
    """Equilibrium degree ``floor((v_j - mu_j w_j) / c)`` of each active supplier."""
    if active is None:
        active = default_active_set(p, w, K)
    active = tuple(active)
    if len(active) != K:
        raise ValueError(f"active set has {len(active)} suppliers, expected K={K}")
    out = {}
    for j in active:
        v = p.supplier_value(j, active)
        out[j] = max(tol.floor((v - p.mu[j] * w[j]) / p.c), 0)
    return out


# ---------------------------------------------------------------- construction


def greedy_equilibrium(
    p: GameParams, w: PriceVector, packing: bool = False
) -> EquilibriumSummary:
    """Greedy construction of a pure-strategy Nash equilibrium.

    Phase 1 activates suppliers best-first, one fresh retailer per supplier,
    while the newly activated supplier still yields a non-negative marginal
    payoff. Phase 2 then adds links to each active supplier while one more link
    remains profitable. By default every link gets its own fresh retailer;
    ``packing=True`` instead gives retailer ``r`` the ``r``-th link of every
    active supplier, which needs only ``max d(j)`` retailers.

    Raises:
        InsufficientRetailers: if the game has fewer retailers than links
            (fresh mode) or than the largest degree (packing mode).
    """
    steps = 0
    plan: list[int] = []
    if p.case == "hetero_mean":
        from .pricing import best_supplier_sets, k_max

        K = k_max(p, w)
        active = list(best_supplier_sets(p, w, K).sets[0]) if K else []
        plan.extend(active)
        steps += len(active)
    else:
        active = []
        for j in activation_order(p, w):
            x, sc = _margin(p, w, j, active + [j])
            if tol.sign(x, sc) < 0:
                break
            active.append(j)
            plan.append(j)
            steps += 1

    degree = {j: 1 for j in active}
    for j in active:
        v = p.supplier_value(j, active)
        gross = v - p.mu[j] * w[j]
        while True:
            x = gross / (degree[j] + 1) - p.c
            if tol.sign(x, max(abs(gross), p.c)) < 0:
                break
            degree[j] += 1
            plan.append(j)
            steps += 1

    if packing:
        need = max(degree.values(), default=0)
        if need > p.n:
            raise InsufficientRetailers(need, p.n)
        links = [(r, j) for j in active for r in range(degree[j])]
    else:
        if len(plan) > p.n:
            raise InsufficientRetailers(len(plan), p.n)
        links = [(i, j) for i, j in enumerate(plan)]

    g = build_network(p.n, p.m, links)
    return EquilibriumSummary(
        network=g,
        prices=w,
        K=g.K,
        degrees={j: g.degrees[j] for j in g.active},
        a=activation_likelihoods(p, w),
        selected=selection_filter(p, g, w),
        steps=steps,
    )


def characterized_network(
    p: GameParams, w: PriceVector, K: Optional[int] = None,
    active: Optional[Sequence[int]] = None,
) -> Network:
    """Network with the characterized degrees, one fresh retailer per link.

    Unlike :func:`greedy_equilibrium` this does not need ``p.n`` retailers;
    the returned network has exactly as many retailers as links.
    """
    if K is None:
        K = active_supplier_count(p, w).K_star if active is None else len(active)
    degs = equilibrium_degrees(p, w, K, active)
    links = []
    for j in sorted(degs):
        links.extend([j] * degs[j])
    return build_network(len(links), p.m, list(enumerate(links)))


# ---------------------------------------------------------------- verification


@lru_cache(maxsize=None)
def _masks(m: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    return ((idx >> np.arange(m, dtype=np.int64)) & 1).astype(bool)


def _best_response(
    p: GameParams, w: PriceVector, deg_minus: np.ndarray, own: Sequence[int]
) -> tuple[float, float, tuple[int, ...]]:
    """Current and best expected payoff over every link subset for one retailer."""
    m = p.m
    mu = np.array(p.mu)
    s2 = np.array(p.sigma2)
    mw = mu * np.array(w.w)
    other_active = deg_minus > 0
    denom = deg_minus + 1.0
    own_mask = sum(1 << j for j in own)
    best, best_mask, current = -math.inf, 0, None
    total = 1 << m
    for start in range(0, total, _MASK_CHUNK):
        stop = min(total, start + _MASK_CHUNK)
        M = _masks(m, start, stop)
        sum_mu = (M | other_active) @ mu
        v = (p.delta - sum_mu)[:, None] * mu[None, :] - s2[None, :]
        term = (v - mw[None, :]) / denom[None, :] - p.c
        pay = np.where(M, term, 0.0).sum(axis=1)
        k = int(np.argmax(pay))
        if pay[k] > best:
            best, best_mask = float(pay[k]), start + k
        if start <= own_mask < stop:
            current = float(pay[own_mask - start])
    links = tuple(j for j in range(m) if best_mask >> j & 1)
    return current, best, links


def deviation_payoff(
    g: Network, p: GameParams, w: PriceVector, i: int, links: Sequence[int]
) -> float:
    """Expected payoff of retailer ``i`` if it switches to exactly ``links``."""
    deg = list(g.degrees)
    for j in g.neighbors(i):
        deg[j] -= 1
    for j in links:
        deg[j] += 1
    active = [j for j in range(p.m) if deg[j] > 0]
    total = 0.0
    for j in links:
        v = p.supplier_value(j, active)
        total += (v - p.mu[j] * w[j]) / deg[j] - p.c
    return total


def verify_retailer_nash(
    g: Network, p: GameParams, w: PriceVector, mode: str = "exhaustive"
) -> VerificationReport:
    """Check that no retailer has a profitable unilateral deviation.

    ``exhaustive`` evaluates every subset of suppliers for every retailer, with
    the active set recomputed for each candidate; it is the ground truth but
    needs ``m <= 20``. ``characterized`` checks the closed-form equilibrium
    conditions in O(m): no vacant supplier attracts a fresh retailer, every
    active supplier's degree is ``floor((v_j - mu_j w_j) / c)``, and the number
    of active suppliers is admissible.
    """
    if mode == "characterized":
        return _verify_characterized(g, p, w)
    if mode != "exhaustive":
        raise ValueError(f"unknown verification mode {mode!r}")
    if p.m > EXHAUSTIVE_MAX_M:
        raise SizeLimit(f"exhaustive verification needs m <= {EXHAUSTIVE_MAX_M}, got m={p.m}")

    deg = np.array(g.degrees, dtype=float)
    cache: dict = {}
    checks = []
    certified = True
    for i in range(g.n):
        own = g.neighbors(i)
        if own not in cache:
            deg_minus = deg.copy()
            for j in own:
                deg_minus[j] -= 1
            cache[own] = _best_response(p, w, deg_minus, own)
        current, best, links = cache[own]
        checks.append(RetailerCheck(i, current, best, links))
        if tol.sign(best - current, max(abs(best), abs(current))) > 0:
            certified = False
    return VerificationReport(certified, "exhaustive", tuple(checks))


def _verify_characterized(g: Network, p: GameParams, w: PriceVector) -> VerificationReport:
    failures = []
    active = g.active
    for j in g.vacant:
        x, sc = _margin(p, w, j, list(active) + [j])
        if tol.sign(x, sc) >= 0:
            failures.append(f"vacant supplier {j} attracts a fresh retailer (margin {x})")
    for j in active:
        v = p.supplier_value(j, active)
        expect = tol.floor((v - p.mu[j] * w[j]) / p.c)
        if g.degrees[j] != expect:
            failures.append(f"supplier {j} has degree {g.degrees[j]}, expected {expect}")
    ks = active_supplier_count(p, w)
    allowed = {ks.K_star} | ({ks.K_star - 1} if ks.may_drop_one else set())
    if p.case != "hetero_mean" and g.K not in allowed:
        failures.append(f"K={g.K} not in admissible {sorted(allowed)}")
    return VerificationReport(not failures, "characterized", failures=tuple(failures))


# ---------------------------------------------------------------- selection


def _selection_keys(p: GameParams, g_active: Sequence[int], w: PriceVector) -> list[float]:
    if p.case == "hetero_mean":
        tm = sum(p.mu[k] for k in g_active)
        # higher value is better; negate so that lower key is better everywhere
        return [-(p.delta - tm - w[j]) * p.mu[j] for j in range(p.m)]
    return activation_keys(p, w)


def _weakly_worse(k_vac: float, e_vac: bool, k_act: float, e_act: bool) -> bool:
    if tol.close(k_vac, k_act):
        return not (e_vac and not e_act)
    return k_vac > k_act


def selection_filter(p: GameParams, g: Network, w: PriceVector) -> bool:
    """True if every vacant supplier is weakly worse than every active one."""
    active = g.active
    if not active:
        return True
    keys = _selection_keys(p, active, w)
    eps = w.epsilon
    worst = max(active, key=lambda j: (keys[j], not eps[j]))
    return all(_weakly_worse(keys[j], eps[j], keys[worst], eps[worst]) for j in g.vacant)


def activation_likelihoods(p: GameParams, w: PriceVector) -> tuple[float, ...]:
    """Probability that each supplier is active in a selected equilibrium.

    Suppliers strictly inside the best K* get 1, those strictly outside get 0,
    and a tie class straddling the boundary shares the remaining slots evenly.
    """
    if p.case == "hetero_mean":
        from .pricing import best_set_shares

        return best_set_shares(p, w)
    K = active_supplier_count(p, w).K_star
    a = [0.0] * p.m
    slots = K
    for grp in ranked_groups(activation_keys(p, w), w.epsilon):
        if slots <= 0:
            break
        share = min(1.0, slots / len(grp))
        for j in grp:
            a[j] = share
        slots -= len(grp)
    return tuple(a)
