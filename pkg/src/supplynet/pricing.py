"""Strategic first-stage prices and their welfare consequences.

Covers identical suppliers, one supplier with a strictly smaller supply
variance, and one supplier with a strictly larger mean supply. Left-limit
prices (``w - eps``) are carried as flags on :class:`PriceVector` and
evaluated at ``eps = 0`` in all welfare arithmetic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tolerance as tol
from .equilibrium import (
    EXHAUSTIVE_MAX_M,
    _masks,
    activation_likelihoods,
    active_supplier_count,
    characterized_network,
    equilibrium_degrees,
)
from .errors import InsufficientRetailers, InsufficientSuppliers, ShapeMismatch, SizeLimit
from .model import GameParams, PriceVector
from .payoff import WelfareBreakdown, expected_welfare, expected_welfare_homogeneous


class NegativePriceWarning(UserWarning):
    """The improved-mean price formula went negative and was clamped to 0."""


@dataclass(frozen=True)
class WelfareDelta:
    """Welfare change caused by one improved supplier.

    Attributes:
        stated: per-component change from the closed-form statements; its
            ``total`` is the exact sum of the components.
        closed_total: the closed-form total change, which may rely on an
            approximation of the retailer component.
        retailer_residual: the floor/ceil terms dropped when the retailer
            change is approximated by 0 (0 when no approximation is made).
        exact: change computed directly on the characterized equilibrium
            networks before and after the improvement.
    """

    stated: WelfareBreakdown
    closed_total: float
    retailer_residual: float = 0.0
    exact: Optional[WelfareBreakdown] = None

    def to_dict(self) -> dict:
        out = {
            "stated": self.stated.to_dict(),
            "closed_total": self.closed_total,
            "retailer_residual": self.retailer_residual,
        }
        if self.exact is not None:
            out["exact"] = self.exact.to_dict()
        return out


@dataclass(frozen=True)
class PriceEquilibrium:
    w_star: PriceVector
    K_ref: int
    case: str
    admissible_K: tuple[int, ...] = ()
    degrees: dict = field(default_factory=dict)
    welfare: Optional[float] = None
    welfare_direct: Optional[float] = None
    welfare_delta: Optional[WelfareDelta] = None
    improved: Optional[int] = None
    raw_price: Optional[float] = None
    negative_price: bool = False
    others_interval: Optional[tuple[float, float]] = None

    def to_dict(self) -> dict:
        out = {
            "case": self.case,
            "w_star": list(self.w_star.w),
            "epsilon": list(self.w_star.epsilon),
            "K_ref": self.K_ref,
            "admissible_K": list(self.admissible_K),
            "degrees": {str(j): d for j, d in sorted(self.degrees.items())},
        }
        if self.welfare is not None:
            out["welfare"] = self.welfare
            out["welfare_direct"] = self.welfare_direct
        if self.improved is not None:
            out["improved"] = self.improved
            out["raw_price"] = self.raw_price
            out["negative_price"] = self.negative_price
        if self.others_interval is not None:
            out["others_interval"] = list(self.others_interval)
        if self.welfare_delta is not None:
            out["welfare_delta"] = self.welfare_delta.to_dict()
        return out


# ---------------------------------------------------------------- identical suppliers


def _scalars(p: GameParams) -> tuple[float, float]:
    if not p.homogeneous:
        raise ShapeMismatch("operation needs identical suppliers")
    return p.mu[0], p.sigma2[0]


def equilibrium_z(mu: float, sigma2: float, delta: float, c: float) -> float:
    return delta / mu - sigma2 / mu**2 - c / mu**2


def zero_price_welfare(mu: float, sigma2: float, delta: float, c: float) -> float:
    """Closed-form expected welfare of the zero-price equilibrium with K* suppliers."""
    f = tol.frac(equilibrium_z(mu, sigma2, delta, c))
    a = delta * mu - c - mu**2 * f
    r = tol.frac(mu**2 * f / c)
    return (a - sigma2) * (a + 2 * c * r) / (2 * mu**2)


def homogeneous_price_equilibrium(p: GameParams) -> PriceEquilibrium:
    """Zero-price equilibrium of the two-stage game with identical suppliers.

    Raises:
        InsufficientSuppliers: if ``m <= K*`` (no supplier is left out, so
            price competition does not drive prices to zero).
        InsufficientRetailers: if ``n < K* * d``.
    """
    mu, s2 = _scalars(p)
    z = equilibrium_z(mu, s2, p.delta, p.c)
    K = tol.floor(z)
    f = tol.frac(z)
    if p.m <= K:
        raise InsufficientSuppliers(K + 1, p.m)
    d = tol.floor(1 + mu**2 * f / p.c)
    if p.n < K * d:
        raise InsufficientRetailers(K * d, p.n)
    degrees = {j: d for j in range(K)}
    admissible = (K,)
    if f == 0.0 and K >= 1:
        admissible = (K, K - 1)
    return PriceEquilibrium(
        w_star=PriceVector.zeros(p.m),
        K_ref=K,
        case="homogeneous",
        admissible_K=admissible,
        degrees=degrees,
        welfare=zero_price_welfare(mu, s2, p.delta, p.c),
        welfare_direct=expected_welfare_homogeneous(mu, s2, p.delta, p.c, K, K * d),
    )


def boundary_degree(p: GameParams) -> int:
    """Degree of each supplier when only K* - 1 are active (v(K*) = c case)."""
    mu, s2 = _scalars(p)
    f = tol.frac(equilibrium_z(mu, s2, p.delta, p.c))
    return tol.floor(1 + mu**2 * (1 + f) / p.c)


# ---------------------------------------------------------------- improved variance


def _improved_variance(p: GameParams) -> Optional[tuple[int, float, float]]:
    if not p.equal_means:
        raise ShapeMismatch("improved-variance prices need equal means")
    vals = sorted(set(p.sigma2))
    if len(vals) == 1:
        return None
    low = [j for j, s in enumerate(p.sigma2) if s == vals[0]]
    if len(vals) > 2 or len(low) != 1:
        raise ShapeMismatch("need exactly one supplier with a strictly smaller variance")
    return low[0], vals[0], vals[1]


def hetero_variance_prices(p: GameParams) -> PriceEquilibrium:
    """Prices when one supplier has a strictly smaller supply variance.

    The improved supplier prices just below ``(sigma2_high - sigma2_low) / mu``
    and everyone else prices at 0.
    """
    info = _improved_variance(p)
    if info is None:
        return homogeneous_price_equilibrium(p)
    u, s_low, s_high = info
    mu = p.mu[0]
    gap = s_high - s_low
    w = PriceVector.zeros(p.m).with_price(u, gap / mu, epsilon=True)
    ks = active_supplier_count(p, w)
    degrees = equilibrium_degrees(p, w, ks.K_star)
    return PriceEquilibrium(
        w_star=w,
        K_ref=ks.K_star,
        case="hetero_variance",
        admissible_K=(ks.K_star, ks.K_star - 1) if ks.may_drop_one else (ks.K_star,),
        degrees=degrees,
        welfare_delta=hetero_variance_welfare_delta(p),
        improved=u,
        raw_price=gap / mu,
    )


def hetero_variance_welfare_delta(p: GameParams) -> WelfareDelta:
    info = _improved_variance(p)
    if info is None:
        zero = WelfareBreakdown(0.0, 0.0, 0.0, kind="delta")
        return WelfareDelta(zero, 0.0, 0.0, zero)
    u, s_low, s_high = info
    gap = s_high - s_low
    stated = WelfareBreakdown(0.0, gap, -0.5 * gap, kind="delta")

    base = p.replace(sigma2=[s_high] * p.m)
    w0 = PriceVector.zeros(p.m)
    w1 = w0.with_price(u, gap / p.mu[0], epsilon=True)
    g0 = characterized_network(base, w0)
    g1 = characterized_network(p, w1)
    exact = expected_welfare(g1, p, w1) - expected_welfare(g0, base, w0)
    return WelfareDelta(stated, 0.5 * gap, exact.retailer_total, exact)


# ---------------------------------------------------------------- best supplier sets


@dataclass(frozen=True)
class BestSupplierSets:
    """Size-K supplier sets that are individually feasible and value-maximizing.

    ``sets`` holds every member when enumerated exhaustively; the structured
    path returns one representative per optimal composition (the cheapest
    suppliers of each kind).
    """

    K: int
    sets: tuple[tuple[int, ...], ...]
    K_max: Optional[int] = None
    method: str = "exhaustive"

    def __bool__(self) -> bool:
        return bool(self.sets)


def _structure(p: GameParams) -> Optional[Optional[int]]:
    """Index of the single supplier with a distinct mean, ``None`` if all equal.

    Returns the sentinel ``-1`` when the parameters have neither shape.
    """
    if len(set(p.sigma2)) != 1:
        return -1
    groups: dict = {}
    for j, mu in enumerate(p.mu):
        groups.setdefault(mu, []).append(j)
    if len(groups) == 1:
        return None
    singles = [(mu, js[0]) for mu, js in groups.items() if len(js) == 1]
    if len(groups) != 2 or not singles:
        return -1
    return max(singles)[1]


def _set_stats(p: GameParams, w: PriceVector, s) -> tuple[float, bool]:
    tm = sum(p.mu[j] for j in s)
    value = sum((p.delta - tm - w[j]) * p.mu[j] for j in s)
    feasible = True
    for j in s:
        v = (p.delta - tm) * p.mu[j] - p.sigma2[j]
        mw = p.mu[j] * w[j]
        if tol.sign(v - mw - p.c, max(abs(v), abs(mw), p.c)) < 0:
            feasible = False
            break
    return value, feasible


def _structured_compositions(p: GameParams, w: PriceVector, K: int):
    """Candidate optimal sets under the one-distinct-supplier structure.

    Yields ``(representative set, included others, boundary tie class, slots)``.
    """
    u = _structure(p)
    if u == -1:
        raise SizeLimit("structured best-set search needs at most one distinct mean")
    others = [j for j in range(p.m) if j != u]
    others.sort(key=lambda j: (w[j], j))
    groups: list[list[int]] = []
    for j in others:
        if groups and tol.close(w[groups[-1][0]], w[j]):
            groups[-1].append(j)
        else:
            groups.append([j])

    def pick(k):
        chosen, left = [], k
        for grp in groups:
            if left == 0:
                return chosen, [], 0
            if len(grp) <= left:
                chosen.extend(grp)
                left -= len(grp)
            else:
                return chosen, grp, left
        return chosen, [], 0

    comps = []
    if K <= len(others):
        sure, tie, r = pick(K)
        comps.append((tuple(sorted(sure + tie[:r])), sure, tie, r))
    if u is not None and 1 <= K <= len(others) + 1:
        sure, tie, r = pick(K - 1)
        comps.append((tuple(sorted([u] + sure + tie[:r])), [u] + sure, tie, r))
    return comps


def _structured_best(p: GameParams, w: PriceVector, K: int):
    comps = _structured_compositions(p, w, K)
    if not comps:
        return []
    stats = [_set_stats(p, w, c[0]) for c in comps]
    best = max(v for v, _ in stats)
    return [c for c, (v, feas) in zip(comps, stats) if feas and tol.close(v, best)]


def _exhaustive_tables(p: GameParams, w: PriceVector):
    """Best value per cardinality and, per cardinality, whether B(K) is non-empty."""
    m = p.m
    if m > EXHAUSTIVE_MAX_M:
        raise SizeLimit(f"exhaustive best-set search needs m <= {EXHAUSTIVE_MAX_M}, got m={m}")
    mu = np.array(p.mu)
    s2 = np.array(p.sigma2)
    mw = mu * np.array(w.w)
    total = 1 << m
    best = np.full(m + 1, -np.inf)
    chunks = []
    for start in range(0, total, 1 << 15):
        stop = min(total, start + (1 << 15))
        M = _masks(m, start, stop)
        card = M.sum(axis=1)
        tm = M @ mu
        value = (p.delta - tm) * tm - M @ mw
        np.maximum.at(best, card, value)
        v = (p.delta - tm)[:, None] * mu[None, :] - s2[None, :]
        margin = v - mw[None, :] - p.c
        scale = np.maximum(np.maximum(np.abs(v), np.abs(mw)[None, :]), max(p.c, 1.0))
        ok = np.where(M, margin >= -tol.REL_TOL * scale, True).all(axis=1)
        chunks.append((start, card, value, ok))
    return best, chunks


def _optimal_mask(best, card, value):
    b = best[card]
    return value >= b - tol.REL_TOL * np.maximum(1.0, np.abs(b))


def best_supplier_sets(
    p: GameParams, w: Optional[PriceVector] = None, K: int = 1, method: str = "auto"
) -> BestSupplierSets:
    """The sets B(K) of best size-K supplier subsets.

    ``method`` is ``exhaustive`` (all subsets, ``m <= 20``), ``structured``
    (one distinct mean, any ``m``) or ``auto`` (structured when the shape
    allows it, exhaustive otherwise).
    """
    w = w if w is not None else PriceVector.zeros(p.m)
    method = _resolve(p, method)
    if K < 0 or K > p.m:
        return BestSupplierSets(K, (), method=method)
    if method == "structured":
        comps = _structured_best(p, w, K)
        return BestSupplierSets(K, tuple(c[0] for c in comps), method=method)
    if K == 0:
        return BestSupplierSets(0, ((),), method=method)
    best, chunks = _exhaustive_tables(p, w)
    sets = []
    for start, card, value, ok in chunks:
        hit = np.nonzero((card == K) & ok & _optimal_mask(best, card, value))[0]
        for k in hit:
            mask = start + int(k)
            sets.append(tuple(j for j in range(p.m) if mask >> j & 1))
    return BestSupplierSets(K, tuple(sets), method=method)


def _resolve(p: GameParams, method: str) -> str:
    if method == "auto":
        return "structured" if _structure(p) != -1 else "exhaustive"
    if method not in ("exhaustive", "structured"):
        raise ValueError(f"unknown method {method!r}")
    return method


def k_max(p: GameParams, w: Optional[PriceVector] = None, method: str = "auto") -> int:
    """Largest K with a non-empty best-supplier set B(K); 0 if there is none."""
    w = w if w is not None else PriceVector.zeros(p.m)
    method = _resolve(p, method)
    if method == "structured":
        for K in range(p.m, 0, -1):
            if _structured_best(p, w, K):
                return K
        return 0
    best, chunks = _exhaustive_tables(p, w)
    found = 0
    for start, card, value, ok in chunks:
        good = ok & _optimal_mask(best, card, value) & (card > 0)
        if good.any():
            found = max(found, int(card[good].max()))
    return found


def best_set_shares(p: GameParams, w: PriceVector, method: str = "auto") -> tuple[float, ...]:
    """Fraction of the sets in B(K_max) that contain each supplier."""
    method = _resolve(p, method)
    K = k_max(p, w, method)
    a = [0.0] * p.m
    if K == 0:
        return tuple(a)
    if method == "exhaustive":
        sets = best_supplier_sets(p, w, K, "exhaustive").sets
        for s in sets:
            for j in s:
                a[j] += 1.0 / len(sets)
        return tuple(a)
    counts = [0.0] * p.m
    n_sets = 0
    for _, sure, tie, r in _structured_best(p, w, K):
        n = math.comb(len(tie), r) if tie else 1
        n_sets += n
        for j in sure:
            counts[j] += n
        for j in tie:
            counts[j] += math.comb(len(tie) - 1, r - 1)
    return tuple(x / n_sets for x in counts)


# ---------------------------------------------------------------- improved mean


def _improved_mean(p: GameParams) -> Optional[tuple[int, float, float]]:
    if len(set(p.sigma2)) != 1:
        raise ShapeMismatch("improved-mean prices need equal variances")
    u = _structure(p)
    if u is None:
        return None
    if u == -1:
        raise ShapeMismatch("need exactly one supplier with a distinct mean")
    base = next(p.mu[j] for j in range(p.m) if j != u)
    delta_mu = p.mu[u] - base
    if delta_mu <= 0:
        raise ShapeMismatch("the distinct supplier must have a strictly larger mean")
    return u, base, delta_mu


def hetero_mean_prices(p: GameParams) -> PriceEquilibrium:
    """Prices when one supplier has a strictly larger mean supply.

    The formula for the improved supplier's price can go negative at moderate
    ``delta``; it is then clamped to 0, ``negative_price`` is set and a
    :class:`NegativePriceWarning` is emitted. With ``K_max = 1`` the other
    suppliers' prices are undetermined and ``others_interval`` gives their range.
    """
    info = _improved_mean(p)
    if info is None:
        return homogeneous_price_equilibrium(p)
    u, mu, dm = info
    km = k_max(p, PriceVector.zeros(p.m))
    raw = dm * ((p.delta - mu * km) / (mu + dm) - 1)
    negative = tol.sign(raw, max(abs(dm), 1.0)) < 0
    if negative:
        warnings.warn(
            f"improved-mean price {raw:.6g} is negative at K_max={km}; clamped to 0",
            NegativePriceWarning,
            stacklevel=2,
        )
    price = max(raw, 0.0)
    w = PriceVector.zeros(p.m).with_price(u, price, epsilon=price > 0)
    interval = None
    delta_w = None
    if km == 1:
        s2 = p.sigma2[0]
        interval = (0.0, p.delta - mu - (s2 + p.c) / mu)
    elif km > 1:
        delta_w = hetero_mean_welfare_delta(p, km)
    return PriceEquilibrium(
        w_star=w,
        K_ref=km,
        case="hetero_mean",
        admissible_K=(km,),
        degrees=equilibrium_degrees(p, w, km, _with_improved(p, w, u, km)) if km else {},
        welfare_delta=delta_w,
        improved=u,
        raw_price=raw,
        negative_price=negative,
        others_interval=interval,
    )


def _with_improved(p: GameParams, w: PriceVector, u: int, K: int) -> tuple[int, ...]:
    others = sorted((j for j in range(p.m) if j != u), key=lambda j: (w[j], j))
    return tuple(sorted([u] + others[: K - 1]))


def hetero_mean_welfare_delta(p: GameParams, K_star_selected: int) -> WelfareDelta:
    """Welfare change from the improved mean at an equilibrium with K* active suppliers.

    The retailer component is reported as 0 in ``stated``; the floor/ceil terms
    that the approximation drops are returned as ``retailer_residual`` and the
    direct network evaluation as ``exact``.
    """
    info = _improved_mean(p)
    if info is None:
        zero = WelfareBreakdown(0.0, 0.0, 0.0, kind="delta")
        return WelfareDelta(zero, 0.0, 0.0, zero)
    u, mu, dm = info
    D, c, ks = p.delta, p.c, K_star_selected
    km = k_max(p, PriceVector.zeros(p.m))
    supplier = dm * (D - mu * (km + 1) - dm)
    consumer = dm * (mu * ks + dm / 2)
    stated = WelfareBreakdown(0.0, supplier, consumer, kind="delta")
    closed_total = dm * (D - mu * (km - ks + 1) - dm / 2)
    residual = (
        (D - ks * mu - dm) * dm
        - supplier
        - c * tol.floor(dm * mu * (km - ks + 1) / c)
        + (ks - 1) * (c * tol.ceil(dm * mu / c) - dm * mu)
    )

    raw = dm * ((D - mu * km) / (mu + dm) - 1)
    w1 = PriceVector.zeros(p.m).with_price(u, max(raw, 0.0), epsilon=raw > 0)
    w0 = PriceVector.zeros(p.m)
    base = p.replace(mu=[mu] * p.m)
    others = [j for j in range(p.m) if j != u]
    g0 = characterized_network(base, w0, active=tuple(sorted([u] + others[: ks - 1])))
    g1 = characterized_network(p, w1, active=_with_improved(p, w1, u, ks))
    exact = expected_welfare(g1, p, w1) - expected_welfare(g0, base, w0)
    return WelfareDelta(stated, closed_total, residual, exact)


# ---------------------------------------------------------------- price deviations


@dataclass(frozen=True)
class SupplierDeviation:
    supplier: int
    current: float
    best: float
    best_price: float

    @property
    def gain(self) -> float:
        return self.best - self.current


@dataclass(frozen=True)
class PriceDeviationReport:
    certified: bool
    resolution: float
    suppliers: tuple[SupplierDeviation, ...]

    def to_dict(self) -> dict:
        worst = max(self.suppliers, key=lambda s: s.gain)
        return {
            "certified": self.certified,
            "resolution": self.resolution,
            "worst_supplier": worst.supplier,
            "worst_gain": worst.gain,
            "worst_price": worst.best_price,
        }


def supplier_price_deviation_check(
    p: GameParams, w_star: PriceVector, resolution: float = 1e-3
) -> PriceDeviationReport:
    """Grid search for profitable unilateral price deviations.

    Each supplier's price is moved over ``resolution``-spaced fractions of its
    admissible range ``[0, price_bound]`` with the others held fixed, and the
    activation likelihood is recomputed at every grid point. Suppliers with
    identical moments and prices share one search.
    """
    n_grid = int(round(1.0 / resolution)) + 1
    a_star = activation_likelihoods(p, w_star)
    memo: dict = {}
    rows = []
    for j in range(p.m):
        current = a_star[j] * p.mu[j] * w_star[j]
        sig = (p.mu[j], p.sigma2[j], w_star[j], w_star.epsilon[j])
        if sig not in memo:
            best, best_x = -math.inf, 0.0
            for x in np.linspace(0.0, max(p.price_bound(j), 0.0), n_grid):
                a = activation_likelihoods(p, w_star.with_price(j, float(x)))[j]
                pay = a * p.mu[j] * float(x)
                if pay > best:
                    best, best_x = pay, float(x)
            memo[sig] = (best, best_x)
        best, best_x = memo[sig]
        rows.append(SupplierDeviation(j, current, best, best_x))
    certified = all(tol.sign(r.gain, max(abs(r.best), abs(r.current))) <= 0 for r in rows)
    return PriceDeviationReport(certified, resolution, tuple(rows))
