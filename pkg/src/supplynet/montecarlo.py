"""Supply sampling with prescribed moments and statistical checks of closed forms.

Every supplier draws from its own counter-keyed substream: the uniform used
for draw ``k`` of supplier ``j`` is a fixed function of ``(seed, j, k)``. Draw
streams are therefore identical regardless of block order or thread count, and
two instances sampled with the same seed share common random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy import special

from .errors import InfeasibleMoments
from .model import GameParams, Network, PriceVector, SupplyRealization
from .payoff import expected_welfare, retailer_expected_payoff

FAMILIES = ("scaled-beta", "uniform", "two-point")
BLOCK = 1 << 14
Z_LIMIT = 3.0


@dataclass(frozen=True)
class SupplyDistribution:
    """Independent per-supplier supply laws on ``[0, s_max]`` matched to two moments."""

    mu: tuple[float, ...]
    sigma2: tuple[float, ...]
    s_max: float
    family: str = "scaled-beta"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        for j, (mu, s2) in enumerate(zip(self.mu, self.sigma2)):
            _check_moments(self.family, mu, s2, self.s_max, j)

    @classmethod
    def for_params(cls, p: GameParams, family: str = "scaled-beta", seed: int = 0):
        return cls(p.mu, p.sigma2, p.s_max, family, seed)

    @property
    def m(self) -> int:
        return len(self.mu)

    def uniforms(self, j: int, start: int, count: int) -> np.ndarray:
        """Uniforms for draws ``start .. start+count-1`` of supplier ``j``."""
        out = np.empty(count)
        pos = 0
        while pos < count:
            k = start + pos
            b, off = divmod(k, BLOCK)
            ss = np.random.SeedSequence(self.seed, spawn_key=(j, b))
            u = np.random.Generator(np.random.Philox(ss)).random(BLOCK)
            take = min(BLOCK - off, count - pos)
            out[pos:pos + take] = u[off:off + take]
            pos += take
        return out

    def transform(self, j: int, u: np.ndarray) -> np.ndarray:
        mu, s2, smax = self.mu[j], self.sigma2[j], self.s_max
        if s2 == 0:
            return np.full_like(u, mu)
        if self.family == "scaled-beta":
            a, b = beta_shape(mu, s2, smax)
            return smax * special.betaincinv(a, b, u)
        if self.family == "uniform":
            h = math.sqrt(3 * s2)
            return mu + h * (2 * u - 1)
        lo, hi, q = two_point_support(mu, s2, smax)
        return np.where(u < q, hi, lo)


def _check_moments(family: str, mu: float, s2: float, smax: float, j: int) -> None:
    if not 0 <= mu <= smax or s2 < 0:
        raise InfeasibleMoments(f"supplier {j}: need 0 <= mu <= s_max and sigma2 >= 0")
    if s2 == 0:
        return
    r = smax - mu
    if family == "scaled-beta" and not s2 < mu * r:
        raise InfeasibleMoments(
            f"supplier {j}: scaled-beta needs sigma2 < mu(s_max - mu) = {mu * r}, got {s2}"
        )
    if family == "two-point" and s2 > mu * r:
        raise InfeasibleMoments(
            f"supplier {j}: two-point needs sigma2 <= mu(s_max - mu) = {mu * r}, got {s2}"
        )
    if family == "uniform":
        h = math.sqrt(3 * s2)
        if mu - h < 0 or mu + h > smax:
            raise InfeasibleMoments(
                f"supplier {j}: uniform needs mu +/- sqrt(3 sigma2) inside [0, s_max]"
            )


def beta_shape(mu: float, s2: float, smax: float) -> tuple[float, float]:
    """Beta shape parameters whose ``s_max``-scaled law has mean mu, variance s2."""
    m = mu / smax
    v = s2 / smax**2
    k = m * (1 - m) / v - 1
    return m * k, (1 - m) * k


def two_point_support(mu: float, s2: float, smax: float) -> tuple[float, float, float]:
    """Low value, high value and high-value probability of a two-point law.

    The high-value probability is 1/2 when that fits inside ``[0, s_max]`` and
    the nearest feasible probability otherwise.
    """
    s = math.sqrt(s2)
    r = smax - mu
    q_min = s2 / (s2 + r * r)
    q_max = mu * mu / (mu * mu + s2)
    q = min(max(0.5, q_min), q_max)
    lo = max(mu - s * math.sqrt(q / (1 - q)), 0.0) if q < 1 else mu
    hi = min(mu + s * math.sqrt((1 - q) / q), smax)
    return lo, hi, q


def sample_supply(
    dist: SupplyDistribution,
    draws: int,
    start: int = 0,
    n_jobs: int = 1,
    columns: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Supply matrix of shape ``(draws, m)``, draws ``start .. start+draws-1``.

    With ``columns`` only those suppliers are sampled and the other columns are
    left at 0; sampled columns are identical to a full draw.
    """
    cols = range(dist.m) if columns is None else sorted(set(columns))
    blocks = [(b, min(BLOCK, start + draws - b)) for b in range(start, start + draws, BLOCK)]

    def one(block):
        b0, cnt = block
        out = np.zeros((cnt, dist.m))
        for j in cols:
            out[:, j] = dist.transform(j, dist.uniforms(j, b0, cnt))
        return out

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    return np.vstack(parts) if parts else np.empty((0, dist.m))


def iter_realizations(dist: SupplyDistribution, draws: int) -> Iterator[SupplyRealization]:
    for start in range(0, draws, BLOCK):
        S = sample_supply(dist, min(BLOCK, draws - start), start)
        for row in S:
            yield SupplyRealization(tuple(row))


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class Instance:
    """A network at fixed prices. ``alt`` is the comparison instance for deltas."""

    params: GameParams
    network: Network
    prices: PriceVector
    alt: Optional["Instance"] = None


@dataclass(frozen=True)
class StatReport:
    target: str
    closed_form: float
    mean: float
    stderr: float
    draws: int
    family: str

    @property
    def z(self) -> float:
        diff = self.mean - self.closed_form
        if self.stderr == 0:
            return 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(self.closed_form)) else math.inf
        return diff / self.stderr

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_LIMIT

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "closed_form": self.closed_form,
            "mean": self.mean,
            "stderr": self.stderr,
            "z": self.z,
            "draws": self.draws,
            "family": self.family,
            "passed": self.passed,
        }


def realized_components(inst: Instance, S: np.ndarray) -> dict:
    """Per-draw retailer, supplier and consumer welfare for a supply matrix."""
    p, g, w = inst.params, inst.network, inst.prices
    A = np.zeros(p.m)
    A[list(g.active)] = 1.0
    ww = np.array(w.w)
    T = S @ A
    paid = S @ (A * ww)
    retailer = (p.delta - T) * T - paid - p.c * g.size
    return {"retailer": retailer, "supplier": paid, "consumer": 0.5 * T * T}


def realized_retailer(inst: Instance, S: np.ndarray, i: int) -> np.ndarray:
    p, g, w = inst.params, inst.network, inst.prices
    A = np.zeros(p.m)
    A[list(g.active)] = 1.0
    x = np.zeros(p.m)
    for j in g.neighbors(i):
        x[j] = 1.0 / g.degrees[j]
    T = S @ A
    return (p.delta - T) * (S @ x) - S @ (x * np.array(w.w)) - p.c * len(g.neighbors(i))


def _samples(target: str, inst: Instance, S: np.ndarray) -> np.ndarray:
    kind, _, arg = target.partition(".")
    if target.startswith("retailer_payoff"):
        return realized_retailer(inst, S, _index(target))
    if target.startswith("supplier_payoff"):
        j = _index(target)
        active = inst.network.degrees[j] > 0
        return S[:, j] * inst.prices[j] * (1.0 if active else 0.0)
    if kind == "welfare":
        comps = realized_components(inst, S)
        if arg == "total":
            return comps["retailer"] + comps["supplier"] + comps["consumer"]
        return comps[arg]
    raise ValueError(f"unknown target {target!r}")


def _closed(target: str, inst: Instance) -> float:
    p, g, w = inst.params, inst.network, inst.prices
    if target.startswith("retailer_payoff"):
        return retailer_expected_payoff(g, w, p, _index(target))
    if target.startswith("supplier_payoff"):
        j = _index(target)
        return (1.0 if g.degrees[j] > 0 else 0.0) * p.mu[j] * w[j]
    wb = expected_welfare(g, p, w)
    arg = target.partition(".")[2]
    return {
        "retailer": wb.retailer_total,
        "supplier": wb.supplier_total,
        "consumer": wb.consumer_surplus,
        "total": wb.total,
    }[arg]


def _index(target: str) -> int:
    return int(target[target.index("[") + 1 : target.index("]")])


def _needed(inst: Instance, targets: Sequence[str]) -> set:
    cols = set(inst.network.active)
    for t in targets:
        if t.startswith("supplier_payoff"):
            cols.add(_index(t))
        elif t.startswith("retailer_payoff"):
            cols.update(inst.network.neighbors(_index(t)))
    return cols


def validate_many(
    targets: Sequence[str],
    instance: Instance,
    draws: int = 100_000,
    seed: int = 0,
    family: str = "scaled-beta",
    n_jobs: int = 1,
) -> list[StatReport]:
    """Check several targets on one shared supply sample.

    ``targets`` use the names accepted by :func:`validate_closed_form`.
    """
    deltas = [t for t in targets if t.startswith("delta.")]
    if deltas and instance.alt is None:
        raise ValueError("delta targets need instance.alt")
    plain = ["welfare." + t.partition(".")[2] if t.startswith("delta.") else t for t in targets]

    def draw(inst):
        dist = SupplyDistribution.for_params(inst.params, family, seed)
        return sample_supply(dist, draws, n_jobs=n_jobs, columns=_needed(inst, plain))

    S1 = draw(instance)
    S0 = draw(instance.alt) if deltas else None
    out = []
    for t, sub in zip(targets, plain):
        x = _samples(sub, instance, S1)
        cf = _closed(sub, instance)
        if t.startswith("delta."):
            x = x - _samples(sub, instance.alt, S0)
            cf -= _closed(sub, instance.alt)
        mean = math.fsum(x) / len(x)
        se = float(np.std(x, ddof=1)) / math.sqrt(len(x)) if len(x) > 1 else 0.0
        out.append(StatReport(t, cf, mean, se, draws, family))
    return out


def validate_closed_form(
    target: str,
    instance: Instance,
    draws: int = 100_000,
    seed: int = 0,
    family: str = "scaled-beta",
    expected: Optional[float] = None,
    n_jobs: int = 1,
) -> StatReport:
    """Compare a closed-form expectation with its Monte Carlo estimate.

    ``target`` is one of ``retailer_payoff[i]``, ``supplier_payoff[j]``,
    ``welfare.<part>`` or ``delta.<part>`` where ``<part>`` is ``retailer``,
    ``supplier``, ``consumer`` or ``total``. ``delta`` targets estimate
    ``instance - instance.alt`` with common random numbers: both sides use the
    same seed, so every supplier sees the same uniforms in both instances.
    ``expected`` overrides the closed form computed from the instance.
    """
    rep = validate_many([target], instance, draws, seed, family, n_jobs)[0]
    if expected is not None:
        rep = StatReport(rep.target, expected, rep.mean, rep.stderr, rep.draws, rep.family)
    return rep
