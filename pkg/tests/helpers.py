"""Instance generators and brute-force oracles shared by the tests.

The oracles here recompute payoffs from a raw link list without going through
the package's network views, so they serve as independent references.
"""

import itertools
import math

import numpy as np

from supplynet import GameParams, PriceVector

TINY_LINKS = [(0, 1), (1, 1), (2, 2), (3, 2)]


def tiny_params(m=3, n=4):
    return GameParams.create(n=n, m=m, mu=2.0, sigma2=1.0, c=0.5, delta=18.0, s_max=4.0)


def tiny_prices(m=3):
    return PriceVector.of([12.0] + [13.0] * (m - 1))


def main_params(m=20, n=1000):
    return GameParams.create(n=n, m=m, mu=2.0, sigma2=1.0, c=0.5, delta=18.0, s_max=4.0)


def random_homogeneous(rng, n=10_000, m=None):
    """Valid identical-supplier parameters with large populations."""
    mu = float(rng.uniform(0.5, 3.0))
    s2 = float(rng.uniform(0.0, 1.0) * mu * mu)
    if rng.random() < 0.1:
        s2 = 0.0
    delta = float(rng.uniform(2.0 * mu, 30.0 * mu))
    v1 = mu * (delta - mu) - s2
    c = float(rng.uniform(0.01, 1.0) * v1)
    y = delta / mu - s2 / (2 * mu * mu) - c / (mu * mu)
    m = m or int(math.floor(y)) + 5
    return GameParams.create(n=n, m=m, mu=mu, sigma2=s2, c=c, delta=delta, s_max=2 * mu)


def random_priced(rng, m_max=10, n=60):
    """Identical suppliers with random prices inside the admissible bound."""
    m = int(rng.integers(2, m_max + 1))
    mu = float(rng.uniform(0.5, 3.0))
    s2 = float(rng.uniform(0.0, 0.9) * mu * mu)
    delta = float(rng.uniform(2.0 * mu, m * 2 * mu))
    v1 = mu * (delta - mu) - s2
    c = float(rng.uniform(0.05, 1.0) * v1)
    p = GameParams.create(n=n, m=m, mu=mu, sigma2=s2, c=c, delta=delta, s_max=2 * mu)
    w = []
    for j in range(m):
        u = rng.random()
        # a few exact ties exercise the tie-breaking paths
        w.append(0.0 if u < 0.15 else float(rng.uniform(0.0, p.price_bound(j))))
    return p, PriceVector.of(w)


def random_improved_mean(rng, m_max=12):
    m = int(rng.integers(2, m_max + 1))
    mu = float(rng.uniform(0.5, 2.0))
    dlt = float(rng.uniform(0.01, 1.0) * mu)
    s2 = float(rng.uniform(0.0, 0.5) * mu * mu)
    delta = float(rng.uniform(2.0 * mu, (m + 1) * mu * 1.3))
    mus = [mu] * m
    u = int(rng.integers(0, m))
    mus[u] = mu + dlt
    v1 = min(x * (delta - x) - s2 for x in mus)
    if v1 <= 0:
        return None
    c = float(rng.uniform(0.01, 1.0) * v1)
    p = GameParams.create(n=100, m=m, mu=mus, sigma2=s2, c=c, delta=delta, s_max=2 * max(mus))
    if rng.random() < 0.5:
        w = PriceVector.zeros(m)
    else:
        w = PriceVector.of([
            0.0 if rng.random() < 0.3 else float(rng.uniform(0, 0.5 * p.price_bound(j)))
            for j in range(m)
        ])
    return p, w


# ---------------------------------------------------------------- oracles


def brute_expected_payoff(links, p, w, i):
    """Expected payoff of retailer ``i`` straight from the link list."""
    deg = [0] * p.m
    for _, j in links:
        deg[j] += 1
    active = [j for j in range(p.m) if deg[j] > 0]
    tm = sum(p.mu[k] for k in active)
    total = 0.0
    for r, j in links:
        if r == i:
            v = (p.delta - tm) * p.mu[j] - p.sigma2[j]
            total += (v - p.mu[j] * w[j]) / deg[j] - p.c
    return total


def brute_best_deviation(links, p, w, i):
    """Best payoff over all link subsets for retailer ``i``, by enumeration."""
    others = [(r, j) for r, j in links if r != i]
    best = -math.inf
    for k in range(p.m + 1):
        for s in itertools.combinations(range(p.m), k):
            val = brute_expected_payoff(others + [(i, j) for j in s], p, w, i)
            best = max(best, val)
    return best


def brute_is_nash(links, p, w, n):
    for i in range(n):
        cur = brute_expected_payoff(links, p, w, i)
        if brute_best_deviation(links, p, w, i) > cur + 1e-9 * max(1.0, abs(cur)):
            return False
    return True


def all_networks(n, m):
    """Every link set on an n x m bipartite graph."""
    pairs = [(i, j) for i in range(n) for j in range(m)]
    for mask in range(1 << len(pairs)):
        yield [pairs[b] for b in range(len(pairs)) if mask >> b & 1]


def kstar_by_definition(p, w):
    """Smallest K with a negative activation margin for the (K+1)-th cheapest."""
    order = sorted(range(p.m), key=lambda j: (p.sigma2[j] + p.mu[j] * w[j], j))
    tm = 0.0
    for K, j in enumerate(order):
        tm += p.mu[j]
        margin = (p.delta - tm) * p.mu[j] - p.sigma2[j] - p.mu[j] * w[j] - p.c
        if margin < -1e-9 * max(1.0, abs(p.c)):
            return K
    return p.m


def rng(seed):
    return np.random.default_rng(seed)
