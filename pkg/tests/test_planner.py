import math

import numpy as np
import pytest

from helpers import main_params, random_homogeneous
from supplynet import BoundaryOptimum, GameParams, ShapeMismatch
from supplynet.payoff import expected_welfare, expected_welfare_homogeneous
from supplynet.planner import (
    planner_enumerate,
    planner_optimum,
    planner_welfare_closed,
    pos_closed,
    price_of_stability,
)


def test_main_instance():
    sol = planner_optimum(main_params())
    assert sol.y == 8.75
    assert sol.K_opt == 8
    assert sol.welfare_opt == 152.0
    assert sol.network.size == 8
    assert all(d == 1 for d in sol.network.degrees if d)


def test_witness_welfare_matches():
    p = main_params()
    sol = planner_optimum(p)
    from supplynet import PriceVector

    assert expected_welfare(sol.network, p, PriceVector.zeros(20)).total == sol.welfare_opt


def test_integral_y():
    p = GameParams.create(n=20, m=20, mu=1.0, sigma2=0.0, c=1.0, delta=10.0)
    sol = planner_optimum(p)
    assert (sol.K_opt, sol.welfare_opt) == (9, 40.5)


def test_empty_market():
    assert planner_welfare_closed(1.0, 1.9, 1.0, 0.5) == 0.0
    p = GameParams.create(n=5, m=5, mu=1.0, sigma2=1.9, c=0.5, delta=1.0)
    assert planner_optimum(p).K_opt == 0


def test_boundary_optimum():
    with pytest.raises(BoundaryOptimum):
        planner_optimum(main_params(m=7))
    with pytest.raises(BoundaryOptimum):
        planner_optimum(main_params(n=7))


def test_heterogeneous_rejected():
    p = GameParams.create(n=5, m=3, mu=[1, 2, 1], sigma2=0.1, c=0.1)
    with pytest.raises(ShapeMismatch):
        planner_optimum(p)


def test_closed_form_matches_direct_evaluation():
    r = np.random.default_rng(41)
    for _ in range(300):
        p = random_homogeneous(r)
        sol = planner_optimum(p)
        direct = expected_welfare_homogeneous(p.mu[0], p.sigma2[0], p.delta, p.c, sol.K_opt, sol.K_opt)
        assert sol.welfare_opt == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_enumeration_argmax_is_nearest_integer():
    # the closed form uses floor(y); the discrete argmax is floor(y) + 1 when frac(y) > 1/2
    assert planner_enumerate(main_params()) == (9, 153.0)
    r = np.random.default_rng(42)
    for _ in range(300):
        p = random_homogeneous(r)
        sol = planner_optimum(p)
        K, best = planner_enumerate(p)
        f = sol.y - math.floor(sol.y)
        if abs(f - 0.5) < 1e-9:
            continue
        assert K == (sol.K_opt + 1 if f > 0.5 else sol.K_opt)
        assert best >= sol.welfare_opt - 1e-9 * abs(best)


def test_price_of_stability():
    assert price_of_stability(main_params()) == pytest.approx(132 / 152, rel=1e-12)
    p = GameParams.create(n=20, m=20, mu=1.0, sigma2=0.0, c=1.0, delta=10.0)
    assert price_of_stability(p) == 1.0


def test_pos_at_most_one():
    r = np.random.default_rng(43)
    for _ in range(500):
        p = random_homogeneous(r)
        assert pos_closed(p.mu[0], p.sigma2[0], p.delta, p.c) <= 1.0


def test_pos_needs_positive_welfare():
    with pytest.raises(ValueError):
        pos_closed(1.0, 1.9, 1.0, 0.5)
