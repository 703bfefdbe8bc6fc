import math
import warnings

import numpy as np
import pytest

from helpers import main_params, random_homogeneous, random_improved_mean
from supplynet import GameParams, InsufficientRetailers, InsufficientSuppliers, PriceVector, ShapeMismatch
from supplynet.equilibrium import activation_likelihoods, greedy_equilibrium
from supplynet.pricing import (
    NegativePriceWarning,
    best_set_shares,
    best_supplier_sets,
    hetero_mean_prices,
    hetero_mean_welfare_delta,
    hetero_variance_prices,
    hetero_variance_welfare_delta,
    homogeneous_price_equilibrium,
    k_max,
    supplier_price_deviation_check,
    zero_price_welfare,
)


def variance_params(low=0.5, m=20):
    return GameParams.create(n=1000, m=m, mu=2.0, sigma2=[low] + [1.0] * (m - 1), c=0.5, delta=18.0)


def mean_params(mu=1.0, dm=0.1, s2=0.5, c=0.4, delta=20.3, m=20):
    return GameParams.create(n=1000, m=m, mu=[mu + dm] + [mu] * (m - 1), sigma2=s2, c=c, delta=delta)


class TestHomogeneous:
    def test_main_instance(self):
        pe = homogeneous_price_equilibrium(main_params())
        assert pe.w_star.w == (0.0,) * 20
        assert pe.K_ref == 8
        assert set(pe.degrees.values()) == {6}
        assert pe.welfare == 132.0 == pe.welfare_direct

    def test_zero_variance_matches_planner(self):
        p = GameParams.create(n=100, m=20, mu=1.0, sigma2=0.0, c=1.0, delta=10.0)
        pe = homogeneous_price_equilibrium(p)
        assert (pe.K_ref, set(pe.degrees.values()), pe.welfare) == (9, {1}, 40.5)

    def test_boundary_admits_both_counts(self):
        p = GameParams.create(n=100, m=20, mu=1.0, sigma2=0.0, c=1.0, delta=10.0)
        assert homogeneous_price_equilibrium(p).admissible_K == (9, 8)
        assert homogeneous_price_equilibrium(main_params()).admissible_K == (8,)

    def test_population_checks(self):
        with pytest.raises(InsufficientSuppliers):
            homogeneous_price_equilibrium(main_params(m=8))
        with pytest.raises(InsufficientRetailers):
            homogeneous_price_equilibrium(main_params(n=47))

    def test_closed_form_matches_eq7(self):
        r = np.random.default_rng(51)
        for _ in range(300):
            p = random_homogeneous(r)
            pe = homogeneous_price_equilibrium(p)
            assert pe.welfare == pytest.approx(pe.welfare_direct, rel=1e-9, abs=1e-9)

    def test_deviation_check(self):
        p = main_params()
        assert supplier_price_deviation_check(p, PriceVector.zeros(20)).certified

    def test_dominated_price_not_certified(self):
        p = main_params(m=8)
        w = PriceVector.of([5.0] + [0.0] * 7)
        assert not supplier_price_deviation_check(p, w, 1e-2).certified


class TestHeteroVariance:
    def test_prices(self):
        pe = hetero_variance_prices(variance_params())
        assert pe.w_star[0] == 0.25 and pe.w_star.epsilon[0]
        assert pe.w_star.w[1:] == (0.0,) * 19

    def test_equal_variances_fall_back(self):
        pe = hetero_variance_prices(main_params())
        assert pe.case == "homogeneous" and pe.w_star.w == (0.0,) * 20

    def test_two_improved_rejected(self):
        p = GameParams.create(n=10, m=4, mu=2.0, sigma2=[0.5, 0.5, 1, 1], c=0.5, delta=18)
        with pytest.raises(ShapeMismatch):
            hetero_variance_prices(p)

    def test_supplier_profit(self):
        p = variance_params()
        pe = hetero_variance_prices(p)
        a = activation_likelihoods(p, pe.w_star)
        assert a[0] == 1.0
        assert a[0] * p.mu[0] * pe.w_star[0] == 0.5

    def test_count_and_degrees_unchanged(self):
        het = greedy_equilibrium(variance_params(), hetero_variance_prices(variance_params()).w_star)
        base = greedy_equilibrium(main_params(), PriceVector.zeros(20))
        assert het.K == base.K
        assert sorted(het.degrees.values()) == sorted(base.degrees.values())
        assert 0 in het.network.active

    def test_deltas(self):
        d = hetero_variance_welfare_delta(variance_params())
        s = d.stated
        assert (s.supplier_total, s.retailer_total, s.consumer_surplus, s.total) == (0.5, 0.0, -0.25, 0.25)
        assert d.exact.total == pytest.approx(0.25)
        assert d.exact.retailer_total == pytest.approx(0.0, abs=1e-12)

    def test_zero_gap(self):
        d = hetero_variance_welfare_delta(main_params())
        assert d.stated.total == 0.0 and d.closed_total == 0.0

    def test_deviation_check(self):
        p = variance_params()
        w = hetero_variance_prices(p).w_star
        assert supplier_price_deviation_check(p, w, 1e-3).certified
        # one grid step above the stated price the supplier is never linked to
        up = w.with_price(0, 0.25 + 1e-3)
        assert activation_likelihoods(p, up)[0] == 0.0


class TestBestSets:
    def test_small_example(self):
        p = GameParams.create(n=10, m=3, mu=[1.5, 1, 1], sigma2=0.25, c=0.25, delta=4.0)
        for method in ("exhaustive", "structured"):
            assert best_supplier_sets(p, K=2, method=method).sets == ((1, 2),)
            assert k_max(p, method=method) == 3

    def test_homogeneous(self):
        p = main_params(m=10)
        assert k_max(p, method="exhaustive") == 8
        assert len(best_supplier_sets(p, K=3, method="exhaustive").sets) == math.comb(10, 3)
        assert best_supplier_sets(p, K=9, method="exhaustive").sets == ()
        assert best_supplier_sets(p, K=11).sets == ()

    def test_structured_matches_exhaustive(self):
        r = np.random.default_rng(61)
        seen = 0
        while seen < 60:
            case = random_improved_mean(r)
            if case is None:
                continue
            p, w = case
            seen += 1
            assert k_max(p, w, "exhaustive") == k_max(p, w, "structured")
            ex = best_set_shares(p, w, "exhaustive")
            st = best_set_shares(p, w, "structured")
            assert ex == pytest.approx(st, abs=1e-12)


class TestHeteroMean:
    def test_example(self):
        p = mean_params()
        pe = hetero_mean_prices(p)
        assert pe.K_ref == 19
        assert pe.w_star[0] == pytest.approx(0.1 * (1.3 / 1.1 - 1), rel=1e-12)
        assert abs(pe.w_star[0] - 0.01818) < 1e-5
        assert pe.w_star.epsilon[0] and not pe.negative_price

    def test_deltas(self):
        d = hetero_mean_welfare_delta(mean_params(), 19)
        assert d.stated.supplier_total == pytest.approx(0.02, abs=1e-12)
        assert d.stated.consumer_surplus == pytest.approx(1.905, abs=1e-12)
        assert d.stated.retailer_total == 0.0
        assert d.stated.total == pytest.approx(d.closed_total, abs=1e-12)
        assert d.closed_total == pytest.approx(1.925, abs=1e-12)
        # exact network evaluation differs from the approximation by the residual
        assert d.exact.supplier_total == pytest.approx(0.02, abs=1e-9)
        assert d.exact.consumer_surplus == pytest.approx(1.905, abs=1e-9)
        assert d.exact.retailer_total == pytest.approx(5.4, abs=1e-9)
        assert d.retailer_residual == pytest.approx(5.5, abs=1e-9)

    def test_zero_shift(self):
        p = main_params()
        assert hetero_mean_prices(p).w_star.w == (0.0,) * 20
        assert hetero_mean_welfare_delta(p, 8).stated.total == 0.0

    def test_negative_price_clamped(self):
        p = GameParams.create(n=1000, m=60, mu=[2.5] + [2.0] * 59, sigma2=1.0, c=0.5, delta=100.0)
        assert k_max(p, method="structured") == 49
        with pytest.warns(NegativePriceWarning):
            pe = hetero_mean_prices(p)
        assert pe.raw_price == pytest.approx(-0.1, abs=1e-12)
        assert pe.w_star[0] == 0.0 and pe.negative_price

    def test_single_active_gives_interval(self):
        p = GameParams.create(n=100, m=5, mu=[1.2, 1, 1, 1, 1], sigma2=0.1, c=1.0, delta=2.3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativePriceWarning)
            pe = hetero_mean_prices(p)
        assert pe.K_ref == 1
        assert pe.others_interval == pytest.approx((0.0, 2.3 - 1 - 1.1))

    def test_zero_price_welfare_helper(self):
        assert zero_price_welfare(2, 1, 18, 0.5) == 132.0
