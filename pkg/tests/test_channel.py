"""Link budget, shadowing statistics, fusion laws, and capacity."""
import math

import numpy as np
import pytest

from nanonetsim.channel import (calibrate_mean_db, capacity,
                                cooperative_fusion_outage, daf_threshold_db,
                                db_to_linear, fusion_outage, interference_power,
                                linear_to_db, lognormal_fit, normal_cdf,
                                normal_quantile, outage_capacity, outage_single,
                                received_power, required_tx_power, shadowing_db,
                                sinr, spreading_gain)
from nanonetsim.netmodel import ChannelParams

CH = ChannelParams()


def test_db_round_trip():
    for v in (0.001, 1.0, 3.1622776601683795, 1e6):
        assert db_to_linear(linear_to_db(v)) == pytest.approx(v, rel=1e-12)
    assert db_to_linear(0.0) == 1.0
    assert linear_to_db(10.0) == pytest.approx(10.0, rel=1e-15)


def test_spreading_matches_hand_value():
    # (c / (4 pi f d))^2 at 1 THz and 10 mm, evaluated by hand.
    assert spreading_gain(0.010, CH) == pytest.approx(5.699316579881501e-06,
                                                      rel=1e-12)


def test_received_power_combines_all_factors():
    # G * d^-eta * shadow * exp(-K d) * spreading, each factor hand-applied.
    d = 0.01
    expected = (1.0 * d ** -3.0 * 10 ** (2.0 / 10.0) * math.exp(-100.0 * d)
                * (3e8 / (4 * math.pi * 1e12 * d)) ** 2)
    assert received_power(1.0, d, 2.0, CH) == pytest.approx(expected, rel=1e-12)
    # Linear in transmit power.
    assert received_power(3.0, d, 2.0, CH) == pytest.approx(3 * expected, rel=1e-12)


def test_interference_adds_received_powers():
    terms = [(1e-12, 0.004, 0.0), (2e-12, 0.007, 1.0)]
    expected = sum(received_power(p, d, x, CH) for p, d, x in terms)
    assert interference_power(terms, CH) == pytest.approx(expected, rel=1e-15)


def test_sinr_definition():
    assert sinr(4e-12, 1e-12, 1e-12) == pytest.approx(2.0, rel=1e-15)
    assert sinr(4e-12, 0.0, 1e-12) == pytest.approx(4.0, rel=1e-15)


def test_required_tx_power_round_trips():
    for d in (0.002, 0.005, 0.01):
        p = required_tx_power(d, CH, margin_db=3.0)
        got = sinr(received_power(p, d, 0.0, CH), 0.0, CH.noise_power_w)
        target = db_to_linear(CH.sinr_threshold_db + 3.0)
        assert got == pytest.approx(target, rel=1e-12)


def test_outage_single_is_lower_tail():
    # Median 1 dB above threshold, sigma 1 dB: Phi(-1), hand value.
    assert outage_single(10.0, 11.0, 1.0) == pytest.approx(
        0.15865525393145707, rel=1e-12)
    assert outage_single(10.0, 10.0, 1.0) == 0.5
    # More margin, less outage.
    assert outage_single(10.0, 12.0, 1.0) < outage_single(10.0, 11.0, 1.0)


def test_outage_single_degenerate_sigma():
    assert outage_single(10.0, 9.0, 0.0) == 1.0
    assert outage_single(10.0, 10.0, 0.0) == 0.0
    assert outage_single(10.0, 11.0, 0.0) == 0.0


def test_normal_helpers_are_inverses():
    for p in (0.01, 0.12, 0.5, 0.9):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, rel=1e-12)


def test_lognormal_fit_single_component_identity():
    assert lognormal_fit([(4.0, 2.5)]) == (4.0, 2.5)


def test_lognormal_fit_matches_sum_moments():
    # Moment matching is exact for the mean and variance of the sum; check
    # against the closed-form lognormal moments evaluated by hand.
    comps = [(0.0, 2.0), (3.0, 4.0)]
    phi, sig = lognormal_fit(comps)
    k = math.log(10) / 10
    mean_sum = sum(math.exp(m * k + (s * k) ** 2 / 2) for m, s in comps)
    var_sum = sum((math.exp((s * k) ** 2) - 1) * math.exp(2 * m * k + (s * k) ** 2)
                  for m, s in comps)
    fit_mean = math.exp(phi * k + (sig * k) ** 2 / 2)
    fit_var = (math.exp((sig * k) ** 2) - 1) * math.exp(2 * phi * k + (sig * k) ** 2)
    assert fit_mean == pytest.approx(mean_sum, rel=1e-12)
    assert fit_var == pytest.approx(var_sum, rel=1e-12)


def test_lognormal_fit_against_sampled_sums():
    # Statistical check with a tolerance floored by the estimator noise.
    rng = np.random.default_rng(21)
    k = math.log(10) / 10
    comps = [(2.0, 3.0), (5.0, 2.0), (0.0, 1.5)]
    phi, sig = lognormal_fit(comps)
    n = 200_000
    total = np.zeros(n)
    for m, s in comps:
        total += np.exp(rng.normal(m * k, s * k, n))
    fit_mean = math.exp(phi * k + (sig * k) ** 2 / 2)
    fit_var = (math.exp((sig * k) ** 2) - 1) * math.exp(2 * phi * k + (sig * k) ** 2)
    se_mean = total.std() / math.sqrt(n)
    assert abs(total.mean() - fit_mean) < max(0.01 * fit_mean, 6 * se_mean)
    m4 = np.mean((total - total.mean()) ** 4)
    se_var = math.sqrt(max(m4 - total.var() ** 2, 0.0) / n)
    assert abs(total.var() - fit_var) < max(0.01 * fit_var, 6 * se_var)


def test_fusion_outage_product_law():
    # Rate chosen so the decode threshold sits at exactly 10 dB.
    rate = math.log2(11.0) * 1e9
    p1 = fusion_outage([(11.0, 1.0)], 1, rate, 1e9)
    assert 0.0 < p1 < 1.0
    for k in range(2, 7):
        pk = fusion_outage([(11.0, 1.0)] * k, 1, rate, 1e9)
        assert pk == pytest.approx(p1 ** k, rel=1e-12)
    probs = [fusion_outage([(11.0, 1.0)] * k, 1, rate, 1e9) for k in range(1, 7)]
    assert all(a > b for a, b in zip(probs, probs[1:]))


def test_fusion_outage_zero_rate_never_out():
    assert fusion_outage([(11.0, 1.0)], 1, 0.0, 1e9) == 0.0
    assert fusion_outage([(11.0, 1.0)], 0, 1e9, 1e9) == 0.0


def test_daf_threshold_examples():
    # 2^(C/B) - 1 in dB: C = B gives 0 dB; two layers give 10 log10(3).
    assert daf_threshold_db(1e9, 1e9) == pytest.approx(0.0, abs=1e-12)
    assert daf_threshold_db(1e9, 1e9, layers=2) == pytest.approx(
        10 * math.log10(3), rel=1e-12)


def test_cooperative_fusion_anchor_points():
    # Calibrated so one link fails 12% of the time at a 10 dB threshold;
    # the multi-branch law then lands on the published anchor values.
    sigma = 1.0
    phi = calibrate_mean_db(0.12, 10.0, sigma)
    assert phi == pytest.approx(10.0 + 1.17498679206609, rel=1e-12)
    assert cooperative_fusion_outage(10.0, phi, sigma, 1) == pytest.approx(
        0.12, abs=1e-12)
    assert cooperative_fusion_outage(10.0, phi, sigma, 2) == pytest.approx(
        0.04828825027567407, rel=1e-9)
    assert cooperative_fusion_outage(10.0, phi, sigma, 4) == pytest.approx(
        0.009387371716679582, rel=1e-9)


def test_calibration_holds_for_any_sigma():
    for sigma in (0.5, 1.0, 4.0, 8.0):
        phi = calibrate_mean_db(0.12, 10.0, sigma)
        assert outage_single(10.0, phi, sigma) == pytest.approx(0.12, abs=1e-12)


def test_capacity_single_and_concatenated():
    assert capacity([(1e9, 3.0)]) == pytest.approx(2e9, rel=1e-15)
    assert capacity([(1e9, 3.0), (2e9, 1.0)]) == pytest.approx(4e9, rel=1e-15)
    assert capacity([]) == 0.0


def test_capacity_additivity_exact_on_representable_inputs():
    # Gains of 2^k - 1 make each term an exact float, so concatenation must
    # add with zero error.
    rng = np.random.default_rng(5)
    for _ in range(300):
        a = [(float(2 ** int(rng.integers(10, 31))),
              float(2 ** int(rng.integers(1, 21)) - 1))
             for _ in range(int(rng.integers(1, 5)))]
        b = [(float(2 ** int(rng.integers(10, 31))),
              float(2 ** int(rng.integers(1, 21)) - 1))
             for _ in range(int(rng.integers(1, 5)))]
        assert capacity(a + b) == capacity(a) + capacity(b)


def test_capacity_additivity_within_rounding_generally():
    rng = np.random.default_rng(6)
    for _ in range(300):
        a = [(float(rng.uniform(1e6, 1e9)), float(rng.uniform(0.01, 100)))
             for _ in range(int(rng.integers(1, 6)))]
        b = [(float(rng.uniform(1e6, 1e9)), float(rng.uniform(0.01, 100)))
             for _ in range(int(rng.integers(1, 6)))]
        lhs, rhs = capacity(a + b), capacity(a) + capacity(b)
        assert abs(lhs - rhs) <= 4 * math.ulp(max(lhs, rhs))


def test_outage_capacity_scales_exactly():
    for gamma in (0.5, 3.0, 31.0):
        c = capacity([(1e9, gamma)])
        assert outage_capacity(1e9, gamma, 0.1) == 0.9 * c
        assert outage_capacity(1e9, gamma, 0.0) == c
        assert outage_capacity(1e9, gamma, 1.0) == 0.0


def test_shadowing_samples_match_requested_spread():
    rng = np.random.default_rng(9)
    xs = shadowing_db(rng, 2.0, 200_000)
    assert abs(float(np.mean(xs))) < 0.02
    assert float(np.std(xs)) == pytest.approx(2.0, abs=0.02)
