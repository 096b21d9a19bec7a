"""Terahertz channel arithmetic: link budget, outage statistics, capacity.

Everything here is closed-form and deterministic; Monte Carlo sampling lives
in mcoutage. dB always means 10*log10 of a power ratio, and the helpers below
are the only conversion points.
"""
from __future__ import annotations

import math
from statistics import NormalDist
from typing import Sequence

from .netmodel import ChannelParams

_LN10_OVER_10 = math.log(10.0) / 10.0
_STD_NORMAL = NormalDist()


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError("dB conversion needs a positive power ratio")
    return 10.0 * math.log10(value)


def normal_cdf(x: float) -> float:
    """Standard normal lower tail, accurate in both tails via erfc."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    return _STD_NORMAL.inv_cdf(p)


def spreading_gain(distance: float, ch: ChannelParams) -> float:
    """Free-space spreading factor (4*pi*f*d/c)^-2, linear."""
    if distance <= 0:
        raise ValueError("distance must be > 0")
    wavefront = 4.0 * math.pi * ch.frequency_hz * distance / ch.propagation_speed_m_s
    return wavefront ** -2.0


def received_power(p_t: float, d: float, xi_db: float, ch: ChannelParams) -> float:
    """Power reaching the receiver over one terahertz hop, W.

    Combines antenna gain, the d^-eta decay, a shadowing realization in dB,
    molecular absorption, and spherical spreading.
    """
    if p_t < 0:
        raise ValueError("p_t must be >= 0")
    if d <= 0:
        raise ValueError("d must be > 0")
    return (p_t * ch.antenna_gain
            * d ** -ch.path_loss_exponent
            * db_to_linear(xi_db)
            * math.exp(-ch.absorption_per_m * d)
            * spreading_gain(d, ch))


def interference_power(interferers: Sequence[tuple[float, float, float]],
                       ch: ChannelParams) -> float:
    """Aggregate power from concurrent (p_t, d, xi_dB) interferers, W."""
    return math.fsum(received_power(p_t, d, xi_db, ch)
                     for p_t, d, xi_db in interferers)


def sinr(p_rx: float, p_i: float, n0: float) -> float:
    """Signal to interference-plus-noise ratio, linear."""
    if n0 <= 0:
        raise ValueError("n0 must be > 0")
    if p_rx < 0 or p_i < 0:
        raise ValueError("powers must be >= 0")
    return p_rx / (p_i + n0)


def required_tx_power(d: float, ch: ChannelParams, margin_db: float = 0.0) -> float:
    """Transmit power that meets the SINR threshold plus margin at distance d, W.

    Noise-limited budget with the shadowing term at its median (0 dB).
    """
    target = db_to_linear(ch.sinr_threshold_db + margin_db)
    unit_gain = received_power(1.0, d, 0.0, ch)
    return target * ch.noise_power_w / unit_gain


def lognormal_fit(components: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Moment-matched lognormal for a sum of independent lognormal powers.

    Components are (mean_dB, std_dB) pairs. The fit matches the exact mean and
    variance of the linear-scale sum and returns the (mean_dB, std_dB) of the
    single approximating component. A one-element list is returned unchanged.
    """
    if not components:
        raise ValueError("need at least one component")
    for _, sigma_db in components:
        if sigma_db < 0:
            raise ValueError("std_dB must be >= 0")
    if len(components) == 1:
        return (components[0][0], components[0][1])
    total_mean = 0.0
    total_var = 0.0
    for mean_db, sigma_db in components:
        mu = mean_db * _LN10_OVER_10
        s2 = (sigma_db * _LN10_OVER_10) ** 2
        m = math.exp(mu + s2 / 2.0)
        total_mean += m
        total_var += (math.exp(s2) - 1.0) * m * m
    fitted_s2 = math.log1p(total_var / (total_mean * total_mean))
    fitted_mu = math.log(total_mean) - fitted_s2 / 2.0
    return fitted_mu / _LN10_OVER_10, math.sqrt(fitted_s2) / _LN10_OVER_10


def outage_single(gamma_th_db: float, phi_db: float, sigma_db: float) -> float:
    """Chance a lognormal SINR falls below the decoding threshold.

    Lower-tail probability of the dB-domain normal; degenerates to a step
    function when sigma_db is zero.
    """
    if sigma_db < 0:
        raise ValueError("sigma_db must be >= 0")
    if sigma_db == 0.0:
        return 1.0 if phi_db < gamma_th_db else 0.0
    return normal_cdf((gamma_th_db - phi_db) / sigma_db)


def daf_threshold_db(rate_bits_s: float, bandwidth: float, layers: int = 1) -> float:
    """SINR threshold (dB) for decoding ``rate_bits_s`` across ``layers`` hops."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    gamma = 2.0 ** (layers * rate_bits_s / bandwidth) - 1.0
    if gamma <= 0:
        raise ValueError("rate_bits_s must be > 0")
    return linear_to_db(gamma)


def fusion_outage(link_sinrs_db: Sequence[tuple[float, float]], n_layers: int,
                  rate_bits_s: float, bandwidth: float) -> float:
    """Chance every branch into a fusing node decodes below the rate's threshold.

    Branches are (phi_dB, sigma_dB) pairs fading independently, so their
    single-link outages multiply. A non-positive rate demand has a threshold
    of zero or below in the linear domain and cannot cause outage.
    """
    if not link_sinrs_db:
        raise ValueError("need at least one branch")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    if n_layers * rate_bits_s <= 0:
        return 0.0
    threshold_db = daf_threshold_db(rate_bits_s, bandwidth, n_layers)
    product = 1.0
    for phi_db, sigma_db in link_sinrs_db:
        product *= outage_single(threshold_db, phi_db, sigma_db)
    return product


def cooperative_fusion_outage(gamma_th_db: float, phi_db: float,
                              sigma_db: float, branches: int) -> float:
    """Outage when equal-statistics branches are combined before decoding.

    Averaging k independent branches in the dB domain shrinks the effective
    deviation by sqrt(k), so each added branch tightens outage as
    Phi(sqrt(k) * z) rather than by a simple product of tail masses.
    """
    if branches < 1:
        raise ValueError("branches must be >= 1")
    if sigma_db < 0:
        raise ValueError("sigma_db must be >= 0")
    if sigma_db == 0.0:
        return 1.0 if phi_db < gamma_th_db else 0.0
    z = (gamma_th_db - phi_db) / sigma_db
    return normal_cdf(math.sqrt(branches) * z)


def calibrate_mean_db(target_outage: float, gamma_th_db: float,
                      sigma_db: float) -> float:
    """Branch mean (dB) that produces the target single-link outage."""
    if not 0.0 < target_outage < 1.0:
        raise ValueError("target_outage must be in (0, 1)")
    if sigma_db <= 0:
        raise ValueError("sigma_db must be > 0")
    return gamma_th_db - sigma_db * normal_quantile(target_outage)


def capacity(subchannels: Sequence[tuple[float, float]]) -> float:
    """Shannon capacity over parallel (bandwidth, sinr) sub-channels, bit/s.

    Per-channel terms are each rounded once and summed with fsum, so the total
    over a concatenation equals the fsum of the parts exactly.
    """
    terms = []
    for bandwidth, gamma in subchannels:
        if bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        if gamma < 0:
            raise ValueError("sinr must be >= 0")
        terms.append(bandwidth * math.log2(1.0 + gamma))
    return math.fsum(terms)


def outage_capacity(bandwidth: float, gamma: float, p_out: float) -> float:
    """Throughput that survives outage: capacity scaled by availability."""
    if not 0.0 <= p_out <= 1.0:
        raise ValueError("p_out must be in [0, 1]")
    return capacity(((bandwidth, gamma),)) * (1.0 - p_out)


def shadowing_db(rng, sigma_db: float, size=None):
    """Draw shadowing realizations in dB from the configured deviation."""
    if sigma_db < 0:
        raise ValueError("sigma_db must be >= 0")
    return rng.normal(0.0, sigma_db, size)
