"""Piezoelectric harvesting, capacitor storage, and the energy Markov chain.

The storage capacitor charges along a saturating exponential in the number of
vibration cycles; discrete transmission quanta on top of that charging process
form a birth-death chain whose stationary law gives the long-run energy mix.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .netmodel import EnergyParams


class InvalidParams(ValueError):
    """Energy parameters admit no usable chain (storage too small)."""


class ReducibleChain(ValueError):
    """A zero interior rate disconnects the chain; no unique stationary law."""


def v_nps(cycles: float, params: EnergyParams) -> float:
    """Capacitor voltage after a number of harvesting cycles.

    Saturates at the generator voltage; never exceeds it for any cycle count.
    """
    if cycles <= 0:
        return 0.0
    vg = params.generator_voltage_v
    exponent = -cycles * params.charge_per_cycle_c / (vg * params.capacitance_f)
    return vg * (1.0 - math.exp(exponent))


def e_nps(cycles: float, params: EnergyParams) -> float:
    """Stored energy after a number of harvesting cycles, J."""
    v = v_nps(cycles, params)
    return 0.5 * params.capacitance_f * v * v


def e_nps_max(params: EnergyParams) -> float:
    """Storage ceiling: capacitor energy at the generator voltage, J."""
    vg = params.generator_voltage_v
    return 0.5 * params.capacitance_f * vg * vg


def _curve_cycles(energy: float, params: EnergyParams) -> float:
    """Real-valued inverse of e_nps: cycles needed to charge from empty.

    Singular at the ceiling, so the energy argument must sit strictly below it.
    """
    e_max = e_nps_max(params)
    if energy < 0:
        raise ValueError("energy must be >= 0")
    if energy >= e_max:
        raise ValueError("energy must lie below the storage ceiling")
    if energy == 0.0:
        return 0.0
    scale = params.generator_voltage_v * params.capacitance_f / params.charge_per_cycle_c
    return -scale * math.log(1.0 - math.sqrt(energy / e_max))


def cycles_to_energy(energy: float, params: EnergyParams) -> int:
    """Whole harvesting cycles needed to charge from empty to ``energy``.

    Domain error at or above the ceiling, where the charge curve is singular.
    """
    return math.ceil(_curve_cycles(energy, params))


def harvest_rate(energy: float, e_step: float, params: EnergyParams) -> float:
    """Average harvesting power while charging from ``energy`` up one step, W.

    The step's duration is the cycle count the charge curve needs for it,
    clamped to at least one cycle. A step that lands exactly on the ceiling
    would take forever, so its rate is zero.
    """
    if e_step <= 0:
        raise ValueError("e_step must be > 0")
    if energy < 0:
        raise ValueError("energy must be >= 0")
    e_max = e_nps_max(params)
    target = energy + e_step
    if target > e_max * (1.0 + 1e-12):
        raise ValueError("step exceeds the storage ceiling")
    if target >= e_max:
        return 0.0
    dcycles = cycles_to_energy(target, params) - cycles_to_energy(energy, params)
    return (e_step / params.vibration_period_s) / max(1.0, dcycles)


def recharge(energy: float, dt: float, params: EnergyParams) -> float:
    """Energy after harvesting for ``dt`` seconds starting from ``energy``, J.

    Advances the charge curve by dt / vibration_period cycles, so repeated
    short recharges compose exactly like one long recharge.
    """
    e_max = e_nps_max(params)
    energy = max(energy, 0.0)
    if energy >= e_max:
        return e_max
    if dt <= 0.0:
        return energy
    cycles = _curve_cycles(energy, params)
    return e_nps(cycles + dt / params.vibration_period_s, params)


@dataclass(frozen=True)
class EnergyChain:
    """Birth-death chain over whole transmission quanta of stored energy.

    State u holds e_min + u * e_tx joules. rates_h[u] moves u -> u+1 by
    harvesting a quantum; rates_c[u-1] moves u -> u-1 by spending one. The
    generator is the (beta+1)-square tridiagonal rate matrix with zero row
    sums.
    """
    beta: int
    energies: tuple[float, ...]      # J per state, ascending, length beta+1
    rates_h: tuple[float, ...]       # 1/s, length beta
    rates_c: tuple[float, ...]       # 1/s, length beta
    generator: np.ndarray

    @property
    def size(self) -> int:
        return self.beta + 1


def chain_generator(rates_h: tuple[float, ...],
                    rates_c: tuple[float, ...]) -> np.ndarray:
    """Tridiagonal rate matrix from up/down rates; rows sum to zero."""
    n = len(rates_h) + 1
    q = np.zeros((n, n))
    for u in range(n - 1):
        q[u, u + 1] = rates_h[u]
        q[u + 1, u] = rates_c[u]
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def build_chain(params: EnergyParams, consume_rate_lx: float) -> EnergyChain:
    """Energy chain for a node drawing ``consume_rate_lx`` watts on average.

    Harvest rates come from the charge curve at each state's energy level;
    both directions are expressed in quanta per second.
    """
    if consume_rate_lx < 0:
        raise ValueError("consume_rate_lx must be >= 0")
    e_max = e_nps_max(params)
    e_tx = params.e_tx_j
    beta = math.floor((e_max - params.e_min_j) / e_tx)
    if beta < 1:
        raise InvalidParams("storage holds less than one transmission quantum")
    energies = tuple(params.e_min_j + u * e_tx for u in range(beta + 1))
    rates_h = tuple(harvest_rate(e, e_tx, params) / e_tx for e in energies[:-1])
    rates_c = tuple(consume_rate_lx / e_tx for _ in range(beta))
    return EnergyChain(beta=beta, energies=energies, rates_h=rates_h,
                       rates_c=rates_c, generator=chain_generator(rates_h, rates_c))


def stationary_distribution(chain: EnergyChain) -> np.ndarray:
    """Stationary law of the chain via its generator matrix.

    Solves pi @ generator = 0 with the normalization constraint replacing one
    balance equation. Requires every interior rate positive; a severed chain
    has no unique answer.
    """
    if any(r <= 0 for r in chain.rates_h) or any(r <= 0 for r in chain.rates_c):
        raise ReducibleChain("all interior rates must be > 0")
    n = chain.size
    a = chain.generator.T.copy()
    a[-1, :] = 1.0                      # replace one balance row with sum(pi) = 1
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def chain_to_csv(chain: EnergyChain, pi: np.ndarray | None = None) -> str:
    """Chain dump (u, E_u, lambda_h, lambda_c, pi_u); absent rates left blank."""
    if pi is None:
        pi = stationary_distribution(chain)
    out = io.StringIO()
    out.write("u,E_u,lambda_h,lambda_c,pi_u\n")
    for u in range(chain.size):
        lam_h = repr(chain.rates_h[u]) if u < chain.beta else ""
        lam_c = repr(chain.rates_c[u - 1]) if u >= 1 else ""
        out.write(f"{u},{chain.energies[u]!r},{lam_h},{lam_c},{float(pi[u])!r}\n")
    return out.getvalue()


def p_es(e_first_hop: float, e_second_hop: float, theta: float) -> float:
    """Energy-saving probability of relaying over the given pair of hop costs.

    Saturating in the total per-bit spend; theta sets how quickly denser
    deployments make relaying worthwhile.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if e_first_hop < 0 or e_second_hop < 0:
        raise ValueError("hop energies must be >= 0")
    return 1.0 - math.exp(-theta * (e_first_hop + e_second_hop))


def p_es_rate(e_first_hop: float, e_second_hop: float, theta: float) -> float:
    """Sensitivity of p_es to the total two-hop spend, equal to theta*(1-p_es)."""
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if e_first_hop < 0 or e_second_hop < 0:
        raise ValueError("hop energies must be >= 0")
    return theta * math.exp(-theta * (e_first_hop + e_second_hop))
