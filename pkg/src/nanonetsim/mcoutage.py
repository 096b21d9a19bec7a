"""Monte Carlo validation of the fusion outage laws.

Each trial draws k shadowed link SINRs (dB, normal). Two decision rules are
tallied against their closed forms: the all-links-below rule against the
product law, and the dB-mean-below rule against the cooperative law. Trials
run in fixed-size batches whose sub-seeds depend only on the batch index, so
counts sum to the same totals under any thread count or partitioning.
"""
from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel

DEFAULT_BATCH = 1 << 17
CALIBRATION_TARGET = 0.12     # single-link outage the default mean reproduces
CALIBRATION_GAMMA_DB = 10.0


def thread_count() -> int:
    """Worker cap: NANONET_THREADS when set, else the CPU count (max 8)."""
    raw = os.environ.get("NANONET_THREADS", "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise ValueError("NANONET_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class McRun:
    """One Monte Carlo campaign over a threshold axis."""
    k_links: int
    gamma_axis_db: tuple[float, ...]
    trials: int = 10**6
    seed: int = 1
    link_mean_db: float | None = None     # None: calibrated to the 0.12 anchor
    link_sigma_db: float = 1.0
    tolerance: float = 1e-6
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.k_links < 1:
            raise ValueError("k_links must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.link_sigma_db < 0:
            raise ValueError("link_sigma_db must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def resolved_mean_db(self) -> float:
        if self.link_mean_db is not None:
            return self.link_mean_db
        return channel.calibrate_mean_db(CALIBRATION_TARGET,
                                         CALIBRATION_GAMMA_DB,
                                         self.link_sigma_db)


@dataclass(frozen=True)
class McResult:
    """Tallies per threshold, both rules side by side."""
    run: McRun
    mean_db: float
    gamma_db: tuple[float, ...]
    p_mc: tuple[float, ...]
    p_analytic: tuple[float, ...]
    stderr: tuple[float, ...]
    p_mc_coop: tuple[float, ...]
    p_analytic_coop: tuple[float, ...]
    rows: tuple[tuple[float, ...], ...] = field(init=False)

    def __post_init__(self):
        rows = []
        for i, g in enumerate(self.gamma_db):
            rows.append((g, self.p_mc[i], self.p_analytic[i], self.stderr[i],
                         channel.db_to_linear(g), float(self.run.k_links),
                         self.p_mc_coop[i], self.p_analytic_coop[i]))
        object.__setattr__(self, "rows", tuple(rows))


def _batch_counts(sub_seed: int, n: int, k: int, gammas: np.ndarray,
                  mean_db: float, sigma_db: float) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(sub_seed))
    samples = rng.normal(mean_db, sigma_db, size=(n, k))
    worst = samples.max(axis=1)
    avg = samples.mean(axis=1)
    all_below = np.empty(gammas.size, dtype=np.int64)
    mean_below = np.empty(gammas.size, dtype=np.int64)
    for i, g in enumerate(gammas):
        all_below[i] = np.count_nonzero(worst < g)
        mean_below[i] = np.count_nonzero(avg < g)
    return all_below, mean_below


def mc_outage(run: McRun) -> McResult:
    """Run the campaign and pair empirical rates with their closed forms.

    The same sample matrix serves every threshold (common random numbers),
    so both empirical curves are monotone in gamma by construction.
    """
    mean_db = run.resolved_mean_db()
    gammas = np.asarray(run.gamma_axis_db, dtype=float)
    n_batches = (run.trials + run.batch_size - 1) // run.batch_size
    sizes = [min(run.batch_size, run.trials - i * run.batch_size)
             for i in range(n_batches)]
    sub_seeds = [run.seed ^ i for i in range(n_batches)]

    all_below = np.zeros(gammas.size, dtype=np.int64)
    mean_below = np.zeros(gammas.size, dtype=np.int64)
    workers = min(thread_count(), n_batches)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_batch_counts, sub_seeds, sizes,
                             [run.k_links] * n_batches, [gammas] * n_batches,
                             [mean_db] * n_batches, [run.link_sigma_db] * n_batches)
            for part_all, part_mean in parts:
                all_below += part_all
                mean_below += part_mean
    else:
        for sub_seed, size in zip(sub_seeds, sizes):
            part_all, part_mean = _batch_counts(sub_seed, size, run.k_links,
                                                gammas, mean_db,
                                                run.link_sigma_db)
            all_below += part_all
            mean_below += part_mean

    p_mc = all_below / run.trials
    p_coop = mean_below / run.trials
    p_single = np.array([channel.outage_single(g, mean_db, run.link_sigma_db)
                         for g in gammas])
    p_analytic = p_single ** run.k_links
    p_analytic_coop = np.array([
        channel.cooperative_fusion_outage(g, mean_db, run.link_sigma_db,
                                          run.k_links)
        for g in gammas])
    stderr = np.sqrt(p_mc * (1.0 - p_mc) / run.trials)

    return McResult(run=run, mean_db=mean_db,
                    gamma_db=tuple(float(g) for g in gammas),
                    p_mc=tuple(float(x) for x in p_mc),
                    p_analytic=tuple(float(x) for x in p_analytic),
                    stderr=tuple(float(x) for x in stderr),
                    p_mc_coop=tuple(float(x) for x in p_coop),
                    p_analytic_coop=tuple(float(x) for x in p_analytic_coop))


def mc_vs_analytic_report(result: McResult) -> float:
    """Largest absolute gap between the empirical and product-law curves."""
    return max((abs(a - b) for a, b in zip(result.p_mc, result.p_analytic)),
               default=0.0)


MC_COLUMNS = ("gamma_dB", "p_mc", "p_analytic", "stderr",
              "gamma_linear", "k", "p_mc_coop", "p_analytic_coop")


def mc_to_csv(result: McResult) -> str:
    out = io.StringIO()
    out.write(",".join(MC_COLUMNS) + "\n")
    for row in result.rows:
        g, p_mc, p_an, se, g_lin, k, p_mcc, p_anc = row
        out.write(f"{g!r},{p_mc!r},{p_an!r},{se!r},{g_lin!r},{int(k)},"
                  f"{p_mcc!r},{p_anc!r}\n")
    return out.getvalue()
