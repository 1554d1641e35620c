"""Pathwise simulation of time-changed counting processes and goodness-of-fit
against the analytic pmfs.

``M(L(t))`` is simulated by its construction: the clock value ``L(t)`` is the
first passage of a simulated subordinator path over ``t``; given ``L(t)`` the
number of arrivals is Poisson with mean ``Lambda L(t)`` and each arrival
adds an independent jump of size ``j`` with probability ``lambda_j / Lambda``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .processes import GcpParams, PmfTable, TimeChangeParams
from .subordinators import HorizonTooShort, first_passage

__all__ = [
    "McConfig",
    "EmpiricalPmf",
    "InsufficientCoverage",
    "sample_inverse_clock",
    "simulate_tc_gcp",
    "compare_pmf",
]

MERGE_THRESHOLD = 5.0
MIN_COVERAGE = 1.0 - 1e-4


class InsufficientCoverage(ValueError):
    """The analytic table misses too much mass for a meaningful comparison."""


@dataclass(frozen=True)
class McConfig:
    """Simulation settings.

    The grid for the clock is set from the typical clock size
    ``scale = 1 / f(1/t)``: ``horizon = horizon_factor * scale`` and
    ``dt = dt_rel * horizon``.  Paths are split in blocks of ``block_size``,
    each with its own Philox stream spawned from ``seed``, so results do
    not depend on ``threads``.
    """

    n_paths: int = 100_000
    seed: int = 0
    horizon_factor: float = 10.0
    dt_rel: float = 1e-3
    block_size: int = 10_000
    threads: int = 1
    max_doublings: int = 3

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if not 0 < self.dt_rel <= 1e-2:
            raise ValueError("dt_rel must lie in (0, 1e-2]")
        if not self.horizon_factor > 0:
            raise ValueError("horizon_factor must be positive")
        if self.block_size < 1 or self.threads < 1 or self.max_doublings < 0:
            raise ValueError("block_size and threads must be >= 1, max_doublings >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "seed": self.seed,
            "horizon_factor": self.horizon_factor,
            "dt_rel": self.dt_rel,
            "block_size": self.block_size,
        }


@dataclass
class EmpiricalPmf:
    """Counts of ``M(L(t)) = n`` over the simulated paths."""

    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def n_paths(self) -> int:
        return int(self.counts.sum())

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.n_paths


def _block_sizes(cfg: McConfig) -> list[int]:
    full, rest = divmod(cfg.n_paths, cfg.block_size)
    return [cfg.block_size] * full + ([rest] if rest else [])


def _run_blocks(fn, cfg: McConfig):
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(_block_sizes(cfg)))
    jobs = list(zip(_block_sizes(cfg), seeds))
    if cfg.threads == 1:
        return [fn(size, ss) for size, ss in jobs]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


def _clock_block(tc: TimeChangeParams, t: float, cfg: McConfig, size: int, ss):
    """Clock values for one block; returns (samples, generator, doublings)."""
    if tc.kind == "identity":
        return np.full(size, float(t)), np.random.Generator(np.random.Philox(ss)), 0
    spec = tc.subordinator()
    base = cfg.horizon_factor * tc.timescale(t)
    dt = cfg.dt_rel * base
    for doubling in range(cfg.max_doublings + 1):
        rng = np.random.Generator(np.random.Philox(ss))
        try:
            L = first_passage(spec, t, size, dt, base * 2**doubling, rng)
            return L, rng, doubling
        except HorizonTooShort:
            continue
    raise HorizonTooShort(
        f"clock did not reach t={t:g} within {cfg.max_doublings} horizon doublings"
    )


def sample_inverse_clock(tc: TimeChangeParams, t: float, cfg: McConfig) -> np.ndarray:
    """``cfg.n_paths`` independent draws of ``L(t)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    out = _run_blocks(lambda size, ss: _clock_block(tc, t, cfg, size, ss)[0], cfg)
    return np.concatenate(out)


def simulate_tc_gcp(
    tc: TimeChangeParams, params: GcpParams, t: float, cfg: McConfig
) -> EmpiricalPmf:
    """Empirical law of ``M(L(t))`` from ``cfg.n_paths`` paths.

    A block whose paths do not all cross ``t`` before the horizon is rerun
    from the same stream with the horizon doubled (at most
    ``cfg.max_doublings`` times).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    law = params.jump_law[1:]
    sizes = np.arange(1, params.k + 1)

    def block(size, ss):
        L, rng, doublings = _clock_block(tc, t, cfg, size, ss)
        arrivals = rng.poisson(params.Lambda * L)
        if params.k == 1:
            m = arrivals
        else:
            m = rng.multinomial(arrivals, law) @ sizes
        return np.bincount(m), doublings

    results = _run_blocks(block, cfg)
    width = max(r[0].size for r in results)
    counts = np.zeros(width, dtype=np.int64)
    for c, _ in results:
        counts[: c.size] += c
    meta = {
        "t": t,
        "clock": tc.as_dict(),
        "rates": list(params.rates),
        **cfg.to_dict(),
        "dt": cfg.dt_rel * cfg.horizon_factor * tc.timescale(t) if tc.kind != "identity" else None,
        "horizon_doublings": max(r[1] for r in results),
    }
    return EmpiricalPmf(counts, meta)


def compare_pmf(emp: EmpiricalPmf, analytic: PmfTable, merge_threshold: float = MERGE_THRESHOLD) -> dict:
    """Total variation distance and chi-square goodness of fit.

    The analytic table is extended by a tail bin holding the missing mass
    ``1 - mass_covered``.  For the chi-square test, consecutive bins are
    merged left to right until each holds at least ``merge_threshold``
    expected counts; a short remainder joins the last full bin.

    Raises
    ------
    InsufficientCoverage
        If ``analytic.mass_covered < 1 - 1e-4``.
    """
    if analytic.mass_covered < MIN_COVERAGE:
        raise InsufficientCoverage(
            f"analytic mass {analytic.mass_covered:.6g} < {MIN_COVERAGE:g}"
        )
    N = analytic.truncation_n
    n = emp.n_paths
    p = np.append(analytic.probs, max(0.0, 1.0 - analytic.mass_covered))
    obs = np.zeros(N + 2)
    c = emp.counts
    obs[: min(c.size, N + 1)] = c[: N + 1]
    obs[N + 1] = c[N + 1 :].sum()
    freq = obs / n
    tv = 0.5 * float(np.abs(freq - p).sum())

    expected = n * p
    bins_o, bins_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, expected):
        acc_o += o
        acc_e += e
        if acc_e >= merge_threshold:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if bins_e:
            bins_o[-1] += acc_o
            bins_e[-1] += acc_e
        else:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
    bins_o = np.asarray(bins_o)
    bins_e = np.asarray(bins_e)
    dof = bins_e.size - 1
    if dof >= 1:
        chi2 = float(np.sum((bins_o - bins_e) ** 2 / bins_e))
        pvalue = float(stats.chi2.sf(chi2, dof))
    else:
        chi2, pvalue = 0.0, 1.0
    return {
        "schema_version": 1,
        "tv": tv,
        "chi2": chi2,
        "chi2_dof": dof,
        "chi2_pvalue": pvalue,
        "merge_threshold": merge_threshold,
        "n_paths": n,
        "seed": emp.meta.get("seed"),
        "params": {k: v for k, v in emp.meta.items() if k not in ("seed", "n_paths")},
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
