"""Plain and importance-sampled price estimators with table-style reports.

Paths are simulated in fixed-size blocks, each block on its own derived
random substream, and block statistics are merged in block order.  The
partition depends only on the sample size, so results are bit-identical
across worker-thread counts.  Prices are reported discounted, in cents.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import WeightOverflowError
from .models import simulate
from .payoffs import evaluate_batch
from .stats import RunningMoments
from .training import MAX_LOG_WEIGHT, variance_ratio
from . import streams

DEFAULT_BLOCK_SIZE = 2048

# Stable field names of emitted report rows.
REPORT_FIELDS = ("label", "measure", "n", "mean_cents", "se_pct", "kappa",
                 "theta", "vr", "seed", "per_sample_variance")


@dataclass(frozen=True)
class EstimatorReport:
    """One estimator summary: a single row of the result tables.

    ``se_pct`` is the standard error as a percent of the mean, ``kappa``
    the fraction of paths whose basket average beat the strike, ``theta``
    the knocked-out fraction (barrier payoffs only) and
    ``per_sample_variance`` the sample variance of one discounted per-path
    estimate in cents squared (the quantity variance ratios compare).
    ``wall_seconds`` is diagnostic only and never written to artifacts.
    """

    label: str
    measure: str
    sample_size: int
    mean_cents: float
    se_pct: float
    kappa: float
    theta: float | None
    per_sample_variance: float
    seed: int
    wall_seconds: float


@dataclass(frozen=True)
class _BlockResult:
    moments: RunningMoments
    above: int
    knocked: int | None
    states: np.ndarray | None


def _payoff_batch(payoff, states, grid):
    # duck-typed escape hatch: payoff objects may bring their own batch
    # evaluator (test oracles price terminal-value payoffs this way)
    custom = getattr(payoff, "evaluate_batch", None)
    if custom is not None:
        return custom(states, grid)
    return evaluate_batch(payoff, states, grid)


def _block_plan(total, block_size):
    """Fixed partition of the sample into (index, start, size) blocks."""
    blocks = []
    start = 0
    while start < total:
        size = min(block_size, total - start)
        blocks.append((len(blocks), start, size))
        start += size
    return blocks


def _simulate_block(model, payoff, grid, cov, drift, seed, index, size,
                    discount_cents, keep_states, zero_noise):
    rng = streams.substream(seed, streams.ESTIMATE, index)
    forced = None
    if zero_noise:
        forced = np.zeros((size, grid.n_steps, cov.d))
    batch = simulate(model, grid, cov, drift=drift, rng=rng, n_paths=size,
                     driver_increments=forced)
    pay = _payoff_batch(payoff, batch.states, grid)
    if drift is None:
        values = pay.values * discount_cents
    else:
        log_w = batch.log_inverse_likelihood
        if np.any(log_w > MAX_LOG_WEIGHT):
            raise WeightOverflowError(
                f"log likelihood ratio reached {log_w.max():.1f} in block "
                f"{index}; drift adjustment too large")
        values = pay.values * np.exp(log_w) * discount_cents
    knocked = None if pay.knocked_out is None else int(pay.knocked_out.sum())
    return _BlockResult(
        moments=RunningMoments.from_array(values),
        above=int(pay.above_strike.sum()),
        knocked=knocked,
        states=batch.states if keep_states else None,
    )


def _write_dump_header(fh, n_state):
    cols = ",".join(f"state_{j}" for j in range(n_state))
    fh.write(f"path_id,step,{cols}\n")


def _dump_block(fh, states, start):
    n_paths, n_nodes, n_state = states.shape
    for p in range(n_paths):
        for k in range(n_nodes):
            row = ",".join(repr(float(x)) for x in states[p, k])
            fh.write(f"{start + p},{k},{row}\n")


def _estimate(model, payoff, grid, cov, drift, seed, n, label, threads,
              block_size, dump_path, zero_noise=False):
    if n <= 0:
        raise ValueError("sample size must be positive")
    begin = time.perf_counter()
    discount_cents = 100.0 * math.exp(-model.rate * grid.horizon)
    blocks = _block_plan(n, block_size)

    def worker(block):
        index, start, size = block
        return _simulate_block(model, payoff, grid, cov, drift, seed, index,
                               size, discount_cents, dump_path is not None,
                               zero_noise)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, blocks))
    else:
        results = [worker(b) for b in blocks]

    moments = RunningMoments()
    above = 0
    knocked = 0 if payoff.has_barriers else None
    for res in results:
        moments = moments.merge(res.moments)
        above += res.above
        if knocked is not None:
            knocked += res.knocked
    if dump_path is not None:
        with open(dump_path, "w", encoding="utf-8") as fh:
            _write_dump_header(fh, results[0].states.shape[2])
            for (index, start, size), res in zip(blocks, results):
                _dump_block(fh, res.states, start)

    mean = moments.mean
    se = moments.standard_error()
    if se == 0.0:
        se_pct = 0.0
    elif mean == 0.0:
        se_pct = math.inf
    else:
        se_pct = 100.0 * se / abs(mean)
    return EstimatorReport(
        label=label,
        measure="P" if drift is None else "P_h",
        sample_size=n,
        mean_cents=mean,
        se_pct=se_pct,
        kappa=above / n,
        theta=None if knocked is None else knocked / n,
        per_sample_variance=moments.variance(),
        seed=seed,
        wall_seconds=time.perf_counter() - begin,
    )


def estimate_plain(model, payoff, grid, cov, seed, n, label="run", threads=1,
                   block_size=DEFAULT_BLOCK_SIZE, dump_path=None,
                   zero_noise=False):
    """Plain Monte Carlo price estimate under the original measure.

    ``zero_noise`` forces every driver increment to zero, collapsing the
    estimate onto the deterministic Euler skeleton (a test hook).
    """
    return _estimate(model, payoff, grid, cov, None, seed, n, label, threads,
                     block_size, dump_path, zero_noise=zero_noise)


def estimate_is(model, payoff, grid, cov, drift, seed, n, label="run",
                threads=1, block_size=DEFAULT_BLOCK_SIZE, dump_path=None):
    """Importance-sampled estimate: simulate under the drift-adjusted
    measure and reweight every payoff by the inverse likelihood ratio."""
    if drift.output_width != cov.d:
        raise ValueError("drift output width must match the driver dimension")
    return _estimate(model, payoff, grid, cov, drift, seed, n, label, threads,
                     block_size, dump_path)


@dataclass(frozen=True)
class ComparisonRow:
    """Plain-vs-importance-sampled metrics at one sample size."""

    label: str
    n: int
    mc_mean_cents: float
    mc_se_pct: float
    mc_kappa: float
    mc_theta: float | None
    is_mean_cents: float
    is_se_pct: float
    is_kappa: float
    is_theta: float | None
    vr: float
    mc_seed: int
    is_seed: int


def compare(report_mc, report_is):
    """Combine a plain and an importance-sampled report into a table row."""
    if report_mc.measure != "P" or report_is.measure != "P_h":
        raise ValueError("compare needs one plain (P) and one importance-"
                         "sampled (P_h) report, in that order")
    if report_mc.sample_size != report_is.sample_size:
        raise ValueError("reports were computed at different sample sizes")
    vr = variance_ratio(report_mc, report_is)
    return ComparisonRow(
        label=report_mc.label,
        n=report_mc.sample_size,
        mc_mean_cents=report_mc.mean_cents,
        mc_se_pct=report_mc.se_pct,
        mc_kappa=report_mc.kappa,
        mc_theta=report_mc.theta,
        is_mean_cents=report_is.mean_cents,
        is_se_pct=report_is.se_pct,
        is_kappa=report_is.kappa,
        is_theta=report_is.theta,
        vr=vr,
        mc_seed=report_mc.seed,
        is_seed=report_is.seed,
    )


def report_to_dict(report, vr=None):
    """Report as a flat mapping with the stable field names."""
    return {
        "label": report.label,
        "measure": report.measure,
        "n": report.sample_size,
        "mean_cents": report.mean_cents,
        "se_pct": report.se_pct,
        "kappa": report.kappa,
        "theta": report.theta,
        "vr": vr,
        "seed": report.seed,
        "per_sample_variance": report.per_sample_variance,
    }


def report_from_dict(row):
    """Rebuild a report from its emitted mapping (wall time not stored)."""
    return EstimatorReport(
        label=row["label"],
        measure=row["measure"],
        sample_size=int(row["n"]),
        mean_cents=row["mean_cents"],
        se_pct=row["se_pct"],
        kappa=row["kappa"],
        theta=row["theta"],
        per_sample_variance=row["per_sample_variance"],
        seed=int(row["seed"]),
        wall_seconds=0.0,
    )


COMPARISON_FIELDS = ("label", "n", "mc_mean_cents", "mc_se_pct", "mc_kappa",
                     "mc_theta", "is_mean_cents", "is_se_pct", "is_kappa",
                     "is_theta", "vr", "mc_seed", "is_seed")


def comparison_to_dict(row):
    return {name: getattr(row, name) for name in COMPARISON_FIELDS}


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(name, text):
    if text == "":
        return None
    if name in ("n", "mc_seed", "is_seed", "seed"):
        return int(text)
    if name in ("label", "measure"):
        return text
    return float(text)


def rows_to_csv(rows, fields, path):
    """Write dict rows as CSV with lossless (repr) float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(fields) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row[name]) for name in fields) + "\n")


def rows_from_csv(path):
    """Parse a CSV written by :func:`rows_to_csv` back into dict rows."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    fields = lines[0].split(",")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        out.append({name: _parse_cell(name, text)
                    for name, text in zip(fields, cells)})
    return out
