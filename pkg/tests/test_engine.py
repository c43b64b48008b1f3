"""Tests for the block-parallel estimators and report plumbing."""

import math

import numpy as np
import pytest

from driftmc.covariation import CovariationSpec, TimeGrid
from driftmc.engine import (COMPARISON_FIELDS, EstimatorReport, compare,
                            comparison_to_dict, estimate_is, estimate_plain,
                            report_from_dict, report_to_dict, rows_from_csv,
                            rows_to_csv, _block_plan)
from driftmc.models import BLACK_SCHOLES, ModelSpec, simulate
from driftmc.network import ShallowNet, init_net
from driftmc.payoffs import (ASIAN_BASKET_CALL, ASIAN_BASKET_KNOCKOUT,
                             PayoffSpec, evaluate_batch)


def bs_setup(vol=0.2, strike=1.1, n_steps=32):
    model = ModelSpec(tag=BLACK_SCHOLES, mu=[0.05], sigma=[[vol]], s0=[1.0],
                      rate=0.05)
    payoff = PayoffSpec(tag=ASIAN_BASKET_CALL, weights=[1.0], strike=strike)
    grid = TimeGrid.uniform(1.0, n_steps)
    cov = CovariationSpec(model.sigma, grid)
    return model, payoff, grid, cov


class TestBlockPlan:
    def test_partition_covers_sample(self):
        blocks = _block_plan(10_000, 4096)
        assert [b[2] for b in blocks] == [4096, 4096, 1808]
        assert [b[1] for b in blocks] == [0, 4096, 8192]

    def test_independent_of_thread_count(self):
        # the plan is a function of (n, block size) only; nothing else enters
        assert _block_plan(999, 1000) == [(0, 0, 999)]


class TestEstimatePlain:
    def test_report_fields(self):
        model, payoff, grid, cov = bs_setup()
        rep = estimate_plain(model, payoff, grid, cov, seed=0, n=4000,
                             label="bs")
        assert rep.measure == "P"
        assert rep.sample_size == 4000
        assert 0.0 <= rep.kappa <= 1.0
        assert rep.theta is None
        assert rep.mean_cents > 0.0
        assert rep.wall_seconds > 0.0

    def test_zero_sample_size_rejected(self):
        model, payoff, grid, cov = bs_setup()
        with pytest.raises(ValueError):
            estimate_plain(model, payoff, grid, cov, seed=0, n=0)

    def test_thread_counts_agree_bitwise(self):
        model, payoff, grid, cov = bs_setup()
        kwargs = dict(seed=3, n=10_000, label="bs", block_size=1024)
        serial = estimate_plain(model, payoff, grid, cov, threads=1, **kwargs)
        threaded = estimate_plain(model, payoff, grid, cov, threads=8, **kwargs)
        assert serial.mean_cents == threaded.mean_cents
        assert serial.per_sample_variance == threaded.per_sample_variance
        assert serial.kappa == threaded.kappa

    def test_block_size_choice_changes_nothing_statistically(self):
        # different block sizes use different substreams, so only agreement
        # in distribution is expected: check overlapping confidence bands
        model, payoff, grid, cov = bs_setup()
        a = estimate_plain(model, payoff, grid, cov, seed=3, n=20_000,
                           block_size=512)
        b = estimate_plain(model, payoff, grid, cov, seed=3, n=20_000,
                           block_size=20_000)
        se = math.hypot(a.se_pct * a.mean_cents, b.se_pct * b.mean_cents) / 100
        assert abs(a.mean_cents - b.mean_cents) <= 4 * se

    def test_se_scaling_with_sample_size(self):
        model, payoff, grid, cov = bs_setup(strike=1.0)
        small = estimate_plain(model, payoff, grid, cov, seed=5, n=10_000)
        large = estimate_plain(model, payoff, grid, cov, seed=6, n=40_000)
        ratio = small.se_pct / large.se_pct
        assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2

    def test_constant_payoff_under_zero_noise(self):
        # forced zero increments give a deterministic path, hence a constant
        # payoff c: the report must be exactly 100 * exp(-r u) * c with SE 0
        model, payoff, grid, cov = bs_setup(strike=0.5)
        batch = simulate(model, grid, cov, n_paths=1,
                         driver_increments=np.zeros((1, grid.n_steps, 1)))
        c = evaluate_batch(payoff, batch.states, grid).values[0]
        assert c > 0.0
        rep = estimate_plain(model, payoff, grid, cov, seed=0, n=64,
                             block_size=16, zero_noise=True)
        assert rep.mean_cents == pytest.approx(100 * math.exp(-0.05) * c,
                                               rel=1e-12)
        assert rep.se_pct == 0.0
        assert rep.per_sample_variance == pytest.approx(0.0, abs=1e-20)

    def test_path_dump_written(self, tmp_path):
        model, payoff, grid, cov = bs_setup(n_steps=4)
        dump = tmp_path / "paths.csv"
        estimate_plain(model, payoff, grid, cov, seed=1, n=8, block_size=3,
                       dump_path=dump)
        lines = dump.read_text().splitlines()
        assert lines[0] == "path_id,step,state_0"
        assert len(lines) == 1 + 8 * (grid.n_steps + 1)
        # block-ordered path ids
        ids = [int(line.split(",")[0]) for line in lines[1:]]
        assert ids == sorted(ids)


class TestEstimateIs:
    def test_zero_drift_matches_plain_bitwise(self):
        model, payoff, grid, cov = bs_setup()
        zero = init_net(2, 1, rng=np.random.default_rng(0))
        plain = estimate_plain(model, payoff, grid, cov, seed=9, n=5000,
                               label="x")
        weighted = estimate_is(model, payoff, grid, cov, zero, seed=9, n=5000,
                               label="x")
        assert weighted.measure == "P_h"
        assert weighted.mean_cents == plain.mean_cents
        assert weighted.per_sample_variance == plain.per_sample_variance

    def test_unbiased_against_plain(self):
        model, payoff, grid, cov = bs_setup(strike=1.2)
        drift = ShallowNet(w_in=[0.5], b_in=[0.1], w_out=[[1.0]], b_out=[1.5],
                           activation="tanh")
        plain = estimate_plain(model, payoff, grid, cov, seed=20, n=100_000,
                               label="x")
        weighted = estimate_is(model, payoff, grid, cov, drift, seed=21,
                               n=100_000, label="x")
        se = math.hypot(plain.se_pct * plain.mean_cents,
                        weighted.se_pct * weighted.mean_cents) / 100
        assert abs(plain.mean_cents - weighted.mean_cents) <= 3 * se


class TestCompareAndSerialization:
    def _reports(self):
        model, payoff, grid, cov = bs_setup(strike=1.05)
        drift = ShallowNet(w_in=[0.5], b_in=[0.1], w_out=[[0.3]], b_out=[0.8],
                           activation="tanh")
        mc = estimate_plain(model, payoff, grid, cov, seed=1, n=4000, label="x")
        is_ = estimate_is(model, payoff, grid, cov, drift, seed=2, n=4000,
                          label="x")
        return mc, is_

    def test_identical_reports_give_unit_vr(self):
        mc, _ = self._reports()
        twin = EstimatorReport(label=mc.label, measure="P_h",
                               sample_size=mc.sample_size,
                               mean_cents=mc.mean_cents, se_pct=mc.se_pct,
                               kappa=mc.kappa, theta=None,
                               per_sample_variance=mc.per_sample_variance,
                               seed=mc.seed, wall_seconds=0.0)
        row = compare(mc, twin)
        assert row.vr == 1.0

    def test_measure_mismatch_rejected(self):
        mc, is_ = self._reports()
        with pytest.raises(ValueError):
            compare(is_, mc)

    def test_sample_size_mismatch_rejected(self):
        mc, is_ = self._reports()
        other = EstimatorReport(label=is_.label, measure="P_h",
                                sample_size=is_.sample_size + 1,
                                mean_cents=1.0, se_pct=1.0, kappa=0.0,
                                theta=None, per_sample_variance=1.0, seed=0,
                                wall_seconds=0.0)
        with pytest.raises(ValueError):
            compare(mc, other)

    def test_barrier_reports_carry_theta(self):
        model, _, grid, cov = bs_setup()
        ko = PayoffSpec(tag=ASIAN_BASKET_KNOCKOUT, weights=[1.0], strike=1.05,
                        lower=0.6, upper=1.6)
        rep = estimate_plain(model, ko, grid, cov, seed=4, n=2000, label="ko")
        assert rep.theta is not None
        assert 0.0 <= rep.theta <= 1.0

    def test_csv_round_trip_identity(self, tmp_path):
        mc, is_ = self._reports()
        row = comparison_to_dict(compare(mc, is_))
        path = tmp_path / "rows.csv"
        rows_to_csv([row], COMPARISON_FIELDS, path)
        assert rows_from_csv(path) == [row]

    def test_report_dict_round_trip(self):
        mc, _ = self._reports()
        rebuilt = report_from_dict(report_to_dict(mc))
        assert rebuilt.mean_cents == mc.mean_cents
        assert rebuilt.per_sample_variance == mc.per_sample_variance
        assert rebuilt.label == mc.label
