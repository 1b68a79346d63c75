"""Exponent fits, chain structure checks, closed-form calibrations."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ctrlwalk import (
    RATIONAL,
    CalibrationError,
    ChainSpec,
    ParameterError,
    band_sum_direct,
    band_sum_profile,
    calibrate_lemma5,
    calibrate_lemma6,
    early_exit_probability,
    escape_probability,
    exponent_sweep,
    fit_exponent,
    heat_kernel_profile,
    hit_probability,
    interior_survival,
    interior_survival_absorbing,
    level_hit_cdf,
    level_hit_cdf_absorbing,
    reversibility_check,
    sweep_policy,
    verify_lemma5_certificate,
    verify_lemma6_certificate,
)


class TestExponentFit:
    def test_recovers_synthetic_power_law(self):
        pts = [(2**k, 3.0 * (2**k) ** -0.37) for k in range(7, 13)]
        fit = fit_exponent(pts)
        assert abs(fit.sigma_hat - 0.37) < 1e-12
        assert fit.r_squared == 1.0
        assert abs(fit.intercept - math.log(3.0)) < 1e-12
        assert fit.n_min == 128 and fit.n_max == 4096

    def test_cutoff_drops_small_n(self):
        pts = [(n, 1.0 * n**-0.5) for n in (16, 32, 128, 256, 512, 1024)]
        fit = fit_exponent(pts, min_n=128)
        assert fit.points[0][0] == 128
        assert len(fit.points) == 4

    def test_needs_three_points_after_cutoff(self):
        with pytest.raises(ParameterError):
            fit_exponent([(256, 0.5), (512, 0.4)])
        with pytest.raises(ParameterError):
            fit_exponent([(16, 0.9), (32, 0.8), (256, 0.5), (512, 0.4)], min_n=128)

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ParameterError):
            fit_exponent([(512, 0.4), (256, 0.5), (1024, 0.3)])

    def test_zero_probability_mentions_parity(self):
        pts = [(129, 0.0), (257, 0.0), (513, 0.0)]
        with pytest.raises(ParameterError, match="[Pp]arity|even"):
            fit_exponent(pts)

    def test_flat_data_fits_zero_slope(self):
        fit = fit_exponent([(n, 0.25) for n in (128, 256, 512)])
        assert fit.sigma_hat == 0.0
        assert fit.r_squared == 1.0


class TestSweeps:
    def test_exact_sweep_matches_direct_evolution(self):
        grid = [128, 256, 512]
        records, fit = exponent_sweep("constant", 0.5, grid, method="exact")
        assert [r["n"] for r in records] == grid
        for r in records:
            p = sweep_policy("constant", 0.5, r["n"], {})
            assert r["p"] == hit_probability(p, r["n"])
            assert r["method"] == "exact" and r["ci_low"] is None
        assert 0.4 < fit.sigma_hat < 0.6

    def test_threads_do_not_change_records(self):
        grid = [128, 256, 512, 1024]
        solo, _ = exponent_sweep("two-zone", 0.9, grid, method="exact")
        multi, _ = exponent_sweep("two-zone", 0.9, grid, method="exact", threads=3)
        assert solo == multi

    def test_mc_sweep_carries_intervals(self):
        records, _ = exponent_sweep(
            "constant",
            0.5,
            [128, 256, 512],
            method="mc",
            params={"seed": 5, "trials": 4000},
        )
        for r in records:
            assert r["method"] == "mc"
            assert r["ci_low"] <= r["p"] <= r["ci_high"]

    def test_optimal_kind_uses_solver(self):
        records, _ = exponent_sweep("optimal", 0.5, [16, 32, 64], method="exact", min_n=16)
        from ctrlwalk import solve_extremal

        for r in records:
            table, _ = solve_extremal(0.5, r["n"], "max", keep_values=False)
            assert r["p"] == table.value(0, 0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError):
            sweep_policy("teleport", 0.5, 64, {})


class TestChainStructure:
    @pytest.mark.parametrize("q", [0.3, 0.9])
    @pytest.mark.parametrize("band", [4, 64])
    def test_reversibility_float(self, q, band):
        residual = reversibility_check(ChainSpec(q, band), band + 16)
        assert residual <= 1e-15

    @pytest.mark.parametrize("q", [0.3, 0.9])
    @pytest.mark.parametrize("band", [4, 64])
    def test_reversibility_rational(self, q, band):
        residual = reversibility_check(ChainSpec(q, band, mode=RATIONAL), band + 16)
        assert residual == 0
        assert isinstance(residual, Fraction)

    def test_stationary_weights(self):
        chain = ChainSpec(0.5, 4)
        assert chain.pi(0) == chain.pi(3) == chain.pi(-4)
        assert chain.pi(5) < chain.pi(4)
        # detailed balance at the band edge, spelled out
        lhs = chain.pi(4) * chain.kernel(4, 5)
        rhs = chain.pi(5) * chain.kernel(5, 4)
        assert abs(lhs - rhs) < 1e-16

    def test_heat_kernel_profile_flat(self):
        prof = heat_kernel_profile(ChainSpec(0.5, 16), [16, 32, 64])
        assert prof["probes"] == (0, 16, 32)
        per_t = dict(prof["per_t"])
        assert set(per_t) == {16, 32, 64}
        # sqrt(t)-scaled peak approaches the free-walk constant from below
        free = math.sqrt(2.0 / math.pi)
        for v in per_t.values():
            assert 0.5 < v < free
        assert prof["bound_estimate"] == max(per_t.values())


class TestBandSumIdentity:
    def test_identity_matches_brute_force(self):
        ys = range(-2, 3)
        fast = band_sum_profile(0.5, 8, 2, 16, ys)
        slow = band_sum_direct(0.5, 8, 2, 16, ys)
        for y in ys:
            assert abs(fast[y] - slow[y]) < 1e-12

    def test_calibrate_pinned_result(self):
        cert = calibrate_lemma5(0.5)
        assert (cert["alpha"], cert["beta"], cert["K0"]) == (0.25, 0.25, 4)
        assert abs(cert["eps"] - 0.225) < 1e-12
        assert cert["eps"] == pytest.approx(0.9 * cert["min_margin"])
        ks = {e["K"] for e in cert["entries"]}
        assert ks == {4, 8, 16}

    def test_certificate_replays_bitwise(self):
        cert = calibrate_lemma5(0.5)
        rep = verify_lemma5_certificate(cert)
        assert rep["max_diff"] == 0.0
        assert rep["all_exceed"]

    def test_tampered_certificate_caught(self):
        cert = calibrate_lemma5(0.5)
        cert["entries"][0]["sum"] += 1e-9
        rep = verify_lemma5_certificate(cert)
        assert rep["max_diff"] > 0.0

    def test_hopeless_grid_raises(self):
        with pytest.raises(CalibrationError):
            calibrate_lemma5(0.01, alphas=(0.25,), betas=(0.25,), K0s=(4,))


class TestEscapeCalibration:
    def test_level_hit_dual_routes(self):
        for a, t in [(4, 16), (5, 25), (8, 64), (7, 100)]:
            assert abs(level_hit_cdf(a, t) - level_hit_cdf_absorbing(a, t)) < 1e-12

    def test_interior_survival_dual_routes(self):
        for q, K, s in [(0.5, 4, 32), (0.9, 8, 100), (0.96875, 6, 144)]:
            got = interior_survival(q, K, s)
            want = interior_survival_absorbing(q, K, s)
            assert abs(got - want) < 1e-12

    def test_level_hit_monotone_in_time(self):
        vals = [level_hit_cdf(6, t) for t in (8, 16, 32, 64, 128)]
        assert vals == sorted(vals)

    def test_escape_probability_decays_with_budget(self):
        vals = [escape_probability(A, 8) for A in (1, 2, 4, 8)]
        assert vals == sorted(vals, reverse=True)
        assert escape_probability(256, 8) < 0.1

    def test_early_exit_vanishes_with_laziness(self):
        vals = [early_exit_probability(1 - 2.0**-j, 2, 8) for j in (1, 4, 8)]
        assert vals == sorted(vals, reverse=True)

    def test_calibrate_pinned_result(self):
        cert = calibrate_lemma6(0.2)
        assert cert["A"] == 256
        assert cert["q"] == 1.0 - 2.0**-10
        for v in cert["escape_by_K"].values():
            assert v < 0.1
        for v in cert["early_exit_by_K"].values():
            assert v < 0.1

    def test_certificate_replays_bitwise(self):
        cert = calibrate_lemma6(0.2)
        rep = verify_lemma6_certificate(cert)
        assert rep["max_diff"] == 0.0
        assert rep["all_below"]

    def test_unreachable_eps_raises(self):
        with pytest.raises(CalibrationError):
            calibrate_lemma6(1e-9)
