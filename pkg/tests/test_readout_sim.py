import math

import numpy as np
import pytest
from pydantic import ValidationError

from engine.base import ProtocolKind
from engine.protocols import StatePair, SusdBasis, build_helstrom, build_idp, build_protocol, build_susd, ideal_stats
from engine.pulse_compiler import compile_idp, compile_susd
from engine.readout_sim import (
    BLOCK_SIZE,
    NO_RESULT,
    NoiseProfile,
    block_rng,
    cell_seed,
    ideal_row,
    rows_agree,
    run_batch,
    run_trial,
)

PI_8 = math.pi / 8
ALL_KINDS = (ProtocolKind.HELSTROM, ProtocolKind.IDP, ProtocolKind.SUSD_RANDOMIZED)


def _within(value, expected, shots, sigmas=4.0):
    return abs(value - expected) <= sigmas * math.sqrt(expected * (1 - expected) / shots) + 1e-9


class TestNoiseProfile:
    def test_zero_profile(self):
        z = NoiseProfile.zero()
        assert z.p_true_positive == 1.0
        assert z.p_init_fail == z.p_flip_per_probe == z.p_false_positive_neighbor == z.p_false_positive_far == z.p_pulse_error == 0.0
        assert z.readout_order["idp"] == ("m0", "m-1", "m+1")
        assert z.readout_order["susd"] == ("m+1", "m-1")

    def test_default_guess(self):
        d = NoiseProfile.default_guess()
        assert (d.p_true_positive, d.p_false_positive_neighbor, d.p_false_positive_far) == (0.92, 0.03, 0.003)
        assert (d.p_flip_per_probe, d.p_init_fail) == (0.02, 0.06)
        assert d.p_pulse_error == 0.02

    def test_false_positive_ordering_enforced(self):
        with pytest.raises(ValidationError):
            NoiseProfile(p_false_positive_far=0.05, p_false_positive_neighbor=0.01)
        with pytest.raises(ValidationError):
            NoiseProfile(p_true_positive=0.01, p_false_positive_neighbor=0.02)

    def test_probabilities_bounded(self):
        with pytest.raises(ValidationError):
            NoiseProfile(p_flip_per_probe=1.5)
        with pytest.raises(ValidationError):
            NoiseProfile(p_init_fail=-0.1)

    def test_readout_order_validated(self):
        with pytest.raises(ValidationError):
            NoiseProfile(readout_order={"idp": ("m0", "m2")})
        with pytest.raises(ValidationError):
            NoiseProfile(readout_order={"idp": ("m0", "m0")})
        with pytest.raises(ValidationError):
            NoiseProfile(readout_order={"bogus": ("m0",)})

    def test_partial_readout_order_keeps_defaults(self):
        p = NoiseProfile(readout_order={"idp": ("m-1", "m+1", "m0")})
        assert p.readout_order["idp"] == ("m-1", "m+1", "m0")
        assert p.readout_order["helstrom"] == ("m+1", "m-1")

    def test_camel_case_aliases(self):
        p = NoiseProfile.model_validate({"pTruePositive": 0.9, "pFalsePositiveNeighbor": 0.05})
        assert p.p_true_positive == 0.9
        assert p.model_dump(by_alias=True)["pFalsePositiveNeighbor"] == 0.05

    def test_fire_matrix(self):
        m = NoiseProfile.default_guess().fire_matrix()
        np.testing.assert_allclose(np.diag(m), 0.92)
        assert m[0, 1] == m[0, 2] == m[1, 0] == m[2, 0] == 0.03
        assert m[1, 2] == m[2, 1] == 0.003


class TestRunTrial:
    def test_orthogonal_idp_is_certain(self):
        pair = StatePair(math.pi / 4)
        protocol = build_idp(pair)
        rng = np.random.default_rng(3)
        for _ in range(20):
            record = run_trial(protocol, compile_idp(pair.theta), "a", NoiseProfile.zero(), rng)
            assert record.assigned == "A"
            assert record.raw_positives == ("m+1",)
            assert record.positive_count == 1

    def test_failed_initialization_reads_the_inconclusive_level(self):
        noise = NoiseProfile(p_init_fail=1.0, p_true_positive=0.9)
        pair = StatePair(PI_8)
        protocol = build_idp(pair)
        rng = np.random.default_rng(11)
        seen = {run_trial(protocol, None, "b", noise, rng).assigned for _ in range(50)}
        assert seen <= {"Inconclusive", NO_RESULT}

        row = run_batch(protocol, None, pair, noise, 20000, seed=5)
        assert _within(row.p_inconclusive, 0.9, 20000)
        assert _within(row.p_noresult, 0.1, 20000)
        assert row.p_corr == row.p_err == 0.0

    def test_rejects_unknown_preparation(self):
        pair = StatePair(PI_8)
        with pytest.raises(ValueError):
            run_trial(build_idp(pair), None, "c", NoiseProfile.zero(), np.random.default_rng(0))

    def test_schedule_must_match_protocol(self):
        pair = StatePair(PI_8)
        with pytest.raises(ValueError):
            run_trial(build_idp(pair), compile_susd(PI_8, SusdBasis.A_BASIS), "a", NoiseProfile.zero(), np.random.default_rng(0))


class TestRunBatch:
    def test_single_shot_rates_are_zero_or_one(self):
        pair = StatePair(PI_8)
        row = run_batch(build_susd(pair), None, pair, NoiseProfile.default_guess(), 1, seed=1)
        for value in (row.p_corr, row.p_err, row.p_inconclusive, row.p_noresult, row.efficiency):
            assert value in (0.0, 1.0)

    def test_rejects_zero_shots(self):
        pair = StatePair(PI_8)
        with pytest.raises(ValueError):
            run_batch(build_idp(pair), None, pair, NoiseProfile.zero(), 0, seed=1)

    def test_rates_partition_the_shots(self):
        pair = StatePair(0.4)
        for kind in ALL_KINDS:
            row = run_batch(build_protocol(kind, pair), None, pair, NoiseProfile.default_guess(), 30000, seed=9)
            assert row.p_corr + row.p_err + row.p_inconclusive + row.p_noresult == pytest.approx(1.0, abs=1e-12)
            assert row.efficiency + row.p_noresult == pytest.approx(1.0, abs=1e-15)
            assert row.p_corr_given_result == pytest.approx(row.p_corr / row.efficiency)

    def test_zero_noise_idp_at_pi_over_eight(self):
        pair = StatePair(PI_8)
        row = run_batch(build_idp(pair), None, pair, NoiseProfile.zero(), 100_000, seed=42)
        assert _within(row.p_corr, 0.2928932, 100_000)
        assert row.p_err == 0.0
        assert row.efficiency == 1.0
        assert row.p_multipositive == 0.0

    def test_zero_noise_agrees_with_born_rule(self):
        pair = StatePair(PI_8)
        for kind in ALL_KINDS:
            protocol = build_protocol(kind, pair)
            row = run_batch(protocol, None, pair, NoiseProfile.zero(), 100_000, seed=17)
            assert rows_agree(row, ideal_stats(protocol, pair))

    def test_deterministic_across_worker_counts(self):
        pair = StatePair(0.3)
        protocol = build_susd(pair)
        shots = 3 * BLOCK_SIZE + 123
        one = run_batch(protocol, None, pair, NoiseProfile.default_guess(), shots, seed=2024, workers=1)
        many = run_batch(protocol, None, pair, NoiseProfile.default_guess(), shots, seed=2024, workers=4)
        assert one == many
        assert run_batch(protocol, None, pair, NoiseProfile.default_guess(), shots, seed=2025) != one

    def test_false_positives_alone_break_unambiguity(self):
        noise = NoiseProfile(p_true_positive=0.9, p_false_positive_neighbor=0.05, p_false_positive_far=0.01)
        pair = StatePair(PI_8)
        for protocol in (build_susd(pair), build_idp(pair)):
            row = run_batch(protocol, None, pair, noise, 20000, seed=3)
            assert row.p_err > 0.0
            assert row.p_multipositive > 0.0

    def test_spin_flips_raise_idp_error_near_unit_overlap(self):
        pair = StatePair.from_overlap(0.9375)
        protocol = build_idp(pair)
        base = NoiseProfile.default_guess()
        flippy = base.model_copy(update={"p_flip_per_probe": 0.2})
        low = run_batch(protocol, None, pair, base, 50000, seed=8)
        high = run_batch(protocol, None, pair, flippy, 50000, seed=8)
        assert high.p_err > low.p_err

    def test_positive_on_unused_level_counts_as_inconclusive(self):
        noise = NoiseProfile(p_init_fail=1.0, readout_order={"helstrom": ("m0", "m+1", "m-1")})
        pair = StatePair(PI_8)
        row = run_batch(build_helstrom(pair), None, pair, noise, 1000, seed=1)
        assert row.p_inconclusive == 1.0
        assert row.efficiency == 1.0

    def test_failed_initialization_hides_two_level_protocols(self):
        noise = NoiseProfile(p_init_fail=1.0)
        pair = StatePair(PI_8)
        row = run_batch(build_susd(pair), None, pair, noise, 1000, seed=1)
        assert row.p_noresult == 1.0
        assert row.efficiency == 0.0
        assert row.p_corr_given_result == 0.0

    def test_pulse_error_splits_over_the_other_read_levels(self):
        pair = StatePair(math.pi / 4)
        noise = NoiseProfile(p_pulse_error=0.3)
        row = run_batch(build_idp(pair), None, pair, noise, 40000, seed=12)
        assert _within(row.p_corr, 0.7, 40000)
        assert _within(row.p_err, 0.15, 40000)
        assert _within(row.p_inconclusive, 0.15, 40000)
        assert row.p_multipositive == 0.0

    def test_pulse_error_makes_identical_states_conclusive(self):
        pair = StatePair(0.0)
        noise = NoiseProfile(p_pulse_error=0.2)
        row = run_batch(build_susd(pair), None, pair, noise, 40000, seed=13)
        assert _within(row.p_corr, 0.1, 40000)
        assert _within(row.p_err, 0.1, 40000)
        assert _within(row.p_inconclusive, 0.8, 40000)

    def test_failed_initialization_is_not_moved_by_pulse_errors(self):
        noise = NoiseProfile(p_init_fail=1.0, p_pulse_error=1.0)
        pair = StatePair(PI_8)
        row = run_batch(build_idp(pair), None, pair, noise, 1000, seed=1)
        assert row.p_inconclusive == 1.0


class TestRows:
    def test_ideal_row(self):
        pair = StatePair(PI_8)
        protocol = build_helstrom(pair)
        row = ideal_row(protocol, pair, ideal_stats(protocol, pair))
        assert row.protocol == "helstrom"
        assert row.mode == "ideal"
        assert row.shots == 0
        assert row.stderr_corr == row.stderr_err == row.stderr_inconclusive == 0.0
        assert row.overlap == pytest.approx(math.cos(2 * row.theta), abs=1e-12)

    def test_fixed_basis_susd_reports_under_susd(self):
        pair = StatePair(PI_8)
        row = run_batch(build_susd(pair, SusdBasis.B_BASIS), None, pair, NoiseProfile.zero(), 100, seed=1)
        assert row.protocol == "susd"

    def test_seeds_are_distinct_per_cell(self):
        seeds = {cell_seed(42, p, i) for p in range(3) for i in range(17)}
        assert len(seeds) == 51
        assert cell_seed(42, 1, 2) == cell_seed(42, 1, 2)

    def test_block_streams_are_reproducible(self):
        assert block_rng(5, 1).random() == block_rng(5, 1).random()
        assert block_rng(5, 1).random() != block_rng(5, 2).random()


@pytest.mark.slow
class TestConvergence:
    def test_zero_noise_converges_on_default_grid(self):
        overlaps = np.arange(17) / 16.0
        for kind in ALL_KINDS:
            for overlap in overlaps:
                pair = StatePair.from_overlap(overlap)
                protocol = build_protocol(kind, pair)
                row = run_batch(protocol, None, pair, NoiseProfile.zero(), 100_000, seed=42)
                assert rows_agree(row, ideal_stats(protocol, pair)), (kind, overlap)

    def test_helstrom_million_shots(self):
        pair = StatePair(PI_8)
        row = run_batch(build_helstrom(pair), None, pair, NoiseProfile.zero(), 1_000_000, seed=42, workers=4)
        assert _within(row.p_err, 0.1464466, 1_000_000, sigmas=3.0)
        assert row.efficiency == 1.0
