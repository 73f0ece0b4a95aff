import math

import numpy as np
import pytest

from engine.base import ProtocolKind
from engine.protocols import (
    IdpLabeling,
    StatePair,
    SusdBasis,
    ThetaOutOfRange,
    UnsupportedConfiguration,
    best_susd_basis,
    build_helstrom,
    build_idp,
    build_protocol,
    build_susd,
    helstrom_basis,
    helstrom_bound,
    idp_basis,
    idp_unitary,
    ideal_stats,
    prepare_pair,
    susd_failure_probability,
)
from engine.qudit_core import Outcome, born_probabilities, inner_product, rank_one_povm, validate_povm

PI_8 = math.pi / 8


class TestStatePreparation:
    def test_identical_at_zero(self):
        a, b = prepare_pair(0.0)
        np.testing.assert_allclose(a.amplitudes, [1, 0, 0])
        np.testing.assert_allclose(b.amplitudes, [1, 0, 0])

    def test_symmetric_at_quarter_pi(self):
        a, b = prepare_pair(math.pi / 4)
        h = 1 / math.sqrt(2)
        np.testing.assert_allclose(a.amplitudes, [h, -h, 0], atol=1e-15)
        np.testing.assert_allclose(b.amplitudes, [h, h, 0], atol=1e-15)

    def test_pi_over_six(self):
        a, _ = prepare_pair(math.pi / 6)
        np.testing.assert_allclose(a.amplitudes, [0.8660254, -0.5, 0], atol=1e-7)

    @pytest.mark.parametrize("theta", [-0.1, math.pi / 4 + 1e-6, float("nan")])
    def test_out_of_range(self, theta):
        with pytest.raises(ThetaOutOfRange):
            prepare_pair(theta)

    def test_overlap_is_cos_two_theta(self):
        a, b = prepare_pair(PI_8)
        assert inner_product(a, b).real == pytest.approx(math.cos(math.pi / 4), abs=1e-15)


class TestClosedForms:
    def test_idp_failure_equals_overlap(self, theta_grid):
        for theta in theta_grid:
            pair = StatePair(theta)
            stats = ideal_stats(build_idp(pair), pair)
            assert stats.p_inconclusive == pytest.approx(math.cos(2 * theta), abs=1e-12)

    def test_susd_failure(self, theta_grid):
        for theta in theta_grid:
            pair = StatePair(theta)
            stats = ideal_stats(build_susd(pair), pair)
            assert stats.p_inconclusive == pytest.approx((1 + math.cos(2 * theta) ** 2) / 2, abs=1e-12)

    def test_helstrom_error_is_the_bound(self, theta_grid):
        for theta in theta_grid:
            pair = StatePair(theta)
            stats = ideal_stats(build_helstrom(pair), pair)
            assert stats.p_err == pytest.approx(helstrom_bound(pair), abs=1e-12)
            assert stats.p_inconclusive == pytest.approx(0.0, abs=1e-12)

    def test_unambiguous_protocols_never_err(self, theta_grid):
        for theta in theta_grid:
            pair = StatePair(theta)
            for protocol in (build_idp(pair), build_susd(pair), build_susd(pair, SusdBasis.A_BASIS), build_susd(pair, SusdBasis.B_BASIS)):
                cond = ideal_stats(protocol, pair).conditional
                assert cond["a"][Outcome.B] == pytest.approx(0.0, abs=1e-12)
                assert cond["b"][Outcome.A] == pytest.approx(0.0, abs=1e-12)
                assert protocol.unambiguous

    def test_idp_never_more_inconclusive_than_susd(self, theta_grid):
        for theta in theta_grid:
            pair = StatePair(theta)
            idp = ideal_stats(build_idp(pair), pair).p_inconclusive
            susd = ideal_stats(build_susd(pair), pair).p_inconclusive
            if theta == 0.0:
                assert idp == pytest.approx(susd, abs=1e-12)
            else:
                assert idp < susd

    @pytest.mark.parametrize("build", [build_idp, build_susd, build_helstrom])
    def test_correct_rate_does_not_rise_with_overlap(self, build, theta_grid):
        by_overlap = sorted(theta_grid, key=lambda t: StatePair(t).overlap)
        p_corr = [ideal_stats(build(StatePair(t)), StatePair(t)).p_corr for t in by_overlap]
        assert np.all(np.diff(p_corr) <= 1e-12)

    def test_idp_basis_is_orthonormal(self, theta_grid):
        for theta in theta_grid:
            rows = np.array([v.amplitudes for v in idp_basis(theta)])
            np.testing.assert_allclose(rows.conj() @ rows.T, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("scale", [1e-3, 0.5, 2.0, 40.0])
    def test_helstrom_basis_ignores_weight_scale(self, scale):
        a, b = prepare_pair(PI_8)
        base = helstrom_basis(0.3, 0.7, a, b)
        scaled = helstrom_basis(0.3 * scale, 0.7 * scale, a, b)
        for x, y in zip(base, scaled):
            np.testing.assert_allclose(y.amplitudes, x.amplitudes, atol=1e-12)


class TestWorkedValues:
    def test_idp_at_pi_over_eight(self):
        pair = StatePair(PI_8)
        stats = ideal_stats(build_idp(pair), pair)
        assert stats.p_corr == pytest.approx(0.2928932, abs=1e-7)
        assert stats.p_inconclusive == pytest.approx(0.7071068, abs=1e-7)
        assert stats.p_err == pytest.approx(0.0, abs=1e-12)
        assert stats.conditional["a"][Outcome.A] == pytest.approx(0.2928932, abs=1e-7)

    def test_idp_extremes(self):
        top = StatePair(math.pi / 4)
        stats = ideal_stats(build_idp(top), top)
        assert stats.conditional["a"][Outcome.A] == pytest.approx(1.0, abs=1e-12)
        assert stats.p_inconclusive == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(idp_basis(math.pi / 4)[2].amplitudes, [0, 0, 1], atol=1e-15)

        bottom = StatePair(0.0)
        stats = ideal_stats(build_idp(bottom), bottom)
        assert stats.p_inconclusive == pytest.approx(1.0, abs=1e-12)
        assert stats.p_corr == pytest.approx(0.0, abs=1e-12)

    def test_susd_randomized_at_pi_over_eight(self):
        pair = StatePair(PI_8)
        stats = ideal_stats(build_susd(pair), pair)
        assert stats.p_corr == pytest.approx(0.25, abs=1e-12)
        assert stats.p_inconclusive == pytest.approx(0.75, abs=1e-12)
        assert stats.p_err == pytest.approx(0.0, abs=1e-12)

    def test_susd_a_basis_conclusive_probability(self):
        pair = StatePair(PI_8)
        cond = ideal_stats(build_susd(pair, SusdBasis.A_BASIS), pair).conditional
        assert cond["b"][Outcome.B] == pytest.approx(0.5, abs=1e-12)
        top = StatePair(math.pi / 4)
        cond = ideal_stats(build_susd(top, SusdBasis.A_BASIS), top).conditional
        assert cond["b"][Outcome.B] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize(
        "theta, p_err",
        [(PI_8, 0.1464466), (0.0, 0.5), (math.pi / 4, 0.0)],
    )
    def test_helstrom(self, theta, p_err):
        pair = StatePair(theta)
        stats = ideal_stats(build_helstrom(pair), pair)
        assert stats.p_err == pytest.approx(p_err, abs=1e-7)
        assert stats.p_corr == pytest.approx(1 - p_err, abs=1e-7)
        assert not build_helstrom(pair).unambiguous

    def test_idp_projectors_form_a_measurement(self):
        vectors = idp_basis(PI_8)
        m = rank_one_povm(list(zip((Outcome.A, Outcome.B, Outcome.INCONCLUSIVE), vectors)))
        assert validate_povm(m).passed
        a, _ = prepare_pair(PI_8)
        probs = born_probabilities(a, m)
        assert probs[Outcome.B] == pytest.approx(0.0, abs=1e-15)
        assert probs[Outcome.INCONCLUSIVE] == pytest.approx(0.7071068, abs=1e-7)

    def test_idp_unitary_sends_a_off_the_b_row(self):
        a, _ = prepare_pair(PI_8)
        out = idp_unitary(PI_8).entries @ a.amplitudes
        assert abs(out[1]) == pytest.approx(0.0, abs=1e-15)


class TestPriors:
    def test_helstrom_bound_values(self):
        assert helstrom_bound(StatePair(math.pi / 4)) == pytest.approx(0.0, abs=1e-15)
        assert helstrom_bound(StatePair(0.0)) == pytest.approx(0.5)
        assert helstrom_bound(StatePair(PI_8, 0.9, 0.1)) == pytest.approx(0.0472307431, abs=1e-9)

    def test_unequal_prior_helstrom_reaches_the_bound(self):
        for prior_a in (0.1, 0.3, 0.9):
            for theta in (0.05, PI_8, 0.6):
                pair = StatePair(theta, prior_a, 1 - prior_a)
                stats = ideal_stats(build_helstrom(pair), pair)
                assert stats.p_err == pytest.approx(helstrom_bound(pair), abs=1e-12)

    def test_idp_requires_equal_priors(self):
        with pytest.raises(UnsupportedConfiguration):
            build_idp(StatePair(PI_8, 0.7, 0.3))

    def test_priors_must_sum_to_one(self):
        with pytest.raises(ValueError):
            StatePair(PI_8, 0.7, 0.4)

    def test_susd_failure_matches_simulated_pipeline(self):
        pair = StatePair(PI_8, 0.8, 0.2)
        for basis in SusdBasis:
            stats = ideal_stats(build_susd(pair, basis), pair)
            assert stats.p_inconclusive == pytest.approx(susd_failure_probability(pair, basis), abs=1e-12)

    def test_best_basis_names_the_likely_state_conclusively(self):
        likely_a = StatePair(PI_8, 0.8, 0.2)
        assert best_susd_basis(likely_a) is SusdBasis.B_BASIS
        assert susd_failure_probability(likely_a, SusdBasis.B_BASIS) < susd_failure_probability(likely_a, SusdBasis.A_BASIS)
        assert best_susd_basis(StatePair(PI_8, 0.2, 0.8)) is SusdBasis.A_BASIS
        assert best_susd_basis(StatePair(PI_8)) is SusdBasis.A_BASIS


class TestLabeling:
    def test_swapped_labeling_breaks_unambiguity(self, caplog):
        pair = StatePair(PI_8)
        with caplog.at_level("WARNING"):
            protocol = build_idp(pair, IdpLabeling.SWAPPED)
        assert "not unambiguous" in caplog.text
        stats = ideal_stats(protocol, pair)
        assert stats.p_err == pytest.approx(1 - math.cos(math.pi / 4), abs=1e-12)
        assert stats.p_corr == pytest.approx(0.0, abs=1e-12)

    def test_build_protocol_dispatch(self):
        pair = StatePair(PI_8)
        assert build_protocol(ProtocolKind.IDP, pair).kind is ProtocolKind.IDP
        assert build_protocol(ProtocolKind.SUSD_B, pair).kind is ProtocolKind.SUSD_B
        assert len(build_protocol(ProtocolKind.SUSD_RANDOMIZED, pair).pipelines) == 2

    def test_ideal_stats_checks_theta(self):
        with pytest.raises(ValueError):
            ideal_stats(build_idp(StatePair(PI_8)), StatePair(0.3))
