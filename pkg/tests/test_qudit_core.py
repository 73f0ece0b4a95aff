import math

import numpy as np
import pytest

from engine.qudit_core import (
    DimensionMismatch,
    InvalidPovm,
    InvalidState,
    NotUnitary,
    Operator,
    Outcome,
    Povm,
    StateVector,
    apply_unitary,
    basis_state,
    born_probabilities,
    embed,
    identity,
    inner_product,
    overlap_of,
    projector,
    rank_one_povm,
    theta_from_overlap,
    validate_povm,
)


def _random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    return Operator(q * (np.diag(r) / np.abs(np.diag(r))))


def _random_state(rng):
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    return StateVector(v / np.linalg.norm(v))


class TestStateVector:
    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidState):
            StateVector([1.0, 1.0, 0.0])

    def test_rejects_unsupported_dimension(self):
        with pytest.raises(DimensionMismatch):
            StateVector([1.0, 0.0, 0.0, 0.0])

    def test_amplitudes_are_read_only(self):
        s = basis_state("m-1")
        with pytest.raises(ValueError):
            s.amplitudes[0] = 1.0

    def test_amplitude_by_label(self):
        s = basis_state("m+1")
        assert s.amplitude("m+1") == 1.0
        assert s.amplitude("m0") == 0.0

    def test_embed_pads_plus_one_with_zero(self):
        h = 1 / math.sqrt(2)
        s = embed(StateVector([h, h]))
        assert s.dim == 3
        assert s.amplitude("m+1") == 0.0


class TestOperators:
    def test_inner_product_is_conjugate_linear_in_first_argument(self):
        x = StateVector([1j, 0.0, 0.0])
        assert inner_product(x, basis_state("m0")) == pytest.approx(-1j)

    def test_matmul_rejects_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            Operator(np.eye(2)) @ Operator(np.eye(3))

    def test_identity_leaves_state_unchanged(self):
        s = StateVector([math.cos(0.3), -math.sin(0.3), 0.0])
        np.testing.assert_allclose(apply_unitary(identity(), s).amplitudes, s.amplitudes)

    def test_apply_unitary_rejects_non_unitary(self):
        with pytest.raises(NotUnitary):
            apply_unitary(Operator(2 * np.eye(3)), basis_state("m0"))

    def test_apply_unitary_rejects_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            apply_unitary(identity(2), basis_state("m0"))

    def test_apply_unitary_preserves_inner_products(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            u = _random_unitary(rng)
            x, y = _random_state(rng), _random_state(rng)
            moved = inner_product(apply_unitary(u, x), apply_unitary(u, y))
            assert abs(moved - inner_product(x, y)) <= 1e-12


class TestPovm:
    def test_computational_projectors_pass(self):
        m = rank_one_povm([(Outcome.A, basis_state("m0")), (Outcome.B, basis_state("m-1"))], rest=Outcome.INCONCLUSIVE)
        report = validate_povm(m)
        assert report.passed
        assert report.completeness_residual <= 1e-12

    def test_single_identity_passes(self):
        assert validate_povm(Povm(((Outcome.A, identity()),))).passed

    def test_negated_element_fails_positivity(self):
        m = Povm(((Outcome.A, Operator(np.diag([2.0, 1.0, 1.0]))), (Outcome.B, Operator(np.diag([-1.0, 0.0, 0.0])))))
        report = validate_povm(m)
        assert not report.passed
        assert report.min_eigenvalue == pytest.approx(-1.0)
        assert report.completeness_residual <= 1e-12
        assert any("semidefinite" in p for p in report.problems)

    def test_incomplete_set_fails_and_born_rule_refuses_it(self):
        m = Povm(((Outcome.A, projector(basis_state("m0"))),))
        assert not validate_povm(m).passed
        with pytest.raises(InvalidPovm):
            born_probabilities(basis_state("m0"), m)

    def test_repeated_labels_are_summed(self):
        m = Povm(
            (
                (Outcome.UNUSED, projector(basis_state("m0"))),
                (Outcome.UNUSED, projector(basis_state("m-1"))),
                (Outcome.A, projector(basis_state("m+1"))),
            )
        )
        h = 1 / math.sqrt(2)
        probs = born_probabilities(StateVector([h, h, 0.0]), m)
        assert probs[Outcome.UNUSED] == pytest.approx(1.0)
        assert probs[Outcome.A] == pytest.approx(0.0)

    def test_born_probabilities_sum_to_one(self):
        rng = np.random.default_rng(11)
        labels = (Outcome.A, Outcome.B, Outcome.INCONCLUSIVE, Outcome.UNUSED)
        for _ in range(50):
            raw = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in labels]
            gram = sum(m.conj().T @ m for m in raw)
            vals, vecs = np.linalg.eigh(gram)
            inv_sqrt = vecs @ np.diag(vals ** -0.5) @ vecs.conj().T
            elements = []
            for label, m in zip(labels, raw):
                e = inv_sqrt @ m.conj().T @ m @ inv_sqrt
                elements.append((label, Operator((e + e.conj().T) / 2)))
            probs = born_probabilities(_random_state(rng), Povm(tuple(elements)))
            assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)


class TestOverlap:
    @pytest.mark.parametrize(
        "theta, expected",
        [(math.pi / 4, 0.0), (0.0, 1.0), (math.pi / 8, 0.7071068)],
    )
    def test_overlap_of(self, theta, expected):
        assert overlap_of(theta) == pytest.approx(expected, abs=1e-7)

    def test_theta_from_overlap_round_trips_endpoints(self):
        assert theta_from_overlap(1.0) == 0.0
        assert theta_from_overlap(0.0) == pytest.approx(math.pi / 4)

    def test_theta_from_overlap_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            theta_from_overlap(1.5)
