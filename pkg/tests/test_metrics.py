import math

import numpy as np
import pytest

from kernelhc import ari, nmi


class TestNmi:
    def test_identical_partitions_score_one(self):
        labels = np.array([0, 0, 1, 1, 2, 2])
        assert nmi(labels, labels) == pytest.approx(1.0)
        assert nmi(labels + 5, labels) == pytest.approx(1.0)  # renaming-invariant

    def test_single_cluster_vs_balanced_classes_is_zero(self):
        assignment = np.zeros(8, dtype=int)
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        assert nmi(assignment, labels) == 0.0

    def test_hand_computed_contingency(self):
        # contingency [[2, 1], [1, 4]]: formulas evaluated longhand
        a = np.array([0, 0, 0, 1, 1, 1, 1, 1])
        b = np.array([0, 0, 1, 1, 1, 1, 1, 0])
        mi = (
            (2 / 8) * math.log((2 / 8) / ((3 / 8) * (3 / 8)))
            + (1 / 8) * math.log((1 / 8) / ((3 / 8) * (5 / 8)))
            + (1 / 8) * math.log((1 / 8) / ((5 / 8) * (3 / 8)))
            + (4 / 8) * math.log((4 / 8) / ((5 / 8) * (5 / 8)))
        )
        h = -((3 / 8) * math.log(3 / 8) + (5 / 8) * math.log(5 / 8))
        assert nmi(a, b) == pytest.approx(2 * mi / (h + h), abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            nmi(np.zeros(3), np.zeros(4))


class TestAri:
    def test_identical_partitions_score_one(self):
        labels = np.array([0, 1, 1, 2, 2, 2])
        assert ari(labels, labels) == pytest.approx(1.0)

    def test_single_cluster_vs_balanced_classes_is_zero(self):
        assignment = np.zeros(8, dtype=int)
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        assert ari(assignment, labels) == pytest.approx(0.0)

    def test_independent_partitions_negative_value(self):
        # contingency [[2, 2], [2, 2]]: index 4, expected 36/7, max 12
        a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        b = np.array([0, 0, 1, 1, 0, 0, 1, 1])
        assert ari(a, b) == pytest.approx((4 - 36 / 7) / (12 - 36 / 7), abs=1e-12)
        assert ari(a, b) == pytest.approx(-1 / 6, abs=1e-12)

    def test_hand_computed_contingency(self):
        # contingency [[2, 1], [1, 4]]: sum_ij 7, sums 13/13, n 8
        a = np.array([0, 0, 0, 1, 1, 1, 1, 1])
        b = np.array([0, 0, 1, 1, 1, 1, 1, 0])
        expected = (7 - 169 / 28) / (13 - 169 / 28)
        assert ari(a, b) == pytest.approx(expected, abs=1e-12)
        assert ari(a, b) == pytest.approx(9 / 65, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            ari(np.zeros(3), np.zeros(4))
