import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqshell import sequences as sq


def oracle_weight(j: int) -> float:
    """Brute-force window membership, independent of the library lookup."""
    for k in range(1, 7):
        center = 2 ** (2**k)
        if center - k <= j <= center + k:
            return math.log2(j)
    return 1.0


def oracle_window_set(n: int) -> set[int]:
    out = set()
    for k in range(1, 7):
        center = 2 ** (2**k)
        for l in range(max(1, center - k), min(n, center + 2 * k) + 1):
            out.add(l)
    return out


class TestSparseLogWeight:
    def test_anchor_values(self):
        assert sq.sparse_log_weight(0) == 1.0
        assert sq.sparse_log_weight(3) == math.log2(3)
        assert sq.sparse_log_weight(4) == 2.0
        assert sq.sparse_log_weight(16) == 4.0

    def test_matches_bruteforce_oracle_on_range(self):
        for j in range(-10, 70000):
            assert sq.sparse_log_weight(j) == oracle_weight(j), j

    def test_unit_below_first_window(self):
        for j in range(-5, 3):
            assert sq.sparse_log_weight(j) == 1.0

    @given(st.integers(min_value=-(2**40), max_value=2**40))
    def test_at_least_one(self, j):
        assert sq.sparse_log_weight(j) >= 1.0

    def test_windows_disjoint(self):
        seen = set()
        for k in range(1, 6):
            members = set(sq.bound_window(k))
            assert not members & seen
            seen |= members

    def test_window_shapes(self):
        assert list(sq.weight_window(1)) == [3, 4, 5]
        assert list(sq.bound_window(1)) == [3, 4, 5, 6]
        assert len(sq.weight_window(3)) == 7
        assert len(sq.bound_window(3)) == 10


class TestAveragedWeight:
    def test_anchor_values_exact(self):
        assert sq.averaged_weight(1) == 0.5
        assert sq.averaged_weight(2) == 0.75
        assert sq.averaged_weight(3) == (3 + 4 * math.log2(3)) / 8

    def test_value_at_six(self):
        # frozen from the recurrence b(j+1) = (b(j) + a(j+1))/2
        assert sq.averaged_weight(6) == pytest.approx(1.4764171800169128, rel=1e-15)

    def test_recurrence_identity(self):
        b = sq.averaged_weight(1)
        for j in range(2, 200):
            b = 0.5 * (b + sq.sparse_log_weight(j))
            assert sq.averaged_weight(j) == b

    def test_closed_sum_cross_check(self):
        for j in range(1, 65):
            direct = sq.averaged_weight_direct(j)
            streamed = sq.averaged_weight(j)
            assert abs(direct - streamed) <= 1e-12 * streamed

    def test_lower_bound_half(self):
        table = sq.averaged_weight_table(2000)
        assert np.all(table[1:] >= 0.5)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            sq.averaged_weight(0)
        with pytest.raises(ValueError):
            sq.averaged_weight_direct(4096)


class TestAveragedWeightCertification:
    def test_small_range_passes(self):
        report = sq.certify_averaged_weight(4)
        assert report.passed
        assert report.range_checked == (1, 4)

    def test_large_range_passes(self):
        report = sq.certify_averaged_weight(2**20)
        assert report.passed
        assert report.violation_count == 0
        # Bound is nearly attained at weight-window exits; keep the margin visible.
        assert 0.99 < report.max_ratio <= 1.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            sq.certify_averaged_weight(1)
        with pytest.raises(ValueError):
            sq.certify_averaged_weight(2**40 + 1)


class TestWindowSet:
    def test_examples(self):
        assert sq.sparse_window_set(2) == set()
        assert sq.sparse_window_set(10) == {3, 4, 5, 6}
        assert sq.sparse_window_set(20) == {3, 4, 5, 6, 14, 15, 16, 17, 18, 19, 20}
        assert sq.sparse_window_set(3) == {3}

    def test_matches_oracle(self):
        for n in list(range(1, 400)) + [65531, 65540, 65600]:
            assert sq.sparse_window_set(n) == oracle_window_set(n), n

    def test_nondecreasing_and_increments_only_on_members(self):
        prev = 0
        for n in range(1, 2000):
            size = len(sq.sparse_window_set(n))
            assert size >= prev
            if size > prev:
                assert n in oracle_window_set(n)
            prev = size


class TestWindowCountCertification:
    def test_bound_holds_to_a_million(self):
        report = sq.certify_window_count(10**6)
        assert report.passed
        assert report.max_ratio <= 1.0

    def test_explicit_points(self):
        loglog = math.log2(math.log2(10))
        assert len(sq.sparse_window_set(10)) <= (3 * loglog + 5) * loglog / 2
        assert len(sq.sparse_window_set(3)) == 1

    def test_rejects_small_range(self):
        with pytest.raises(ValueError):
            sq.certify_window_count(2)


class TestFirstShellAbove:
    def test_anchor_values(self):
        assert sq.first_shell_above(1) == 1
        assert sq.first_shell_above(2) == 2
        assert sq.first_shell_above(5) == 4

    def test_oracle_smallest_covering_shell(self):
        # j is the first dyadic shell [2^(j-1), 2^j) entirely above radius k
        for k in [1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 100, 2.5, 7.3, 21.5, 1.0001]:
            j = sq.first_shell_above(k)
            assert 2.0 ** (j - 1) >= k
            assert 2.0 ** (j - 2) < k or j == 1

    @given(st.floats(min_value=1.0, max_value=1e9, allow_nan=False))
    @settings(max_examples=300)
    def test_matches_formula(self, k):
        assert sq.first_shell_above(k) == math.ceil(math.log2(k)) + 1

    def test_rejects_below_one(self):
        with pytest.raises(ValueError):
            sq.first_shell_above(0.5)


class TestPairedWeightSums:
    def test_single_term(self):
        # first even-index term is b(2) = 3/4 <= 3
        cert = sq.certify_paired_weight_sums(1)
        assert cert.threshold == 1
        assert cert.prefix_violation_count == 0

    def test_small_range_clean(self):
        cert = sq.certify_paired_weight_sums(1000)
        assert cert.threshold == 1
        assert cert.report.passed
        assert cert.max_sum_ratio <= 1.0

    def test_measured_violation_interval(self):
        # The 3n bound genuinely fails on a mid range; the certification reports
        # the measured threshold past the last violation.
        cert = sq.certify_paired_weight_sums(2 * 10**5)
        assert cert.first_violation == 16211
        assert cert.last_violation == 142140
        assert cert.threshold == 142141
        assert cert.report.passed
        assert cert.max_sum_ratio == pytest.approx(1.2368, abs=1e-3)

    def test_threshold_stable_across_reruns(self):
        a = sq.certify_paired_weight_sums(10**5)
        b = sq.certify_paired_weight_sums(10**5)
        assert a.threshold == b.threshold == 10**5 + 1
        assert a.tail_is_empty
        assert a.to_dict() == b.to_dict()

    def test_oracle_partial_sums(self):
        table = sq.averaged_weight_table(40)
        even = odd = 0.0
        for n in range(1, 300):
            even += table[sq.first_shell_above(2 * n)]
            odd += table[sq.first_shell_above(2 * n + 1)]
            assert even <= 3 * n and odd <= 3 * n

    def test_explicit_constant(self):
        b2, b3 = sq.averaged_weight(2), sq.averaged_weight(3)
        assert sq.paired_sum_constant(1) == pytest.approx(2 * (b2 + b3) + 1, rel=1e-15)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            sq.certify_paired_weight_sums(0)
