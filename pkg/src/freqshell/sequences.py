"""Sparse logarithmic weights on dyadic shell indices and their certifications.

The weight sequence a(j) equals log2(j) on narrow windows around the tower
indices 2^(2^k) and 1 everywhere else.  Everything in this module is integer
combinatorics plus double-precision streaming sums; there is no array state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Certifications refuse shell indices beyond this; windows for k >= 6 start at
# 2^64 - 6 and are unreachable in any run that terminates.
MAX_SHELL_INDEX = 2**40

# Largest window generation whose indices fit in MAX_SHELL_INDEX.
_MAX_WINDOW_GENERATION = 5

# (window start, weight-window end, bound-window end) per generation, one past
# the certifiable range so the lookups below can terminate by comparison alone.
_WINDOWS = tuple(
    (2 ** (2**k) - k, 2 ** (2**k) + k, 2 ** (2**k) + 2 * k)
    for k in range(1, _MAX_WINDOW_GENERATION + 2)
)


def window_center(k: int) -> int:
    """Center 2^(2^k) of the k-th weight window."""
    if k < 1:
        raise ValueError(f"window generation must be >= 1, got {k}")
    return 2 ** (2**k)


def weight_window(k: int) -> range:
    """Indices where a(.) takes the value log2: {center-k, ..., center+k}."""
    c = window_center(k)
    return range(c - k, c + k + 1)


def bound_window(k: int) -> range:
    """Indices where the averaged weight is allowed up to log2: {center-k, ..., center+2k}."""
    c = window_center(k)
    return range(c - k, c + 2 * k + 1)


def sparse_log_weight(j: int) -> float:
    """The weight a(j): log2(j) inside a weight window, 1 otherwise (also for j <= 0)."""
    for lo, hi, _ in _WINDOWS:
        if j < lo:
            break
        if j <= hi:
            return math.log2(j)
    return 1.0


def in_bound_window(j: int) -> bool:
    for lo, _, hi in _WINDOWS:
        if j < lo:
            return False
        if j <= hi:
            return True
    return False


def averaged_weight(j: int) -> float:
    """The running average b(j) = 2^(-j-1) * sum_{i<=j} 2^i a(i), via its recurrence.

    O(j) per call; use the certifiers for long ranges.
    """
    if j < 1:
        raise ValueError(f"averaged weight needs j >= 1, got {j}")
    if j > MAX_SHELL_INDEX:
        raise ValueError(f"shell index {j} exceeds the certifiable range {MAX_SHELL_INDEX}")
    b = 0.5
    for i in range(2, j + 1):
        b = 0.5 * (b + sparse_log_weight(i))
    return b


def averaged_weight_direct(j: int) -> float:
    """Closed-sum evaluation of b(j), usable cross-check for small j only."""
    if not 1 <= j <= 1024:
        raise ValueError("direct closed sum is intended for 1 <= j <= 1024")
    return math.fsum(2.0 ** (i - j - 1) * sparse_log_weight(i) for i in range(1, j + 1))


def averaged_weight_table(j_max: int) -> np.ndarray:
    """b(1..j_max) as a float array (index 0 unused)."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    out = np.empty(j_max + 1)
    out[0] = np.nan
    b = 0.5
    out[1] = b
    for j in range(2, j_max + 1):
        b = 0.5 * (b + sparse_log_weight(j))
        out[j] = b
    return out


def first_shell_above(k: float) -> int:
    """Index of the first dyadic shell [2^(j-1), 2^j) lying entirely above radius k.

    Equals ceil(log2 k) + 1; defined for k >= 1.
    """
    if k < 1:
        raise ValueError(f"cutoff must be >= 1, got {k}")
    ik = int(k)
    if ik == k:
        return (ik - 1).bit_length() + 1
    return math.ceil(math.log2(k)) + 1


@dataclass
class CertificationReport:
    """Result of an exhaustive bound check over an index range."""

    range_checked: tuple[int, int]
    violations: list[tuple[int, float, float]]
    violation_count: int
    max_ratio: float
    note: str = ""

    MAX_LISTED = 20

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def add_violation(self, index: int, value: float, bound: float) -> None:
        self.violation_count += 1
        if len(self.violations) < self.MAX_LISTED:
            self.violations.append((index, value, bound))

    def to_dict(self) -> dict:
        return {
            "range_checked": list(self.range_checked),
            "violations": [list(v) for v in self.violations],
            "violation_count": self.violation_count,
            "max_ratio": self.max_ratio,
            "passed": self.passed,
            "note": self.note,
        }


# Relative slack for the streamed double-precision recurrence.
AVERAGED_WEIGHT_SLACK = 1e-9


def certify_averaged_weight(j_max: int) -> CertificationReport:
    """Check b(j) <= log2(j) on bound windows and b(j) <= 2 elsewhere for 1 <= j <= j_max."""
    if j_max < 4:
        raise ValueError(f"j_max must be >= 4, got {j_max}")
    if j_max > MAX_SHELL_INDEX:
        raise ValueError(f"j_max {j_max} exceeds the certifiable range {MAX_SHELL_INDEX}")

    report = CertificationReport((1, j_max), [], 0, 0.0)
    b = 0.5
    max_ratio = b / 2.0
    for j in range(2, j_max + 1):
        b = 0.5 * (b + sparse_log_weight(j))
        bound = math.log2(j) if in_bound_window(j) else 2.0
        ratio = b / bound
        if ratio > max_ratio:
            max_ratio = ratio
        if b > bound * (1.0 + AVERAGED_WEIGHT_SLACK):
            report.add_violation(j, b, bound)
    report.max_ratio = max_ratio
    return report


def sparse_window_set(n: int) -> set[int]:
    """S(n): members of bound windows that do not exceed n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out: set[int] = set()
    k = 1
    while k <= _MAX_WINDOW_GENERATION + 1:
        c = 2 ** (2**k)
        if c - k > n:
            break
        out.update(range(c - k, min(n, c + 2 * k) + 1))
        k += 1
    return out


def certify_window_count(n_max: int) -> CertificationReport:
    """Check |S(n)| <= (3*log2log2(n) + 5)*log2log2(n)/2 exactly for 3 <= n <= n_max.

    Integer left side against the real right side, no slack.
    """
    if n_max < 3:
        raise ValueError(f"n_max must be >= 3, got {n_max}")
    if n_max > 10**8:
        raise ValueError("window-count certification is array-based; n_max capped at 1e8")

    member = np.zeros(n_max + 1, dtype=np.int8)
    k = 1
    while k <= _MAX_WINDOW_GENERATION + 1:
        c = 2 ** (2**k)
        if c - k > n_max:
            break
        member[c - k : min(n_max, c + 2 * k) + 1] = 1
        k += 1
    counts = np.cumsum(member)

    n = np.arange(3, n_max + 1)
    loglog = np.log2(np.log2(n))
    bounds = (3.0 * loglog + 5.0) * loglog / 2.0
    sizes = counts[3:]

    report = CertificationReport((3, n_max), [], 0, float(np.max(sizes / bounds)))
    for i in np.nonzero(sizes > bounds)[0]:
        report.add_violation(int(n[i]), float(sizes[i]), float(bounds[i]))
    return report


@dataclass
class PairedSumCertification:
    """Measured behaviour of the partial sums sum_k b(j0(2k)) and sum_k b(j0(2k+1)).

    `threshold` is the minimal n0 such that both sums stay <= 3n for every
    checked n >= n0; violations below n0 are data, not certification failures.
    """

    n_max: int
    threshold: int
    first_violation: int | None
    last_violation: int | None
    prefix_violation_count: int
    max_sum_ratio: float
    report: CertificationReport = field(default=None)  # re-check of n >= threshold

    @property
    def tail_is_empty(self) -> bool:
        return self.threshold > self.n_max

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "threshold": self.threshold,
            "first_violation": self.first_violation,
            "last_violation": self.last_violation,
            "prefix_violation_count": self.prefix_violation_count,
            "max_sum_ratio": self.max_sum_ratio,
            "tail_is_empty": self.tail_is_empty,
            "report": self.report.to_dict(),
        }


def certify_paired_weight_sums(n_max: int) -> PairedSumCertification:
    """Accumulate both paired-index partial sums against 3n for 1 <= n <= n_max."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if n_max > 10**8:
        raise ValueError("paired-sum certification is array-based; n_max capped at 1e8")

    table = averaged_weight_table(first_shell_above(2 * n_max + 1) + 1)
    n = np.arange(1, n_max + 1, dtype=np.int64)
    # ceil(log2 m) for m in [2, 2e8]: float log2 is exact at powers of two and
    # more than 1e-8 away from integers elsewhere, so the ceil is safe.
    j_even = np.ceil(np.log2(2 * n)).astype(np.int64) + 1
    j_odd = np.ceil(np.log2(2 * n + 1)).astype(np.int64) + 1
    even_sums = np.cumsum(table[j_even])
    odd_sums = np.cumsum(table[j_odd])

    limit = 3.0 * n
    bad = np.nonzero((even_sums > limit) | (odd_sums > limit))[0]
    if bad.size:
        first = int(n[bad[0]])
        last = int(n[bad[-1]])
        threshold = last + 1
    else:
        first = last = None
        threshold = 1
    max_ratio = float(max(np.max(even_sums / limit), np.max(odd_sums / limit)))

    # Re-check the certified tail; by construction it must be clean.
    recheck = CertificationReport((threshold, n_max), [], 0, 0.0)
    if threshold <= n_max:
        lo = threshold - 1
        tail_ratio = np.maximum(even_sums[lo:], odd_sums[lo:]) / limit[lo:]
        recheck.max_ratio = float(np.max(tail_ratio))
        for i in np.nonzero(tail_ratio > 1.0)[0]:
            recheck.add_violation(int(n[lo + i]), float(tail_ratio[lo + i]), 1.0)
    else:
        recheck.note = "no certified tail inside the checked range"

    return PairedSumCertification(
        n_max=n_max,
        threshold=threshold,
        first_violation=first,
        last_violation=last,
        prefix_violation_count=int(bad.size),
        max_sum_ratio=max_ratio,
        report=recheck,
    )


def paired_sum_constant(n0: int) -> float:
    """Explicit admissible constant 2*sum_{k<=n0}(b(j0(2k)) + b(j0(2k+1))) + 1."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    table = averaged_weight_table(first_shell_above(2 * n0 + 1) + 1)
    total = math.fsum(
        table[first_shell_above(2 * k)] + table[first_shell_above(2 * k + 1)]
        for k in range(1, n0 + 1)
    )
    return 2.0 * total + 1.0
