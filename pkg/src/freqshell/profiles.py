"""Sparse dyadic shell profiles: weighted norms, exact rescaling, smallness certificates.

A profile stores the shell magnitudes sigma_j = ||Delta_j v||_2 of a field as a
finite map j -> sigma_j.  Rescaling by lambda = 2^m shifts indices by m and
multiplies magnitudes by 2^(-m/2); since m can be as large as 2^32, magnitudes
are kept in log2 form and the rescaling factor lives in a separate exact
accumulator, so that the weight 2^(j/2) cancels it without losing a bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .sequences import sparse_log_weight

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# Tower levels l <= 5 keep the shift 2^(2^l) <= 2^32 inside the index range.
MAX_TOWER_LEVEL = 5


def tower_shift(level: int) -> int:
    """Index shift 2^(2^level) of the tower rescaling at the given level."""
    if not 1 <= level <= MAX_TOWER_LEVEL:
        raise ValueError(f"tower level must be in [1, {MAX_TOWER_LEVEL}], got {level}")
    return 2 ** (2**level)


@dataclass(frozen=True)
class TowerScaling:
    """Rescaling by lambda = 2^shift with shift = 2^(2^level)."""

    level: int

    @property
    def shift(self) -> int:
        return tower_shift(self.level)


class ShellProfile:
    """Immutable sparse map from shell index to nonnegative magnitude.

    Zero magnitudes are never stored.  `_scale` is the accumulated log2 of the
    uniform rescaling prefactor; it is always a multiple of 1/2 with magnitude
    below 2^33, hence exact in double precision.
    """

    __slots__ = ("_log2", "_scale")

    def __init__(self, magnitudes: Mapping[int, float] | Iterable[tuple[int, float]] = ()):
        items = magnitudes.items() if isinstance(magnitudes, Mapping) else magnitudes
        store: dict[int, float] = {}
        for j, sigma in items:
            j = _check_index(j)
            sigma = float(sigma)
            if not math.isfinite(sigma) or sigma < 0.0:
                raise ValueError(f"magnitude at shell {j} must be finite and >= 0, got {sigma}")
            if j in store:
                raise ValueError(f"duplicate shell index {j}")
            if sigma > 0.0:
                store[j] = math.log2(sigma)
        self._log2 = store
        self._scale = 0.0

    @classmethod
    def from_log2(cls, log2_magnitudes: Mapping[int, float], *, scale: float = 0.0) -> "ShellProfile":
        p = cls.__new__(cls)
        store: dict[int, float] = {}
        for j, lg in log2_magnitudes.items():
            j = _check_index(j)
            lg = float(lg)
            if not math.isfinite(lg):
                raise ValueError(f"log2 magnitude at shell {j} must be finite, got {lg}")
            store[j] = lg
        p._log2 = store
        p._scale = float(scale)
        return p

    # -- views ---------------------------------------------------------------

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self._log2))

    def __len__(self) -> int:
        return len(self._log2)

    def __bool__(self) -> bool:
        return bool(self._log2)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        for j in self.support:
            yield j, 2.0 ** (self._log2[j] + self._scale)

    def __contains__(self, j: int) -> bool:
        return j in self._log2

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShellProfile):
            return NotImplemented
        # IEEE addition rounds the true sum, so equal contents compare equal
        # regardless of how the scale was accumulated.
        if self._log2.keys() != other._log2.keys():
            return False
        return all(
            lg + self._scale == other._log2[j] + other._scale
            for j, lg in self._log2.items()
        )

    def __repr__(self) -> str:
        body = ", ".join(f"{j}: {s:.6g}" for j, s in self)
        return f"ShellProfile({{{body}}})"

    def magnitude(self, j: int) -> float:
        """sigma_j; 0.0 for absent shells.  May underflow after extreme shifts."""
        lg = self._log2.get(j)
        return 0.0 if lg is None else 2.0 ** (lg + self._scale)

    def log2_magnitude(self, j: int) -> float:
        lg = self._log2.get(j)
        if lg is None:
            raise KeyError(j)
        return lg + self._scale

    def magnitudes(self) -> dict[int, float]:
        return {j: s for j, s in self}

    # -- norms ---------------------------------------------------------------
    #
    # Each squared norm is sum_j 2^(t_j); t_j groups the shell index with the
    # doubled scale first, so an index shift by m and a scale of -m/2 cancel
    # exactly and the critical norm is preserved bit for bit.

    def sobolev_norm(self, s: float) -> float:
        """(sum_j 2^(2sj) sigma_j^2)^(1/2)."""
        two_scale = 2.0 * self._scale
        if s == 0.5:
            terms = [(j + two_scale) + 2.0 * lg for j, lg in self._log2.items()]
        else:
            terms = [2.0 * s * j + two_scale + 2.0 * lg for j, lg in self._log2.items()]
        return _exp2_half(_log2_sum_exp(terms))

    def supercritical_norm(self) -> float:
        """(sum_j 2^j a(j)^(-2) sigma_j^2)^(1/2), a the sparse log weight."""
        two_scale = 2.0 * self._scale
        terms = [
            (j + two_scale) + 2.0 * lg - 2.0 * math.log2(sparse_log_weight(j))
            for j, lg in self._log2.items()
        ]
        return _exp2_half(_log2_sum_exp(terms))

    def l2_norm(self) -> float:
        two_scale = 2.0 * self._scale
        return _exp2_half(_log2_sum_exp([2.0 * lg + two_scale for lg in self._log2.values()]))

    def critical_tail(self, cutoff: int) -> float:
        """sum_{|j| >= cutoff} 2^j sigma_j^2."""
        two_scale = 2.0 * self._scale
        terms = [
            (j + two_scale) + 2.0 * lg for j, lg in self._log2.items() if abs(j) >= cutoff
        ]
        t = _log2_sum_exp(terms)
        return 0.0 if t == -math.inf else 2.0**t

    # -- rescaling -----------------------------------------------------------

    def rescaled(self, shift: int) -> "ShellProfile":
        """Profile of lambda*v(lambda*.) for lambda = 2^shift: indices move up
        by shift, magnitudes scale by 2^(-shift/2)."""
        shift = int(shift)
        if shift == 0:
            return self
        out = {_check_index(j + shift): lg for j, lg in self._log2.items()}
        return ShellProfile.from_log2(out, scale=self._scale - shift / 2.0)


def _check_index(j: int) -> int:
    j = int(j)
    if not INT64_MIN <= j <= INT64_MAX:
        raise ValueError(f"shell index {j} outside the signed 64-bit range")
    return j


def _log2_sum_exp(terms: Sequence[float]) -> float:
    """log2(sum_i 2^t_i), -inf for an empty sum."""
    if not terms:
        return -math.inf
    m = max(terms)
    if m == -math.inf or m == math.inf:
        return m
    return m + math.log2(math.fsum(2.0 ** (t - m) for t in terms))

def _exp2_half(log2_sq: float) -> float:
    return 0.0 if log2_sq == -math.inf else 2.0 ** (0.5 * log2_sq)


# -- smallness certificates ----------------------------------------------------


def tail_cutoff(profile: ShellProfile, epsilon: float) -> int:
    """Smallest M >= 1 with sum_{|j| >= M} 2^j sigma_j^2 <= epsilon^2 / 2."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    threshold = 2.0 * math.log2(epsilon) - 1.0
    two_scale = 2.0 * profile._scale
    by_abs: dict[int, list[float]] = {}
    for j, lg in profile._log2.items():
        if j != 0:
            by_abs.setdefault(abs(j), []).append((j + two_scale) + 2.0 * lg)

    tail: list[float] = []
    for a in sorted(by_abs, reverse=True):
        tail.extend(by_abs[a])
        if _log2_sum_exp(tail) > threshold:
            return a + 1
    return 1


def smallness_level(cutoff: int, norm: float, epsilon: float) -> int:
    """Threshold level l0 = max{M+1, ceil(log2(max(1, log2 max(2, M)) * norm / eps)) + 1}.

    The inner max keeps the formula meaningful at M = 1, where the window
    weight alone must carry the bound.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if cutoff < 1:
        raise ValueError("tail cutoff must be >= 1")
    if not math.isfinite(norm) or norm < 0.0:
        raise ValueError(f"norm must be finite and >= 0, got {norm}")
    level = cutoff + 1
    if norm > 0.0:
        w = max(1.0, math.log2(max(2, cutoff)))
        level = max(level, math.ceil(math.log2(w * norm / epsilon)) + 1)
    return level


@dataclass(frozen=True)
class LevelCheck:
    level: int
    shift: int
    norm: float
    passed: bool


@dataclass(frozen=True)
class SmallnessCertificate:
    """Outcome of checking rescaling smallness at every representable level."""

    epsilon: float
    tail_cutoff: int
    threshold_level: int
    initial_norm: float
    levels: tuple[LevelCheck, ...]
    range_limited: bool
    profiles_checked: int = 1

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.levels)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "tail_cutoff": self.tail_cutoff,
            "threshold_level": self.threshold_level,
            "initial_norm": self.initial_norm,
            "levels": [
                {"level": c.level, "shift": c.shift, "norm": c.norm, "passed": c.passed}
                for c in self.levels
            ],
            "range_limited": self.range_limited,
            "profiles_checked": self.profiles_checked,
            "passed": self.passed,
        }


def certify_rescaling_smallness(
    profile: ShellProfile, epsilon: float, extra_levels: int = 3
) -> SmallnessCertificate:
    """Verify that every tower rescaling from the threshold level on has
    supercritical norm <= epsilon.

    Levels beyond MAX_TOWER_LEVEL are not representable; the certificate is then
    marked range-limited and lists only the checked ones.  The norm after the
    shift is monotone decreasing in the level for fixed support, so the checked
    prefix carries the content.
    """
    if extra_levels < 0:
        raise ValueError("extra_levels must be >= 0")
    cutoff = tail_cutoff(profile, epsilon)
    norm = profile.supercritical_norm()
    level0 = smallness_level(cutoff, norm, epsilon)
    checks = []
    for level in range(level0, level0 + extra_levels + 1):
        if level > MAX_TOWER_LEVEL:
            break
        scaled = profile.rescaled(tower_shift(level)).supercritical_norm()
        checks.append(LevelCheck(level, tower_shift(level), scaled, scaled <= epsilon))
    return SmallnessCertificate(
        epsilon=epsilon,
        tail_cutoff=cutoff,
        threshold_level=level0,
        initial_norm=norm,
        levels=tuple(checks),
        range_limited=level0 + extra_levels > MAX_TOWER_LEVEL,
    )


def certify_uniform_smallness(
    profiles: Sequence[ShellProfile], epsilon: float, extra_levels: int = 3
) -> SmallnessCertificate:
    """Single tail cutoff and threshold level valid for a whole family of profiles.

    Discrete counterpart of the compactness step behind the time-uniform
    statement: the cutoff is the max of the per-profile cutoffs, the threshold
    uses the max norm, and every profile is checked at every level.
    """
    if not profiles:
        raise ValueError("need at least one profile")
    cutoff = max(tail_cutoff(p, epsilon) for p in profiles)
    norms = [p.supercritical_norm() for p in profiles]
    level0 = smallness_level(cutoff, max(norms), epsilon)
    checks = []
    for level in range(level0, level0 + extra_levels + 1):
        if level > MAX_TOWER_LEVEL:
            break
        shift = tower_shift(level)
        worst = max(p.rescaled(shift).supercritical_norm() for p in profiles)
        checks.append(LevelCheck(level, shift, worst, worst <= epsilon))
    return SmallnessCertificate(
        epsilon=epsilon,
        tail_cutoff=cutoff,
        threshold_level=level0,
        initial_norm=max(norms),
        levels=tuple(checks),
        range_limited=level0 + extra_levels > MAX_TOWER_LEVEL,
        profiles_checked=len(profiles),
    )


def random_profile(
    rng: np.random.Generator,
    support: tuple[int, int] = (-30, 30),
    max_shells: int = 24,
) -> ShellProfile:
    """Seeded random profile with steeply decaying critical shell energies.

    The energy 2^j sigma_j^2 decays like 16^(-|j|) away from the origin with a
    log-uniform overall amplitude, so tail cutoffs stay small and rescaling
    certificates usually have representable levels to check.
    """
    lo, hi = support
    if lo > hi:
        raise ValueError("empty support interval")
    count = int(rng.integers(1, max_shells + 1))
    count = min(count, hi - lo + 1)
    indices = rng.choice(np.arange(lo, hi + 1), size=count, replace=False)
    log2_amp_sq = rng.uniform(-10.0, 0.0)
    out: dict[int, float] = {}
    for j in sorted(int(x) for x in indices):
        u = rng.uniform(0.25, 1.0)
        log2_energy = log2_amp_sq + math.log2(u) - 4.0 * abs(j)
        out[j] = 0.5 * (log2_energy - j)
    return ShellProfile.from_log2(out)


# -- profile files ---------------------------------------------------------------


class ProfileFormatError(ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def read_profile(path: str | Path) -> ShellProfile:
    """Read a "j<TAB>sigma" text profile; '#' lines are comments."""
    entries: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ProfileFormatError(line_number, f"expected 'j<TAB>sigma', got {line!r}")
            try:
                j = int(parts[0])
            except ValueError:
                raise ProfileFormatError(line_number, f"bad shell index {parts[0]!r}") from None
            try:
                sigma = float(parts[1])
            except ValueError:
                raise ProfileFormatError(line_number, f"bad magnitude {parts[1]!r}") from None
            if not math.isfinite(sigma) or sigma < 0.0:
                raise ProfileFormatError(line_number, f"magnitude must be finite and >= 0, got {sigma}")
            if not INT64_MIN <= j <= INT64_MAX:
                raise ProfileFormatError(line_number, f"shell index {j} out of range")
            if j in entries:
                raise ProfileFormatError(line_number, f"duplicate shell index {j}")
            entries[j] = sigma
    return ShellProfile(entries)


def write_profile(profile: ShellProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for j, sigma in profile:
            fh.write(f"{j}\t{sigma!r}\n")
