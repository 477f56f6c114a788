"""Band-limited 3-component vector fields on the periodic frequency lattice.

Conventions, used everywhere in this package:

* Domain is the 2pi-periodic torus; wavevectors are integer triples in
  {-n/2, ..., n/2-1}^3 stored in the standard FFT index order.
* A field is synthesised as u(x) = (2pi)^(-3/2) * sum_xi C(xi) e^(i xi.x),
  so Parseval reads ||u||_2^2 = sum_xi |C(xi)|^2 with no volume factor.
* Coefficient arrays have shape (3, n, n, n), complex128, component-major.
* Sharp cutoffs: the dyadic shell j keeps 2^(j-1) <= |xi| < 2^j, ball(k) keeps
  |xi| < k, high(k) keeps |xi| >= k, annulus(h, k) keeps h <= |xi| < k.  All
  selections compare the integer |xi|^2 against squared radii, so boundary
  membership is exact.
* Nonlinear products are evaluated pseudo-spectrally and truncated sharply at
  the lattice dealias radius (default n/3).  The truncated product is free of
  aliasing whenever 3*floor(radius) < n, which holds for every n not divisible
  by 3; prefer such sizes.

Physical-space transforms go through the real half-spectrum: fields are real
by construction (Hermitian coefficient symmetry), and the half-spectrum round
trip enforces that symmetry exactly.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as _fft

from .profiles import ShellProfile

_TWO_PI = 2.0 * np.pi
_NORM = _TWO_PI ** (-1.5)  # physical amplitude per unit coefficient

FFT_WORKERS = max(1, min(4, os.cpu_count() or 1))


class Lattice:
    """Cubic integer frequency lattice with cached geometry arrays."""

    def __init__(self, n: int, dealias_radius: float | None = None):
        if n < 8 or n % 2:
            raise ValueError(f"lattice size must be even and >= 8, got {n}")
        self.n = int(n)
        radius = n / 3.0 if dealias_radius is None else float(dealias_radius)
        if not 0.0 < radius <= n / 2.0:
            raise ValueError(f"dealias radius must lie in (0, n/2], got {radius}")
        self.dealias_radius = radius

        ints = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        k1, k2, k3 = np.meshgrid(ints, ints, ints, indexing="ij")
        self.wavevectors = np.stack([k1, k2, k3])
        self.radius_sq = (k1 * k1 + k2 * k2 + k3 * k3).astype(np.int64)
        self.dealias_keep = self.radius_sq <= radius * radius

        # Half-integer radial bins: bin m holds m/2 <= |xi| < (m+1)/2, so the
        # high-pass at any half-integer cutoff is a suffix sum over bins.
        self.half_bin = np.floor(2.0 * np.sqrt(self.radius_sq)).astype(np.int64)
        self.bin_count = int(self.half_bin.max()) + 1

        # Dyadic shell index: j >= 1 with 4^(j-1) <= |xi|^2 < 4^j; 0 marks xi = 0.
        rsq = self.radius_sq
        shell = np.zeros_like(rsq)
        nz = rsq > 0
        shell[nz] = (np.floor(np.log2(rsq[nz])) // 2).astype(np.int64) + 1
        self.shell_index = shell
        self.shell_count = int(shell.max()) + 1

    @property
    def max_radius(self) -> float:
        return float(np.sqrt(3.0)) * self.n / 2.0

    @property
    def reflect_index(self) -> np.ndarray:
        """Flat gather index mapping the rfft half-spectrum onto the redundant
        tail planes xi3 in [n/2+1, n-1]; built lazily, cached."""
        idx = getattr(self, "_reflect_index", None)
        if idx is None:
            n = self.n
            h = n // 2 + 1
            i1 = (-np.arange(n)) % n
            i2 = (-np.arange(n)) % n
            i3 = n - np.arange(n // 2 + 1, n)
            idx = (
                (i1[:, None, None] * n + i2[None, :, None]) * h + i3[None, None, :]
            ).astype(np.int64)
            self._reflect_index = idx
        return idx

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return self.n == other.n and self.dealias_radius == other.dealias_radius

    def __hash__(self) -> int:
        return hash((self.n, self.dealias_radius))

    def __repr__(self) -> str:
        return f"Lattice(n={self.n}, dealias_radius={self.dealias_radius:g})"


@dataclass(frozen=True)
class BandMask:
    """Sharp frequency cutoff; build with the dyadic/ball/high/annulus constructors."""

    kind: str
    lo: float = 0.0
    hi: float = float("inf")

    @classmethod
    def dyadic(cls, j: int) -> "BandMask":
        return cls("dyadic", 2.0 ** (j - 1), 2.0**j)

    @classmethod
    def ball(cls, k: float) -> "BandMask":
        if k < 0:
            raise ValueError("ball radius must be >= 0")
        return cls("ball", 0.0, float(k))

    @classmethod
    def high(cls, k: float) -> "BandMask":
        if k < 0:
            raise ValueError("high-pass cutoff must be >= 0")
        return cls("high", float(k), float("inf"))

    @classmethod
    def annulus(cls, h: float, k: float) -> "BandMask":
        if not 0 <= h < k:
            raise ValueError(f"annulus needs 0 <= h < k, got h={h}, k={k}")
        return cls("annulus", float(h), float(k))

    def select(self, lattice: Lattice) -> np.ndarray:
        """Boolean keep-array over the lattice."""
        rsq = lattice.radius_sq
        if self.kind == "ball":
            return rsq < self.hi * self.hi
        if self.kind == "high":
            return rsq >= self.lo * self.lo
        # dyadic and annulus: lo <= |xi| < hi
        if self.hi == float("inf"):
            return rsq >= self.lo * self.lo
        return (rsq >= self.lo * self.lo) & (rsq < self.hi * self.hi)


class SpectralField:
    """Value-semantic triple of complex coefficient cubes over a lattice."""

    __slots__ = ("lattice", "coeffs")

    def __init__(self, lattice: Lattice, coeffs: np.ndarray, *, copy: bool = True):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (3, lattice.n, lattice.n, lattice.n):
            raise ValueError(
                f"coefficients must have shape (3, n, n, n) for n={lattice.n}, got {coeffs.shape}"
            )
        self.lattice = lattice
        self.coeffs = coeffs.copy() if copy else coeffs

    @classmethod
    def zero(cls, lattice: Lattice) -> "SpectralField":
        n = lattice.n
        return cls(lattice, np.zeros((3, n, n, n), dtype=np.complex128), copy=False)

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs)

    # -- arithmetic (value semantics) -----------------------------------------

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs, copy=False)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs, copy=False)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * complex(scalar), copy=False)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.lattice, -self.coeffs, copy=False)

    # -- diagnostics -----------------------------------------------------------

    def hermitian_defect(self) -> float:
        """max |C(xi) - conj(C(-xi))| relative to max |C|; 0 for the zero field."""
        scale = float(np.abs(self.coeffs).max())
        if scale == 0.0:
            return 0.0
        defect = float(np.abs(self.coeffs - _conj_reflect(self.coeffs)).max())
        return defect / scale

    def divergence_defect(self) -> float:
        """max_xi |xi . C(xi)| / |C(xi)| over modes carrying energy."""
        k = self.lattice.wavevectors
        dot = np.abs(np.einsum("cxyz,cxyz->xyz", k.astype(np.float64), self.coeffs))
        mag = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))
        nz = mag > 0.0
        if not np.any(nz):
            return 0.0
        return float((dot[nz] / mag[nz]).max())

    def mean_mode_magnitude(self) -> float:
        return float(np.abs(self.coeffs[:, 0, 0, 0]).max())

    def band_limit_defect(self, radius: float | None = None) -> float:
        """max |C| outside the radius relative to max |C| overall."""
        r = self.lattice.dealias_radius if radius is None else radius
        outside = self.lattice.radius_sq > r * r
        scale = float(np.abs(self.coeffs).max())
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.coeffs[:, outside]).max(initial=0.0)) / scale


def _require_same_lattice(u: SpectralField, w: SpectralField) -> None:
    if u.lattice != w.lattice:
        raise ValueError(f"lattice mismatch: {u.lattice!r} vs {w.lattice!r}")


def _conj_reflect(coeffs: np.ndarray) -> np.ndarray:
    """conj(C(-xi)) with FFT index order on the trailing three axes."""
    out = np.conj(coeffs)
    for ax in (-3, -2, -1):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def _hermitian_full(half: np.ndarray, n: int, lattice: Lattice | None = None) -> np.ndarray:
    """Full coefficient cube from the rfft half-spectrum (last axis 0..n/2)."""
    shape = half.shape[:-1] + (n,)
    h = n // 2 + 1
    out = np.empty(shape, dtype=np.complex128)
    out[..., :h] = half
    if lattice is not None:
        flat = half.reshape(half.shape[:-3] + (n * n * h,))
        np.conjugate(flat[..., lattice.reflect_index], out=out[..., h:])
        return out
    tail = half[..., 1 : n // 2]  # xi3 in [1, n/2-1]
    for ax in (-3, -2):
        tail = np.roll(np.flip(tail, axis=ax), 1, axis=ax)
    out[..., h:] = np.conj(tail)[..., ::-1]
    return out


# -- transforms ------------------------------------------------------------------


def _phys_unscaled(coeff_blocks: np.ndarray, n: int) -> np.ndarray:
    """n^3 * ifftn over the trailing axes via the real half-spectrum."""
    half = np.ascontiguousarray(coeff_blocks[..., : n // 2 + 1])
    return _fft.irfftn(half, s=(n, n, n), axes=(-3, -2, -1), workers=FFT_WORKERS) * float(n) ** 3


def to_physical(u: SpectralField) -> np.ndarray:
    """Real velocity samples on the n^3 grid, shape (3, n, n, n)."""
    return _NORM * _phys_unscaled(u.coeffs, u.lattice.n)


def from_physical(lattice: Lattice, values: np.ndarray) -> SpectralField:
    """Coefficients of real grid samples, inverse of to_physical."""
    values = np.asarray(values, dtype=np.float64)
    n = lattice.n
    half = _fft.rfftn(values, axes=(-3, -2, -1), workers=FFT_WORKERS)
    coeffs = _hermitian_full(half, n, lattice) * (1.0 / (_NORM * float(n) ** 3))
    return SpectralField(lattice, coeffs, copy=False)


def gradient_coeffs(u: SpectralField) -> np.ndarray:
    """Coefficients of the gradient tensor, shape (3, 3, n, n, n); [a, c] = d_a u_c."""
    k = u.lattice.wavevectors
    return 1j * k[:, None] * u.coeffs[None, :]


# -- operations ------------------------------------------------------------------


def apply_mask(u: SpectralField, mask: BandMask) -> SpectralField:
    keep = mask.select(u.lattice)
    out = np.where(keep[None], u.coeffs, 0.0 + 0.0j)
    return SpectralField(u.lattice, out, copy=False)


def decompose_shells(u: SpectralField) -> ShellProfile:
    """Shell magnitudes sigma_j = ||Delta_j u||_2 for every nonempty dyadic shell."""
    energy = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    sums = np.bincount(
        u.lattice.shell_index.ravel(), weights=energy.ravel(), minlength=u.lattice.shell_count
    )
    return ShellProfile(
        {int(j): float(np.sqrt(sums[j])) for j in range(1, len(sums)) if sums[j] > 0.0}
    )


def leray_project(u: SpectralField) -> SpectralField:
    """Remove the gradient part: C <- C - xi (xi.C) / |xi|^2 for xi != 0."""
    k = u.lattice.wavevectors.astype(np.float64)
    rsq = u.lattice.radius_sq.astype(np.float64)
    rsq_safe = np.where(rsq == 0.0, 1.0, rsq)
    dot = np.einsum("cxyz,cxyz->xyz", k, u.coeffs)
    out = u.coeffs - k * (dot / rsq_safe)[None]
    out[:, 0, 0, 0] = u.coeffs[:, 0, 0, 0]
    return SpectralField(u.lattice, out, copy=False)


def inner_product(u: SpectralField, w: SpectralField) -> float:
    """Real part of the Parseval pairing sum conj(C_u) . C_w."""
    _require_same_lattice(u, w)
    return float(np.real(np.vdot(u.coeffs, w.coeffs)))


def norm_l2(u: SpectralField) -> float:
    return float(np.sqrt(np.real(np.vdot(u.coeffs, u.coeffs))))


def norm_hs(u: SpectralField, s: float, homogeneous: bool = True) -> float:
    """Sobolev norm of order s; the homogeneous weight |xi|^(2s) treats xi = 0 as 0."""
    rsq = u.lattice.radius_sq.astype(np.float64)
    energy = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    if homogeneous:
        weight = np.zeros_like(rsq)
        nz = rsq > 0.0
        weight[nz] = rsq[nz] ** s
    else:
        weight = (1.0 + rsq) ** s
    return float(np.sqrt(np.sum(weight * energy)))


def grad_norm_l2(u: SpectralField) -> float:
    return norm_hs(u, 1.0, homogeneous=True)


def sup_norms(u: SpectralField, oversample: int = 1) -> tuple[float, float]:
    """Grid maxima of |u(x)| and of the Frobenius magnitude |grad u(x)|.

    Both are lower bounds of the true suprema; `oversample` evaluates on a
    refined grid by exact trigonometric interpolation (zero padding).
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    n = u.lattice.n
    blocks = np.concatenate([u.coeffs, gradient_coeffs(u).reshape(9, n, n, n)], axis=0)
    if oversample > 1:
        blocks = _zero_pad(blocks, n, oversample * n)
        m = oversample * n
    else:
        m = n
    phys = _NORM * _phys_unscaled(blocks, m)
    vel = np.sqrt(np.sum(phys[:3] ** 2, axis=0))
    grad = np.sqrt(np.sum(phys[3:] ** 2, axis=0))
    return float(vel.max()), float(grad.max())


def _zero_pad(blocks: np.ndarray, n: int, m: int) -> np.ndarray:
    """Embed n-cube coefficients into an m-cube (m > n) by wavevector."""
    out_shape = blocks.shape[:-3] + (m, m, m)
    out = np.zeros(out_shape, dtype=np.complex128)
    shifted = np.fft.fftshift(blocks, axes=(-3, -2, -1))
    lo = m // 2 - n // 2
    out_shifted = np.fft.fftshift(out, axes=(-3, -2, -1))
    out_shifted[..., lo : lo + n, lo : lo + n, lo : lo + n] = shifted
    return np.fft.ifftshift(out_shifted, axes=(-3, -2, -1))


class BandLimitError(ValueError):
    pass


# Relative coefficient tolerance when checking band limitation of inputs.
_BAND_LIMIT_TOL = 1e-12


def convection(u: SpectralField, w: SpectralField) -> SpectralField:
    """Dealiased coefficients of (u . grad) w for divergence-free band-limited u.

    Physical-space products of the velocity against the gradient tensor,
    transformed back and truncated sharply at the lattice dealias radius.
    """
    _require_same_lattice(u, w)
    for name, f in (("u", u), ("w", w)):
        if f.band_limit_defect() > _BAND_LIMIT_TOL:
            raise BandLimitError(
                f"{name} is not band-limited within the dealias radius "
                f"{u.lattice.dealias_radius:g} (defect {f.band_limit_defect():.3e})"
            )
    n = u.lattice.n
    u_phys = _phys_unscaled(u.coeffs, n)
    grad_phys = _phys_unscaled(gradient_coeffs(w).reshape(9, n, n, n), n).reshape(3, 3, n, n, n)
    prod = np.einsum("axyz,acxyz->cxyz", u_phys, grad_phys)
    half = _fft.rfftn(prod, axes=(-3, -2, -1), workers=FFT_WORKERS)
    coeffs = _hermitian_full(half, n, u.lattice) * (_NORM / float(n) ** 3)
    coeffs[:, ~u.lattice.dealias_keep] = 0.0
    coeffs[:, 0, 0, 0] = 0.0
    return SpectralField(u.lattice, coeffs, copy=False)


# -- snapshot files (SHF1) -------------------------------------------------------

SNAPSHOT_MAGIC = b"SHF1"
_HEADER = struct.Struct("<4sIdd")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path: str | Path, u: SpectralField, nu: float, t: float) -> None:
    """Binary snapshot: magic, u32 n, f64 nu, f64 t, then 3*n^3 little-endian
    complex128 coefficients, component-major, FFT index order per axis."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, u.lattice.n, float(nu), float(t)))
        fh.write(np.ascontiguousarray(u.coeffs, dtype="<c16").tobytes())


def read_snapshot(
    path: str | Path, lattice: Lattice | None = None
) -> tuple[SpectralField, float, float]:
    """Read an SHF1 snapshot; returns (field, nu, t)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise SnapshotFormatError(f"{path}: truncated header")
        magic, n, nu, t = _HEADER.unpack(head)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
        if n < 8 or n % 2:
            raise SnapshotFormatError(f"{path}: invalid lattice size {n}")
        payload = fh.read()
    expected = 3 * n**3 * 16
    if len(payload) != expected:
        raise SnapshotFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    coeffs = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(3, n, n, n)
    if lattice is None:
        lattice = Lattice(n)
    elif lattice.n != n:
        raise SnapshotFormatError(f"{path}: lattice size {n} does not match expected {lattice.n}")
    if not np.all(np.isfinite(coeffs.view(np.float64))):
        raise SnapshotFormatError(f"{path}: non-finite coefficients")
    return SpectralField(lattice, coeffs, copy=False), float(nu), float(t)
