"""Pseudo-spectral integration of incompressible Navier-Stokes on the torus.

Explicit RK4 with an integrating factor for the viscous part, so the stiff
term is handled exactly per mode.  The nonlinearity is evaluated in divergence
form div(u x u), which agrees with (u.grad)u to roundoff for divergence-free
fields and needs 9 real transforms per evaluation instead of 15; the sharp
dealias truncation of the lattice is applied to every nonlinear product.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np
import scipy.fft as _fft

from .fields import (
    FFT_WORKERS,
    Lattice,
    SpectralField,
    _conj_reflect,
    _hermitian_full,
    grad_norm_l2,
    leray_project,
    norm_l2,
    sup_norms,
    write_snapshot,
)

_TWO_PI = 2.0 * np.pi
_NORM = _TWO_PI ** (-1.5)

# Energy growth beyond this factor of the initial energy aborts a run.
ENERGY_GROWTH_LIMIT = 1e3


class ConfigError(ValueError):
    pass


class BlowUpError(RuntimeError):
    """Raised when a run produces non-finite values or runaway energy."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class InitialCondition:
    kind: str  # "taylor-green" | "random"
    amplitude: float = 1.0
    seed: int = 0
    slope: float = -2.0
    energy: float = 1.0

    def to_dict(self) -> dict:
        if self.kind == "taylor-green":
            return {"kind": self.kind, "amplitude": self.amplitude}
        return {"kind": self.kind, "seed": self.seed, "slope": self.slope, "energy": self.energy}


@dataclass(frozen=True)
class SimConfig:
    n: int
    nu: float
    dt: float
    T: float
    init: InitialCondition
    snapshot_every: int = 50
    out_dir: str | None = None

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"n must be even and >= 8, got {self.n}")
        if not self.nu > 0:
            raise ConfigError("nu must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nu": self.nu,
            "dt": self.dt,
            "T": self.T,
            "init": self.init.to_dict(),
            "snapshot_every": self.snapshot_every,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"n", "nu", "dt", "T", "init", "snapshot_every", "out_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"n", "nu", "dt", "T", "init"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        init_data = data["init"]
        if not isinstance(init_data, dict) or "kind" not in init_data:
            raise ConfigError("init must be an object with a 'kind'")
        kind = init_data["kind"]
        if kind == "taylor-green":
            allowed = {"kind", "amplitude"}
            init = InitialCondition(kind=kind, amplitude=float(init_data.get("amplitude", 1.0)))
            if init.amplitude <= 0:
                raise ConfigError("taylor-green amplitude must be positive")
        elif kind == "random":
            allowed = {"kind", "seed", "slope", "energy"}
            init = InitialCondition(
                kind=kind,
                seed=int(init_data.get("seed", 0)),
                slope=float(init_data.get("slope", -2.0)),
                energy=float(init_data.get("energy", 1.0)),
            )
            if init.energy <= 0:
                raise ConfigError("random init energy must be positive")
        else:
            raise ConfigError(f"unknown init kind {kind!r}")
        extra = set(init_data) - allowed
        if extra:
            raise ConfigError(f"unknown init keys for {kind!r}: {sorted(extra)}")
        try:
            return cls(
                n=int(data["n"]),
                nu=float(data["nu"]),
                dt=float(data["dt"]),
                T=float(data["T"]),
                init=init,
                snapshot_every=int(data.get("snapshot_every", 50)),
                out_dir=data.get("out_dir"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "SimConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


# -- initial conditions ----------------------------------------------------------


def taylor_green(lattice: Lattice, amplitude: float = 1.0) -> SpectralField:
    """Classical Taylor-Green vortex (sin x cos y cos z, -cos x sin y cos z, 0).

    Exactly divergence-free by construction; energy sits on the eight
    |xi| = sqrt(3) corner modes, i.e. entirely in dyadic shell 1.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    u = SpectralField.zero(lattice)
    scale = amplitude / 8.0 * _TWO_PI**1.5
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                idx = (sx % lattice.n, sy % lattice.n, sz % lattice.n)
                u.coeffs[(0,) + idx] = -1j * sx * scale
                u.coeffs[(1,) + idx] = 1j * sy * scale
    return u


def random_divergence_free(
    lattice: Lattice, seed: int, slope: float = -2.0, energy: float = 1.0
) -> SpectralField:
    """Seeded solenoidal field with spectrum |C(xi)| ~ |xi|^slope inside the
    dealias radius, rescaled to the requested squared L2 norm."""
    if energy <= 0:
        raise ValueError("energy must be positive")
    rng = np.random.default_rng(seed)
    n = lattice.n
    raw = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))
    radius = np.sqrt(lattice.radius_sq.astype(np.float64))
    envelope = np.zeros_like(radius)
    inside = (lattice.radius_sq > 0) & lattice.dealias_keep
    envelope[inside] = radius[inside] ** slope
    coeffs = raw * envelope[None]
    coeffs = 0.5 * (coeffs + _conj_reflect(coeffs))
    u = leray_project(SpectralField(lattice, coeffs, copy=False))
    u.coeffs[:, 0, 0, 0] = 0.0
    current = norm_l2(u)
    if current == 0.0:
        raise ValueError("degenerate random field (zero after projection)")
    u.coeffs *= math.sqrt(energy) / current
    return u


def initial_field(lattice: Lattice, init: InitialCondition) -> SpectralField:
    if init.kind == "taylor-green":
        return taylor_green(lattice, init.amplitude)
    if init.kind == "random":
        return random_divergence_free(lattice, init.seed, init.slope, init.energy)
    raise ConfigError(f"unknown init kind {init.kind!r}")


# -- stepping --------------------------------------------------------------------


# index pairs for the symmetric products (u x u)_ab
_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_PAIR_AT = {pair: i for i, pair in enumerate(_PAIRS)}


class _NonlinearOperator:
    """-P[dealias[div(u x u)]] on the real half-spectrum of a lattice."""

    def __init__(self, lattice: Lattice):
        n = lattice.n
        h = n // 2 + 1
        self.n = n
        self.lattice = lattice
        self.k = lattice.wavevectors[..., :h].astype(np.float64)
        self.ksq = lattice.radius_sq[..., :h].astype(np.float64)
        self._inv_ksq = 1.0 / np.where(self.ksq == 0.0, 1.0, self.ksq)
        # -i * xi * n^3 * (2pi)^(-3/2): folds the product normalisation and the
        # sign of the convection term into the divergence assembly.
        self._ik_scaled = (-1j * float(n) ** 3 * _NORM) * self.k
        self._keep = lattice.dealias_keep[..., :h].astype(np.float64)

    def __call__(self, ch: np.ndarray) -> np.ndarray:
        n = self.n
        # unscaled samples; the missing n^3 * (2pi)^(-3/2) per factor is folded
        # into _ik_scaled (one factor) and the rfft normalisation (the other).
        u = _fft.irfftn(ch, s=(n, n, n), axes=(-3, -2, -1), workers=FFT_WORKERS)
        prods = np.empty((6, n, n, n))
        for i, (a, b) in enumerate(_PAIRS):
            np.multiply(u[a], u[b], out=prods[i])
        f = _fft.rfftn(prods, axes=(-3, -2, -1), workers=FFT_WORKERS)
        ik = self._ik_scaled
        out = np.empty_like(ch)
        for c in range(3):
            acc = ik[0] * f[_PAIR_AT[tuple(sorted((0, c)))]]
            acc += ik[1] * f[_PAIR_AT[tuple(sorted((1, c)))]]
            acc += ik[2] * f[_PAIR_AT[tuple(sorted((2, c)))]]
            out[c] = acc
        # Leray projection, dealiasing, zero mean.
        dot = np.einsum("cxyz,cxyz->xyz", self.k, out)
        dot *= self._inv_ksq
        for c in range(3):
            out[c] -= self.k[c] * dot
            out[c] *= self._keep
        out[:, 0, 0, 0] = 0.0
        return out


class NavierStokesStepper:
    """Integrating-factor RK4 for du/dt = -P[(u.grad)u] + nu*Lap(u).

    State crosses the step boundary as a full coefficient cube; internally one
    step works on the real half-spectrum and re-expands once, which also pins
    Hermitian symmetry exactly at every step.
    """

    def __init__(self, lattice: Lattice, nu: float, dt: float):
        if nu <= 0:
            raise ValueError("nu must be positive")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.lattice = lattice
        self.nu = nu
        self.dt = dt
        self._nonlinear = _NonlinearOperator(lattice)
        self._half_decay = np.exp(-0.5 * nu * dt * self._nonlinear.ksq)
        self._full_decay = self._half_decay**2

    def _step_half(self, ch: np.ndarray) -> np.ndarray:
        dt = self.dt
        e, e2 = self._half_decay, self._full_decay
        na = self._nonlinear(ch)
        nb = self._nonlinear(e * (ch + (0.5 * dt) * na))
        nc = self._nonlinear(e * ch + (0.5 * dt) * nb)
        nd = self._nonlinear(e2 * ch + dt * (e * nc))
        return e2 * (ch + (dt / 6.0) * na) + (dt / 3.0) * (e * (nb + nc)) + (dt / 6.0) * nd

    def step(self, u: SpectralField) -> SpectralField:
        if u.lattice != self.lattice:
            raise ValueError("field lattice does not match the stepper")
        n = self.lattice.n
        ch = np.ascontiguousarray(u.coeffs[..., : n // 2 + 1])
        out = _hermitian_full(self._step_half(ch), n)
        return SpectralField(self.lattice, out, copy=False)


def step(u: SpectralField, nu: float, dt: float) -> SpectralField:
    """One integrating-factor RK4 step; convenience wrapper over the stepper."""
    return NavierStokesStepper(u.lattice, nu, dt).step(u)


def evolution_rhs(u: SpectralField, nu: float) -> SpectralField:
    """Analytic right side -P[(u.grad)u] + nu*Lap(u) at a state, dealiased.

    This is the same operator the stepper integrates; diagnostics pair it with
    masked fields instead of finite-differencing snapshots.
    """
    op = _NonlinearOperator(u.lattice)
    ch = np.ascontiguousarray(u.coeffs[..., : u.lattice.n // 2 + 1])
    rhs_half = op(ch) - nu * op.ksq * ch
    return SpectralField(u.lattice, _hermitian_full(rhs_half, u.lattice.n), copy=False)


# -- running ---------------------------------------------------------------------


@dataclass
class StateSnapshot:
    """One saved state: time, viscosity and the divergence-free field."""

    t: float
    nu: float
    field: SpectralField

    @property
    def dissipation(self) -> float:
        return self.nu * grad_norm_l2(self.field) ** 2

    @property
    def energy(self) -> float:
        return 0.5 * norm_l2(self.field) ** 2

    @classmethod
    def load(cls, path: str | Path, lattice: Lattice | None = None) -> "StateSnapshot":
        from .fields import read_snapshot

        field, nu, t = read_snapshot(path, lattice)
        return cls(t=t, nu=nu, field=field)


@dataclass
class SimulationResult:
    config: SimConfig
    times: np.ndarray
    energies: np.ndarray
    dissipations: np.ndarray
    snapshot_paths: list[Path]
    stability: dict
    final_state: SpectralField | None = dataclass_field(default=None, repr=False)

    @property
    def dissipation_integral(self) -> float:
        """Trapezoidal integral of nu*||grad u||^2 over the run."""
        if len(self.times) < 2:
            return 0.0
        return float(np.trapezoid(self.dissipations, self.times))

    @property
    def energy_balance_residual(self) -> float:
        """E(T) - E(0) + integral of dissipation; zero for the exact flow."""
        return float(self.energies[-1] - self.energies[0] + self.dissipation_integral)

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "times": [float(x) for x in self.times],
            "energies": [float(x) for x in self.energies],
            "dissipations": [float(x) for x in self.dissipations],
            "dissipation_integral": self.dissipation_integral,
            "energy_balance_residual": self.energy_balance_residual,
            "snapshots": [p.name for p in self.snapshot_paths],
            "stability": self.stability,
        }

    def write_summary(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


# RK4 absolute stability reaches about 2.83 on the imaginary axis; the viscous
# part is integrated exactly, so only advection constrains dt.
_RK4_IMAG_LIMIT = 2.83


def stability_report(u0: SpectralField, dt: float) -> dict:
    sup_u, _ = sup_norms(u0)
    kmax = u0.lattice.dealias_radius
    advective = _RK4_IMAG_LIMIT / (kmax * max(sup_u, 1e-30))
    return {
        "dt": dt,
        "advective_dt_estimate": advective,
        "initial_sup_velocity": sup_u,
        "dt_exceeds_estimate": bool(dt > advective),
    }


def run_simulation(config: SimConfig) -> SimulationResult:
    """Integrate the configured flow, stream snapshots, return histories.

    Raises BlowUpError (with a report attached) on non-finite values or energy
    growth beyond ENERGY_GROWTH_LIMIT times the initial energy.
    """
    lattice = Lattice(config.n)
    u = initial_field(lattice, config.init)

    out_dir: Path | None = None
    if config.out_dir is not None:
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    n_steps = int(math.floor(config.T / config.dt + 1e-9))
    remainder = config.T - n_steps * config.dt
    if remainder < 1e-12 * max(config.T, config.dt):
        remainder = 0.0

    stability = stability_report(u, config.dt)

    times = [0.0]
    energies = [0.5 * norm_l2(u) ** 2]
    dissipations = [config.nu * grad_norm_l2(u) ** 2]
    snapshot_paths: list[Path] = []

    def save(step_index: int, state: SpectralField, t: float) -> None:
        if out_dir is None:
            return
        path = out_dir / f"snap_{step_index:08d}.shf1"
        write_snapshot(path, state, config.nu, t)
        snapshot_paths.append(path)

    def guard(step_index: int, t: float, energy: float) -> None:
        if math.isfinite(energy) and energy <= ENERGY_GROWTH_LIMIT * max(energies[0], 1e-300):
            return
        report = {
            "step": step_index,
            "time": t,
            "energy": energy,
            "initial_energy": energies[0],
            "reason": "non-finite state" if not math.isfinite(energy) else "energy growth",
        }
        if out_dir is not None:
            with open(out_dir / "blowup.json", "w", encoding="utf-8") as fh:
                json.dump(report, fh, sort_keys=True, indent=1)
                fh.write("\n")
        raise BlowUpError(f"run aborted at step {step_index}: {report['reason']}", report)

    save(0, u, 0.0)
    stepper = NavierStokesStepper(lattice, config.nu, config.dt)
    total_steps = n_steps + (1 if remainder else 0)
    for m in range(1, total_steps + 1):
        if m <= n_steps:
            u = stepper.step(u)
            t = m * config.dt
        else:
            u = NavierStokesStepper(lattice, config.nu, remainder).step(u)
            t = config.T
        energy = 0.5 * norm_l2(u) ** 2
        guard(m, t, energy)
        times.append(t)
        energies.append(energy)
        dissipations.append(config.nu * grad_norm_l2(u) ** 2)
        if m % config.snapshot_every == 0 or m == total_steps:
            save(m, u, t)

    result = SimulationResult(
        config=config,
        times=np.asarray(times),
        energies=np.asarray(energies),
        dissipations=np.asarray(dissipations),
        snapshot_paths=snapshot_paths,
        stability=stability,
        final_state=u,
    )
    if out_dir is not None:
        result.write_summary(out_dir / "summary.json")
    return result
