import json
import math

import numpy as np
import pytest

from freqshell import fields as fd
from freqshell import sim as sm

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def lattice():
    return fd.Lattice(16)


class TestTaylorGreen:
    def test_matches_analytic_field(self, lattice):
        amplitude = 1.7
        u = sm.taylor_green(lattice, amplitude)
        n = lattice.n
        x = np.arange(n) * TWO_PI / n
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        exact = np.stack(
            [
                amplitude * np.sin(X) * np.cos(Y) * np.cos(Z),
                -amplitude * np.cos(X) * np.sin(Y) * np.cos(Z),
                np.zeros_like(X),
            ]
        )
        assert np.abs(fd.to_physical(u) - exact).max() < 1e-14 * amplitude

    def test_norm_closed_form_and_quadrature(self, lattice):
        amplitude = 0.9
        u = sm.taylor_green(lattice, amplitude)
        # closed form ||u||_2 = A sqrt(2 pi^3); independent grid quadrature oracle
        assert fd.norm_l2(u) == pytest.approx(amplitude * math.sqrt(2 * math.pi**3), rel=1e-14)
        phys = fd.to_physical(u)
        quad = math.sqrt(float(np.sum(phys**2)) * (TWO_PI / lattice.n) ** 3)
        assert fd.norm_l2(u) == pytest.approx(quad, rel=1e-13)

    def test_exactly_divergence_free_in_first_shell(self, lattice):
        u = sm.taylor_green(lattice, 1.0)
        assert u.divergence_defect() == 0.0
        assert fd.decompose_shells(u).support == (1,)


class TestRandomInit:
    def test_deterministic(self, lattice):
        a = sm.random_divergence_free(lattice, seed=42)
        b = sm.random_divergence_free(lattice, seed=42)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_requested_energy(self, lattice):
        u = sm.random_divergence_free(lattice, seed=3, energy=2.5)
        assert fd.norm_l2(u) ** 2 == pytest.approx(2.5, rel=1e-12)

    def test_divergence_free_and_band_limited(self, lattice):
        u = sm.random_divergence_free(lattice, seed=4, slope=-1.0)
        assert u.divergence_defect() <= 1e-12
        assert u.band_limit_defect() == 0.0
        assert u.hermitian_defect() <= 1e-14


class TestStepper:
    def test_zero_field_fixed_point(self, lattice):
        z = fd.SpectralField.zero(lattice)
        out = sm.step(z, nu=0.1, dt=0.01)
        assert np.abs(out.coeffs).max() == 0.0

    def test_exact_viscous_decay_single_mode(self, lattice):
        # (0, A cos x1, 0) has vanishing self-convection, so the integrating
        # factor must reproduce the heat decay exactly
        n = lattice.n
        c = np.zeros((3, n, n, n), dtype=complex)
        c[1, 1, 0, 0] = 0.4 * TWO_PI**1.5
        c[1, n - 1, 0, 0] = 0.4 * TWO_PI**1.5
        u = fd.SpectralField(lattice, c)
        nu, dt = 0.37, 0.013
        out = sm.step(u, nu, dt)
        # decay factor agrees with exp(-nu dt |xi|^2) to one rounding (the
        # integrating factor is applied as exp(-nu dt |xi|^2 / 2) squared)
        expected = c * math.exp(-nu * dt)
        occupied = expected != 0
        assert np.allclose(out.coeffs[occupied], expected[occupied], rtol=1e-15, atol=0.0)
        assert np.abs(out.coeffs[~occupied]).max() == 0.0

    def test_energy_never_increases(self):
        lattice = fd.Lattice(32)
        u = sm.taylor_green(lattice, 1.0)
        stepper = sm.NavierStokesStepper(lattice, nu=0.05, dt=2e-3)
        prev = fd.norm_l2(u) ** 2
        for _ in range(25):
            u = stepper.step(u)
            current = fd.norm_l2(u) ** 2
            assert current <= prev * (1 + 1e-12)
            prev = current

    def test_symmetries_preserved_over_many_steps(self):
        lattice = fd.Lattice(8)
        u = sm.random_divergence_free(lattice, seed=9, slope=-1.0, energy=1.0)
        stepper = sm.NavierStokesStepper(lattice, nu=0.02, dt=5e-3)
        for _ in range(10**4):
            u = stepper.step(u)
        assert u.hermitian_defect() <= 1e-10
        assert u.divergence_defect() <= 1e-10
        assert u.mean_mode_magnitude() == 0.0

    def test_rhs_matches_literal_convection_form(self, lattice):
        u = sm.random_divergence_free(lattice, seed=10, slope=-1.5, energy=2.0)
        nu = 0.21
        rhs = sm.evolution_rhs(u, nu)
        literal = -1.0 * fd.leray_project(fd.convection(u, u)) + fd.SpectralField(
            lattice, -nu * lattice.radius_sq * u.coeffs
        )
        scale = np.abs(literal.coeffs).max()
        assert np.abs(rhs.coeffs - literal.coeffs).max() <= 1e-13 * scale


class TestConfig:
    def test_json_roundtrip(self, tmp_path):
        payload = {
            "n": 16,
            "nu": 0.05,
            "dt": 1e-3,
            "T": 0.01,
            "init": {"kind": "taylor-green", "amplitude": 2.0},
            "snapshot_every": 5,
            "out_dir": str(tmp_path / "out"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        config = sm.SimConfig.from_json(path)
        assert config.init.amplitude == 2.0
        assert config.to_dict()["init"] == {"kind": "taylor-green", "amplitude": 2.0}

    @pytest.mark.parametrize(
        "mutation",
        [
            {"n": 7},
            {"nu": 0.0},
            {"dt": -1.0},
            {"T": -0.5},
            {"snapshot_every": 0},
            {"init": {"kind": "vortex"}},
            {"init": {"kind": "taylor-green", "seed": 1}},
            {"bogus": 1},
        ],
    )
    def test_invalid_configs_rejected(self, mutation):
        payload = {
            "n": 16,
            "nu": 0.05,
            "dt": 1e-3,
            "T": 0.01,
            "init": {"kind": "taylor-green", "amplitude": 1.0},
        }
        payload.update(mutation)
        with pytest.raises(sm.ConfigError):
            sm.SimConfig.from_dict(payload)

    def test_random_init_schema(self):
        config = sm.SimConfig.from_dict(
            {
                "n": 16,
                "nu": 0.1,
                "dt": 1e-3,
                "T": 0.0,
                "init": {"kind": "random", "seed": 5, "slope": -2.0, "energy": 0.5},
            }
        )
        assert config.init.seed == 5


class TestRun:
    def test_zero_horizon_single_snapshot(self, tmp_path):
        config = sm.SimConfig(
            n=16, nu=0.1, dt=1e-3, T=0.0,
            init=sm.InitialCondition("taylor-green", amplitude=1.0),
            snapshot_every=10, out_dir=str(tmp_path),
        )
        result = sm.run_simulation(config)
        assert len(result.snapshot_paths) == 1
        state, nu, t = fd.read_snapshot(result.snapshot_paths[0])
        assert t == 0.0 and nu == 0.1
        assert np.array_equal(state.coeffs, sm.taylor_green(fd.Lattice(16), 1.0).coeffs)

    def test_state_snapshot_loader(self, tmp_path):
        config = sm.SimConfig(
            n=16, nu=0.1, dt=1e-3, T=0.0,
            init=sm.InitialCondition("taylor-green", amplitude=1.0),
            snapshot_every=10, out_dir=str(tmp_path),
        )
        result = sm.run_simulation(config)
        snap = sm.StateSnapshot.load(result.snapshot_paths[0])
        assert snap.t == 0.0 and snap.nu == 0.1
        assert snap.energy == pytest.approx(result.energies[0], rel=1e-15)
        assert snap.dissipation == pytest.approx(result.dissipations[0], rel=1e-12)

    def test_snapshot_cadence_and_histories(self, tmp_path):
        config = sm.SimConfig(
            n=16, nu=0.1, dt=1e-3, T=0.02,
            init=sm.InitialCondition("random", seed=1, slope=-2.0, energy=1.0),
            snapshot_every=8, out_dir=str(tmp_path),
        )
        result = sm.run_simulation(config)
        names = [p.name for p in result.snapshot_paths]
        assert names == ["snap_00000000.shf1", "snap_00000008.shf1", "snap_00000016.shf1", "snap_00000020.shf1"]
        assert len(result.times) == 21
        assert result.times[-1] == pytest.approx(0.02)
        assert (tmp_path / "summary.json").exists()

    def test_deterministic_reruns_byte_identical(self, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        blobs = []
        for d in dirs:
            config = sm.SimConfig(
                n=16, nu=0.05, dt=2e-3, T=0.02,
                init=sm.InitialCondition("random", seed=77, slope=-2.0, energy=1.0),
                snapshot_every=5, out_dir=str(d),
            )
            sm.run_simulation(config)
            blobs.append(
                [(p.name, p.read_bytes()) for p in sorted(d.glob("*.shf1"))]
                + [("summary", (d / "summary.json").read_bytes().replace(str(d).encode(), b"OUT"))]
            )
        assert blobs[0] == blobs[1]

    def test_blowup_guard_raises_with_report(self, tmp_path):
        # inviscid-ish huge amplitude with a large dt destabilises RK4 quickly
        config = sm.SimConfig(
            n=16, nu=1e-9, dt=0.9, T=20.0,
            init=sm.InitialCondition("taylor-green", amplitude=80.0),
            snapshot_every=1000, out_dir=str(tmp_path),
        )
        with pytest.raises(sm.BlowUpError) as err:
            sm.run_simulation(config)
        assert err.value.report["reason"] in ("non-finite state", "energy growth")
        assert (tmp_path / "blowup.json").exists()

    def test_stability_estimate_reported(self):
        config = sm.SimConfig(
            n=16, nu=0.1, dt=1e-3, T=0.0,
            init=sm.InitialCondition("taylor-green", amplitude=1.0),
        )
        result = sm.run_simulation(config)
        assert result.stability["advective_dt_estimate"] > 0
        assert not result.stability["dt_exceeds_estimate"]

    def test_energy_balance_residual_small(self):
        config = sm.SimConfig(
            n=16, nu=0.1, dt=1e-3, T=0.05,
            init=sm.InitialCondition("taylor-green", amplitude=1.0),
        )
        result = sm.run_simulation(config)
        assert abs(result.energy_balance_residual) <= 1e-6 * result.energies[0]
