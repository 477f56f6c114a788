import time

import pytest

from freqshell import diagnostics as dg
from freqshell import sim as sm

# Acceptance-run parameters (criterion configuration; several tests share them).
ACCEPTANCE_SIM = dict(
    n=64,
    nu=0.05,
    dt=1e-3,
    T=1.0,
    snapshot_every=50,
    amplitude=1.0,
)
ACCEPTANCE_EPSILON = 0.1


def acceptance_config(out_dir, dt=None):
    return sm.SimConfig(
        n=ACCEPTANCE_SIM["n"],
        nu=ACCEPTANCE_SIM["nu"],
        dt=ACCEPTANCE_SIM["dt"] if dt is None else dt,
        T=ACCEPTANCE_SIM["T"],
        init=sm.InitialCondition("taylor-green", amplitude=ACCEPTANCE_SIM["amplitude"]),
        snapshot_every=ACCEPTANCE_SIM["snapshot_every"],
        out_dir=None if out_dir is None else str(out_dir),
    )


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """The Taylor-Green acceptance simulation plus its diagnostics, shared by
    several criteria.  Wall times are recorded for the runtime budgets."""
    root = tmp_path_factory.mktemp("acceptance")
    snap_dir = root / "snapshots"
    t0 = time.monotonic()
    result = sm.run_simulation(acceptance_config(snap_dir))
    sim_seconds = time.monotonic() - t0

    t0 = time.monotonic()
    diag = dg.run_diagnostics(snap_dir, epsilon=ACCEPTANCE_EPSILON)
    diag_seconds = time.monotonic() - t0

    report_dir = root / "reports"
    report_dir.mkdir()
    diag.write_records_csv(report_dir / "records.csv")
    diag.write_constants_json(report_dir / "constants.json")
    diag.write_certificate_json(report_dir / "uniform_smallness.json")

    return {
        "root": root,
        "snap_dir": snap_dir,
        "report_dir": report_dir,
        "sim": result,
        "diag": diag,
        "sim_seconds": sim_seconds,
        "diag_seconds": diag_seconds,
    }
