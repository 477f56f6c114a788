"""Integrate a Taylor-Green flow and evaluate the inequality records on it.

A short n=32 run keeps this demo quick; the acceptance configuration in
configs/taylor-green-64.json is the full-size version.  The record family and
the measured constants are described in freqshell.diagnostics.
"""

import tempfile
from pathlib import Path

from freqshell import diagnostics as dg
from freqshell import sim as sm

out_dir = Path(tempfile.mkdtemp(prefix="freqshell_demo_"))
config = sm.SimConfig(
    n=32,
    nu=0.05,
    dt=2e-3,
    T=0.3,
    init=sm.InitialCondition("taylor-green", amplitude=1.0),
    snapshot_every=50,
    out_dir=str(out_dir),
)

result = sm.run_simulation(config)
print(f"integrated {len(result.times) - 1} steps; snapshots in {out_dir}")
print(f"energy {result.energies[0]:.4f} -> {result.energies[-1]:.4f}, "
      f"dissipation integral {result.dissipation_integral:.4f}")
print(f"energy-balance residual (trapezoid): {result.energy_balance_residual:.3e}")

diag = dg.run_diagnostics(out_dir, epsilon=0.1)
print(f"\n{len(diag.records)} records, {len(diag.failed_records)} failed")

by_name = {}
for record in diag.records:
    entry = by_name.setdefault(record.name, [0, 0.0])
    entry[0] += 1
    entry[1] = max(entry[1], record.ratio)
print(f"{'record':26s} {'count':>5s} {'max ratio':>12s}")
for name in sorted(by_name):
    count, ratio = by_name[name]
    print(f"{name:26s} {count:5d} {ratio:12.4g}")

print("\nmeasured constants:")
for constant in diag.constants:
    print(f"  {constant.name:28s} {constant.value:.6g}")

cert = diag.certificate
print(
    f"\nuniform smallness certificate: M={cert.tail_cutoff}, l0={cert.threshold_level}, "
    f"{len(cert.levels)} representable level(s), passed={cert.passed}"
    + ("  [threshold beyond the index cap: norms this size need more levels "
       "than 64-bit shell indices can hold]" if cert.range_limited else "")
)

report_dir = out_dir / "reports"
report_dir.mkdir(exist_ok=True)
diag.write_records_csv(report_dir / "records.csv")
diag.write_constants_json(report_dir / "constants.json")
diag.write_certificate_json(report_dir / "uniform_smallness.json")
print(f"reports written to {report_dir}")
