"""Tour of the spectral building blocks: masks, shells, projection, convection.

Everything runs on a small 16^3 lattice.
"""

import numpy as np

from freqshell import fields as fd
from freqshell import sim as sm
from freqshell.fields import BandMask

lattice = fd.Lattice(16)
u = sm.random_divergence_free(lattice, seed=3, slope=-1.5, energy=2.0)
print(f"{lattice!r}: ||u||_2 = {fd.norm_l2(u):.6f}, divergence defect {u.divergence_defect():.2e}")

# sharp masks decompose the field exactly
high = fd.apply_mask(u, BandMask.high(3.0))
low = fd.apply_mask(u, BandMask.ball(3.0))
print("high(3) + ball(3) reassembles bitwise:",
      np.array_equal(high.coeffs + low.coeffs, u.coeffs))

profile = fd.decompose_shells(u)
print("dyadic shell profile:")
for j, sigma in profile:
    print(f"  shell {j}: [2^{j-1}, 2^{j}) magnitude {sigma:.6f}")
total = sum(sigma**2 for _, sigma in profile)
print(f"shell energies vs ||u||^2: {total:.6f} vs {fd.norm_l2(u)**2:.6f}")
print(f"weighted shell norm: {profile.supercritical_norm():.6f} "
      f"<= critical norm {profile.sobolev_norm(0.5):.6f}")

# norms, sup norms, inner products
print(f"\nhomogeneous H^1/2 norm: {fd.norm_hs(u, 0.5):.6f}")
sup_u, sup_grad = fd.sup_norms(u)
print(f"grid sup norms: |u|_oo = {sup_u:.6f}, |grad u|_oo = {sup_grad:.6f}")
fine = fd.sup_norms(u, oversample=2)
print(f"2x oversampled: {fine[0]:.6f}, {fine[1]:.6f} (grid max is a lower bound)")

# the cancellation that drives the high-frequency energy estimates
conv = fd.convection(u, high)
pairing = fd.inner_product(conv, high)
scale = fd.norm_l2(u) * fd.norm_l2(high) * fd.grad_norm_l2(high)
print(f"\n<(u.grad)u^k, u^k> = {pairing:.3e} (reference scale {scale:.3e})")

# snapshots round-trip bit for bit
import tempfile
from pathlib import Path

path = Path(tempfile.mkdtemp()) / "state.shf1"
fd.write_snapshot(path, u, nu=0.05, t=0.0)
v, nu, t = fd.read_snapshot(path)
print(f"snapshot round trip identical: {np.array_equal(u.coeffs, v.coeffs)} ({path})")
