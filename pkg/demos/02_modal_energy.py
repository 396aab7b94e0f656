"""
Energy-ranked modes of the snapshot ensemble
============================================

The stored trajectory is compressed by the method of snapshots: the
singular values rank spatial structures by how much of the flow's
variance they carry.  A handful of modes capture almost everything, but
the travelling discontinuity keeps the tail from collapsing completely,
which is exactly why the reduced model drifts and needs correcting.
"""

import dataclasses
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from romnudge.burgers import load_snapshots
from romnudge.config import ExperimentConfig
from romnudge.pipeline import run_pipeline
from romnudge.pod import load_basis

OUTPUT = Path(__file__).parent / "output"
BASE = OUTPUT / "base"

config = dataclasses.replace(ExperimentConfig(), output_dir=str(BASE))
run_pipeline(config, last_stage="pod")

snaps = load_snapshots(BASE / "snapshots.bin")
basis = load_basis(BASE / "basis.bin")
sigma = basis.singular_values
energy = sigma**2 / np.sum(sigma**2)

print("retained energy by truncation rank:")
for r in (2, 4, 6, 8, 12):
    print(f"  r = {r:2d}: {np.sum(energy[:r]):.4%}")

fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
left.semilogy(np.arange(1, sigma.size + 1), sigma, "o-", markersize=3)
left.set_xlabel("mode index")
left.set_ylabel("singular value")
left.set_title("Spectrum of the snapshot matrix")

x = np.linspace(0.0, 1.0, basis.n_points)
for k in range(4):
    right.plot(x, basis.modes[:, k], label=f"mode {k + 1}")
right.set_xlabel("x")
right.set_title("Leading spatial modes")
right.legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUTPUT / "modal_energy.png", dpi=150)
print(f"figure: {OUTPUT / 'modal_energy.png'}")
