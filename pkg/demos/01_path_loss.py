# %% [markdown]
# # Path loss in a humid terahertz channel
#
# Total loss is free-space spreading plus molecular absorption.  Spreading
# grows smoothly with frequency and range; absorption adds sharp spikes at
# the water-vapour lines whose depth scales linearly with distance (in dB).

# %%
import numpy as np

from thzsim import (LineCatalog, Medium, PhysicalConstants, builtin_catalog_path,
                    load_catalog, pathloss_grid)
from _plot import figure, save

C = PhysicalConstants()
catalog = load_catalog(builtin_catalog_path())
medium = Medium.humid_air(0.01)
print(f"{len(catalog.lines)} lines, {catalog.centers[0] / 1e12:.3f} to "
      f"{catalog.centers[-1] / 1e12:.3f} THz")

# %% [markdown]
# A 500 x 100 grid over 0.1-10 THz and 0.3-30 m takes a fraction of a second.

# %%
freqs = np.linspace(0.1e12, 10e12, 500)
dists = np.linspace(0.3, 30.0, 100)
loss = pathloss_grid(catalog, medium, C, freqs, dists)
free = pathloss_grid(LineCatalog(()), medium, C, freqs, dists)

for d in (1.0, 10.0, 30.0):
    j = int(np.argmin(np.abs(dists - d)))
    excess = loss[:, j] - free[:, j]
    print(f"d = {dists[j]:5.2f} m: spreading {free[0, j]:.1f}-{free[-1, j]:.1f} dB, "
          f"worst absorption {excess.max():.1f} dB at {freqs[excess.argmax()] / 1e12:.2f} THz")

# %% [markdown]
# The strongest spikes line up with the catalog line centres.

# %%
at30 = loss[:, -1]
peaks = freqs[1:-1][(at30[1:-1] > at30[:-2]) & (at30[1:-1] > at30[2:])]
step = freqs[1] - freqs[0]
hits = sum(np.min(np.abs(peaks - fc)) <= step for fc in catalog.centers)
print(f"{hits}/{len(catalog.centers)} line centres sit on a local maximum at 30 m")

# %%
plt = figure()
if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 4))
    im = ax.pcolormesh(dists, freqs / 1e12, loss, shading="auto")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("frequency (THz)")
    fig.colorbar(im, label="path loss (dB)")
    save(plt, "path_loss.png")
