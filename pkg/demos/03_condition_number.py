# %% [markdown]
# # Conditioning of the line-of-sight MIMO channel
#
# With spherical wavefronts a short-range LoS link can carry several
# streams.  The channel becomes orthogonal when the SA pitch matches the
# Rayleigh spacing sqrt(lambda D / K); away from it the condition number
# rises, steeply as the pitch shrinks.

# %%
import numpy as np

from thzsim import LinkConfig, build_geometry, condition_map, rayleigh_spacing, tune_to_dip
from _plot import figure, save

f, K = 1e12, 4
geom = build_geometry(1, K, 1, 1, 5e-3, 20e-6, f)
link = LinkConfig(geom, geom, 1.0, f)
deltas = np.geomspace(2e-3, 24e-3, 200)
dists = np.linspace(0.5, 3.0, 200)
cmap = condition_map(link, deltas, dists)
print(f"condition number range {cmap.cond.min():.3f} to {cmap.cond.max():.3g}")

# %% [markdown]
# Following the Rayleigh curve across range, the grid dips stay close to 1.

# %%
for D in (0.5, 1.0, 2.0, 3.0):
    j = int(np.argmin(np.abs(dists - D)))
    dr = rayleigh_spacing(f, dists[j], K)
    i = int(np.argmin(np.abs(deltas - dr)))
    print(f"D = {dists[j]:.2f} m: Rayleigh pitch {dr * 1e3:.2f} mm, cond {cmap.cond[i, j]:.3f}")

# %% [markdown]
# A link stuck at a small pitch can be re-tuned to the nearest good dip.

# %%
dr = rayleigh_spacing(f, 1.0, K)
delta_opt, cond_opt = tune_to_dip(link, 0.2 * dr)
print(f"tuned pitch {delta_opt * 1e3:.3f} mm ({delta_opt / dr:.3f} x Rayleigh), cond {cond_opt:.4f}")

# %%
plt = figure()
if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.pcolormesh(dists, deltas * 1e3, np.log10(cmap.cond), shading="auto")
    ax.plot(dists, [rayleigh_spacing(f, D, K) * 1e3 for D in dists], "w--", lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("D (m)")
    ax.set_ylabel("SA pitch (mm)")
    fig.colorbar(im, label="log10 condition number")
    save(plt, "condition_number.png")
