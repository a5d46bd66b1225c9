# %% [markdown]
# # Distance-aware windows and water-filling
#
# The usable spectrum shrinks with range as absorption lines widen into
# walls.  At each distance the open windows are split into 1 GHz cells and
# the power budget is water-filled over them; bisection on the range then
# finds how far a target rate can be carried.

# %%
from thzsim import (Medium, PhysicalConstants, builtin_catalog_path, find_windows,
                    load_catalog, max_distance_for_rate, rate_at_distance)
from _plot import figure, save

C = PhysicalConstants()
catalog = load_catalog(builtin_catalog_path())
medium = Medium.humid_air(0.01)

for d in (1, 5, 10, 20, 30):
    ws = find_windows(catalog, medium, C, d, (0.1e12, 10e12))
    print(f"d = {d:2d} m: {len(ws.windows):2d} windows, {ws.total_bandwidth / 1e9:7.0f} GHz open")

# %% [markdown]
# A 36 dB array gain (two 64-element SAs) and 10 mW over 0.1-1 THz.

# %%
gain, budget, band = 10 ** 3.6, 0.01, (0.1e12, 1e12)
rate, ws, pa = rate_at_distance(catalog, medium, C, 10.0, gain, budget, band)
print(f"10 m: {rate / 1e9:.1f} Gb/s over {int(ws.mask.sum())} cells, "
      f"{int((pa.powers > 0).sum())} of them powered, KKT residual {pa.kkt_residual():.1e} W")

res = max_distance_for_rate(catalog, medium, C, gain, budget, 100e9, band)
print(f"100 Gb/s reach: {res.d:.2f} m after {res.iterations} bisection steps")

# %%
plt = figure()
if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.step(ws.centers[ws.mask] / 1e12, pa.powers * 1e3, where="mid")
    ax.set_xlabel("frequency (THz)")
    ax.set_ylabel("power per cell (mW)")
    save(plt, "waterfilling.png")
