# %% [markdown]
# # Arrays of sub-arrays and interleaved frequency maps
#
# Plasmonic elements sit at a fraction of the free-space wavelength, so
# many of them fit in a tiny aperture.  Same-frequency elements still need
# half-wavelength separation to avoid coupling, which is what interleaving
# the carriers across the array buys.

# %%
import numpy as np

from thzsim import (array_gain_db, assign_interleaved_map, build_geometry,
                    min_carriers_per_axis, steering_vector)

f = 1e12
spp = 2.99792458e8 / f / 15
geom = build_geometry(4, 4, 8, 8, 8 * spp, spp, f)
print(f"{geom.n_sa} SAs x {geom.n_ae_per_sa} AEs, lambda_SPP = {geom.lambda_spp * 1e6:.2f} um")
print(f"footprint {geom.footprint_area * 1e6:.3f} mm^2, "
      f"per-SA beamforming gain {array_gain_db(geom.n_ae_per_sa):.2f} dB")

# %% [markdown]
# Steering one SA: every element has unit modulus and coherent combining
# recovers the element count.

# %%
v = steering_vector(geom, 0, np.deg2rad(30), 0.0, f).entries
print(f"|a| range {np.abs(v).min():.3f}-{np.abs(v).max():.3f}, "
      f"coherent gain {abs(np.vdot(v, v)):.0f}")

# %% [markdown]
# At lambda_SPP pitch the half-wavelength rule needs 8 carriers per axis,
# i.e. 64 interleaved carriers.  Fewer carriers cannot be laid out.

# %%
per_axis = min_carriers_per_axis(spp, geom.lam)
fmap = assign_interleaved_map(geom, list(np.linspace(0.95e12, 1.0e12, per_axis ** 2)))
print(f"{per_axis} per axis -> tile {fmap.period}, valid={fmap.valid}, "
      f"closest same-carrier pair {min(fmap.min_same_spacing) * 1e6:.1f} um "
      f"(need {max(fmap.required_spacing) * 1e6:.1f} um)")
short = assign_interleaved_map(geom, list(np.linspace(0.95e12, 1.0e12, 49)), strict=False)
print(f"49 carriers -> valid={short.valid}")

# %%
print("first SA, carrier index by element:")
print(fmap.assignment[geom.sa_index == 0].reshape(8, 8))
