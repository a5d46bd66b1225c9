"""Link-level simulation of terahertz ultra-massive MIMO array-of-subarrays links.

Submodules
----------
physics  molecular absorption, path loss, absorption noise
array    AoSA geometry, interleaved frequency maps, steering vectors
channel  spherical-wave LoS channel, conditioning, capacity
modem    spatial modulation / multiplexing, ML detection, Monte Carlo BER
alloc    transmission windows, water-filling, distance search
cli      ``thzsim`` command-line front end
"""

__version__ = "0.1.0"

from .physics import (PhysicalConstants, SpectralLine, LineCatalog, Medium,  # noqa: E402
                      load_catalog, builtin_catalog_path, absorption_coefficient,
                      transmittance, spreading_loss_db, total_path_loss_db,
                      absorption_noise_psd, pathloss_grid)
from .array import (build_geometry, steering_vector, array_gain_db,  # noqa: E402
                    assign_interleaved_map, min_carriers_per_axis)
from .channel import (LinkConfig, los_channel, channel_metrics, condition_map,  # noqa: E402
                      condition_number, rayleigh_spacing, tune_to_dip)
from .modem import SmConfig, SmxConfig, run_ber, ml_detect  # noqa: E402
from .alloc import (find_windows, waterfill, rate_at_distance,  # noqa: E402
                    max_distance_for_rate)
