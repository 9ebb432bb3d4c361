"""Multi-user mm-wave urban downlink: ray-traced paths, antenna patterns,
SINR link model and greedy link allocation."""

from .allocation import allocate_exhaustive, allocate_greedy, build_candidates
from .antenna import IdealSector, Isotropic, PlanarArray, build_planar_array, pattern_from_name
from .errors import AllocationTooLarge, ConfigurationError, InventoryParseError
from .geometry import LayoutParams, UrbanLayout, generate_layout, place_bs, place_ue
from .harness import Scenario, emit_outputs, run_realization, run_scenario, sweep
from .linkmodel import AllocationState, LinkModel, RadioConfig
from .propagation import build_inventory, fspl_db, trace_paths

__version__ = "0.1.0"
