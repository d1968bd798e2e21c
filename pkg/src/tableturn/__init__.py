"""Balance a rectangular table on uneven ground by turning it on the spot."""

from .collision import (ClearanceReport, certify_top, check_real_table, cone_certificate,
                        critical_witness, leg_clearance, min_leg_length, top_clearance)
from .geometry import (PlacedTable, Pose, TableSpec, incline, place_vertices, segment_slope,
                       top_corners)
from .ground import (Bumps, Cliff, Cone, ConeEnvelope, Flat, Ground, GridGround, GroundSpecError,
                     Plane, Radial, Ridge, SumGround, estimate_lipschitz, height, lipschitz_bound,
                     load_grid, parse_ground)
from .solver import (BalanceReport, BruteForceResult, HoverState, all_balances, balance_by_turning,
                     brute_force_balance, diagonal_gap, equal_hover, hover_gap, hover_imbalance,
                     place_diagonal, sweep, vertical_distance)
from .verify import (FrameAngles, coplanar_rotation, critical_constant, d_monotone_check,
                     frame_slopes, uniqueness_scan)

__version__ = "0.1.0"
