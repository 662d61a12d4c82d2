"""Invertible bilipschitz map constructions with certified distortion bounds."""
from .errors import (BilipError, BoundaryMismatchError, ContainmentError, GlueError, PreconditionError,
                     RegionOverlapError, RegionPreservationError, SchemaError, TubeOverlapError)
from .geom import (LatticeSpec, SeparatedNet, Tube, lattice_points_in_ball, nearest_lattice_point,
                   net_constants, poisson_disk_net)
from .maps import (Affine, Compose, Glued, Identity, MapExpr, Spin, Swap, compose, diagonal_scale, evaluate,
                   evaluate_inverse, glue, map_from_dict, map_to_dict, orthogonal_frame, spin_map, translation,
                   uniform_scale)
from .regions import AxisSlab, Box, HalfSpace, TileColumn, TubeRegion
from .swaps import SwapFamily, SwapSpec, simultaneous_swaps, swap_map
from .lattice import (PointMap, extend_to_lattice, reduce_general_net, round_net_to_lattice,
                      swap_transport_oracle)
from .routing import (BetaWitness, LatticePerm, RoutingSchedule, TileDecomposition, build_upsilon,
                      edge_color_regular_bipartite, realize_tile_perm, route_grid, route_path, tile_decompose)
from .slab_threading import LayeredPointMap, SlabSystem, glue_slabs, inj_round, thread
from .verify import AuditReport, audit, check_designated, sampled_bilip, schedule_oracle

__version__ = "0.1.0"
