"""Twin-assisted multicast short-video resource reservation."""

from .domain import ReservationDecision, SystemConfig, VideoCatalog, load_config, make_streams
from .solver import (ConvexTerm, Instance, InfeasibleReservation, Subproblem, branch_and_bound,
                     exhaustive_oracle, fs_schedule)
from .udt import UserTwin, update_swipe_distribution

__version__ = "0.1.0"
