"""Synthetic workload and the per-window reservation loop."""

from .engine import (CSV_HEADER, SCHEMES, Plan, ReservationEnv, SimState, WindowMetrics,
                     align_groups, apply_plan, choose_plan, delivered_version, init_state,
                     kdistance_eps, metrics_to_csv, metrics_to_json, plan_for_groups,
                     plan_with_lambda, run_episode, run_window, summarize)
from .users import (Behavior, LatentUser, drift_preferences, empirical_swipe_frequencies,
                    make_population, sample_user_behavior, step_mobility,
                    truncated_geometric_pmf, window_channel)
from .world import (Scenario, channel_gain, gains_to_stations, noise_power_dbm, path_loss_db,
                    serving_station, sinr, snr_from_gain, synthesize_catalog)
