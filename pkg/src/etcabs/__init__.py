"""Timed-automaton abstraction of the sampling traffic of event-triggered LTI loops."""

from .bounds import build_embedding, compute_bounds
from .errors import ETCAbsError
from .partition import isotropic_cover, locate_region
from .plant import Plant, inter_sample_time, lambda_at, phi_at, simulate_traffic
from .quotient import build_quotient, precision, replay_trace, to_timed_automaton
from .reachability import compute_flow_pipes, transitions

__version__ = "0.1.0"
