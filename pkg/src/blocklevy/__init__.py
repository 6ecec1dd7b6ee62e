"""Brownian motions on SO(nm), U(nm) and Sp(nm) seen block-wise, and their limit moment flow."""

from .drivers import DriverKind, covariation_rate, drift_rate, sample_increment
from .group_sde import Scheme, integrate_path
from .hyperlinalg import BlockMatrix, Field, Quaternion, eta_embed, normalized_trace, quat_mul
from .moment_flow import GeneratorSystem, apply_generator, build_system, dimension_bound, solve_moments
from .montecarlo import MomentEstimate, MultiTimeWord, convergence_sweep, estimate_moment, estimate_multitime
from .tables import Letter, TableExpr, TableFunction, canonicalize, evaluate, format_table, initial_value, parse_table

__version__ = "0.1.0"
